import { describe, expect, it } from "vitest";

import { GatewayError } from "../src/api.js";
import { SubmitQueue } from "../src/queue.js";

const instant = { attempts: 3, delayMs: 1, sleep: async () => {} };

describe("submit queue", () => {
  it("retries transient failures up to the attempt cap", async () => {
    const queue = new SubmitQueue(instant);
    let tries = 0;
    const result = await queue.enqueue(async () => {
      tries += 1;
      if (tries < 3) throw new GatewayError(503, "busy");
      return "ok";
    });
    expect(result).toBe("ok");
    expect(tries).toBe(3);
  });

  it("gives up after the attempt cap", async () => {
    const queue = new SubmitQueue(instant);
    let tries = 0;
    await expect(
      queue.enqueue(async () => {
        tries += 1;
        throw new GatewayError(0, "network down");
      }),
    ).rejects.toThrow("network down");
    expect(tries).toBe(3);
  });

  it("does not retry permanent 4xx failures", async () => {
    const queue = new SubmitQueue(instant);
    let tries = 0;
    await expect(
      queue.enqueue(async () => {
        tries += 1;
        throw new GatewayError(422, "bad score");
      }),
    ).rejects.toThrow("bad score");
    expect(tries).toBe(1);
  });

  it("runs tasks in order, one at a time", async () => {
    const queue = new SubmitQueue(instant);
    const order: number[] = [];
    let release: (() => void) | null = null;
    const first = queue.enqueue(async () => {
      await new Promise<void>((r) => (release = r));
      order.push(1);
    });
    const second = queue.enqueue(async () => {
      order.push(2);
    });
    await new Promise((r) => setTimeout(r, 0)); // let task 1 start and block
    release!();
    await Promise.all([first, second]);
    expect(order).toEqual([1, 2]);
  });

  it("keeps serving after a failed task", async () => {
    const queue = new SubmitQueue(instant);
    await expect(
      queue.enqueue(async () => {
        throw new GatewayError(404, "gone");
      }),
    ).rejects.toThrow();
    await expect(queue.enqueue(async () => "still alive")).resolves.toBe("still alive");
  });
});
