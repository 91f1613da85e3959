// Serialized submission queue with retry on transient failures.
// Ratings flow through here so a flaky network never loses a score.

import { GatewayError } from "./api.js";

export interface QueueOptions {
  attempts?: number;
  delayMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class SubmitQueue {
  private chain: Promise<unknown> = Promise.resolve();
  private readonly attempts: number;
  private readonly delayMs: number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(options: QueueOptions = {}) {
    this.attempts = options.attempts ?? 3;
    this.delayMs = options.delayMs ?? 500;
    this.sleep = options.sleep ?? defaultSleep;
  }

  /** Run `task` after all previously enqueued tasks, retrying transient errors. */
  enqueue<T>(task: () => Promise<T>): Promise<T> {
    const run = async (): Promise<T> => {
      let lastError: unknown;
      for (let attempt = 1; attempt <= this.attempts; attempt++) {
        try {
          return await task();
        } catch (err) {
          lastError = err;
          const transient = err instanceof GatewayError ? err.transient : true;
          if (!transient || attempt === this.attempts) throw err;
          await this.sleep(this.delayMs * attempt);
        }
      }
      throw lastError;
    };
    const result = this.chain.then(run, run);
    this.chain = result.catch(() => undefined);
    return result;
  }
}
