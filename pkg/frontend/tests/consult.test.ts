// Consult flow against a stubbed gateway: ask -> loading -> result -> rate.

import { beforeEach, describe, expect, it, vi } from "vitest";

import { GatewayApi } from "../src/api.js";
import { mountConsult } from "../src/consult.js";
import { SubmitQueue } from "../src/queue.js";

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function clickStars(root: HTMLElement, value: number): void {
  for (const metric of ["helpfulness", "fluency", "relevance", "logic"]) {
    const star = root.querySelector<HTMLButtonElement>(
      `.star[data-metric="${metric}"][data-value="${value}"]`,
    )!;
    star.click();
  }
}

describe("consult flow", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("walks ask -> loading -> result -> rate and calls /api/rate once", async () => {
    const calls: { url: string; body: any }[] = [];
    let releaseAsk: (() => void) | null = null;
    const askGate = new Promise<void>((resolve) => (releaseAsk = resolve));

    const fetchFn = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
      const body = init?.body ? JSON.parse(String(init.body)) : null;
      calls.push({ url: String(url), body });
      if (String(url).endsWith("/api/ask")) {
        await askGate;
        return jsonResponse(200, { answer_id: "ans-42", answer: "答案内容", latency_ms: 2 });
      }
      return jsonResponse(200, { ok: true });
    });
    const view = mountConsult(document, new GatewayApi("", fetchFn));
    document.body.appendChild(view.element);

    const input = document.querySelector<HTMLTextAreaElement>(".question-input")!;
    const askButton = document.querySelector<HTMLButtonElement>(".ask-submit")!;
    expect(askButton.disabled).toBe(true); // empty input -> submit disabled

    input.value = "如何面对抑郁?";
    input.dispatchEvent(new Event("input"));
    expect(askButton.disabled).toBe(false);

    const inFlight = view.submitQuestion();
    expect(view.state().phase).toBe("loading");
    expect(document.querySelector(".spinner")!.classList.contains("hidden")).toBe(false);
    expect(askButton.disabled).toBe(true); // loading disables resubmission

    releaseAsk!();
    await inFlight;
    expect(view.state().phase).toBe("result");
    expect(document.querySelector(".answer-text")!.textContent).toBe("答案内容");

    const ratingButton = document.querySelector<HTMLButtonElement>(".rating-submit")!;
    expect(ratingButton.disabled).toBe(true); // needs all four scores
    clickStars(view.element, 4);
    expect(ratingButton.disabled).toBe(false);
    await view.submitRating();

    const rateCalls = calls.filter((c) => c.url.endsWith("/api/rate"));
    expect(rateCalls).toHaveLength(1);
    expect(rateCalls[0]!.body).toEqual({
      answer_id: "ans-42",
      helpfulness: 4,
      fluency: 4,
      relevance: 4,
      logic: 4,
    });
    expect(view.state().ratingStatus).toBe("done");
    expect(document.querySelector(".rating-feedback")!.textContent).toContain("感谢");
  });

  it("shows the error banner on 503 and preserves the draft", async () => {
    const fetchFn = vi.fn(async () => jsonResponse(503, { error: "backend down" }));
    const view = mountConsult(document, new GatewayApi("", fetchFn));
    document.body.appendChild(view.element);

    const input = document.querySelector<HTMLTextAreaElement>(".question-input")!;
    input.value = "我的问题";
    input.dispatchEvent(new Event("input"));
    await view.submitQuestion();

    expect(view.state().phase).toBe("error");
    const banner = document.querySelector<HTMLElement>(".error-banner")!;
    expect(banner.classList.contains("hidden")).toBe(false);
    expect(banner.textContent).toContain("backend down");
    expect(input.value).toBe("我的问题");
    expect(document.querySelector<HTMLButtonElement>(".ask-submit")!.disabled).toBe(false);
  });

  it("never calls /api/rate without an answer id", async () => {
    const fetchFn = vi.fn(async () => jsonResponse(200, { ok: true }));
    const view = mountConsult(document, new GatewayApi("", fetchFn));
    document.body.appendChild(view.element);
    await view.submitRating(); // no result yet -> no-op
    expect(fetchFn).not.toHaveBeenCalled();
  });

  it("retries transient rating failures through the queue", async () => {
    let rateAttempts = 0;
    const fetchFn = vi.fn(async (url: RequestInfo | URL) => {
      if (String(url).endsWith("/api/ask")) {
        return jsonResponse(200, { answer_id: "a1", answer: "text", latency_ms: 1 });
      }
      rateAttempts += 1;
      return rateAttempts < 3
        ? jsonResponse(503, { error: "hiccup" })
        : jsonResponse(200, { ok: true });
    });
    const queue = new SubmitQueue({ attempts: 3, delayMs: 1, sleep: async () => {} });
    const view = mountConsult(document, new GatewayApi("", fetchFn), queue);
    document.body.appendChild(view.element);

    const input = document.querySelector<HTMLTextAreaElement>(".question-input")!;
    input.value = "q";
    input.dispatchEvent(new Event("input"));
    await view.submitQuestion();
    clickStars(view.element, 5);
    await view.submitRating();

    expect(rateAttempts).toBe(3);
    expect(view.state().ratingStatus).toBe("done");
  });
});
