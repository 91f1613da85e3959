// Evaluation session flow: sequential blinded rating of session items.
//
// Pairwise sessions show the two answers to one question side by side,
// each with its own four scales; blended sessions show one answer at a
// time. The server payload never contains an item's origin, and nothing
// here stores or renders anything beyond (item_id, question, answer).
// Acknowledged submissions are remembered in localStorage so a reload
// resumes at the first unrated step.

import { GatewayApi, GatewayError, SessionItem, SessionPayload, Scores } from "./api.js";
import { SubmitQueue } from "./queue.js";
import { createRatingPanel, RatingPanel } from "./rating.js";

export type EvalPhase = "loading" | "active" | "done" | "not-found" | "closed" | "error";

export interface EvalView {
  element: HTMLElement;
  phase(): EvalPhase;
  cursor(): number;
  groupCount(): number;
  submitCurrent(): Promise<void>;
}

interface Group {
  question: string;
  items: SessionItem[];
}

export function groupItems(payload: SessionPayload): Group[] {
  if (payload.mode === "pairwise") {
    const byQuestion = new Map<string, SessionItem[]>();
    for (const item of payload.items) {
      const bucket = byQuestion.get(item.question) ?? [];
      bucket.push(item);
      byQuestion.set(item.question, bucket);
    }
    return [...byQuestion.entries()].map(([question, items]) => ({ question, items }));
  }
  return payload.items.map((item) => ({ question: item.question, items: [item] }));
}

function ackKey(sessionId: string): string {
  return `counselqa-acks-${sessionId}`;
}

export function loadAcks(storage: Storage, sessionId: string): Set<string> {
  try {
    const raw = storage.getItem(ackKey(sessionId));
    return new Set(raw ? (JSON.parse(raw) as string[]) : []);
  } catch {
    return new Set();
  }
}

function saveAcks(storage: Storage, sessionId: string, acks: Set<string>): void {
  storage.setItem(ackKey(sessionId), JSON.stringify([...acks].sort()));
}

export function raterId(storage: Storage): string {
  const existing = storage.getItem("counselqa-rater");
  if (existing) return existing;
  const fresh = `web-${Math.random().toString(36).slice(2, 10)}`;
  storage.setItem("counselqa-rater", fresh);
  return fresh;
}

export async function mountEval(
  doc: Document,
  api: GatewayApi,
  sessionId: string,
  storage: Storage,
  queue: SubmitQueue = new SubmitQueue(),
): Promise<EvalView> {
  const element = doc.createElement("section");
  element.className = "eval";
  let phase: EvalPhase = "loading";
  let groups: Group[] = [];
  let cursor = 0;
  let payload: SessionPayload | null = null;
  let panels = new Map<string, RatingPanel>();
  const acks = loadAcks(storage, sessionId);
  const rater = raterId(storage);

  function firstUnratedGroup(): number {
    for (let i = 0; i < groups.length; i++) {
      if (groups[i]!.items.some((item) => !acks.has(item.item_id))) return i;
    }
    return groups.length;
  }

  function render(): void {
    if (phase === "loading") {
      element.innerHTML = `<p class="spinner">载入评测… loading session…</p>`;
      return;
    }
    if (phase === "not-found") {
      element.innerHTML = `<p class="error-banner">评测不存在。 Session not found.</p>`;
      return;
    }
    if (phase === "closed") {
      element.innerHTML = `
        <p class="notice">该评测已结束，只读。 This session is closed (read only).</p>`;
      return;
    }
    if (phase === "error") {
      element.innerHTML = `<p class="error-banner">载入失败，请刷新重试。 Failed to load.</p>`;
      return;
    }
    if (phase === "done") {
      element.innerHTML = `
        <h1>评测完成 Session complete</h1>
        <p class="notice">感谢参与！所有条目都已评分。 All items rated, thank you.</p>`;
      return;
    }

    const group = groups[cursor]!;
    element.innerHTML = `
      <h1>评测 Session ${payload!.session_id}</h1>
      <p class="progress">进度 Progress: ${cursor + 1} / ${groups.length}</p>
      <h2 class="eval-question"></h2>
      <div class="answers ${payload!.mode}"></div>
      <button class="eval-submit" type="button" disabled>提交本题评分 Submit</button>
      <p class="eval-feedback" aria-live="polite"></p>
    `;
    element.querySelector<HTMLElement>(".eval-question")!.textContent = group.question;

    const answers = element.querySelector<HTMLElement>(".answers")!;
    panels = new Map();
    for (const item of group.items) {
      const card = doc.createElement("div");
      card.className = "answer-card";
      const text = doc.createElement("p");
      text.className = "answer-text";
      text.textContent = item.displayed_answer;
      card.appendChild(text);
      const panel = createRatingPanel(doc, () => updateSubmitState());
      panels.set(item.item_id, panel);
      card.appendChild(panel.element);
      answers.appendChild(card);
    }
    element
      .querySelector<HTMLButtonElement>(".eval-submit")!
      .addEventListener("click", () => void submitCurrent());
    updateSubmitState();
  }

  function updateSubmitState(): void {
    const button = element.querySelector<HTMLButtonElement>(".eval-submit");
    if (!button) return;
    const complete = [...panels.values()].every((panel) => panel.getScores() !== null);
    button.disabled = !complete;
  }

  async function submitCurrent(): Promise<void> {
    if (phase !== "active") return;
    const group = groups[cursor]!;
    const pending: [string, Scores][] = [];
    for (const item of group.items) {
      const scores = panels.get(item.item_id)?.getScores();
      if (!scores) return; // button should have been disabled
      if (!acks.has(item.item_id)) pending.push([item.item_id, scores]);
    }
    const feedback = element.querySelector<HTMLElement>(".eval-feedback");
    try {
      for (const [itemId, scores] of pending) {
        await queue.enqueue(() => api.submitEval(sessionId, itemId, rater, scores));
        acks.add(itemId);
        saveAcks(storage, sessionId, acks);
      }
    } catch (err) {
      if (err instanceof GatewayError && err.status === 409) {
        phase = "closed";
        render();
        return;
      }
      if (feedback) feedback.textContent = "提交失败，请重试。 Submission failed, retry.";
      return;
    }
    cursor = firstUnratedGroup();
    if (cursor >= groups.length) phase = "done";
    render();
  }

  try {
    payload = await api.fetchSession(sessionId);
    if (payload.status !== "open") {
      phase = "closed";
    } else {
      groups = groupItems(payload);
      cursor = firstUnratedGroup();
      phase = cursor >= groups.length ? "done" : "active";
    }
  } catch (err) {
    phase =
      err instanceof GatewayError && err.status === 404
        ? "not-found"
        : err instanceof GatewayError && err.status === 409
          ? "closed"
          : "error";
  }
  render();

  return {
    element,
    phase: () => phase,
    cursor: () => cursor,
    groupCount: () => groups.length,
    submitCurrent,
  };
}
