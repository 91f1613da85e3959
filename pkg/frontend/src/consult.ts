// Consultation flow: ask a question, wait, read the answer, rate it.

import { GatewayApi, GatewayError } from "./api.js";
import { SubmitQueue } from "./queue.js";
import { createRatingPanel } from "./rating.js";
import * as st from "./state.js";

export interface ConsultView {
  element: HTMLElement;
  state(): st.ConsultState;
  submitQuestion(): Promise<void>;
  submitRating(): Promise<void>;
}

export function mountConsult(
  doc: Document,
  api: GatewayApi,
  queue: SubmitQueue = new SubmitQueue(),
): ConsultView {
  let state = st.initialState();

  const element = doc.createElement("section");
  element.className = "consult";
  element.innerHTML = `
    <h1>心理咨询问答 Counselling Q&amp;A</h1>
    <p class="hint">请输入你的问题（中文） / Type your question below.</p>
    <div class="ask-box">
      <textarea class="question-input" rows="3"
        placeholder="例如：如何面对抑郁?"></textarea>
      <button class="ask-submit" type="button" disabled>提问 Ask</button>
    </div>
    <div class="spinner hidden" role="status">思考中，请稍候… Processing…</div>
    <div class="error-banner hidden"></div>
    <div class="result hidden">
      <h2>回答 Answer</h2>
      <p class="answer-text"></p>
      <h3>为这个回答评分 Rate this answer</h3>
      <div class="rating-slot"></div>
      <button class="rating-submit" type="button" disabled>提交评分 Submit rating</button>
      <p class="rating-feedback" aria-live="polite"></p>
    </div>
  `;

  const input = element.querySelector<HTMLTextAreaElement>(".question-input")!;
  const askButton = element.querySelector<HTMLButtonElement>(".ask-submit")!;
  const spinner = element.querySelector<HTMLElement>(".spinner")!;
  const errorBanner = element.querySelector<HTMLElement>(".error-banner")!;
  const resultBox = element.querySelector<HTMLElement>(".result")!;
  const answerText = element.querySelector<HTMLElement>(".answer-text")!;
  const ratingSlot = element.querySelector<HTMLElement>(".rating-slot")!;
  const ratingButton = element.querySelector<HTMLButtonElement>(".rating-submit")!;
  const ratingFeedback = element.querySelector<HTMLElement>(".rating-feedback")!;

  const panel = createRatingPanel(doc, (metric, value) => {
    state = st.setRating(state, metric, value);
    render();
  });
  ratingSlot.appendChild(panel.element);

  function render(): void {
    askButton.disabled = !st.canSubmit(state);
    spinner.classList.toggle("hidden", state.phase !== "loading");
    errorBanner.classList.toggle("hidden", state.phase !== "error");
    if (state.phase === "error") {
      errorBanner.textContent = `请求失败：${state.errorMessage ?? "未知错误"}（可重试 / retry below）`;
    }
    resultBox.classList.toggle("hidden", state.phase !== "result");
    answerText.textContent = state.answerText ?? "";
    ratingButton.disabled = !st.canSubmitRating(state);
    panel.setDisabled(state.ratingStatus === "sending" || state.ratingStatus === "done");
    ratingFeedback.textContent =
      state.ratingStatus === "done"
        ? "感谢你的评分！ Thanks for rating."
        : state.ratingStatus === "failed"
          ? "评分提交失败，请再试一次。 Rating failed, please retry."
          : state.ratingStatus === "sending"
            ? "正在提交… sending…"
            : "";
  }

  async function submitQuestion(): Promise<void> {
    if (!st.canSubmit(state)) return;
    state = st.beginAsk(state);
    panel.reset();
    render();
    try {
      const response = await api.ask(state.questionDraft.trim());
      state = st.receiveAnswer(state, response.answer_id, response.answer);
    } catch (err) {
      const message = err instanceof GatewayError ? err.message : String(err);
      state = st.receiveError(state, message);
    }
    render();
  }

  async function submitRating(): Promise<void> {
    if (!st.canSubmitRating(state)) return;
    const scores = st.completedRating(state)!;
    const answerId = state.answerId!;
    state = st.ratingSending(state);
    render();
    try {
      await queue.enqueue(() => api.rate(answerId, scores));
      state = st.ratingDone(state);
    } catch {
      state = st.ratingFailed(state);
    }
    render();
  }

  input.addEventListener("input", () => {
    state = st.editDraft(state, input.value);
    render();
  });
  askButton.addEventListener("click", () => void submitQuestion());
  ratingButton.addEventListener("click", () => void submitRating());
  render();

  return {
    element,
    state: () => state,
    submitQuestion,
    submitRating,
  };
}
