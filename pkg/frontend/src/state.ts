// Consultation view state machine. Pure transitions so the invariants
// (loading blocks resubmission, rating needs a result with an answer id)
// are enforced and testable without a DOM.

import type { Scores } from "./api.js";

export type ConsultPhase = "initial" | "loading" | "result" | "error";

export interface ConsultState {
  phase: ConsultPhase;
  questionDraft: string;
  answerId: string | null;
  answerText: string | null;
  ratingDraft: Partial<Scores>;
  ratingStatus: "idle" | "sending" | "done" | "failed";
  errorMessage: string | null;
}

export function initialState(): ConsultState {
  return {
    phase: "initial",
    questionDraft: "",
    answerId: null,
    answerText: null,
    ratingDraft: {},
    ratingStatus: "idle",
    errorMessage: null,
  };
}

export function editDraft(state: ConsultState, text: string): ConsultState {
  return { ...state, questionDraft: text };
}

export function canSubmit(state: ConsultState): boolean {
  return state.phase !== "loading" && state.questionDraft.trim().length > 0;
}

export function beginAsk(state: ConsultState): ConsultState {
  if (!canSubmit(state)) {
    throw new Error("cannot submit: empty draft or ask already in flight");
  }
  return {
    ...state,
    phase: "loading",
    answerId: null,
    answerText: null,
    ratingDraft: {},
    ratingStatus: "idle",
    errorMessage: null,
  };
}

export function receiveAnswer(
  state: ConsultState,
  answerId: string,
  answerText: string,
): ConsultState {
  return { ...state, phase: "result", answerId, answerText };
}

export function receiveError(state: ConsultState, message: string): ConsultState {
  // the question draft survives so the user can retry
  return { ...state, phase: "error", errorMessage: message };
}

export function setRating(
  state: ConsultState,
  metric: keyof Scores,
  value: number,
): ConsultState {
  if (state.phase !== "result") {
    throw new Error("rating is only available once a result is shown");
  }
  return { ...state, ratingDraft: { ...state.ratingDraft, [metric]: value } };
}

export function completedRating(state: ConsultState): Scores | null {
  const { helpfulness, fluency, relevance, logic } = state.ratingDraft;
  if (
    helpfulness === undefined ||
    fluency === undefined ||
    relevance === undefined ||
    logic === undefined
  ) {
    return null;
  }
  return { helpfulness, fluency, relevance, logic };
}

export function canSubmitRating(state: ConsultState): boolean {
  return (
    state.phase === "result" &&
    state.answerId !== null &&
    completedRating(state) !== null &&
    state.ratingStatus !== "sending" &&
    state.ratingStatus !== "done"
  );
}

export function ratingSending(state: ConsultState): ConsultState {
  if (!canSubmitRating(state)) {
    throw new Error("rating submission requires a result, an answer id, and four scores");
  }
  return { ...state, ratingStatus: "sending" };
}

export function ratingDone(state: ConsultState): ConsultState {
  return { ...state, ratingStatus: "done" };
}

export function ratingFailed(state: ConsultState): ConsultState {
  return { ...state, ratingStatus: "failed" };
}
