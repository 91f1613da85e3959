// Star-style 1-5 widget for the four rating scales.

import type { Scores } from "./api.js";

export const METRICS: (keyof Scores)[] = ["helpfulness", "fluency", "relevance", "logic"];

export const METRIC_LABELS: Record<keyof Scores, string> = {
  helpfulness: "有用性 Helpfulness",
  fluency: "流畅性 Fluency",
  relevance: "相关性 Relevance",
  logic: "逻辑性 Logic",
};

export interface RatingPanel {
  element: HTMLElement;
  getScores(): Scores | null;
  reset(): void;
  setDisabled(disabled: boolean): void;
}

export function createRatingPanel(
  doc: Document,
  onChange?: (metric: keyof Scores, value: number) => void,
): RatingPanel {
  const element = doc.createElement("div");
  element.className = "rating-panel";
  const values = new Map<keyof Scores, number>();
  const starButtons = new Map<keyof Scores, HTMLButtonElement[]>();
  let disabled = false;

  for (const metric of METRICS) {
    const row = doc.createElement("div");
    row.className = "rating-row";
    const label = doc.createElement("span");
    label.className = "rating-label";
    label.textContent = METRIC_LABELS[metric];
    row.appendChild(label);

    const stars: HTMLButtonElement[] = [];
    for (let value = 1; value <= 5; value++) {
      const star = doc.createElement("button");
      star.type = "button";
      star.className = "star";
      star.dataset.metric = metric;
      star.dataset.value = String(value);
      star.textContent = "☆";
      star.setAttribute("aria-label", `${METRIC_LABELS[metric]} ${value}/5`);
      star.addEventListener("click", () => {
        if (disabled) return;
        values.set(metric, value);
        stars.forEach((s, i) => {
          s.textContent = i < value ? "★" : "☆";
          s.classList.toggle("selected", i < value);
        });
        onChange?.(metric, value);
      });
      stars.push(star);
      row.appendChild(star);
    }
    starButtons.set(metric, stars);
    element.appendChild(row);
  }

  return {
    element,
    getScores(): Scores | null {
      if (values.size !== METRICS.length) return null;
      return {
        helpfulness: values.get("helpfulness")!,
        fluency: values.get("fluency")!,
        relevance: values.get("relevance")!,
        logic: values.get("logic")!,
      };
    },
    reset(): void {
      values.clear();
      for (const stars of starButtons.values()) {
        stars.forEach((s) => {
          s.textContent = "☆";
          s.classList.remove("selected");
        });
      }
    },
    setDisabled(value: boolean): void {
      disabled = value;
      element.classList.toggle("disabled", value);
    },
  };
}
