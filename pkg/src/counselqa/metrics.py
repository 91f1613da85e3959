"""Intrinsic evaluation: perplexity, ROUGE-L (F1), and Distinct-1/2.

Conventions follow the 0-100 reporting scale: ROUGE-L and Distinct-n
are multiplied by 100. Chinese-friendly character tokenization is the
default; perplexity pools tokens across the whole text list (a single
long-sequence reading of the formula rather than a per-sentence mean),
and Distinct-n averages per-reply ratios unless pooled mode is chosen.
Every report embeds these conventions so numbers are self-describing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from counselqa.errors import CapabilityError, ConfigError, EmptyInputError, FormatError
from counselqa.lm import LmBackend
from counselqa.text import CHAR, tokenize

PER_RESPONSE = "per-response-mean"
POOLED = "pooled"


@dataclass(frozen=True)
class PredictionItem:
    id: str
    question: str
    reference: str
    prediction: str


@dataclass
class PredictionSet:
    items: list[PredictionItem] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise FormatError(f"duplicate prediction ids: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.items)

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "PredictionSet":
        items = []
        for lineno, line in enumerate(
            Path(path).read_text(encoding="utf-8").splitlines(), start=1
        ):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                items.append(
                    PredictionItem(
                        id=str(obj["id"]),
                        question=obj["question"],
                        reference=obj["reference"],
                        prediction=obj["prediction"],
                    )
                )
            except KeyError as exc:
                raise FormatError(f"{path}:{lineno}: missing field {exc}") from exc
        return cls(items)

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for it in self.items:
                fh.write(
                    json.dumps(
                        {
                            "id": it.id,
                            "question": it.question,
                            "reference": it.reference,
                            "prediction": it.prediction,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )


@dataclass
class MetricReport:
    rouge_l: float
    distinct1: float
    distinct2: float
    n_items: int
    perplexity: float | None = None
    conventions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "rouge_l": self.rouge_l,
            "distinct1": self.distinct1,
            "distinct2": self.distinct2,
            "n_items": self.n_items,
            "conventions": dict(self.conventions),
        }
        if self.perplexity is not None:
            d["perplexity"] = self.perplexity
        return d


def perplexity(backend: LmBackend, texts: list[str]) -> float:
    """exp(-(1/N) * total logprob), N = total tokens across all texts."""
    if not backend.capabilities.can_score:
        raise CapabilityError(f"backend {backend.name!r} cannot score text")
    if not texts:
        raise EmptyInputError("no texts to score")
    total_logprob = 0.0
    total_tokens = 0
    for text in texts:
        entries = backend.token_logprobs(text)
        total_logprob += sum(lp for _, lp in entries)
        total_tokens += len(entries)
    if total_tokens == 0:
        raise EmptyInputError("texts produced zero tokens")
    return math.exp(-total_logprob / total_tokens)


def lcs_length(a: list[str], b: list[str]) -> int:
    """Longest common subsequence length, standard dynamic program."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_l(reference: str, prediction: str, tokenizer_mode: str = CHAR) -> float:
    """LCS-based F1 on token sequences, scaled to 0-100.

    Empty vs empty is a perfect 100; empty vs non-empty is 0.
    """
    ref = tokenize(reference, tokenizer_mode)
    pred = tokenize(prediction, tokenizer_mode)
    if not ref and not pred:
        return 100.0
    if not ref or not pred:
        return 0.0
    lcs = lcs_length(ref, pred)
    recall = lcs / len(ref)
    precision = lcs / len(pred)
    if recall + precision == 0:
        return 0.0
    return 100.0 * (2 * recall * precision) / (recall + precision)


def _ngrams(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def distinct_n(
    predictions: list[str],
    n: int,
    tokenizer_mode: str = CHAR,
    aggregation: str = PER_RESPONSE,
) -> float:
    """Unique-n-gram ratio, scaled to 0-100.

    Per-response mode scores each reply separately (a reply with no
    n-gram scores 0) and averages; pooled mode computes one ratio over
    all replies' n-grams together.
    """
    if n not in (1, 2):
        raise ConfigError(f"distinct-n supports n in {{1, 2}}, got {n}")
    if aggregation not in (PER_RESPONSE, POOLED):
        raise ConfigError(f"unknown aggregation {aggregation!r}")
    if not predictions:
        raise EmptyInputError("no predictions to score")

    grams_per_reply = [_ngrams(tokenize(p, tokenizer_mode), n) for p in predictions]
    if aggregation == POOLED:
        pooled = [g for grams in grams_per_reply for g in grams]
        if not pooled:
            return 0.0
        return 100.0 * len(set(pooled)) / len(pooled)
    ratios = [
        (len(set(grams)) / len(grams)) if grams else 0.0 for grams in grams_per_reply
    ]
    return 100.0 * sum(ratios) / len(ratios)


def evaluate(
    pred_set: PredictionSet,
    backend: LmBackend | None = None,
    tokenizer_mode: str = CHAR,
    distinct_aggregation: str = PER_RESPONSE,
) -> MetricReport:
    """Full intrinsic report over a prediction set.

    ROUGE-L is the mean of per-item scores; Distinct-n runs over the
    predicted answers; perplexity (when a scoring backend is supplied)
    runs over the reference answers.
    """
    if len(pred_set) == 0:
        raise EmptyInputError("prediction set is empty")
    rouge_scores = [
        rouge_l(it.reference, it.prediction, tokenizer_mode) for it in pred_set.items
    ]
    predictions = [it.prediction for it in pred_set.items]
    report = MetricReport(
        rouge_l=sum(rouge_scores) / len(rouge_scores),
        distinct1=distinct_n(predictions, 1, tokenizer_mode, distinct_aggregation),
        distinct2=distinct_n(predictions, 2, tokenizer_mode, distinct_aggregation),
        n_items=len(pred_set),
        conventions={
            "rouge_variant": "f1",
            "tokenizer": tokenizer_mode,
            "distinct_aggregation": distinct_aggregation,
            "perplexity_pooling": "corpus",
            "perplexity_over": "references",
            "scale": "0-100 for rouge_l and distinct-n",
        },
    )
    if backend is not None:
        report.perplexity = perplexity(backend, [it.reference for it in pred_set.items])
    return report
