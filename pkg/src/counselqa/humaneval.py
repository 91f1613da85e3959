"""Human-evaluation protocol: sessions, blinded items, ratings, aggregation.

Two session modes mirror the two rating protocols: ``pairwise`` puts
both systems' answers to each question in front of raters for direct
comparison; ``blended`` mixes model answers with ground-truth answers
into one shuffled, blinded set. Raters score four metrics on a 1-5
scale. Ratings land in an append-only JSONL event log that replays to
state on load; a re-rating by the same rater supersedes the old record.

Blinding: an item's origin lives only in the session file. Rater-facing
payloads (`to_rater_payload`) never contain it, and item ids are
positional so they cannot leak it either.
"""

from __future__ import annotations

import json
import logging
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from counselqa.errors import (
    EmptyStoreError,
    FormatError,
    InputError,
    RangeError,
    UnknownItemError,
)

logger = logging.getLogger(__name__)

METRICS = ("helpfulness", "fluency", "relevance", "logic")
ORIGINS = ("systemA", "systemB", "ground_truth")
MODES = ("pairwise", "blended")


@dataclass(frozen=True)
class EvalItem:
    item_id: str
    question: str
    displayed_answer: str
    origin: str
    session_id: str

    def __post_init__(self) -> None:
        if self.origin not in ORIGINS:
            raise FormatError(f"unknown origin {self.origin!r}")

    def to_rater_payload(self) -> dict:
        """Serialization shown to raters; deliberately omits ``origin``."""
        return {
            "item_id": self.item_id,
            "question": self.question,
            "displayed_answer": self.displayed_answer,
            "session_id": self.session_id,
        }


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class RatingRecord:
    rater_id: str
    item_id: str
    helpfulness: int
    fluency: int
    relevance: int
    logic: int
    timestamp: str = field(default_factory=_now_iso)

    def __post_init__(self) -> None:
        for metric in METRICS:
            score = getattr(self, metric)
            if not isinstance(score, int) or not 1 <= score <= 5:
                raise RangeError(f"{metric} score {score!r} outside 1-5")

    def scores(self) -> dict[str, int]:
        return {metric: getattr(self, metric) for metric in METRICS}

    def to_dict(self) -> dict:
        return {
            "rater_id": self.rater_id,
            "item_id": self.item_id,
            **self.scores(),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RatingRecord":
        return cls(
            rater_id=obj["rater_id"],
            item_id=obj["item_id"],
            helpfulness=obj["helpfulness"],
            fluency=obj["fluency"],
            relevance=obj["relevance"],
            logic=obj["logic"],
            timestamp=obj.get("timestamp", _now_iso()),
        )


@dataclass
class EvalSession:
    session_id: str
    mode: str
    items: list[EvalItem]
    assignment: dict[str, list[str]]
    seed: int
    status: str = "open"

    def item(self, item_id: str) -> EvalItem | None:
        return next((it for it in self.items if it.item_id == item_id), None)

    def to_rater_payload(self) -> dict:
        return {
            "session_id": self.session_id,
            "mode": self.mode,
            "status": self.status,
            "items": [it.to_rater_payload() for it in self.items],
        }

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "mode": self.mode,
            "seed": self.seed,
            "status": self.status,
            "assignment": {r: list(ids) for r, ids in self.assignment.items()},
            "items": [
                {
                    "item_id": it.item_id,
                    "question": it.question,
                    "displayed_answer": it.displayed_answer,
                    "origin": it.origin,
                }
                for it in self.items
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalSession":
        session_id = obj["session_id"]
        items = [
            EvalItem(
                item_id=raw["item_id"],
                question=raw["question"],
                displayed_answer=raw["displayed_answer"],
                origin=raw["origin"],
                session_id=session_id,
            )
            for raw in obj["items"]
        ]
        return cls(
            session_id=session_id,
            mode=obj["mode"],
            items=items,
            assignment={r: list(ids) for r, ids in obj.get("assignment", {}).items()},
            seed=obj.get("seed", 0),
            status=obj.get("status", "open"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "EvalSession":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def build_session(
    mode: str,
    questions: list[str],
    answers_by_origin: dict[str, dict[str, str]],
    n_raters: int,
    seed: int,
    overlap: int = 0,
    session_id: str = "session-0",
) -> EvalSession:
    """Assemble a rating session.

    ``answers_by_origin`` maps origin -> {question -> answer}. Pairwise
    mode needs exactly two origins; blended mode needs ground_truth plus
    at least one system. Items are shuffled with ``seed``; questions go
    to raters round-robin after the first ``overlap`` shuffled questions
    are assigned to everyone for agreement checking.
    """
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}; expected one of {MODES}")
    if n_raters < 1:
        raise InputError(f"n_raters must be >= 1, got {n_raters}")
    if not 0 <= overlap <= len(questions):
        raise InputError(f"overlap {overlap} outside 0..{len(questions)}")
    if not questions:
        raise InputError("no questions supplied")
    for origin in answers_by_origin:
        if origin not in ORIGINS:
            raise InputError(f"unknown origin {origin!r}; expected one of {ORIGINS}")

    origins = sorted(answers_by_origin)
    if mode == "pairwise" and len(origins) != 2:
        raise InputError(f"pairwise mode needs exactly 2 origins, got {origins}")
    if mode == "blended":
        if "ground_truth" not in origins or len(origins) < 2:
            raise InputError(
                f"blended mode needs ground_truth plus at least one system, got {origins}"
            )

    for question in questions:
        for origin in origins:
            if question not in answers_by_origin[origin]:
                raise InputError(f"origin {origin!r} has no answer for question {question!r}")

    rng = random.Random(seed)
    drafts = [
        (question, origin, answers_by_origin[origin][question])
        for question in questions
        for origin in origins
    ]
    rng.shuffle(drafts)
    items = [
        EvalItem(
            item_id=f"{session_id}:{i:04d}",
            question=question,
            displayed_answer=answer,
            origin=origin,
            session_id=session_id,
        )
        for i, (question, origin, answer) in enumerate(drafts)
    ]

    question_order = list(questions)
    rng.shuffle(question_order)
    shared, rotating = question_order[:overlap], question_order[overlap:]
    rater_questions: dict[str, set[str]] = {
        f"rater-{r}": set(shared) for r in range(n_raters)
    }
    for i, question in enumerate(rotating):
        rater_questions[f"rater-{i % n_raters}"].add(question)
    assignment = {
        rater: [it.item_id for it in items if it.question in qs]
        for rater, qs in rater_questions.items()
    }
    return EvalSession(
        session_id=session_id,
        mode=mode,
        items=items,
        assignment=assignment,
        seed=seed,
    )


class RatingStore:
    """Append-only JSONL event log of RatingRecords with replay-to-state.

    Appends are line-atomic under a process-local lock; replay keeps the
    newest record per (rater_id, item_id) pair.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: RatingRecord) -> None:
        line = json.dumps(record.to_dict(), ensure_ascii=False) + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()

    def iter_records(self):
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield RatingRecord.from_dict(json.loads(line))
                except (ValueError, KeyError) as exc:
                    raise FormatError(f"{self.path}:{lineno}: bad rating line: {exc}") from exc

    def replay(self) -> dict[tuple[str, str], RatingRecord]:
        """Latest record per (rater, item); later lines supersede earlier."""
        state: dict[tuple[str, str], RatingRecord] = {}
        for record in self.iter_records():
            state[(record.rater_id, record.item_id)] = record
        return state


def record_rating(store: RatingStore, record: RatingRecord, session: EvalSession) -> None:
    """Validate a rating against an open session and append it."""
    if session.status != "open":
        raise InputError(f"session {session.session_id} is {session.status}")
    if session.item(record.item_id) is None:
        raise UnknownItemError(
            f"item {record.item_id!r} not in session {session.session_id}"
        )
    if (record.rater_id, record.item_id) in store.replay():
        logger.info(
            "rating superseded: rater=%s item=%s", record.rater_id, record.item_id
        )
    store.append(record)


def check_integrity(store: RatingStore, session: EvalSession) -> list[str]:
    """Item ids referenced by this session's ratings that do not exist.

    A shared store may legitimately hold ratings for other record types
    (the gateway keeps consult ratings in the same log), so only records
    whose ids carry this session's prefix are held to account.
    """
    known = {it.item_id for it in session.items}
    prefix = f"{session.session_id}:"
    return sorted(
        {
            r.item_id
            for r in store.iter_records()
            if r.item_id.startswith(prefix) and r.item_id not in known
        }
    )


def aggregate(store: RatingStore, session: EvalSession) -> dict:
    """Mean score per (origin, metric), 2 decimal places, with counts.

    The emitted table mirrors the result-table shape: one row per
    metric, one column per origin present in the session.
    """
    dangling = check_integrity(store, session)
    if dangling:
        logger.warning(
            "ratings reference unknown items in session %s: %s",
            session.session_id, dangling[:5],
        )
    item_origin = {it.item_id: it.origin for it in session.items}
    by_origin: dict[str, list[RatingRecord]] = {}
    for record in store.replay().values():
        origin = item_origin.get(record.item_id)
        if origin is not None:
            by_origin.setdefault(origin, []).append(record)

    origins = sorted({it.origin for it in session.items})
    if not by_origin:
        raise EmptyStoreError(f"no ratings recorded for session {session.session_id}")
    missing = [o for o in origins if o not in by_origin]
    if missing:
        raise EmptyStoreError(f"no ratings for origin(s) {missing} in session {session.session_id}")

    means = {
        metric: {
            origin: round(
                sum(getattr(r, metric) for r in by_origin[origin]) / len(by_origin[origin]),
                2,
            )
            for origin in origins
        }
        for metric in METRICS
    }
    counts = {origin: len(by_origin[origin]) for origin in origins}
    return {
        "session_id": session.session_id,
        "mode": session.mode,
        "metrics": list(METRICS),
        "origins": origins,
        "means": means,
        "counts": counts,
    }
