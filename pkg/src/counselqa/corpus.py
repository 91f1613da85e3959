"""Core corpus data types and the blank-line-delimited file format.

A corpus file is UTF-8 with LF line endings; each sample is a maximal
run of non-blank lines and samples are separated by exactly one blank
line on write. A blank line is a completely empty line -- a line that
contains only spaces is part of a sample, which keeps write->read round
trips byte-exact.

QA pairs ride inside ordinary samples using the prompt pattern the
models are trained on: ``"Question: " + q + "\\n" + "Answer: " + a``.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field, replace
from pathlib import Path

from counselqa.errors import EncodingError, FormatError

SEPARATOR = "\n\n"
QUESTION_MARKER = "Question: "
ANSWER_MARKER = "Answer: "

SOURCES = ("archive", "psyqa-like", "synthetic")


def normalize_text(text: str) -> str:
    """Normalize raw text so it satisfies the Sample invariants.

    CRLF/CR become LF, NUL bytes are dropped, runs of two or more
    newlines collapse to one (a sample may not contain the separator),
    and outer newlines are stripped (they would merge with it).
    """
    text = text.replace("\r\n", "\n").replace("\r", "\n").replace("\x00", "")
    while "\n\n" in text:
        text = text.replace("\n\n", "\n")
    return text.strip("\n")


@dataclass(frozen=True)
class Sample:
    """One separator-delimited unit of corpus text."""

    id: str
    text: str
    source: str = "archive"
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise FormatError(f"unknown sample source {self.source!r}")
        if "\x00" in self.text:
            raise FormatError(f"sample {self.id}: text contains NUL byte")
        if "\r" in self.text:
            raise FormatError(f"sample {self.id}: text contains carriage return")
        if SEPARATOR in self.text:
            raise FormatError(f"sample {self.id}: text contains the sample separator")


@dataclass(frozen=True)
class QAPair:
    """A question/answer unit in the learned prompt pattern."""

    question: str
    answer: str
    id: str = ""

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise FormatError(f"qa pair {self.id!r}: empty question")
        if not self.answer.strip():
            raise FormatError(f"qa pair {self.id!r}: empty answer")

    def serialize(self) -> str:
        return f"{QUESTION_MARKER}{self.question}\n{ANSWER_MARKER}{self.answer}"


@dataclass
class Corpus:
    """An ordered collection of samples."""

    samples: list[Sample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.samples]


def _ordinal_ids(n: int) -> list[str]:
    return [str(i) for i in range(n)]


def read_corpus(path: str | Path) -> Corpus:
    """Read a blank-line-delimited corpus file.

    Line endings are normalized to LF and NUL bytes dropped on read.
    Sample ids are zero-based ordinals unless a ``<path>.ids`` sidecar
    (one id per line) is present.
    """
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(str(path), exc.start) from exc
    text = text.replace("\r\n", "\n").replace("\r", "\n").replace("\x00", "")

    texts: list[str] = []
    run: list[str] = []
    for line in text.split("\n"):
        if line == "":
            if run:
                texts.append("\n".join(run))
                run = []
        else:
            run.append(line)
    if run:
        texts.append("\n".join(run))

    ids = _ordinal_ids(len(texts))
    sidecar = path.with_name(path.name + ".ids")
    if sidecar.exists():
        sidecar_ids = sidecar.read_text(encoding="utf-8").splitlines()
        if len(sidecar_ids) != len(texts):
            raise FormatError(
                f"{sidecar}: {len(sidecar_ids)} ids for {len(texts)} samples"
            )
        ids = sidecar_ids

    meta = {"origin_file": str(path)}
    samples = [
        Sample(id=sid, text=t, source="archive", meta=dict(meta))
        for sid, t in zip(ids, texts)
    ]
    return Corpus(samples)


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write samples joined by one blank line, trailing newline at EOF.

    An empty corpus writes an empty file. When sample ids differ from
    the default ordinals a ``<path>.ids`` sidecar is written so the ids
    survive a round trip; a stale sidecar is removed otherwise.
    """
    path = Path(path)
    body = SEPARATOR.join(s.text for s in corpus.samples)
    if corpus.samples:
        body += "\n"
    path.write_text(body, encoding="utf-8", newline="")

    sidecar = path.with_name(path.name + ".ids")
    ids = [s.id for s in corpus.samples]
    if ids != _ordinal_ids(len(ids)):
        sidecar.write_text("".join(f"{i}\n" for i in ids), encoding="utf-8", newline="")
    elif sidecar.exists():
        sidecar.unlink()


def parse_qa(sample: Sample) -> QAPair:
    """Split a sample in prompt format into its question and answer.

    The text must begin with ``"Question: "``; the answer starts at the
    first subsequent line beginning ``"Answer: "``. Both parts are
    trimmed of trailing whitespace.
    """
    text = sample.text
    if not text.startswith(QUESTION_MARKER):
        raise FormatError(f"sample {sample.id}: missing {QUESTION_MARKER!r} prefix")
    lines = text.split("\n")
    answer_at = next(
        (i for i, line in enumerate(lines) if i > 0 and line.startswith(ANSWER_MARKER)),
        None,
    )
    if answer_at is None:
        raise FormatError(f"sample {sample.id}: missing {ANSWER_MARKER!r} line")
    question = "\n".join(lines[:answer_at])[len(QUESTION_MARKER):].rstrip()
    answer = "\n".join(lines[answer_at:])[len(ANSWER_MARKER):].rstrip()
    return QAPair(question=question, answer=answer, id=sample.id)


def qa_to_sample(pair: QAPair, source: str = "archive", meta: dict[str, str] | None = None) -> Sample:
    """Serialize a QA pair into a corpus sample."""
    return Sample(
        id=pair.id,
        text=normalize_text(pair.serialize()),
        source=source,
        meta=dict(meta or {}),
    )


def with_text(sample: Sample, text: str) -> Sample:
    """Copy of ``sample`` with new text (used by text-level cleaners)."""
    return replace(sample, text=text)


def nfc_trim_key(text: str) -> str:
    """Duplicate-detection key: NFC normalization + outer whitespace trim."""
    return unicodedata.normalize("NFC", text).strip()
