"""Offline archive ingestion: extract samples from saved HTML/JSON exports.

This replaces live crawling. Extraction rules are user configuration: a
glob over the archive, a mode, and a pair of selectors locating question
and answer content. Supported modes:

* ``html-selector`` -- a small CSS subset over a lenient HTML tree:
  ``tag``, ``.class``, ``#id``, compounds like ``div.answer``, and the
  descendant combinator (``div.qa p.text``). Question/answer element
  lists are zipped into records.
* ``json-path`` -- dotted paths with ``[]`` to fan out over arrays,
  e.g. ``posts[].question``; the two selector streams are zipped.
* ``plaintext`` -- the whole file is one sample; selectors are unused.

QA records are serialized in the ``Question:``/``Answer:`` prompt form.
Extraction is deterministic: rules run in listed order, files in
lexicographic path order, and every failure is recorded in the report
instead of being dropped.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path

from counselqa.corpus import Corpus, QAPair, Sample, normalize_text, qa_to_sample
from counselqa.errors import ConfigError, FormatError

MODES = ("html-selector", "json-path", "plaintext")

_VOID_TAGS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}


@dataclass(frozen=True)
class ExtractionRule:
    id: str
    source_glob: str
    mode: str
    question_selector: str = ""
    answer_selector: str = ""

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"rule {self.id!r}: unknown mode {self.mode!r}")
        if self.mode in ("html-selector", "json-path"):
            if not self.question_selector or not self.answer_selector:
                raise ConfigError(
                    f"rule {self.id!r}: {self.mode} mode needs both selectors"
                )


@dataclass
class IngestReport:
    files_seen: int = 0
    samples_emitted: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "files_seen": self.files_seen,
            "samples_emitted": self.samples_emitted,
            "failures": [{"path": p, "reason": r} for p, r in self.failures],
        }


def load_rules(path: str | Path) -> list[ExtractionRule]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ConfigError(f"{path}: expected a JSON array of rules")
    rules = []
    for i, obj in enumerate(raw):
        try:
            rules.append(
                ExtractionRule(
                    id=obj["id"],
                    source_glob=obj["source_glob"],
                    mode=obj["mode"],
                    question_selector=obj.get("question_selector", ""),
                    answer_selector=obj.get("answer_selector", ""),
                )
            )
        except KeyError as exc:
            raise ConfigError(f"{path}: rule {i} missing field {exc}") from exc
    return rules


# -- minimal HTML tree + CSS subset ----------------------------------------


class _Element:
    __slots__ = ("tag", "attrs", "content")

    def __init__(self, tag: str, attrs: dict[str, str]):
        self.tag = tag
        self.attrs = attrs
        # text chunks and child elements interleaved in document order
        self.content: list["str | _Element"] = []

    @property
    def children(self) -> list["_Element"]:
        return [c for c in self.content if isinstance(c, _Element)]

    def classes(self) -> set[str]:
        return set(self.attrs.get("class", "").split())

    def text(self) -> str:
        return "".join(
            c if isinstance(c, str) else c.text() for c in self.content
        )

    def walk(self):
        for child in self.children:
            yield child
            yield from child.walk()


class _TreeBuilder(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.root = _Element("#root", {})
        self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        element = _Element(tag, {k: (v or "") for k, v in attrs})
        self.stack[-1].content.append(element)
        if tag not in _VOID_TAGS:
            self.stack.append(element)

    def handle_endtag(self, tag):
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # stray closing tag: ignore

    def handle_data(self, data):
        self.stack[-1].content.append(data)


def parse_html(markup: str) -> _Element:
    builder = _TreeBuilder()
    builder.feed(markup)
    builder.close()
    return builder.root


_COMPOUND_RE = re.compile(r"([a-zA-Z][\w-]*)?((?:[.#][\w-]+)*)$")


def _match_compound(element: _Element, compound: str) -> bool:
    m = _COMPOUND_RE.match(compound)
    if not m:
        raise ConfigError(f"unsupported selector part {compound!r}")
    tag, quals = m.group(1), m.group(2)
    if tag and element.tag != tag.lower():
        return False
    for qual in re.findall(r"[.#][\w-]+", quals or ""):
        if qual[0] == "." and qual[1:] not in element.classes():
            return False
        if qual[0] == "#" and element.attrs.get("id") != qual[1:]:
            return False
    return True


def select(root: _Element, selector: str) -> list[_Element]:
    """Document-order matches for a descendant-combinator CSS subset."""
    compounds = selector.split()
    if not compounds:
        raise ConfigError("empty selector")
    matches = [root]
    for compound in compounds:
        next_matches = []
        seen: set[int] = set()
        for scope in matches:
            for element in scope.walk():
                if id(element) not in seen and _match_compound(element, compound):
                    seen.add(id(element))
                    next_matches.append(element)
        matches = next_matches
    return matches


# -- json-path -------------------------------------------------------------


def resolve_json_path(doc, path: str) -> list:
    """Resolve a dotted path; a ``[]`` suffix fans out over a list."""
    values = [doc]
    for segment in path.split("."):
        fan_out = segment.endswith("[]")
        key = segment[:-2] if fan_out else segment
        next_values = []
        for value in values:
            if key:
                if not isinstance(value, dict) or key not in value:
                    raise FormatError(f"path segment {key!r} not found")
                value = value[key]
            if fan_out:
                if not isinstance(value, list):
                    raise FormatError(f"path segment {segment!r} expects a list")
                next_values.extend(value)
            else:
                next_values.append(value)
        values = next_values
    return values


# -- extraction ------------------------------------------------------------


def _extract_records(rule: ExtractionRule, path: Path) -> list[tuple[str, str] | str]:
    """Per-file records: QA tuples, or raw text for plaintext mode."""
    raw = path.read_bytes()
    text = raw.decode("utf-8")  # UnicodeDecodeError -> failure upstream

    if rule.mode == "plaintext":
        return [text]

    if rule.mode == "html-selector":
        root = parse_html(text)
        questions = [e.text() for e in select(root, rule.question_selector)]
        answers = [e.text() for e in select(root, rule.answer_selector)]
    else:
        doc = json.loads(text)
        questions = resolve_json_path(doc, rule.question_selector)
        answers = resolve_json_path(doc, rule.answer_selector)
        for value in [*questions, *answers]:
            if not isinstance(value, str):
                raise FormatError(f"selected value {value!r} is not a string")

    if len(questions) != len(answers):
        raise FormatError(
            f"question/answer count mismatch ({len(questions)} vs {len(answers)})"
        )
    return list(zip(questions, answers))


def ingest(rules: list[ExtractionRule], archive_root: str | Path) -> tuple[Corpus, IngestReport]:
    """Run every rule over the archive; never fail on a single bad file."""
    if not rules:
        raise ConfigError("no extraction rules supplied")
    archive_root = Path(archive_root)
    report = IngestReport()

    seen_files: set[Path] = set()
    staged: list[tuple[str, int, int, Sample]] = []
    for rule_index, rule in enumerate(rules):
        files = sorted(archive_root.glob(rule.source_glob))
        for path in files:
            if not path.is_file():
                continue
            relpath = str(path.relative_to(archive_root))
            seen_files.add(path)
            try:
                records = _extract_records(rule, path)
            except UnicodeDecodeError as exc:
                report.failures.append((relpath, f"invalid UTF-8: {exc}"))
                continue
            except (FormatError, ConfigError, ValueError) as exc:
                report.failures.append((relpath, str(exc)))
                continue
            if not records:
                report.failures.append((relpath, "no records extracted"))
                continue
            for record_index, record in enumerate(records):
                meta = {"origin_file": relpath, "rule": rule.id}
                try:
                    if isinstance(record, tuple):
                        question, answer = record
                        pair = QAPair(
                            question=normalize_text(question).strip(),
                            answer=normalize_text(answer).strip(),
                            id=f"{relpath}:{record_index}",
                        )
                        sample = qa_to_sample(pair, source="archive", meta=meta)
                    else:
                        body = normalize_text(record).strip()
                        if not body:
                            raise FormatError("empty text")
                        sample = Sample(id="", text=body, source="archive", meta=meta)
                except FormatError as exc:
                    report.failures.append((relpath, f"record {record_index}: {exc}"))
                    continue
                staged.append((relpath, rule_index, record_index, sample))

    staged.sort(key=lambda entry: entry[:3])
    samples = [
        Sample(id=str(i), text=s.text, source=s.source, meta=s.meta)
        for i, (_, _, _, s) in enumerate(staged)
    ]
    report.files_seen = len(seen_files)
    report.samples_emitted = len(samples)
    return Corpus(samples), report
