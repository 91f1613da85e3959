"""The seven-rule cleaning pipeline, ordered, configurable, and audited.

Rules (config ids in parentheses):

1. duplicate removal (``dedup``) -- NFC + outer-trim equality, keep first
2. advertisement filtering (``filter_ads``) -- substring keyword match
3. short-sample filtering (``filter_short``) -- fewer than ``min_chars``
   Unicode scalars after all text transforms
4. URL stripping (``strip_urls``)
5. mention / timestamp stripping (``strip_mentions_timestamps``)
6. repeated-punctuation collapsing (``collapse_punct``)
7. traditional -> simplified conversion (``t2s``)

The default order runs the text transforms (4-7) first so that the
filters see final text, prunes samples left empty by the transforms
(``prune_empty``), then filters (2-3), then dedups (1) last so that
normalization-induced duplicates collapse. The whole pipeline is a
fixpoint: running it twice with the same config changes nothing.
"""

from __future__ import annotations

import importlib.resources
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from counselqa.corpus import Corpus, nfc_trim_key, with_text
from counselqa.errors import ConfigError

TRANSFORM_RULES = ("strip_urls", "strip_mentions_timestamps", "collapse_punct", "t2s")
FILTER_RULES = ("filter_ads", "filter_short")
PRUNE_RULE = "prune_empty"
DEDUP_RULE = "dedup"

DEFAULT_RULE_ORDER = [*TRANSFORM_RULES, PRUNE_RULE, *FILTER_RULES, DEDUP_RULE]

DEFAULT_URL_PATTERN = r"(?:https?://|www\.)[^\s，。！？、；：]+"
DEFAULT_MENTION_PATTERN = r"@\w+"
DEFAULT_TIMESTAMP_PATTERNS = [
    r"\d{4}[-/.]\d{1,2}[-/.]\d{1,2}(?:\s+\d{1,2}:\d{2}(?::\d{2})?)?",
    r"\d{4}年\d{1,2}月\d{1,2}日(?:\s*\d{1,2}:\d{2}(?::\d{2})?)?",
]

# Small default keyword list; not from any authoritative source -- real
# deployments should supply their own in the config file.
DEFAULT_AD_KEYWORDS = ["加微信", "加QQ", "点击链接", "优惠券", "代购", "推广", "广告位"]

# Fullwidth marks commonly seen in crawled Chinese text; these are all in
# Unicode category P already, kept explicit as a guard.
_EXTRA_PUNCT = set("！？。，…、；：")

_SPACE_RUN_RE = re.compile(r" {2,}")
_CHAR_RUN_RE = re.compile(r"(.)\1+", re.DOTALL)


def load_t2s_table(path: str | Path | None = None) -> dict[str, str]:
    """Load a two-column TSV of traditional -> simplified characters."""
    if path is None:
        source = importlib.resources.files("counselqa").joinpath("data/t2s.tsv")
        content = source.read_text(encoding="utf-8")
    else:
        content = Path(path).read_text(encoding="utf-8")
    table: dict[str, str] = {}
    for lineno, line in enumerate(content.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or len(parts[0]) != 1 or len(parts[1]) != 1:
            raise ConfigError(f"t2s table line {lineno}: expected two single characters")
        table[parts[0]] = parts[1]
    return table


@dataclass
class CleaningConfig:
    ad_keywords: list[str] = field(default_factory=lambda: list(DEFAULT_AD_KEYWORDS))
    min_chars: int = 150
    mention_pattern: str = DEFAULT_MENTION_PATTERN
    timestamp_patterns: list[str] = field(
        default_factory=lambda: list(DEFAULT_TIMESTAMP_PATTERNS)
    )
    url_pattern: str = DEFAULT_URL_PATTERN
    t2s_table: dict[str, str] = field(default_factory=load_t2s_table)
    rule_order: list[str] = field(default_factory=lambda: list(DEFAULT_RULE_ORDER))

    def __post_init__(self) -> None:
        if self.min_chars < 0:
            raise ConfigError(f"min_chars must be >= 0, got {self.min_chars}")
        for k, v in self.t2s_table.items():
            if len(k) != 1 or len(v) != 1:
                raise ConfigError(f"t2s table entry {k!r} -> {v!r} is not single-character")
        if sorted(self.rule_order) != sorted(DEFAULT_RULE_ORDER):
            raise ConfigError(
                f"rule_order must be a permutation of {sorted(DEFAULT_RULE_ORDER)}"
            )
        for pattern in [self.mention_pattern, self.url_pattern, *self.timestamp_patterns]:
            try:
                re.compile(pattern)
            except re.error as exc:
                raise ConfigError(f"pattern {pattern!r} does not compile: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "CleaningConfig":
        """Load config from JSON; ``t2s_table_path`` points at a TSV file."""
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        kwargs: dict = {}
        for key in ("ad_keywords", "min_chars", "mention_pattern",
                    "timestamp_patterns", "url_pattern", "rule_order"):
            if key in raw:
                kwargs[key] = raw[key]
        if "t2s_table" in raw:
            kwargs["t2s_table"] = dict(raw["t2s_table"])
        elif "t2s_table_path" in raw:
            kwargs["t2s_table"] = load_t2s_table(raw["t2s_table_path"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "ad_keywords": list(self.ad_keywords),
            "min_chars": self.min_chars,
            "mention_pattern": self.mention_pattern,
            "timestamp_patterns": list(self.timestamp_patterns),
            "url_pattern": self.url_pattern,
            "t2s_table_size": len(self.t2s_table),
            "rule_order": list(self.rule_order),
        }


@dataclass
class RuleStats:
    removed: int = 0
    modified: int = 0


@dataclass
class CleaningReport:
    input_count: int
    output_count: int
    rules: dict[str, RuleStats]

    @property
    def total_removed(self) -> int:
        return sum(s.removed for s in self.rules.values())

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "output_count": self.output_count,
            "rules": {
                rid: {"removed": s.removed, "modified": s.modified}
                for rid, s in self.rules.items()
            },
        }


# -- rule 1: duplicates --------------------------------------------------

def dedup(corpus: Corpus) -> Corpus:
    """Drop exact duplicates (NFC + trim equality), keeping first occurrences."""
    seen: set[str] = set()
    kept = []
    for sample in corpus:
        key = nfc_trim_key(sample.text)
        if key in seen:
            continue
        seen.add(key)
        kept.append(sample)
    return Corpus(kept)


# -- rules 2-3: filters ---------------------------------------------------

def filter_ads(corpus: Corpus, ad_keywords: list[str]) -> Corpus:
    """Remove samples containing any ad keyword as a substring."""
    keywords = [k for k in ad_keywords if k]
    return Corpus(
        [s for s in corpus if not any(k in s.text for k in keywords)]
    )


def filter_short(corpus: Corpus, min_chars: int) -> Corpus:
    """Remove samples with fewer than ``min_chars`` Unicode scalars."""
    return Corpus([s for s in corpus if len(s.text) >= min_chars])


# -- rules 4-7: text transforms -------------------------------------------

def _sub_and_tidy(text: str, patterns: list[re.Pattern]) -> str:
    for pattern in patterns:
        text = pattern.sub(" ", text)
    return _SPACE_RUN_RE.sub(" ", text).strip()


def strip_urls(text: str, url_pattern: str = DEFAULT_URL_PATTERN) -> str:
    """Replace URL matches with a space, collapse space runs, trim."""
    return _sub_and_tidy(text, [re.compile(url_pattern)])


def strip_mentions_timestamps(
    text: str,
    mention_pattern: str = DEFAULT_MENTION_PATTERN,
    timestamp_patterns: list[str] | None = None,
) -> str:
    """Remove user mentions and post timestamps, collapsing whitespace."""
    if timestamp_patterns is None:
        timestamp_patterns = DEFAULT_TIMESTAMP_PATTERNS
    try:
        compiled = [re.compile(mention_pattern)] + [re.compile(p) for p in timestamp_patterns]
    except re.error as exc:
        raise ConfigError(f"pattern does not compile: {exc}") from exc
    return _sub_and_tidy(text, compiled)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P") or ch in _EXTRA_PUNCT


def collapse_punct(text: str) -> str:
    """Collapse runs of >= 2 identical punctuation marks to one."""
    return _CHAR_RUN_RE.sub(
        lambda m: m.group(1) if _is_punct(m.group(1)) else m.group(0), text
    )


def t2s(text: str, table: dict[str, str]) -> str:
    """Map traditional characters through the table; length is preserved."""
    return "".join(table.get(ch, ch) for ch in text)


# -- pipeline -------------------------------------------------------------

def run_pipeline(corpus: Corpus, config: CleaningConfig) -> tuple[Corpus, CleaningReport]:
    """Apply the configured rules in ``config.rule_order``.

    Text transforms count modified samples; filters, the empty-sample
    prune, and dedup count removed samples. The report always satisfies
    ``output_count == input_count - sum(removed)``.
    """
    input_count = len(corpus)
    stats = {rule: RuleStats() for rule in config.rule_order}

    def transform(c: Corpus, rule: str, fn) -> Corpus:
        out = []
        for sample in c:
            new_text = fn(sample.text)
            if new_text != sample.text:
                stats[rule].modified += 1
                sample = with_text(sample, new_text)
            out.append(sample)
        return Corpus(out)

    for rule in config.rule_order:
        before = len(corpus)
        if rule == "strip_urls":
            corpus = transform(corpus, rule, lambda t: strip_urls(t, config.url_pattern))
        elif rule == "strip_mentions_timestamps":
            corpus = transform(
                corpus,
                rule,
                lambda t: strip_mentions_timestamps(
                    t, config.mention_pattern, config.timestamp_patterns
                ),
            )
        elif rule == "collapse_punct":
            corpus = transform(corpus, rule, collapse_punct)
        elif rule == "t2s":
            corpus = transform(corpus, rule, lambda t: t2s(t, config.t2s_table))
        elif rule == PRUNE_RULE:
            corpus = Corpus([s for s in corpus if s.text.strip() != ""])
            stats[rule].removed = before - len(corpus)
        elif rule == "filter_ads":
            corpus = filter_ads(corpus, config.ad_keywords)
            stats[rule].removed = before - len(corpus)
        elif rule == "filter_short":
            corpus = filter_short(corpus, config.min_chars)
            stats[rule].removed = before - len(corpus)
        elif rule == DEDUP_RULE:
            corpus = dedup(corpus)
            stats[rule].removed = before - len(corpus)

    report = CleaningReport(
        input_count=input_count, output_count=len(corpus), rules=stats
    )
    if report.output_count != report.input_count - report.total_removed:
        raise AssertionError(
            f"report arithmetic broken: {report.output_count} != "
            f"{report.input_count} - {report.total_removed}"
        )
    return corpus, report
