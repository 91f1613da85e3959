"""Dataset profiling: sample-length distribution and word frequency.

Length statistics use the population standard deviation and
nearest-rank quantiles (the ceil(q*n)-th order statistic), reporting
the 25/50/70 percent points. The 70 is deliberate, not a typo for 75.
Word frequency counts tokens after stop-word removal and returns a
deterministic top-k table for plotting.
"""

from __future__ import annotations

import statistics
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from counselqa.corpus import Corpus
from counselqa.errors import ConfigError
from counselqa.text import TOKENIZER_MODES, tokenize

QUANTILES = (("p25", 1, 4), ("p50", 1, 2), ("p70", 7, 10))


@dataclass
class LengthStats:
    count: int
    mean: float | None = None
    std: float | None = None
    min: int | None = None
    p25: int | None = None
    p50: int | None = None
    p70: int | None = None
    max: int | None = None

    def __post_init__(self) -> None:
        if self.count > 0:
            order = [self.min, self.p25, self.p50, self.p70, self.max]
            assert all(a <= b for a, b in zip(order, order[1:])), "quantiles out of order"
            assert self.std is not None and self.std >= 0

    def to_dict(self) -> dict:
        d: dict = {"count": self.count}
        if self.count > 0:
            d.update(
                mean=self.mean, std=self.std,
                min=self.min, p25=self.p25, p50=self.p50, p70=self.p70, max=self.max,
            )
        return d


@dataclass
class FreqTable:
    entries: list[tuple[str, int]]
    stopwords_removed: int

    def __post_init__(self) -> None:
        assert all(c > 0 for _, c in self.entries), "counts must be positive"

    def to_dict(self) -> dict:
        return {
            "entries": [[t, c] for t, c in self.entries],
            "stopwords_removed": self.stopwords_removed,
        }


def _nearest_rank(sorted_values: list[int], num: int, den: int) -> int:
    """ceil(num/den * n)-th order statistic, computed in exact integers."""
    n = len(sorted_values)
    rank = max(1, -(-num * n // den))
    return sorted_values[rank - 1]


def length_stats(corpus: Corpus) -> LengthStats:
    """Character-length distribution of the corpus samples."""
    lengths = sorted(len(s.text) for s in corpus)
    if not lengths:
        return LengthStats(count=0)
    return LengthStats(
        count=len(lengths),
        mean=statistics.fmean(lengths),
        std=statistics.pstdev(lengths),
        min=lengths[0],
        p25=_nearest_rank(lengths, 1, 4),
        p50=_nearest_rank(lengths, 1, 2),
        p70=_nearest_rank(lengths, 7, 10),
        max=lengths[-1],
    )


def word_freq(
    corpus: Corpus,
    stopwords: set[str] | None = None,
    tokenizer: str = "unicode",
    top_k: int = 100,
) -> FreqTable:
    """Top-k token frequencies after stop-word removal.

    Ties are broken by lexicographic token order so output is stable.
    """
    if tokenizer not in TOKENIZER_MODES:
        raise ConfigError(f"unknown tokenizer {tokenizer!r}; expected one of {TOKENIZER_MODES}")
    if top_k < 1:
        raise ConfigError(f"top_k must be >= 1, got {top_k}")
    stopwords = stopwords or set()

    counts: Counter[str] = Counter()
    removed = 0
    for sample in corpus:
        for token in tokenize(sample.text, tokenizer):
            if token in stopwords:
                removed += 1
            else:
                counts[token] += 1

    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    return FreqTable(entries=ranked, stopwords_removed=removed)


def load_stopwords(path: str | Path) -> set[str]:
    """Stop-word file: one token per line, UTF-8, blank lines ignored."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        token = line.strip()
        if token:
            words.add(token)
    return words
