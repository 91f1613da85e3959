"""Length distribution and word frequency against brute-force oracles."""

from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from counselqa.analyze import FreqTable, length_stats, load_stopwords, word_freq
from counselqa.corpus import Corpus, Sample
from counselqa.errors import ConfigError


def corpus_of(*texts: str) -> Corpus:
    return Corpus([Sample(id=str(i), text=t) for i, t in enumerate(texts)])


def oracle_length_stats(lengths: list[int]) -> dict:
    """Direct-formula oracle: sort + definitions, exact rank arithmetic."""
    if not lengths:
        return {"count": 0}
    xs = sorted(lengths)
    n = len(xs)
    mean = sum(xs) / n
    std = math.sqrt(sum((x - mean) ** 2 for x in xs) / n)

    def at_quantile(num: int, den: int) -> int:
        rank = math.ceil(Fraction(num * n, den))
        return xs[max(1, rank) - 1]

    return {
        "count": n,
        "mean": mean,
        "std": std,
        "min": xs[0],
        "p25": at_quantile(1, 4),
        "p50": at_quantile(1, 2),
        "p70": at_quantile(7, 10),
        "max": xs[-1],
    }


class TestLengthStats:
    def test_three_samples(self):
        # lengths 10, 20, 30
        stats = length_stats(corpus_of("a" * 10, "b" * 20, "c" * 30))
        assert stats.count == 3
        assert stats.mean == 20
        assert abs(stats.std - 8.16496580927726) < 1e-10
        assert stats.min == 10
        assert stats.p25 == 10
        assert stats.p50 == 20
        assert stats.p70 == 30
        assert stats.max == 30

    def test_single_sample_degenerate(self):
        stats = length_stats(corpus_of("x" * 7))
        assert (stats.min, stats.p25, stats.p50, stats.p70, stats.max) == (7,) * 5
        assert stats.std == 0

    def test_empty_corpus(self):
        stats = length_stats(Corpus())
        assert stats.count == 0
        assert stats.to_dict() == {"count": 0}

    def test_matches_oracle_on_random_corpora(self):
        rng = random.Random(7)
        for _ in range(50):
            lengths = [rng.randint(1, 500) for _ in range(rng.randint(1, 400))]
            got = length_stats(corpus_of(*("x" * n for n in lengths))).to_dict()
            want = oracle_length_stats(lengths)
            assert got["count"] == want["count"]
            assert math.isclose(got["mean"], want["mean"], rel_tol=1e-12)
            assert math.isclose(got["std"], want["std"], rel_tol=1e-9, abs_tol=1e-12)
            for key in ("min", "p25", "p50", "p70", "max"):
                assert got[key] == want[key], key


class TestWordFreq:
    def test_counting_with_stopwords(self):
        table = word_freq(corpus_of("a b b c"), stopwords={"c"}, top_k=10)
        assert table.entries == [("b", 2), ("a", 1)]
        assert table.stopwords_removed == 1

    def test_all_stopwords(self):
        table = word_freq(corpus_of("c c c"), stopwords={"c"}, top_k=5)
        assert table.entries == []
        assert table.stopwords_removed == 3

    def test_tie_breaks_lexicographic(self):
        table = word_freq(corpus_of("b a d c"), top_k=10)
        assert table.entries == [("a", 1), ("b", 1), ("c", 1), ("d", 1)]

    def test_top_k_truncates(self):
        table = word_freq(corpus_of("a a b b b c"), top_k=2)
        assert table.entries == [("b", 3), ("a", 2)]

    def test_cjk_unicode_mode_splits_chars(self):
        table = word_freq(corpus_of("焦虑 焦虑"), tokenizer="unicode", top_k=10)
        assert table.entries == [("焦", 2), ("虑", 2)]

    def test_char_mode(self):
        table = word_freq(corpus_of("aa b"), tokenizer="char", top_k=10)
        assert table.entries == [("a", 2), ("b", 1)]

    def test_unknown_tokenizer(self):
        with pytest.raises(ConfigError):
            word_freq(corpus_of("a"), tokenizer="jieba")

    def test_bad_top_k(self):
        with pytest.raises(ConfigError):
            word_freq(corpus_of("a"), top_k=0)

    def test_load_stopwords(self, tmp_path):
        p = tmp_path / "stop.txt"
        p.write_text("的\n了\n\n是\n", encoding="utf-8")
        assert load_stopwords(p) == {"的", "了", "是"}


@settings(deadline=None, max_examples=80)
@given(
    st.lists(
        st.text(alphabet="ab 的了", min_size=0, max_size=20), min_size=0, max_size=10
    ),
    st.sets(st.sampled_from(["a", "b", "的", "了"]), max_size=3),
)
def test_freq_conservation(texts, stops):
    """Counted tokens + removed stopwords == total tokens emitted."""
    from counselqa.text import tokenize

    samples = [t for t in texts if t.strip()]
    corpus = corpus_of(*samples) if samples else Corpus()
    table = word_freq(corpus, stopwords=stops, tokenizer="unicode", top_k=10**6)
    total = sum(len(tokenize(t, "unicode")) for t in samples)
    assert sum(c for _, c in table.entries) + table.stopwords_removed == total
