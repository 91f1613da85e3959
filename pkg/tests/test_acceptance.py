"""Acceptance criteria, one test per criterion, at pinned tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one
``[acceptance] <criterion>: PASS/FAIL`` line per criterion.
"""

from __future__ import annotations

import itertools
import json
import math
import random
import socket
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import httpx
import pytest

from counselqa.analyze import length_stats
from counselqa.clean import CleaningConfig, run_pipeline
from counselqa.corpus import (
    Corpus,
    QAPair,
    Sample,
    normalize_text,
    parse_qa,
    qa_to_sample,
    read_corpus,
    write_corpus,
)
from counselqa.humaneval import (
    RatingRecord,
    RatingStore,
    aggregate,
    build_session,
    record_rating,
)
from counselqa.lm import BOS, EOS, UNK, UniformBackend, train_ngram
from counselqa.metrics import distinct_n, lcs_length, perplexity, rouge_l


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"\n[acceptance] {name}: FAIL", flush=True)
        raise
    print(f"\n[acceptance] {name}: PASS", flush=True)


# ---------------------------------------------------------------------------
# Criterion 1: metric oracle suite
# ---------------------------------------------------------------------------


def _subsequences(seq: tuple[str, ...]) -> set[tuple[str, ...]]:
    out = set()
    for mask in range(1 << len(seq)):
        out.add(tuple(seq[i] for i in range(len(seq)) if mask >> i & 1))
    return out


def _rouge_from_lcs(lcs: int, ref_len: int, pred_len: int) -> float:
    if ref_len == 0 and pred_len == 0:
        return 100.0
    if ref_len == 0 or pred_len == 0:
        return 0.0
    recall, precision = lcs / ref_len, lcs / pred_len
    if recall + precision == 0:
        return 0.0
    return 100.0 * (2 * recall * precision) / (recall + precision)


def test_metric_oracle_suite():
    with criterion("metric oracle suite (ROUGE-L / distinct-n / length-stats / uniform PP)"):
        started = time.monotonic()

        # -- ROUGE-L vs exhaustive-subsequence LCS, ~10^4 pairs, lengths <= 8
        pool: list[tuple[str, ...]] = [
            tuple(p)
            for length in range(0, 6)
            for p in itertools.product("ab", repeat=length)
        ]
        pairs = [(a, b) for a in pool for b in pool]  # 63^2 = 3969 exhaustive
        rng = random.Random(2024)
        random_pool = [
            tuple(rng.choice("abcd") for _ in range(rng.randint(0, 8)))
            for _ in range(220)
        ]
        pairs += [
            (rng.choice(random_pool), rng.choice(random_pool)) for _ in range(6500)
        ]
        assert len(pairs) >= 10_000

        cache: dict[tuple[str, ...], set] = {}
        for seq in itertools.chain(pool, random_pool):
            cache.setdefault(seq, _subsequences(seq))
        for a, b in pairs:
            brute = max(len(s) for s in cache[a] & cache[b])
            assert lcs_length(list(a), list(b)) == brute, (a, b)
            got = rouge_l("".join(a), "".join(b), tokenizer_mode="char")
            assert got == _rouge_from_lcs(brute, len(a), len(b)), (a, b)

        # -- distinct-1/2 and length stats vs brute force on 100 random corpora
        for trial in range(100):
            corpus_rng = random.Random(5000 + trial)
            replies = [
                " ".join(
                    corpus_rng.choice(["a", "b", "c", "想", "好"])
                    for _ in range(corpus_rng.randint(0, 12))
                )
                for _ in range(corpus_rng.randint(1, 30))
            ]
            for n in (1, 2):
                ratios = []
                for reply in replies:
                    tokens = [ch for ch in reply if not ch.isspace()]
                    grams = [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]
                    ratios.append(len(set(grams)) / len(grams) if grams else 0.0)
                want = 100.0 * sum(ratios) / len(ratios)
                assert distinct_n(replies, n, tokenizer_mode="char") == want, (trial, n)

            lengths = [corpus_rng.randint(0, 300) for _ in range(corpus_rng.randint(1, 200))]
            samples = Corpus(
                [Sample(id=str(i), text="x" * L if L else " ") for i, L in enumerate(lengths)]
            )
            real_lengths = sorted(len(s.text) for s in samples)
            got_stats = length_stats(samples)
            n_total = len(real_lengths)
            mean = math.fsum(real_lengths) / n_total
            assert got_stats.count == n_total
            assert got_stats.mean == mean
            # statistics.pstdev computes the variance in exact rational
            # arithmetic; a float-formula oracle agrees to 1e-12 relative.
            oracle_std = math.sqrt(math.fsum((x - mean) ** 2 for x in real_lengths) / n_total)
            assert math.isclose(got_stats.std, oracle_std, rel_tol=1e-12, abs_tol=1e-12)
            assert got_stats.min == real_lengths[0]
            assert got_stats.max == real_lengths[-1]
            for attr, num, den in (("p25", 1, 4), ("p50", 1, 2), ("p70", 7, 10)):
                rank = max(1, math.ceil(Fraction(num * n_total, den)))
                assert getattr(got_stats, attr) == real_lengths[rank - 1], attr

        # -- uniform perplexity equals |V| within 1e-9 relative
        for vocab_size in (2, 10, 1000):
            pp = perplexity(UniformBackend(vocab_size), ["心理咨询", "abc", "一句更长的中文文本"])
            assert math.isclose(pp, vocab_size, rel_tol=1e-9), vocab_size

        assert time.monotonic() - started < 10.0, "metric oracle suite exceeded 10 s"


# ---------------------------------------------------------------------------
# Criterion 2: cleaning suite on a seeded synthetic corpus
# ---------------------------------------------------------------------------

FILLER = "心理健康咨询情绪支持倾听理解成长希望平静呼吸练习陪伴信任"


def _base_text(i: int, min_len: int = 160) -> str:
    body = f"样本{i:04d}" + FILLER * (min_len // len(FILLER) + 1)
    return body[:min_len]


def build_seeded_corpus() -> tuple[Corpus, dict]:
    table_keys = set(CleaningConfig().t2s_table)
    assert not (set(FILLER) & table_keys), "filler must not contain traditional chars"

    texts: list[str] = []
    counts = dict(urls=60, mentions=60, timestamps=40, punct=50, trad=50,
                  ads=30, short=25, dups=20, url_only=15)
    base_n = 1000 - sum(counts.values())  # 650 clean samples

    for i in range(base_n):
        texts.append(_base_text(i))
    for i in range(counts["urls"]):
        texts.append(_base_text(10_000 + i) + f" https://example.com/page/{i} 以及后续")
    for i in range(counts["mentions"]):
        texts.append(_base_text(20_000 + i) + f" @user{i} 的留言")
    for i in range(counts["timestamps"]):
        texts.append(_base_text(30_000 + i) + f" 发表于 2021-05-{i % 28 + 1:02d} 12:00 的帖子")
    for i in range(counts["punct"]):
        texts.append(_base_text(40_000 + i) + "实在太难了！！！")
    for i in range(counts["trad"]):
        texts.append(_base_text(50_000 + i) + "愛與被愛都需要練習")
    for i in range(counts["ads"]):
        texts.append(_base_text(60_000 + i) + " 想了解更多请加微信联系")
    for i in range(counts["short"]):
        texts.append(f"短样本{i:03d}太短了")
    for i in range(counts["dups"]):
        texts.append(_base_text(i))  # exact copies of the first 20 clean samples
    for i in range(counts["url_only"]):
        texts.append(f"https://only-a-link.example/deep/path/{i}")

    rng = random.Random(99)
    rng.shuffle(texts)
    corpus = Corpus([Sample(id=str(i), text=t) for i, t in enumerate(texts)])
    expected = {
        "input": 1000,
        "modified": {
            "strip_urls": counts["urls"] + counts["url_only"],
            "strip_mentions_timestamps": counts["mentions"] + counts["timestamps"],
            "collapse_punct": counts["punct"],
            "t2s": counts["trad"],
        },
        "removed": {
            "prune_empty": counts["url_only"],
            "filter_ads": counts["ads"],
            "filter_short": counts["short"],
            "dedup": counts["dups"],
        },
    }
    return corpus, expected


def test_cleaning_suite(tmp_path):
    with criterion("cleaning suite (seeded 1000-sample corpus, exact report, fixpoint)"):
        started = time.monotonic()
        config = CleaningConfig(ad_keywords=["加微信"], min_chars=150)
        corpus, expected = build_seeded_corpus()
        assert len(corpus) == expected["input"]

        cleaned, report = run_pipeline(corpus, config)

        for rule, want in expected["modified"].items():
            assert report.rules[rule].modified == want, (rule, report.rules[rule])
        for rule, want in expected["removed"].items():
            assert report.rules[rule].removed == want, (rule, report.rules[rule])
        total_removed = sum(expected["removed"].values())
        assert report.input_count == 1000
        assert report.output_count == 1000 - total_removed
        assert len(cleaned) == report.output_count

        # post-pipeline invariants
        import re as _re
        import unicodedata

        url_re = _re.compile(config.url_pattern)
        mention_re = _re.compile(config.mention_pattern)
        ts_res = [_re.compile(p) for p in config.timestamp_patterns]
        seen_keys: set[str] = set()
        for sample in cleaned:
            assert not url_re.search(sample.text)
            assert not mention_re.search(sample.text)
            assert not any(r.search(sample.text) for r in ts_res)
            assert len(sample.text) >= config.min_chars
            assert not any(k in sample.text for k in config.ad_keywords)
            for a, b in zip(sample.text, sample.text[1:]):
                is_punct = unicodedata.category(a).startswith("P")
                assert not (a == b and is_punct), sample.text
            key = unicodedata.normalize("NFC", sample.text).strip()
            assert key not in seen_keys
            seen_keys.add(key)

        # byte-identical fixpoint
        twice, report2 = run_pipeline(cleaned, config)
        first_path, second_path = tmp_path / "once.txt", tmp_path / "twice.txt"
        write_corpus(cleaned, first_path)
        write_corpus(twice, second_path)
        assert first_path.read_bytes() == second_path.read_bytes()
        assert all(s.removed == 0 and s.modified == 0 for s in report2.rules.values())

        assert time.monotonic() - started < 5.0, "cleaning suite exceeded 5 s"


# ---------------------------------------------------------------------------
# Criterion 3: n-gram suite
# ---------------------------------------------------------------------------


def test_ngram_suite():
    with criterion("n-gram suite (hand-computed add-k, distribution sums, beats uniform)"):
        # toy corpus ["ab", "ab", "ac"], n=2, k=0.5, |V| = 6
        corpus = Corpus([Sample(id=str(i), text=t) for i, t in enumerate(["ab", "ab", "ac"])])
        model = train_ngram(corpus, n=2, k=0.5, tokenizer_mode="char")
        assert len(model.vocab) == 6
        hand_computed = {
            ("a", (BOS,)): Fraction(7, 12),
            ("b", ("a",)): Fraction(5, 12),
            ("c", ("a",)): Fraction(1, 4),
            (EOS, ("b",)): Fraction(1, 2),
            (EOS, ("c",)): Fraction(3, 8),
            (UNK, ("a",)): Fraction(1, 12),
            ("b", ("never",)): Fraction(1, 6),
        }
        for (token, context), want in hand_computed.items():
            assert abs(model.prob(token, context) - float(want)) <= 1e-12, (token, context)

        for context in model.counts:
            total = sum(model.prob(t, context) for t in model.vocab)
            assert abs(total - 1.0) <= 1e-9, context

        texts = ["心理咨询帮助我们理解情绪", "规律作息有助于情绪平稳", "倾听是心理支持的第一步"]
        train_corpus = Corpus([Sample(id=str(i), text=t) for i, t in enumerate(texts)])
        trained = train_ngram(train_corpus, n=2, k=0.01, tokenizer_mode="char")
        pp = perplexity(trained, texts)
        assert pp < len(trained.vocab), (pp, len(trained.vocab))


# ---------------------------------------------------------------------------
# Criterion 4: corpus format round trips
# ---------------------------------------------------------------------------


def test_corpus_format(tmp_path):
    with criterion("corpus format (1000 random corpora round-trip, QA round-trip)"):
        rng = random.Random(314)
        alphabet = "ab 心理健康\n咨询xyz"
        path = tmp_path / "corpus.txt"
        for trial in range(1000):
            texts = []
            for _ in range(rng.randint(0, 12)):
                raw = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 40)))
                normalized = normalize_text(raw)
                if normalized:
                    texts.append(normalized)
            corpus = Corpus([Sample(id=str(i), text=t) for i, t in enumerate(texts)])
            write_corpus(corpus, path)
            back = read_corpus(path)
            assert back.texts == corpus.texts, trial
            # byte-identical on re-write of already-normalized content
            second = tmp_path / "again.txt"
            write_corpus(back, second)
            assert second.read_bytes() == path.read_bytes(), trial

        qa_alphabet = "abc问答心理 xyz"
        for trial in range(1000):
            question = "".join(
                rng.choice(qa_alphabet) for _ in range(rng.randint(1, 30))
            ).rstrip()
            answer_lines = [
                "".join(rng.choice(qa_alphabet) for _ in range(rng.randint(1, 20)))
                for _ in range(rng.randint(1, 3))
            ]
            answer = "\n".join(answer_lines).rstrip()
            if not question.strip() or not answer.strip():
                continue
            pair = QAPair(question=question, answer=answer, id=str(trial))
            back_pair = parse_qa(qa_to_sample(pair))
            assert (back_pair.question, back_pair.answer) == (question, answer), trial


# ---------------------------------------------------------------------------
# Criterion 5: gateway end-to-end over a real server process
# ---------------------------------------------------------------------------


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class ServerProcess:
    def __init__(self, config_path: Path, port: int):
        self.port = port
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "counselqa.cli", "--quiet", "serve", "--config", str(config_path)],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        self.base = f"http://127.0.0.1:{port}"

    def wait_healthy(self, timeout_s: float = 15.0) -> None:
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            try:
                if httpx.get(f"{self.base}/api/health", timeout=1.0).status_code == 200:
                    return
            except httpx.HTTPError:
                pass
            time.sleep(0.1)
        raise RuntimeError("gateway did not become healthy in time")

    def stop(self) -> None:
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


@pytest.fixture
def gateway_env(tmp_path):
    data_dir = tmp_path / "gwdata"
    port = _free_port()
    config_path = tmp_path / "gateway.json"
    config_path.write_text(
        json.dumps(
            {
                "data_dir": str(data_dir),
                "backend": {"kind": "template"},
                "bind_host": "127.0.0.1",
                "bind_port": port,
                "max_concurrent": 4,
                "queue_size": 16,
            }
        ),
        encoding="utf-8",
    )
    servers: list[ServerProcess] = []

    def start() -> ServerProcess:
        server = ServerProcess(config_path, port)
        servers.append(server)
        server.wait_healthy()
        return server

    yield start, data_dir
    for server in servers:
        server.stop()


def test_gateway_end_to_end(gateway_env):
    with criterion("gateway end-to-end (ask < 2 s, restart persistence, blinding, concurrency)"):
        start, data_dir = gateway_env
        server = start()

        # ask answers quickly and non-empty
        begin = time.monotonic()
        resp = httpx.post(
            f"{server.base}/api/ask", json={"question": "如何面对抑郁?"}, timeout=5.0
        )
        elapsed = time.monotonic() - begin
        assert resp.status_code == 200
        assert resp.json()["answer"].strip()
        assert elapsed < 2.0, f"ask took {elapsed:.2f}s"
        answer_id = resp.json()["answer_id"]

        # blinding: a session served over HTTP carries no origin key
        session = build_session(
            mode="blended",
            questions=["q1", "q2"],
            answers_by_origin={
                "systemA": {"q1": "模型回答一", "q2": "模型回答二"},
                "ground_truth": {"q1": "真实回答一", "q2": "真实回答二"},
            },
            n_raters=1,
            seed=7,
            session_id="sess-acc",
        )
        (data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        session.save(data_dir / "sessions" / "sess-acc.json")
        payload = httpx.get(f"{server.base}/api/eval/session/sess-acc", timeout=5.0)
        assert payload.status_code == 200
        assert "origin" not in json.dumps(payload.json())

        # restart: the AskRecord must survive a real process restart
        server.stop()
        server = start()
        ratings_path = data_dir / "ratings.jsonl"
        before = (
            len(ratings_path.read_text(encoding="utf-8").splitlines())
            if ratings_path.exists()
            else 0
        )
        rate = httpx.post(
            f"{server.base}/api/rate",
            json={"answer_id": answer_id, "helpfulness": 4, "fluency": 4,
                  "relevance": 4, "logic": 4},
            timeout=5.0,
        )
        assert rate.status_code == 200, rate.text
        after = ratings_path.read_text(encoding="utf-8").splitlines()
        assert len(after) == before + 1
        assert json.loads(after[-1])["item_id"] == answer_id

        # 50 concurrent asks under max_concurrent=4: each 200 or 503,
        # and the ask log stays line-atomic
        asks_before = len(
            (data_dir / "asks.jsonl").read_text(encoding="utf-8").splitlines()
        )

        def one_ask(i: int) -> int:
            r = httpx.post(
                f"{server.base}/api/ask",
                json={"question": f"并发问题 {i}"},
                timeout=30.0,
            )
            return r.status_code

        with ThreadPoolExecutor(max_workers=50) as pool:
            statuses = list(pool.map(one_ask, range(50)))
        assert set(statuses) <= {200, 503}, set(statuses)
        assert statuses.count(200) >= 1
        lines = (data_dir / "asks.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == asks_before + statuses.count(200)
        for line in lines:
            record = json.loads(line)  # raises on torn writes
            assert {"answer_id", "question", "answer"} <= set(record)


# ---------------------------------------------------------------------------
# Criterion 6: human-eval aggregation
# ---------------------------------------------------------------------------


def test_humaneval_aggregation(tmp_path):
    with criterion("human-eval aggregation (hand-computed means, result-table shape)"):
        questions = ["q1", "q2", "q3", "q4"]
        session = build_session(
            mode="blended",
            questions=questions,
            answers_by_origin={
                origin: {q: f"{origin}:{q}" for q in questions}
                for origin in ("systemA", "systemB", "ground_truth")
            },
            n_raters=2,
            seed=11,
            session_id="scripted",
        )
        assert len(session.items) == 12

        # two raters each score every item; per-origin scores are scripted
        scripted = {
            "systemA": {"rater-0": (3, 4, 2, 5), "rater-1": (4, 5, 3, 5)},
            "systemB": {"rater-0": (1, 2, 2, 3), "rater-1": (2, 3, 3, 4)},
            "ground_truth": {"rater-0": (5, 5, 4, 5), "rater-1": (4, 5, 5, 4)},
        }
        store = RatingStore(tmp_path / "ratings.jsonl")
        for item in session.items:
            for rater, (h, f, r, lo) in scripted[item.origin].items():
                record_rating(
                    store,
                    RatingRecord(
                        rater_id=rater, item_id=item.item_id,
                        helpfulness=h, fluency=f, relevance=r, logic=lo,
                    ),
                    session,
                )

        table = aggregate(store, session)
        # hand-computed: each origin has 4 items x 2 raters; per metric the
        # mean is the midpoint of the two scripted scores
        expected_means = {
            "helpfulness": {"systemA": 3.50, "systemB": 1.50, "ground_truth": 4.50},
            "fluency": {"systemA": 4.50, "systemB": 2.50, "ground_truth": 5.00},
            "relevance": {"systemA": 2.50, "systemB": 2.50, "ground_truth": 4.50},
            "logic": {"systemA": 5.00, "systemB": 3.50, "ground_truth": 4.50},
        }
        for metric, per_origin in expected_means.items():
            for origin, want in per_origin.items():
                assert table["means"][metric][origin] == want, (metric, origin)

        # result-table shape: four metric rows x (systems + ground truth)
        assert table["metrics"] == ["helpfulness", "fluency", "relevance", "logic"]
        assert table["origins"] == ["ground_truth", "systemA", "systemB"]
        assert table["counts"] == {"ground_truth": 8, "systemA": 8, "systemB": 8}
