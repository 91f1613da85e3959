"""Pluggable language-model backends behind a generate/score interface.

Three implementations speak the ``Question:``/``Answer:`` prompt
convention: a trainable add-k-smoothed n-gram model (a desk-scale
stand-in for large fine-tuned models), a deterministic template backend
for serving tests and demos, and a client for a remote model server.
A uniform-distribution scorer is included as the perplexity baseline.

N-gram probabilities are ``(count + k) / (context_total + k * |V|)``
where ``|V|`` counts the full vocabulary including the reserved BOS,
EOS, and UNK tokens, so the distribution over any context sums to one.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from counselqa.corpus import Corpus
from counselqa.errors import (
    CapabilityError,
    ConfigError,
    EmptyCorpusError,
    FormatError,
    RemoteError,
)
from counselqa.text import CHAR, TOKENIZER_MODES, detokenize, tokenize

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

MODEL_FORMAT_VERSION = 1
GENERATE_ROUTE = "/api/generate"


@dataclass(frozen=True)
class Capabilities:
    can_score: bool
    can_generate: bool


@dataclass(frozen=True)
class GenerationRequest:
    question: str
    max_new_tokens: int = 200
    temperature: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise ConfigError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")

    def prompt(self) -> str:
        return f"Question: {self.question}\nAnswer:"

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "max_new_tokens": self.max_new_tokens,
            "temperature": self.temperature,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class GenerationResponse:
    answer: str
    latency_ms: int
    backend: str


class LmBackend:
    """Interface every backend implements; defaults refuse politely."""

    name: str = "abstract"
    capabilities: Capabilities = Capabilities(can_score=False, can_generate=False)

    def token_logprobs(self, text: str) -> list[tuple[str, float]]:
        raise CapabilityError(f"backend {self.name!r} cannot score text")

    def generate(self, req: GenerationRequest) -> GenerationResponse:
        raise CapabilityError(f"backend {self.name!r} cannot generate text")


def token_logprobs(backend: LmBackend, text: str) -> list[tuple[str, float]]:
    if not backend.capabilities.can_score:
        raise CapabilityError(f"backend {backend.name!r} cannot score text")
    return backend.token_logprobs(text)


def generate(backend: LmBackend, req: GenerationRequest) -> GenerationResponse:
    if not backend.capabilities.can_generate:
        raise CapabilityError(f"backend {backend.name!r} cannot generate text")
    return backend.generate(req)


# -- n-gram model ----------------------------------------------------------


class NgramModel(LmBackend):
    """Order-n model with add-k smoothing over BOS-padded token streams."""

    capabilities = Capabilities(can_score=True, can_generate=True)

    def __init__(
        self,
        n: int,
        k: float,
        tokenizer_mode: str,
        vocab: set[str],
        counts: dict[tuple[str, ...], dict[str, int]],
    ):
        if n < 1:
            raise ConfigError(f"n must be >= 1, got {n}")
        if k <= 0:
            raise ConfigError(f"smoothing k must be > 0, got {k}")
        if tokenizer_mode not in TOKENIZER_MODES:
            raise ConfigError(f"unknown tokenizer mode {tokenizer_mode!r}")
        self.n = n
        self.k = k
        self.tokenizer_mode = tokenizer_mode
        self.vocab = set(vocab) | {BOS, EOS, UNK}
        self.counts = counts
        self.context_totals = {ctx: sum(c.values()) for ctx, c in counts.items()}
        self._sorted_vocab = sorted(self.vocab)
        self.name = f"ngram(n={n},k={k},tok={tokenizer_mode})"

    # -- training ----------------------------------------------------------

    @classmethod
    def train(
        cls,
        corpus: Corpus,
        n: int = 3,
        k: float = 0.01,
        tokenizer_mode: str = CHAR,
        max_tokens_per_sample: int = 1000,
    ) -> "NgramModel":
        """Count n-grams over every sample, truncated to the token cap."""
        if max_tokens_per_sample < 1:
            raise ConfigError(
                f"max_tokens_per_sample must be >= 1, got {max_tokens_per_sample}"
            )
        vocab: set[str] = set()
        counts: dict[tuple[str, ...], dict[str, int]] = {}
        streams = 0
        for sample in corpus:
            tokens = tokenize(sample.text, tokenizer_mode)[:max_tokens_per_sample]
            if not tokens:
                continue
            streams += 1
            vocab.update(tokens)
            padded = [BOS] * (n - 1) + tokens + [EOS]
            for i in range(n - 1, len(padded)):
                context = tuple(padded[i - n + 1 : i])
                target = padded[i]
                counts.setdefault(context, {})
                counts[context][target] = counts[context].get(target, 0) + 1
        if streams == 0:
            raise EmptyCorpusError("no samples yielded tokens; cannot train")
        return cls(n=n, k=k, tokenizer_mode=tokenizer_mode, vocab=vocab, counts=counts)

    # -- probabilities -----------------------------------------------------

    def _map(self, token: str) -> str:
        return token if token in self.vocab else UNK

    def prob(self, token: str, context: tuple[str, ...]) -> float:
        """Add-k probability of ``token`` after ``context`` (both mapped to UNK)."""
        context = tuple(self._map(t) for t in context)
        token = self._map(token)
        total = self.context_totals.get(context, 0)
        count = self.counts.get(context, {}).get(token, 0)
        return (count + self.k) / (total + self.k * len(self.vocab))

    def token_logprobs(self, text: str) -> list[tuple[str, float]]:
        tokens = tokenize(text, self.tokenizer_mode)
        history = [BOS] * (self.n - 1) + [self._map(t) for t in tokens]
        out = []
        for i, token in enumerate(tokens + [EOS]):
            context = tuple(history[i : i + self.n - 1])
            out.append((token, math.log(self.prob(token, context))))
        return out

    # -- generation --------------------------------------------------------

    def _distribution(self, context: tuple[str, ...]) -> list[tuple[str, float]]:
        # BOS and UNK are bookkeeping tokens, never surface text; they keep
        # their smoothing mass for scoring but are not generation candidates.
        return [
            (t, self.prob(t, context))
            for t in self._sorted_vocab
            if t not in (BOS, UNK)
        ]

    def generate(self, req: GenerationRequest) -> GenerationResponse:
        started = time.monotonic()
        rng = random.Random(req.seed)
        history = [self._map(t) for t in tokenize(req.prompt(), self.tokenizer_mode)]
        generated: list[str] = []
        while len(generated) < req.max_new_tokens:
            if self.n > 1:
                padded = [BOS] * (self.n - 1) + history
                context = tuple(padded[-(self.n - 1):])
            else:
                context = ()
            candidates = self._distribution(context)
            if not generated:
                # An empty continuation is useless to a caller; the very
                # first step never picks EOS.
                candidates = [(t, p) for t, p in candidates if t != EOS]
            token = self._pick(candidates, req.temperature, rng)
            if token == EOS:
                break
            generated.append(token)
            history.append(token)
        answer = detokenize(generated, self.tokenizer_mode)
        answer = answer.strip() or answer
        latency = int((time.monotonic() - started) * 1000)
        return GenerationResponse(answer=answer, latency_ms=latency, backend=self.name)

    @staticmethod
    def _pick(candidates: list[tuple[str, float]], temperature: float, rng: random.Random) -> str:
        if temperature == 0:
            return min(candidates, key=lambda tp: (-tp[1], tp[0]))[0]
        weights = [math.exp(math.log(p) / temperature) for _, p in candidates]
        total = sum(weights)
        point = rng.random() * total
        acc = 0.0
        for (token, _), w in zip(candidates, weights):
            acc += w
            if point <= acc:
                return token
        return candidates[-1][0]

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        ordered_counts = [
            [list(ctx), sorted(((t, c) for t, c in tok_counts.items()))]
            for ctx, tok_counts in sorted(self.counts.items())
        ]
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "n": self.n,
            "k": self.k,
            "tokenizer_mode": self.tokenizer_mode,
            "vocab_size": len(self.vocab),
            "vocab": self._sorted_vocab,
            "counts": ordered_counts,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "NgramModel":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        version = raw.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported model format version {version!r}")
        counts = {
            tuple(ctx): {t: int(c) for t, c in tok_counts}
            for ctx, tok_counts in raw["counts"]
        }
        model = cls(
            n=int(raw["n"]),
            k=float(raw["k"]),
            tokenizer_mode=raw["tokenizer_mode"],
            vocab=set(raw["vocab"]),
            counts=counts,
        )
        if len(model.vocab) != int(raw["vocab_size"]):
            raise FormatError(f"{path}: vocab_size header disagrees with vocab list")
        return model


def train_ngram(
    corpus: Corpus,
    n: int = 3,
    k: float = 0.01,
    tokenizer_mode: str = CHAR,
    max_tokens_per_sample: int = 1000,
) -> NgramModel:
    return NgramModel.train(corpus, n, k, tokenizer_mode, max_tokens_per_sample)


# -- uniform baseline ------------------------------------------------------


class UniformBackend(LmBackend):
    """Scores every token at 1/|V|; the perplexity of any text is |V|."""

    capabilities = Capabilities(can_score=True, can_generate=False)

    def __init__(self, vocab_size: int, tokenizer_mode: str = CHAR):
        if vocab_size < 1:
            raise ConfigError(f"vocab_size must be >= 1, got {vocab_size}")
        self.vocab_size = vocab_size
        self.tokenizer_mode = tokenizer_mode
        self.name = f"uniform(|V|={vocab_size})"

    def token_logprobs(self, text: str) -> list[tuple[str, float]]:
        lp = -math.log(self.vocab_size)
        tokens = tokenize(text, self.tokenizer_mode) + [EOS]
        return [(t, lp) for t in tokens]


# -- template backend ------------------------------------------------------

_TEMPLATE_ANSWERS = [
    "谢谢你愿意说出自己的感受。先给自己一点时间，承认此刻的情绪是真实而且可以被理解的。"
    "可以试着每天记录让你压力最大的一件事，并观察它出现的规律；如果情绪持续影响睡眠或生活，"
    "建议尽早与专业的心理咨询师当面聊一聊。 (Thank you for sharing. Your feelings are valid; "
    "consider keeping a short daily note of what weighs on you, and reach out to a professional "
    "counsellor if it keeps affecting sleep or daily life.)",
    "听起来这段时间你承受了很多。请记得照顾好基本的休息和饮食，并试着把大问题拆成可以着手的小步骤。"
    "和信任的朋友或家人聊聊，往往能让压力得到缓冲；需要时，寻求专业帮助是勇敢而不是软弱。 "
    "(It sounds like a heavy period. Care for rest and meals first, break problems into small steps, "
    "and lean on people you trust; seeking professional help is strength, not weakness.)",
    "你的困扰值得被认真对待。试着用几分钟做缓慢的深呼吸，让身体先安定下来，再把担心的事情写下来，"
    "区分哪些是现在可以行动的，哪些是需要放一放的。坚持规律作息，会为情绪恢复提供基础。 "
    "(Your concern deserves care. Slow breathing can settle the body; write worries down and separate "
    "what is actionable now from what can wait. A steady routine supports recovery.)",
]


class TemplateBackend(LmBackend):
    """Deterministic canned counselling responses, chosen by question hash."""

    capabilities = Capabilities(can_score=False, can_generate=True)
    name = "template"

    def generate(self, req: GenerationRequest) -> GenerationResponse:
        started = time.monotonic()
        digest = hashlib.md5(req.question.encode("utf-8")).digest()
        answer = _TEMPLATE_ANSWERS[digest[0] % len(_TEMPLATE_ANSWERS)]
        latency = int((time.monotonic() - started) * 1000)
        return GenerationResponse(answer=answer, latency_ms=latency, backend=self.name)


# -- remote backend --------------------------------------------------------


class RemoteBackend(LmBackend):
    """Client for a model server speaking this package's JSON protocol.

    ``endpoint`` is the server base URL; requests POST to
    ``<endpoint>/api/generate``. Any transport failure, non-2xx status,
    or malformed body raises RemoteError with diagnostic detail.
    """

    capabilities = Capabilities(can_score=False, can_generate=True)

    def __init__(
        self,
        endpoint: str,
        timeout_s: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self._transport = transport
        self.name = f"remote({self.endpoint})"

    @property
    def url(self) -> str:
        if self.endpoint.endswith(GENERATE_ROUTE):
            return self.endpoint
        return self.endpoint + GENERATE_ROUTE

    def generate(self, req: GenerationRequest) -> GenerationResponse:
        started = time.monotonic()
        try:
            with httpx.Client(timeout=self.timeout_s, transport=self._transport) as client:
                response = client.post(self.url, json=req.to_dict())
        except httpx.TimeoutException as exc:
            raise RemoteError(f"remote generate timed out after {self.timeout_s}s: {exc}") from exc
        except httpx.HTTPError as exc:
            raise RemoteError(f"remote generate transport failure: {exc}") from exc

        if response.status_code < 200 or response.status_code >= 300:
            detail = response.text[:200]
            raise RemoteError(
                f"remote generate returned HTTP {response.status_code}: {detail}",
                status=response.status_code,
            )
        try:
            body = response.json()
        except ValueError as exc:
            raise RemoteError(f"remote generate returned non-JSON body: {exc}") from exc
        answer = body.get("answer")
        if not isinstance(answer, str) or not answer:
            raise RemoteError(f"remote generate body missing answer: {body!r}")
        measured = int((time.monotonic() - started) * 1000)
        latency = body.get("latency_ms", measured)
        if not isinstance(latency, int) or latency < 0:
            latency = measured
        return GenerationResponse(answer=answer, latency_ms=latency, backend=self.name)


def remote_generate(
    endpoint: str, req: GenerationRequest, timeout_s: float = 30.0
) -> GenerationResponse:
    return RemoteBackend(endpoint, timeout_s=timeout_s).generate(req)
