"""HTTP gateway: question answering, rating collection, eval sessions.

The service wires a configured LM backend behind ``POST /api/ask``,
collects four-scale ratings through ``POST /api/rate`` and
``POST /api/eval/submit``, and serves blinded evaluation sessions from
``GET /api/eval/session/{id}``. All state persists as JSONL event logs
(and session JSON files) under the data directory, replayed on startup,
so every acknowledged record survives a process restart.

Generation concurrency is bounded: ``max_concurrent`` requests run at
once, up to ``queue_size`` more wait in FIFO order, and anything beyond
that is refused with 503. Error bodies are ``{"error": "..."}``.
"""

from __future__ import annotations

import asyncio
import json
import logging
import re
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path

import httpx
from fastapi import FastAPI, Header, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from counselqa.errors import (
    CapabilityError,
    ConfigError,
    InputError,
    RangeError,
    RemoteError,
    UnknownItemError,
)
from counselqa.humaneval import EvalSession, RatingRecord, RatingStore, record_rating
from counselqa.lm import (
    GenerationRequest,
    LmBackend,
    NgramModel,
    RemoteBackend,
    TemplateBackend,
    generate,
)

logger = logging.getLogger(__name__)

BACKEND_KINDS = ("template", "ngram", "remote")
_SESSION_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")

ENV_BIND = "COUNSELQA_BIND"
ENV_DATA_DIR = "COUNSELQA_DATA_DIR"


@dataclass
class GenerationDefaults:
    max_new_tokens: int = 200
    temperature: float = 0.0
    seed: int = 0


@dataclass
class GatewayConfig:
    data_dir: Path
    backend_kind: str = "template"
    model_path: Path | None = None
    endpoint: str | None = None
    bind_host: str = "127.0.0.1"
    bind_port: int = 8080
    request_timeout_s: float = 30.0
    max_concurrent: int = 4
    queue_size: int = 16
    max_question_chars: int = 2000
    generation: GenerationDefaults = field(default_factory=GenerationDefaults)

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        if self.backend_kind not in BACKEND_KINDS:
            raise ConfigError(f"unknown backend kind {self.backend_kind!r}")
        if self.backend_kind == "ngram" and not self.model_path:
            raise ConfigError("ngram backend needs model_path")
        if self.backend_kind == "remote" and not self.endpoint:
            raise ConfigError("remote backend needs endpoint")
        if self.request_timeout_s <= 0:
            raise ConfigError(f"request_timeout_s must be > 0, got {self.request_timeout_s}")
        if self.max_concurrent < 1:
            raise ConfigError(f"max_concurrent must be >= 1, got {self.max_concurrent}")
        if self.queue_size < 0:
            raise ConfigError(f"queue_size must be >= 0, got {self.queue_size}")

    @classmethod
    def from_json(cls, path: str | Path, env: dict[str, str] | None = None) -> "GatewayConfig":
        """Load config; COUNSELQA_BIND (host:port) and COUNSELQA_DATA_DIR override."""
        import os

        env = os.environ if env is None else env
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        backend = raw.get("backend", {})
        generation = raw.get("generation", {})
        config = cls(
            data_dir=Path(raw["data_dir"]),
            backend_kind=backend.get("kind", "template"),
            model_path=Path(backend["model_path"]) if backend.get("model_path") else None,
            endpoint=backend.get("endpoint"),
            bind_host=raw.get("bind_host", "127.0.0.1"),
            bind_port=int(raw.get("bind_port", 8080)),
            request_timeout_s=float(raw.get("request_timeout_s", 30.0)),
            max_concurrent=int(raw.get("max_concurrent", 4)),
            queue_size=int(raw.get("queue_size", 16)),
            max_question_chars=int(raw.get("max_question_chars", 2000)),
            generation=GenerationDefaults(
                max_new_tokens=int(generation.get("max_new_tokens", 200)),
                temperature=float(generation.get("temperature", 0.0)),
                seed=int(generation.get("seed", 0)),
            ),
        )
        if env.get(ENV_BIND):
            host, _, port = env[ENV_BIND].rpartition(":")
            config.bind_host = host or config.bind_host
            config.bind_port = int(port)
        if env.get(ENV_DATA_DIR):
            config.data_dir = Path(env[ENV_DATA_DIR])
        return config


@dataclass(frozen=True)
class AskRecord:
    answer_id: str
    question: str
    answer: str
    backend: str
    latency_ms: int
    created_at: str

    def to_dict(self) -> dict:
        return asdict(self)


class AskStore:
    """Append-only JSONL log of AskRecords, replayed to a dict on load."""

    def __init__(self, path: Path):
        self.path = path
        self._lock = threading.Lock()
        self.records: dict[str, AskRecord] = {}
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                obj = json.loads(line)
                record = AskRecord(**obj)
                self.records[record.answer_id] = record

    def append(self, record: AskRecord) -> None:
        line = json.dumps(record.to_dict(), ensure_ascii=False) + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
            self.records[record.answer_id] = record

    def __contains__(self, answer_id: str) -> bool:
        return answer_id in self.records


def build_backend(config: GatewayConfig) -> LmBackend:
    if config.backend_kind == "template":
        return TemplateBackend()
    if config.backend_kind == "ngram":
        return NgramModel.load(config.model_path)
    return RemoteBackend(config.endpoint, timeout_s=config.request_timeout_s)


class _FourScores(BaseModel):
    helpfulness: int = Field(ge=1, le=5)
    fluency: int = Field(ge=1, le=5)
    relevance: int = Field(ge=1, le=5)
    logic: int = Field(ge=1, le=5)


class AskBody(BaseModel):
    question: str


class RateBody(_FourScores):
    answer_id: str


class SubmitBody(_FourScores):
    session_id: str
    item_id: str
    rater_id: str | None = None


def _anon_rater() -> str:
    return f"anon-{uuid.uuid4().hex[:12]}"


def create_app(config: GatewayConfig) -> FastAPI:
    config.data_dir.mkdir(parents=True, exist_ok=True)
    (config.data_dir / "sessions").mkdir(exist_ok=True)

    backend = build_backend(config)
    asks = AskStore(config.data_dir / "asks.jsonl")
    ratings = RatingStore(config.data_dir / "ratings.jsonl")

    app = FastAPI(title="counselqa gateway", version="0.1.0")
    # the rating UI is served from a separate static host, so the public,
    # unauthenticated API must answer cross-origin requests
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.config = config
    app.state.backend = backend
    app.state.asks = asks
    app.state.ratings = ratings
    app.state.started = time.monotonic()
    app.state.semaphore = asyncio.Semaphore(config.max_concurrent)
    app.state.pending = 0
    app.state.pending_lock = threading.Lock()

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        return JSONResponse(status_code=exc.status_code, content={"error": str(exc.detail)})

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"error": str(exc.errors())})

    def load_session(session_id: str) -> EvalSession:
        if not _SESSION_ID_RE.match(session_id):
            raise HTTPException(404, f"unknown session {session_id!r}")
        path = config.data_dir / "sessions" / f"{session_id}.json"
        if not path.exists():
            raise HTTPException(404, f"unknown session {session_id!r}")
        return EvalSession.load(path)

    @app.post("/api/ask")
    async def ask(body: AskBody):
        question = body.question.strip()
        if not question:
            raise HTTPException(400, "question is empty")
        if len(question) > config.max_question_chars:
            raise HTTPException(
                400, f"question exceeds {config.max_question_chars} characters"
            )

        with app.state.pending_lock:
            if app.state.pending >= config.max_concurrent + config.queue_size:
                raise HTTPException(503, "generation queue is full")
            app.state.pending += 1
        try:
            request = GenerationRequest(
                question=question,
                max_new_tokens=config.generation.max_new_tokens,
                temperature=config.generation.temperature,
                seed=config.generation.seed,
            )
            async with app.state.semaphore:
                try:
                    response = await asyncio.wait_for(
                        asyncio.to_thread(generate, backend, request),
                        timeout=config.request_timeout_s,
                    )
                except asyncio.TimeoutError:
                    raise HTTPException(504, "generation timed out")
                except (RemoteError, CapabilityError) as exc:
                    raise HTTPException(503, f"backend unavailable: {exc}")
        finally:
            with app.state.pending_lock:
                app.state.pending -= 1

        record = AskRecord(
            answer_id=f"ans-{uuid.uuid4().hex[:16]}",
            question=question,
            answer=response.answer,
            backend=response.backend,
            latency_ms=response.latency_ms,
            created_at=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        )
        asks.append(record)
        return {
            "answer_id": record.answer_id,
            "answer": record.answer,
            "latency_ms": record.latency_ms,
        }

    @app.post("/api/rate")
    async def rate(body: RateBody, x_rater_id: str | None = Header(default=None)):
        if body.answer_id not in asks:
            raise HTTPException(404, f"unknown answer_id {body.answer_id!r}")
        try:
            record = RatingRecord(
                rater_id=x_rater_id or _anon_rater(),
                item_id=body.answer_id,
                helpfulness=body.helpfulness,
                fluency=body.fluency,
                relevance=body.relevance,
                logic=body.logic,
            )
        except RangeError as exc:
            raise HTTPException(422, str(exc))
        ratings.append(record)
        return {"ok": True}

    @app.get("/api/eval/session/{session_id}")
    async def get_session(session_id: str):
        return load_session(session_id).to_rater_payload()

    @app.post("/api/eval/submit")
    async def submit(body: SubmitBody):
        session = load_session(body.session_id)
        if session.status != "open":
            raise HTTPException(409, f"session {session.session_id} is {session.status}")
        try:
            record = RatingRecord(
                rater_id=body.rater_id or _anon_rater(),
                item_id=body.item_id,
                helpfulness=body.helpfulness,
                fluency=body.fluency,
                relevance=body.relevance,
                logic=body.logic,
            )
            record_rating(ratings, record, session)
        except RangeError as exc:
            raise HTTPException(422, str(exc))
        except UnknownItemError as exc:
            raise HTTPException(404, str(exc))
        except InputError as exc:
            raise HTTPException(409, str(exc))
        return {"ok": True}

    @app.get("/api/health")
    async def health():
        uptime = int(time.monotonic() - app.state.started)
        if config.backend_kind == "remote":
            reachable = await asyncio.to_thread(_probe_remote, config.endpoint)
            if not reachable:
                raise HTTPException(503, "remote backend unreachable")
        return {"status": "ok", "backend": backend.name, "uptime_s": uptime}

    return app


def _probe_remote(endpoint: str, timeout_s: float = 2.0) -> bool:
    """Any HTTP response (even an error status) proves reachability."""
    try:
        httpx.get(endpoint, timeout=timeout_s)
        return True
    except httpx.HTTPError:
        return False


def run_server(config: GatewayConfig) -> None:
    import uvicorn

    app = create_app(config)
    logger.info(
        "serving %s backend on %s:%s (data: %s)",
        config.backend_kind, config.bind_host, config.bind_port, config.data_dir,
    )
    uvicorn.run(app, host=config.bind_host, port=config.bind_port, log_level="warning")
