"""Single CLI entry point: every pipeline stage as a subcommand.

Exit codes: 0 success, 1 usage error, 2 runtime error. With ``--json``,
errors print to stderr as single-line JSON. Every subcommand that writes
a primary output also writes ``<output>.manifest.json`` recording the
subcommand, a stable hash of its effective configuration, input/output
paths, tool version, and wall time. Re-running a subcommand with the
same inputs and seed produces byte-identical primary outputs (manifests
differ only in wall time).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from counselqa import __version__
from counselqa.analyze import length_stats, load_stopwords, word_freq
from counselqa.clean import CleaningConfig, run_pipeline
from counselqa.corpus import parse_qa, read_corpus, write_corpus
from counselqa.errors import EmptyInputError, FormatError, PipelineError
from counselqa.gateway import GatewayConfig, run_server
from counselqa.humaneval import (
    EvalSession,
    RatingStore,
    aggregate,
    build_session,
)
from counselqa.ingest import ingest, load_rules
from counselqa.lm import (
    GenerationRequest,
    NgramModel,
    RemoteBackend,
    TemplateBackend,
    train_ngram,
)
from counselqa.metrics import PredictionItem, PredictionSet, evaluate

logger = logging.getLogger("counselqa")

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this artifact reserves 2 for runtime."""

    def error(self, message):
        raise _UsageError(message)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_manifest(
    output: Path, subcommand: str, config: dict, inputs: list[str], started: float
) -> None:
    manifest = {
        "subcommand": subcommand,
        "config_hash": _config_hash(config),
        "inputs": sorted(inputs),
        "outputs": [str(output)],
        "tool_version": __version__,
        "wall_time_s": round(time.monotonic() - started, 3),
    }
    _write_json(Path(str(output) + ".manifest.json"), manifest)


# -- subcommand handlers -----------------------------------------------------


def _cmd_ingest(args) -> int:
    started = time.monotonic()
    rules = load_rules(args.rules)
    corpus, report = ingest(rules, args.archive)
    write_corpus(corpus, args.out)
    if args.report:
        _write_json(Path(args.report), report.to_dict())
    logger.info(
        "ingest: %d files, %d samples, %d failures",
        report.files_seen, report.samples_emitted, len(report.failures),
    )
    config = {"rules": str(args.rules), "archive": str(args.archive)}
    _write_manifest(Path(args.out), "ingest", config, [str(args.rules), str(args.archive)], started)
    return 0


def _cmd_clean(args) -> int:
    started = time.monotonic()
    config = CleaningConfig.from_json(args.config) if args.config else CleaningConfig()
    corpus = read_corpus(args.in_path)
    cleaned, report = run_pipeline(corpus, config)
    write_corpus(cleaned, args.out)
    if args.report:
        _write_json(Path(args.report), report.to_dict())
    logger.info(
        "clean: %d -> %d samples (%d removed)",
        report.input_count, report.output_count, report.total_removed,
    )
    _write_manifest(Path(args.out), "clean", config.to_dict(), [str(args.in_path)], started)
    return 0


def _cmd_analyze(args) -> int:
    started = time.monotonic()
    corpus = read_corpus(args.in_path)
    stopwords = load_stopwords(args.stopwords) if args.stopwords else set()
    stats = length_stats(corpus)
    freq = word_freq(corpus, stopwords=stopwords, tokenizer=args.tokenizer, top_k=args.top_k)
    _write_json(
        Path(args.out),
        {"length_stats": stats.to_dict(), "word_freq": freq.to_dict()},
    )
    logger.info("analyze: %d samples profiled", stats.count)
    config = {
        "tokenizer": args.tokenizer,
        "top_k": args.top_k,
        "stopwords": str(args.stopwords) if args.stopwords else None,
    }
    _write_manifest(Path(args.out), "analyze", config, [str(args.in_path)], started)
    return 0


def _cmd_train_ngram(args) -> int:
    started = time.monotonic()
    corpus = read_corpus(args.in_path)
    model = train_ngram(
        corpus,
        n=args.n,
        k=args.k,
        tokenizer_mode=args.tokenizer,
        max_tokens_per_sample=args.max_tokens_per_sample,
    )
    model.save(args.out)
    logger.info("train-ngram: |V|=%d over %d contexts", len(model.vocab), len(model.counts))
    config = {
        "n": args.n, "k": args.k, "tokenizer": args.tokenizer,
        "max_tokens_per_sample": args.max_tokens_per_sample,
    }
    _write_manifest(Path(args.out), "train-ngram", config, [str(args.in_path)], started)
    return 0


def _build_generation_backend(args):
    if args.backend == "template":
        return TemplateBackend()
    if args.backend == "ngram":
        if not args.model:
            raise _UsageError("--backend ngram needs --model")
        return NgramModel.load(args.model)
    if not args.endpoint:
        raise _UsageError("--backend remote needs --endpoint")
    return RemoteBackend(args.endpoint)


def _cmd_generate(args) -> int:
    started = time.monotonic()
    backend = _build_generation_backend(args)

    def ask(question: str, seed: int):
        request = GenerationRequest(
            question=question,
            max_new_tokens=args.max_new_tokens,
            temperature=args.temperature,
            seed=seed,
        )
        return backend.generate(request)

    if args.question is not None:
        response = ask(args.question, args.seed)
        print(response.answer)
        return 0

    if not args.qa_corpus or not args.out:
        raise _UsageError("generate needs either --question or --qa-corpus with --out")
    corpus = read_corpus(args.qa_corpus)
    items = []
    for sample in corpus:
        try:
            pair = parse_qa(sample)
        except FormatError as exc:
            logger.warning("skipping sample %s: %s", sample.id, exc)
            continue
        response = ask(pair.question, args.seed)
        items.append(
            PredictionItem(
                id=sample.id,
                question=pair.question,
                reference=pair.answer,
                prediction=response.answer,
            )
        )
    if not items:
        raise EmptyInputError(f"{args.qa_corpus}: no QA samples to answer")
    PredictionSet(items).to_jsonl(args.out)
    logger.info("generate: %d predictions via %s", len(items), backend.name)
    config = {
        "backend": args.backend, "model": str(args.model) if args.model else None,
        "endpoint": args.endpoint, "max_new_tokens": args.max_new_tokens,
        "temperature": args.temperature, "seed": args.seed,
    }
    _write_manifest(Path(args.out), "generate", config, [str(args.qa_corpus)], started)
    return 0


def _cmd_eval_intrinsic(args) -> int:
    started = time.monotonic()
    pred_set = PredictionSet.from_jsonl(args.pred)
    backend = NgramModel.load(args.model) if args.model else None
    report = evaluate(
        pred_set,
        backend=backend,
        tokenizer_mode=args.tokenizer,
        distinct_aggregation=args.distinct_aggregation,
    )
    _write_json(Path(args.out), report.to_dict())
    logger.info(
        "eval-intrinsic: rouge_l=%.2f distinct1=%.2f distinct2=%.2f",
        report.rouge_l, report.distinct1, report.distinct2,
    )
    config = {
        "tokenizer": args.tokenizer,
        "distinct_aggregation": args.distinct_aggregation,
        "model": str(args.model) if args.model else None,
    }
    _write_manifest(Path(args.out), "eval-intrinsic", config, [str(args.pred)], started)
    return 0


def _cmd_eval_human(args) -> int:
    started = time.monotonic()
    required = {
        "build": ("items", "out"),
        "export": ("session", "out"),
        "aggregate": ("session", "ratings", "out"),
    }[args.action]
    missing = [f"--{name}" for name in required if not getattr(args, name)]
    if missing:
        raise _UsageError(f"eval-human {args.action} needs {', '.join(missing)}")
    if args.action == "build":
        spec = json.loads(Path(args.items).read_text(encoding="utf-8"))
        session = build_session(
            mode=args.mode,
            questions=spec["questions"],
            answers_by_origin=spec["answers_by_origin"],
            n_raters=args.raters,
            seed=args.seed,
            overlap=args.overlap,
            session_id=args.session_id,
        )
        session.save(args.out)
        logger.info("eval-human build: %d items for %d raters", len(session.items), args.raters)
        config = {
            "mode": args.mode, "raters": args.raters,
            "overlap": args.overlap, "seed": args.seed, "session_id": args.session_id,
        }
        _write_manifest(Path(args.out), "eval-human", config, [str(args.items)], started)
        return 0
    if args.action == "export":
        session = EvalSession.load(args.session)
        _write_json(Path(args.out), session.to_rater_payload())
        config = {"action": "export"}
        _write_manifest(Path(args.out), "eval-human", config, [str(args.session)], started)
        return 0
    # aggregate
    session = EvalSession.load(args.session)
    table = aggregate(RatingStore(args.ratings), session)
    _write_json(Path(args.out), table)
    logger.info("eval-human aggregate: origins=%s", ",".join(table["origins"]))
    config = {"action": "aggregate"}
    _write_manifest(
        Path(args.out), "eval-human", config, [str(args.session), str(args.ratings)], started
    )
    return 0


def _cmd_serve(args) -> int:
    config = GatewayConfig.from_json(args.config)
    run_server(config)
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="counselqa", description=__doc__)
    parser.add_argument("--json", action="store_true", help="machine-readable errors on stderr")
    parser.add_argument("--seed", type=int, default=0, help="seed for seeded subcommands")
    parser.add_argument("--quiet", action="store_true", help="suppress progress logging")
    parser.add_argument("--version", action="version", version=f"counselqa {__version__}")

    # the same globals are accepted after the subcommand; SUPPRESS keeps a
    # subcommand-level absence from clobbering a value parsed at the root
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)

    p = sub.add_parser("ingest", help="extract samples from an HTML/JSON archive", parents=[common])
    p.add_argument("--rules", required=True)
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("clean", help="run the cleaning pipeline over a corpus", parents=[common])
    p.add_argument("--config")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_clean)

    p = sub.add_parser("analyze", help="length distribution + word frequency", parents=[common])
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--stopwords")
    p.add_argument("--tokenizer", choices=["unicode", "char"], default="unicode")
    p.add_argument("--top-k", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("train-ngram", help="train the add-k n-gram model", parents=[common])
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--k", type=float, default=0.01)
    p.add_argument("--tokenizer", choices=["char", "unicode"], default="char")
    p.add_argument("--max-tokens-per-sample", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_ngram)

    p = sub.add_parser("generate", help="answer one question or a QA corpus", parents=[common])
    p.add_argument("--backend", choices=["template", "ngram", "remote"], default="template")
    p.add_argument("--model")
    p.add_argument("--endpoint")
    p.add_argument("--question")
    p.add_argument("--qa-corpus")
    p.add_argument("--out")
    p.add_argument("--max-new-tokens", type=int, default=200)
    p.add_argument("--temperature", type=float, default=0.0)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("eval-intrinsic", help="perplexity / ROUGE-L / distinct-n report", parents=[common])
    p.add_argument("--pred", required=True)
    p.add_argument("--model")
    p.add_argument("--tokenizer", choices=["char", "unicode"], default="char")
    p.add_argument(
        "--distinct-aggregation",
        choices=["per-response-mean", "pooled"],
        default="per-response-mean",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval_intrinsic)

    p = sub.add_parser("eval-human", help="build/export/aggregate rating sessions", parents=[common])
    p.add_argument("action", choices=["build", "export", "aggregate"])
    p.add_argument("--items", help="build: JSON with questions + answers_by_origin")
    p.add_argument("--mode", choices=["pairwise", "blended"], default="blended")
    p.add_argument("--raters", type=int, default=1)
    p.add_argument("--overlap", type=int, default=0)
    p.add_argument("--session-id", default="session-0")
    p.add_argument("--session", help="export/aggregate: session JSON path")
    p.add_argument("--ratings", help="aggregate: ratings JSONL path")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval_human)

    p = sub.add_parser("serve", help="run the HTTP gateway", parents=[common])
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_serve)

    return parser


def _fail(message: str, code: int, as_json: bool) -> int:
    if as_json:
        print(json.dumps({"error": message, "exit_code": code}), file=sys.stderr)
    else:
        print(f"counselqa: error: {message}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    as_json = "--json" in argv
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail(str(exc), USAGE_EXIT, as_json)

    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return _fail("a subcommand is required", USAGE_EXIT, as_json)

    try:
        return args.func(args)
    except _UsageError as exc:
        return _fail(str(exc), USAGE_EXIT, args.json)
    except PipelineError as exc:
        return _fail(f"{type(exc).__name__}: {exc}", RUNTIME_EXIT, args.json)
    except OSError as exc:
        return _fail(f"IoError: {exc}", RUNTIME_EXIT, args.json)


if __name__ == "__main__":
    sys.exit(main())
