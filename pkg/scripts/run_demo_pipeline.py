#!/usr/bin/env python3
"""End-to-end demo: dirty corpus -> clean -> analyze -> train -> evaluate.

Everything runs in-process on synthetic data and prints a compact
summary of each stage, ending with the intrinsic-metric report for an
n-gram model answering its own held-out style questions.

Usage:
    python scripts/run_demo_pipeline.py [--workdir demo] [--seed 0]
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from counselqa.analyze import length_stats, word_freq
from counselqa.clean import CleaningConfig, run_pipeline
from counselqa.corpus import Corpus, QAPair, Sample, qa_to_sample, read_corpus
from counselqa.lm import GenerationRequest, train_ngram
from counselqa.metrics import PredictionItem, PredictionSet, evaluate

QA_SEED = [
    ("怎样缓解考试前的焦虑", "考试焦虑是身体在提醒你在乎结果先做几次缓慢的深呼吸再把复习拆成小步骤逐一完成"),
    ("失眠很久应该怎么办", "长期失眠值得认真对待先固定起床时间减少睡前屏幕光照必要时寻求专业帮助"),
    ("和家人沟通总是吵架", "沟通先从表达感受开始而不是指责对方试着说我感到而不是你总是"),
    ("压力大到喘不过气", "压力积累时先照顾基本的休息和饮食把大问题写下来分成可以行动的小块"),
    ("总觉得自己不够好", "自我怀疑很常见试着记录每天完成的三件小事练习像对待朋友那样对待自己"),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="demo")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    # stage 1: synthesize + clean
    corpus_path = workdir / "dirty.txt"
    subprocess.run(
        [sys.executable, str(ROOT / "scripts" / "make_synthetic_corpus.py"),
         "--out", str(corpus_path), "--n", "300", "--seed", str(args.seed)],
        check=True,
    )
    dirty = read_corpus(corpus_path)
    config = CleaningConfig(ad_keywords=["加微信"], min_chars=150)
    clean_corpus, report = run_pipeline(dirty, config)
    print(f"[clean] {report.input_count} -> {report.output_count} samples")
    for rule, stats in report.rules.items():
        if stats.removed or stats.modified:
            print(f"        {rule}: removed={stats.removed} modified={stats.modified}")

    # stage 2: profile
    stats = length_stats(clean_corpus)
    print(f"[analyze] count={stats.count} mean={stats.mean:.0f} p50={stats.p50} max={stats.max}")
    top = word_freq(clean_corpus, tokenizer="unicode", top_k=5)
    print(f"[analyze] top tokens: {', '.join(f'{t}x{c}' for t, c in top.entries)}")

    # stage 3: train an n-gram model on QA-formatted samples
    qa_samples = [
        qa_to_sample(QAPair(question=q, answer=a, id=str(i)), source="synthetic")
        for i, (q, a) in enumerate(QA_SEED * 3)
    ]
    model = train_ngram(Corpus(qa_samples), n=3, k=0.01, tokenizer_mode="char")
    print(f"[train] n=3 char model, |V|={len(model.vocab)}, contexts={len(model.counts)}")

    # stage 4: generate + intrinsic metrics
    items = []
    for i, (question, reference) in enumerate(QA_SEED):
        response = model.generate(
            GenerationRequest(question=question, max_new_tokens=60, seed=args.seed)
        )
        items.append(
            PredictionItem(id=str(i), question=question, reference=reference,
                           prediction=response.answer)
        )
    metric_report = evaluate(PredictionSet(items), backend=model)
    out = workdir / "metrics.json"
    out.write_text(
        json.dumps(metric_report.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(
        f"[eval] perplexity={metric_report.perplexity:.2f} "
        f"rouge_l={metric_report.rouge_l:.2f} "
        f"distinct1={metric_report.distinct1:.2f} distinct2={metric_report.distinct2:.2f}"
    )
    print(f"[eval] full report: {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
