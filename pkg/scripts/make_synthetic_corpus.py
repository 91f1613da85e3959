#!/usr/bin/env python3
"""Generate a deliberately dirty demo corpus plus a cleaning config.

The corpus seeds every kind of noise the cleaning pipeline targets
(URLs, mentions, timestamps, repeated punctuation, traditional
characters, ad keywords, short samples, duplicates) so the clean
subcommand has something to chew on.

Usage:
    python scripts/make_synthetic_corpus.py --out demo/corpus.txt --n 400
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from counselqa.corpus import Corpus, Sample, write_corpus

FILLER = "心理健康咨询情绪支持倾听理解成长希望平静呼吸练习陪伴信任"

DIRT = [
    lambda i: f" 详情见 https://example.com/post/{i} 谢谢",
    lambda i: f" @热心网友{i} 回复了你",
    lambda i: f" 发布于 2021-0{i % 9 + 1}-1{i % 9} 08:3{i % 9}",
    lambda i: " 真的吗？？？！！！",
    lambda i: " 愛與被愛都需要練習",
]


def base_text(i: int, length: int = 170) -> str:
    return (f"样本{i:05d}" + FILLER * (length // len(FILLER) + 1))[:length]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="corpus output path")
    parser.add_argument("--config-out", help="cleaning config path (default <out dir>/clean-config.json)")
    parser.add_argument("--n", type=int, default=400, help="total samples")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    texts: list[str] = []
    for i in range(args.n):
        roll = rng.random()
        if roll < 0.45:
            texts.append(base_text(i))
        elif roll < 0.75:
            dirt = rng.choice(DIRT)
            texts.append(base_text(i) + dirt(i))
        elif roll < 0.85:
            texts.append(f"太短的样本{i}")
        elif roll < 0.92:
            texts.append(base_text(i) + " 想赚钱请加微信咨询")
        elif roll < 0.97 and texts:
            texts.append(rng.choice(texts))  # duplicate of an earlier sample
        else:
            texts.append(f"https://only-a-link.example/{i}")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus(Corpus([Sample(id=str(i), text=t) for i, t in enumerate(texts)]), out)

    config_path = Path(args.config_out) if args.config_out else out.parent / "clean-config.json"
    config_path.write_text(
        json.dumps({"ad_keywords": ["加微信"], "min_chars": 150}, ensure_ascii=False, indent=2)
        + "\n",
        encoding="utf-8",
    )
    print(f"wrote {len(texts)} samples to {out}")
    print(f"wrote cleaning config to {config_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
