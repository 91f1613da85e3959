"""Tokenizers shared by analysis, language modelling, and metrics.

Two modes are supported everywhere a tokenizer can be chosen:

* ``char`` -- every non-whitespace Unicode scalar is one token. This is
  the default for Chinese metrics; it needs no segmenter.
* ``unicode`` -- CJK ideographs tokenize one character at a time while
  runs of other word characters (Latin, digits, underscore) form one
  token, so mixed text like ``"我用Python三年了"`` splits into
  ``["我", "用", "Python", "三", "年", "了"]``.
"""

from __future__ import annotations

import re

from counselqa.errors import ConfigError

CHAR = "char"
UNICODE_WORD = "unicode"

TOKENIZER_MODES = (CHAR, UNICODE_WORD)

# CJK unified ideographs, extension A, and the compatibility block.
_CJK = "一-鿿㐀-䶿豈-﫿"
_WORD_RE = re.compile(rf"[{_CJK}]|(?:(?![{_CJK}])\w)+")


def tokenize(text: str, mode: str = CHAR) -> list[str]:
    """Split ``text`` into tokens according to ``mode``."""
    if mode == CHAR:
        return [ch for ch in text if not ch.isspace()]
    if mode == UNICODE_WORD:
        return _WORD_RE.findall(text)
    raise ConfigError(f"unknown tokenizer mode {mode!r}; expected one of {TOKENIZER_MODES}")


def detokenize(tokens: list[str], mode: str = CHAR) -> str:
    """Join tokens back into display text (chars adjacent, words spaced)."""
    if mode == CHAR:
        return "".join(tokens)
    if mode == UNICODE_WORD:
        return " ".join(tokens)
    raise ConfigError(f"unknown tokenizer mode {mode!r}; expected one of {TOKENIZER_MODES}")
