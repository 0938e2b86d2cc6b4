"""Deterministic subword tokenizer shared by the observer and performer.

Text splits on whitespace into pieces; each piece splits into alphanumeric
runs and single punctuation characters; alphanumeric runs are lowercased
and chopped into fixed-width chunks.  The first token of every piece
carries a word marker so token streams can be rendered back to text.

Counts are exact and concatenation can only merge tokens at the seam,
never create new ones, so count(a) + count(b) >= count(a + b) always
holds and the empty string counts zero.
"""
from __future__ import annotations

import re
from typing import Iterable

WORD_MARKER = "▁"  # lower one-eighth block, marks a word start
CHUNK_CHARS = 4
_RUN_RE = re.compile(r"[0-9A-Za-z]+|[^0-9A-Za-z\s]")


def tokenize(text: str) -> list[str]:
    """The token sequence for ``text``; deterministic, never empty chunks."""
    tokens: list[str] = []
    for piece in text.split():
        first = True
        for run in _RUN_RE.findall(piece):
            if run[0].isalnum():
                run = run.lower()
                for i in range(0, len(run), CHUNK_CHARS):
                    prefix = WORD_MARKER if first else ""
                    tokens.append(prefix + run[i:i + CHUNK_CHARS])
                    first = False
            else:
                prefix = WORD_MARKER if first else ""
                tokens.append(prefix + run)
                first = False
    return tokens


def count_tokens(text: str) -> int:
    return len(tokenize(text))


def detokenize(tokens: Iterable[str]) -> str:
    """Render a token stream back to readable text (word markers become
    spaces); inverse of tokenize up to case and whitespace runs."""
    return "".join(tokens).replace(WORD_MARKER, " ").strip()
