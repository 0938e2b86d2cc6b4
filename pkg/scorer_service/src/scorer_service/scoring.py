"""Two-model perplexity-ratio scoring: lower means more machine-like.

A text's score is the observer's log-perplexity of the actual tokens
divided by the observer/performer cross-perplexity at the same positions.
Text the model family itself would produce is unsurprising to the
observer relative to the performer's expectation, pulling the ratio down;
prose from outside the family pushes it up.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .lm import BOS, NgramModel, cross_entropy
from .tokenizer import tokenize


class EmptyTextError(ValueError):
    """A text that tokenizes to zero tokens cannot be scored."""


@dataclass(frozen=True)
class PerplexityRatioScorer:
    """Deterministic scorer over a fixed observer/performer pair."""

    observer: NgramModel
    performer: NgramModel
    max_input_tokens: int

    def score_text(self, text: str) -> float:
        # Truncation keeps the head: caps exist for memory, not semantics.
        tokens = tokenize(text)[: self.max_input_tokens]
        if not tokens:
            raise EmptyTextError("text tokenizes to zero tokens")
        nll = 0.0
        xent = 0.0
        h2, h1 = BOS, BOS
        for token in tokens:
            nll -= self.observer.logprob(h2, h1, token)
            xent += cross_entropy(self.performer, self.observer, h2, h1)
            h2, h1 = h1, token
        return (nll / len(tokens)) / (xent / len(tokens))

    def score_texts(self, texts: Sequence[str]) -> list[float]:
        return [self.score_text(text) for text in texts]


def auc_human_over_generated(human_scores: Sequence[float],
                             generated_scores: Sequence[float]) -> float:
    """P(human score > generated score), ties counted half (rank AUC)."""
    if not human_scores or not generated_scores:
        raise ValueError("both score lists must be non-empty")
    wins = 0.0
    for h in human_scores:
        for g in generated_scores:
            if h > g:
                wins += 1.0
            elif h == g:
                wins += 0.5
    return wins / (len(human_scores) * len(generated_scores))
