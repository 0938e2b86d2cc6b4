"""Interpolated n-gram causal language models over the shared tokenizer.

Both service models are built from the same bundled training corpus and
differ only in their interpolation weights: the observer leans on trigram
context, the performer on shorter bigram context — a paired model family
in miniature.  Every probability is a pure function of the corpus and the
weights, so scores are bit-stable across processes and platforms.

A model's conditional distribution is a sparse part (observed trigram and
bigram continuations of the context) plus a uniform floor over the
vocabulary and one unknown-token slot, which keeps each distribution an
exact convex combination summing to one and every log-probability finite.
"""
from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping

from .tokenizer import detokenize, tokenize

BOS = "<s>"


class ModelError(RuntimeError):
    """A model id that cannot be loaded."""


@dataclass(frozen=True)
class NgramTables:
    """Shared corpus statistics: context -> continuation counts."""

    vocab: tuple[str, ...]
    trigram: Mapping[tuple[str, str], Mapping[str, int]]
    bigram: Mapping[str, Mapping[str, int]]

    @property
    def floor_slots(self) -> int:
        # Vocabulary plus one slot standing in for every unseen token.
        return len(self.vocab) + 1


def build_tables(corpus_text: str) -> NgramTables:
    """Count trigram/bigram continuations, one sequence per corpus line."""
    trigram: dict[tuple[str, str], Counter[str]] = {}
    bigram: dict[str, Counter[str]] = {}
    vocab: set[str] = set()
    for line in corpus_text.splitlines():
        tokens = tokenize(line)
        if not tokens:
            continue
        vocab.update(tokens)
        h2, h1 = BOS, BOS
        for token in tokens:
            trigram.setdefault((h2, h1), Counter())[token] += 1
            bigram.setdefault(h1, Counter())[token] += 1
            h2, h1 = h1, token
    if not vocab:
        raise ModelError("training corpus produced an empty vocabulary")
    return NgramTables(vocab=tuple(sorted(vocab)),
                       trigram={k: dict(v) for k, v in trigram.items()},
                       bigram={k: dict(v) for k, v in bigram.items()})


@dataclass(frozen=True)
class ModelSpec:
    """Interpolation weights of one family member; they must sum to 1."""

    trigram_weight: float
    bigram_weight: float
    floor_weight: float

    def __post_init__(self) -> None:
        weights = (self.trigram_weight, self.bigram_weight,
                   self.floor_weight)
        if any(w < 0 for w in weights) or self.floor_weight <= 0:
            raise ModelError("weights must be >= 0 with a positive floor")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ModelError(f"weights must sum to 1, got {sum(weights)}")


MODEL_REGISTRY: dict[str, ModelSpec] = {
    "ngram-observer-v1": ModelSpec(trigram_weight=0.70, bigram_weight=0.25,
                                   floor_weight=0.05),
    "ngram-performer-v1": ModelSpec(trigram_weight=0.35, bigram_weight=0.55,
                                    floor_weight=0.10),
}


def default_corpus() -> str:
    return (resources.files("scorer_service") / "data"
            / "training_corpus.txt").read_text(encoding="utf-8")


class NgramModel:
    """One family member: deterministic conditional token distributions."""

    def __init__(self, model_id: str, tables: NgramTables):
        spec = MODEL_REGISTRY.get(model_id)
        if spec is None:
            raise ModelError(f"unknown model id: {model_id!r}")
        self.model_id = model_id
        self.spec = spec
        self.tables = tables
        self._cache: dict[tuple[str, str], tuple[dict[str, float], float]] = {}

    def distribution(self, h2: str, h1: str) -> tuple[dict[str, float], float]:
        """(sparse probabilities, per-token floor) for the next token.

        Any token absent from the sparse part has probability exactly
        ``floor``; the sparse entries already include the floor.
        """
        key = (h2, h1)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        tri = self.tables.trigram.get(key)
        bi = self.tables.bigram.get(h1)
        parts = []
        if tri:
            parts.append((self.spec.trigram_weight, tri))
        if bi:
            parts.append((self.spec.bigram_weight, bi))
        floor_weight = self.spec.floor_weight
        scale = 1.0 / (sum(w for w, _ in parts) + floor_weight)

        floor = floor_weight * scale / self.tables.floor_slots
        sparse: dict[str, float] = {}
        for weight, counts in parts:
            total = sum(counts.values())
            for token, count in counts.items():
                sparse[token] = (sparse.get(token, 0.0)
                                 + weight * scale * count / total)
        for token in sparse:
            sparse[token] += floor
        result = (sparse, floor)
        self._cache[key] = result
        return result

    def logprob(self, h2: str, h1: str, token: str) -> float:
        sparse, floor = self.distribution(h2, h1)
        return math.log(sparse.get(token, floor))


def cross_entropy(performer: NgramModel, observer: NgramModel,
                  h2: str, h1: str) -> float:
    """- sum_v P_performer(v|ctx) * log P_observer(v|ctx), exactly.

    Both distributions are sparse plus a uniform floor, so the sum runs
    over the union of sparse supports with one closed-form term for the
    remaining floor mass.
    """
    p_sparse, p_floor = performer.distribution(h2, h1)
    o_sparse, o_floor = observer.distribution(h2, h1)
    # Sorted so the accumulation order - and hence the exact float - never
    # depends on the process's string-hash seed.
    support = sorted(set(p_sparse) | set(o_sparse))
    total = 0.0
    for token in support:
        p = p_sparse.get(token, p_floor)
        total -= p * math.log(o_sparse.get(token, o_floor))
    rest = (performer.tables.floor_slots - len(support)) * p_floor
    total -= rest * math.log(o_floor)
    return total


def sample_tokens(model: NgramModel, rng: random.Random,
                  max_tokens: int = 120, stop_sentences: int = 4) -> list[str]:
    """Draw a token sequence from the model; deterministic given the rng."""
    h2, h1 = BOS, BOS
    tokens: list[str] = []
    sentences = 0
    vocab = model.tables.vocab
    while len(tokens) < max_tokens:
        sparse, floor = model.distribution(h2, h1)
        r = rng.random()
        chosen = None
        for token in sorted(sparse):
            r -= sparse[token]
            if r <= 0:
                chosen = token
                break
        if chosen is None:
            # Floor region: a uniform pick over the vocabulary.
            chosen = vocab[rng.randrange(len(vocab))]
        tokens.append(chosen)
        if chosen.endswith("."):
            sentences += 1
            if sentences >= stop_sentences:
                break
        h2, h1 = h1, chosen
    return tokens


def sample_text(model: NgramModel, rng: random.Random,
                max_tokens: int = 120, stop_sentences: int = 4) -> str:
    return detokenize(sample_tokens(model, rng, max_tokens, stop_sentences))


def build_models(observer_id: str, performer_id: str,
                 corpus_text: str | None = None,
                 ) -> tuple[NgramModel, NgramModel]:
    """The configured pair over one shared corpus and tokenizer."""
    tables = build_tables(corpus_text if corpus_text is not None
                          else default_corpus())
    return NgramModel(observer_id, tables), NgramModel(performer_id, tables)
