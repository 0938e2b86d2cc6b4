"""Per-page detector scoring: remote HTTP backend plus a deterministic mock.

Scores follow one convention everywhere: lower means more LLM-like.  The
remote backend speaks a small JSON protocol (POST /score, POST
/count_tokens, GET /health) in bounded batches with retries; the mock is a
pure function of (text, seed, profile) so corpora can be scored
reproducibly with no model in the loop.
"""
from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol, Sequence

import requests

from .quality import count_tokens as _heuristic_token_count

LABEL_HUMAN = "human"
LABEL_LLM = "llm"

#: Zero-width marker sequences sitegen embeds in generated prose.  They
#: survive whitespace-normalizing extraction (no spaces involved) and are
#: invisible in rendered text.
LLM_TEXT_MARKER = "​‌​"
HUMAN_TEXT_MARKER = "​‍​"


class ScorerError(RuntimeError):
    """Remote scoring failed; carries the text indices left unscored."""

    def __init__(self, message: str, failed_indices: Sequence[int] = ()):
        super().__init__(message)
        self.failed_indices = tuple(failed_indices)


@dataclass(frozen=True)
class ScoreRequest:
    texts: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "texts", tuple(self.texts))
        if not self.texts:
            raise ValueError("request must contain at least one text")
        if any(not t for t in self.texts):
            raise ValueError("request texts must be non-empty")


@dataclass(frozen=True)
class ScoreResponse:
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if any(not math.isfinite(s) for s in self.scores):
            raise ValueError("scores must be finite")


@dataclass(frozen=True)
class MockProfile:
    """Score distribution for the mock: two gaussian clusters whose overlap
    is widened by deterministic label flips until a single threshold
    separates pages at roughly ``page_accuracy_target``."""

    human_mean: float = 0.96
    llm_mean: float = 0.76
    noise_sd: float = 0.05
    page_accuracy_target: float = 0.93

    def __post_init__(self) -> None:
        if not self.llm_mean < self.human_mean:
            raise ValueError("llm_mean must be below human_mean")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        if not 0.5 < self.page_accuracy_target <= 1.0:
            raise ValueError("page_accuracy_target must be in (0.5, 1]")


def flip_probability(profile: MockProfile) -> float:
    """Label-flip rate that brings best-threshold accuracy down to target.

    With cluster separation d and noise sd, a single optimal threshold
    classifies a fraction a = Phi(d / (2 sd)) correctly; flipping labels
    with probability f yields accuracy (1-f)a + f(1-a).  Solve for f.
    """
    d = profile.human_mean - profile.llm_mean
    a = 0.5 * (1.0 + math.erf(d / (2.0 * profile.noise_sd * math.sqrt(2.0))))
    target = profile.page_accuracy_target
    if target >= a:
        return 0.0
    return (a - target) / (2.0 * a - 1.0)


def _uniforms(text: str, seed: int, purpose: bytes, count: int) -> list[float]:
    """Deterministic U[0,1) doubles from a keyed hash of the text."""
    key = (seed & (2**64 - 1)).to_bytes(8, "big")
    data = text.encode("utf-8")
    out: list[float] = []
    block = 0
    while len(out) < count:
        digest = hashlib.blake2b(
            data, key=key, person=purpose[:16],
            salt=block.to_bytes(8, "big"), digest_size=64).digest()
        for i in range(0, 64, 8):
            out.append((int.from_bytes(digest[i:i + 8], "big") >> 11) / (1 << 53))
            if len(out) == count:
                break
        block += 1
    return out


def _standard_gaussian(text: str, seed: int) -> float:
    # Sum of 12 uniforms minus 6: mean 0, variance 1, and - unlike
    # transcendental-based transforms - bit-identical on every IEEE-754
    # platform because it uses only correctly-rounded additions.
    return sum(_uniforms(text, seed, b"score-noise", 12)) - 6.0


def label_from_markers(text: str) -> str | None:
    """The label a marker token implies, or None when unmarked."""
    if LLM_TEXT_MARKER in text:
        return LABEL_LLM
    if HUMAN_TEXT_MARKER in text:
        return LABEL_HUMAN
    return None


def mock_score(text: str, seed: int, profile: MockProfile = MockProfile(),
               label_hint: str | None = None) -> float:
    """Deterministic pseudo-detector score for one text.

    The label comes from ``label_hint`` when given; otherwise from a marker
    embedded in the text, defaulting to human.  Marker/default labels are
    flipped with the profile's tuned probability (a deterministic function
    of the text and seed) so threshold accuracy lands near the target; an
    explicit hint is authoritative and never flipped.
    """
    if label_hint is not None:
        if label_hint not in (LABEL_HUMAN, LABEL_LLM):
            raise ValueError(f"unknown label hint {label_hint!r}")
        label = label_hint
    else:
        label = label_from_markers(text) or LABEL_HUMAN
        p_flip = flip_probability(profile)
        if p_flip > 0.0:
            (u,) = _uniforms(text, seed, b"label-flip", 1)
            if u < p_flip:
                label = LABEL_LLM if label == LABEL_HUMAN else LABEL_HUMAN
    mean = profile.llm_mean if label == LABEL_LLM else profile.human_mean
    return mean + profile.noise_sd * _standard_gaussian(text, seed)


class ScorerBackend(Protocol):
    def score_texts(self, texts: Sequence[str]) -> list[float]: ...

    def count_tokens(self, texts: Sequence[str]) -> list[int]: ...


def score_texts(backend: ScorerBackend, request: ScoreRequest) -> ScoreResponse:
    """Score a request through any backend, enforcing the length contract."""
    scores = backend.score_texts(request.texts)
    if len(scores) != len(request.texts):
        raise ScorerError(
            f"backend returned {len(scores)} scores for "
            f"{len(request.texts)} texts", range(len(request.texts)))
    return ScoreResponse(scores=tuple(scores))


@dataclass(frozen=True)
class MockScorer:
    """In-process backend: mock scores and heuristic token counts."""

    seed: int = 0
    profile: MockProfile = MockProfile()

    def score_texts(self, texts: Sequence[str]) -> list[float]:
        return [mock_score(t, self.seed, self.profile) for t in texts]

    def count_tokens(self, texts: Sequence[str]) -> list[int]:
        return [_heuristic_token_count(t) for t in texts]

    def health(self) -> dict:
        return {"status": "ok", "model": "mock"}


class RemoteScorer:
    """HTTP client for the scoring service.

    Texts go out in order-preserving batches of ``batch_size`` with at most
    ``concurrency`` requests in flight; each batch is retried up to
    ``max_attempts`` times with exponential backoff.  A batch that still
    fails aborts the whole call with the indices it covered - results are
    all-or-nothing, never silently partial.
    """

    def __init__(self, base_url: str, *, batch_size: int = 16,
                 concurrency: int = 4, max_attempts: int = 3,
                 timeout: float = 30.0, backoff_base: float = 0.5,
                 session: requests.Session | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        if batch_size < 1 or concurrency < 1 or max_attempts < 1:
            raise ValueError("batch_size, concurrency and max_attempts "
                             "must be positive")
        self.base_url = base_url.rstrip("/")
        self.batch_size = batch_size
        self.concurrency = concurrency
        self.max_attempts = max_attempts
        self.timeout = timeout
        self.backoff_base = backoff_base
        self._session = session or requests.Session()
        self._sleep = sleep

    # -- protocol calls ----------------------------------------------------

    def score_texts(self, texts: Sequence[str]) -> list[float]:
        raw = self._batched("/score", "texts", "scores", list(texts))
        scores = [float(s) for s in raw]
        if any(not math.isfinite(s) for s in scores):
            raise ScorerError("service returned non-finite scores")
        return scores

    def count_tokens(self, texts: Sequence[str]) -> list[int]:
        return [int(c) for c in
                self._batched("/count_tokens", "texts", "counts", list(texts))]

    def health(self) -> dict:
        response = self._session.get(self.base_url + "/health",
                                     timeout=self.timeout)
        response.raise_for_status()
        return response.json()

    # -- batching ----------------------------------------------------------

    def _batched(self, endpoint: str, req_key: str, resp_key: str,
                 items: list[str]) -> list:
        if not items:
            return []
        spans = [(start, min(start + self.batch_size, len(items)))
                 for start in range(0, len(items), self.batch_size)]
        results: list = [None] * len(items)

        def run(span: tuple[int, int]) -> None:
            start, end = span
            values = self._call_with_retry(endpoint, req_key, resp_key,
                                           items[start:end], start)
            results[start:end] = values

        if len(spans) == 1 or self.concurrency == 1:
            for span in spans:
                run(span)
        else:
            with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
                for future in [pool.submit(run, span) for span in spans]:
                    future.result()
        return results

    def _call_with_retry(self, endpoint: str, req_key: str, resp_key: str,
                         batch: list[str], offset: int) -> list:
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                response = self._session.post(
                    self.base_url + endpoint, json={req_key: batch},
                    timeout=self.timeout)
                if response.status_code >= 500:
                    raise ScorerError(
                        f"{endpoint} returned {response.status_code}")
                response.raise_for_status()
                values = response.json()[resp_key]
                if not isinstance(values, list) or len(values) != len(batch):
                    raise ScorerError(
                        f"{endpoint} returned {len(values)} values for "
                        f"{len(batch)} texts")
                return values
            except ScorerError as exc:
                last_error = exc
            except (requests.RequestException, ValueError, KeyError) as exc:
                last_error = exc
        indices = range(offset, offset + len(batch))
        raise ScorerError(
            f"{endpoint} failed after {self.max_attempts} attempts for "
            f"texts {indices.start}..{indices.stop - 1}: {last_error}",
            indices) from last_error


def score_pages(backend: ScorerBackend, texts: Iterable[str]) -> list[float]:
    """Convenience wrapper used by the pipeline: list in, list out."""
    return list(score_texts(backend, ScoreRequest(tuple(texts))).scores)
