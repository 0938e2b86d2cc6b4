"""Page-compliance gates.

A page reaches the detector only if it is English, long enough to score
reliably (>= 200 tokens by default), not mostly duplicated within its site,
and passes a relaxed repetition/quality rule table applied to the text after
lines without terminal punctuation have been removed.  Every gate reports
its value even when another gate already failed, so diagnostics stay
complete.
"""
from __future__ import annotations

import re
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

if TYPE_CHECKING:  # pragma: no cover
    from degentweb.corpus import PageRecord

# Default terminal-punctuation set for line cleaning.  The strict variant
# drops '.' and the straight quote; it exists as a policy switch because it
# removes nearly all plain prose.
TERMINAL_PUNCTUATION = ':?!"”.'
STRICT_TERMINAL_PUNCTUATION = ":?!”"

_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_", re.UNICODE)
_EDGE_STRIP_RE = re.compile(r"^\W+|\W+$", re.UNICODE)
_BULLET_CHARS = "•-*‣"

# 50 highest-frequency English words; a text with almost none of these is
# not English prose.
ENGLISH_STOPWORDS = frozenset(
    "the be to of and a in that have i it for not on with he as you do at "
    "this but his by from they we say her she or an will my one all would "
    "there their what so up out if about who get which go me".split()
)


class QualityError(ValueError):
    """Raised when a gate is asked to assess an impossible input."""


@dataclass(frozen=True)
class GopherThresholds:
    """Rule-table bounds; a rule fails only on strict violation."""

    max_frac_chars_top_bigram: float = 0.20
    max_frac_chars_top_trigram: float = 0.18
    max_frac_chars_top_4gram: float = 0.16
    max_frac_chars_dup_5gram: float = 0.15
    max_frac_chars_dup_6gram: float = 0.14
    max_frac_chars_dup_7gram: float = 0.13
    max_frac_chars_dup_8gram: float = 0.12
    max_frac_chars_dup_9gram: float = 0.11
    max_frac_chars_dup_10gram: float = 0.10
    min_words: int = 50
    max_words: int = 100_000
    min_median_word_len: float = 3.0
    max_median_word_len: float = 10.0
    max_symbol_word_ratio: float = 0.10
    min_frac_alpha_words: float = 0.80
    required_words: tuple[str, ...] = ("the", "be", "to", "of", "and", "that",
                                       "have", "with")
    min_required_word_hits: int = 2
    max_frac_bullet_lines: float = 0.90
    max_frac_ellipsis_lines: float = 0.30
    max_frac_dup_lines: float = 0.30
    max_frac_chars_in_dup_lines: float = 0.30


@dataclass(frozen=True)
class CompliancePolicy:
    min_tokens: int = 200
    dup_cap: float = 0.5
    gopher: GopherThresholds = field(default_factory=GopherThresholds)
    english_min_stopword_frac: float = 0.03
    terminal_punctuation: str = TERMINAL_PUNCTUATION

    def __post_init__(self) -> None:
        if self.min_tokens < 1:
            raise ValueError("min_tokens must be >= 1")
        if not 0 < self.dup_cap <= 1:
            raise ValueError("dup_cap must be in (0, 1]")


@dataclass(frozen=True)
class ComplianceResult:
    english: bool
    token_count: int
    duplicate_ratio: float
    gopher_pass: bool
    failed_rules: tuple[str, ...]
    compliant: bool


def clean_nopunc(text: str, terminal_chars: str = TERMINAL_PUNCTUATION) -> tuple[str, float]:
    """Drop lines whose last non-whitespace character is not terminal.

    Returns the cleaned text and the fraction of lines removed.  The
    fraction is diagnostic only — it is never a rejection criterion.  Blank
    lines count as removed.
    """
    if not text:
        return "", 0.0
    lines = text.split("\n")
    kept = [line for line in lines
            if line.rstrip() and line.rstrip()[-1] in terminal_chars]
    return "\n".join(kept), (len(lines) - len(kept)) / len(lines)


def count_tokens(text: str,
                 counter: Callable[[Sequence[str]], Sequence[int]] | None = None) -> int:
    """Token count: heuristic by default, exact when a counter is supplied.

    The heuristic counts maximal letter/digit runs plus each standalone
    punctuation mark ("Hello, world!" -> 4).  ``counter`` is a batch
    callable with the remote-service signature; any failure it raises
    propagates, so an unreachable service is never mistaken for zero tokens.
    """
    if counter is not None:
        return int(counter([text])[0])
    return len(_TOKEN_RE.findall(text))


def _normalized_words(text: str) -> list[str]:
    return [_EDGE_STRIP_RE.sub("", w).casefold() for w in text.split()]


def is_english(text: str, min_frac: float = 0.03) -> bool:
    """True iff at least ``min_frac`` of words are common English stopwords."""
    words = [w for w in _normalized_words(text) if w]
    if not words:
        return False
    hits = sum(1 for w in words if w in ENGLISH_STOPWORDS)
    return hits / len(words) >= min_frac


def _gram_chars(words: Sequence[str], i: int, n: int) -> int:
    # Characters of the n words plus the n-1 single spaces joining them.
    return sum(len(words[i + k]) for k in range(n)) + n - 1


def _top_ngram_fraction(words: Sequence[str], n: int, total_chars: int) -> float:
    if len(words) < n or total_chars == 0:
        return 0.0
    counts: Counter[tuple[str, ...]] = Counter(
        tuple(words[i:i + n]) for i in range(len(words) - n + 1))
    # Most common by count; ties broken toward the longer, then the
    # lexically larger gram, so the value is deterministic.
    def sort_key(item: tuple[tuple[str, ...], int]):
        gram, count = item
        return (count, sum(len(w) for w in gram) + n - 1, gram)
    gram, count = max(counts.items(), key=sort_key)
    chars = (sum(len(w) for w in gram) + n - 1) * count
    return chars / total_chars


def _dup_ngram_fraction(words: Sequence[str], n: int, total_chars: int) -> float:
    if len(words) < n or total_chars == 0:
        return 0.0
    counts: Counter[tuple[str, ...]] = Counter(
        tuple(words[i:i + n]) for i in range(len(words) - n + 1))
    covered = 0
    next_free = 0
    for i in range(len(words) - n + 1):
        if i >= next_free and counts[tuple(words[i:i + n])] >= 2:
            covered += _gram_chars(words, i, n)
            next_free = i + n
    return covered / total_chars


def gopher_check(cleaned: str, t: GopherThresholds = GopherThresholds()) -> tuple[bool, list[str]]:
    """Evaluate the full rule table on NoPunc-cleaned text.

    Returns (pass, failed_rule_ids).  All rules are evaluated; n-gram rules
    on texts with fewer than n words pass vacuously.
    """
    failed: list[str] = []
    words = cleaned.split()
    total_chars = len(cleaned)
    lines = [line.strip() for line in cleaned.split("\n") if line.strip()]

    if len(words) < t.min_words:
        failed.append("min_words")
    if len(words) > t.max_words:
        failed.append("max_words")

    for n, rule, bound in (
        (2, "top_bigram", t.max_frac_chars_top_bigram),
        (3, "top_trigram", t.max_frac_chars_top_trigram),
        (4, "top_4gram", t.max_frac_chars_top_4gram),
    ):
        if _top_ngram_fraction(words, n, total_chars) > bound:
            failed.append(rule)

    for n, rule, bound in (
        (5, "dup_5gram", t.max_frac_chars_dup_5gram),
        (6, "dup_6gram", t.max_frac_chars_dup_6gram),
        (7, "dup_7gram", t.max_frac_chars_dup_7gram),
        (8, "dup_8gram", t.max_frac_chars_dup_8gram),
        (9, "dup_9gram", t.max_frac_chars_dup_9gram),
        (10, "dup_10gram", t.max_frac_chars_dup_10gram),
    ):
        if _dup_ngram_fraction(words, n, total_chars) > bound:
            failed.append(rule)

    if words:
        median_len = statistics.median(len(w) for w in words)
        if median_len < t.min_median_word_len or median_len > t.max_median_word_len:
            failed.append("median_word_len")

        symbols = cleaned.count("#") + cleaned.count("...") + cleaned.count("…")
        if symbols / len(words) > t.max_symbol_word_ratio:
            failed.append("symbol_ratio")

        alpha = sum(1 for w in words if any(c.isalpha() for c in w))
        if alpha / len(words) < t.min_frac_alpha_words:
            failed.append("alpha_words")

        required = set(t.required_words)
        hits = {w for w in _normalized_words(cleaned) if w in required}
        if len(hits) < t.min_required_word_hits:
            failed.append("required_words")

    if lines:
        bullets = sum(1 for line in lines if line[0] in _BULLET_CHARS)
        if bullets / len(lines) > t.max_frac_bullet_lines:
            failed.append("bullet_lines")

        ellipses = sum(1 for line in lines
                       if line.endswith("...") or line.endswith("…"))
        if ellipses / len(lines) > t.max_frac_ellipsis_lines:
            failed.append("ellipsis_lines")

        line_counts = Counter(lines)
        dup_lines = sum(c - 1 for c in line_counts.values() if c >= 2)
        if dup_lines / len(lines) > t.max_frac_dup_lines:
            failed.append("dup_lines")

        total_line_chars = sum(len(line) for line in lines)
        dup_chars = sum(len(line) * (c - 1)
                        for line, c in line_counts.items() if c >= 2)
        if total_line_chars and dup_chars / total_line_chars > t.max_frac_chars_in_dup_lines:
            failed.append("dup_line_chars")

    return not failed, failed


def assess_text(text: str, site_dup_ratio: float,
                policy: CompliancePolicy = CompliancePolicy(),
                token_counter: Callable[[Sequence[str]], Sequence[int]] | None = None,
                ) -> ComplianceResult:
    """Run every gate on extracted text and assemble the verdict."""
    english = is_english(text, policy.english_min_stopword_frac)
    tokens = count_tokens(text, token_counter)
    cleaned, _removed = clean_nopunc(text, policy.terminal_punctuation)
    gopher_pass, failed = gopher_check(cleaned, policy.gopher)
    compliant = (english
                 and tokens >= policy.min_tokens
                 and site_dup_ratio <= policy.dup_cap
                 and gopher_pass)
    return ComplianceResult(
        english=english,
        token_count=tokens,
        duplicate_ratio=site_dup_ratio,
        gopher_pass=gopher_pass,
        failed_rules=tuple(failed),
        compliant=compliant,
    )


def assess_page(page: "PageRecord", site_dup_ratio: float,
                policy: CompliancePolicy = CompliancePolicy(),
                token_counter: Callable[[Sequence[str]], Sequence[int]] | None = None,
                ) -> ComplianceResult:
    """assess_text over a page record; the page must carry extracted text."""
    if page.extracted_text is None:
        raise QualityError(f"page {page.url} has no extracted text to assess")
    return assess_text(page.extracted_text, site_dup_ratio, policy, token_counter)
