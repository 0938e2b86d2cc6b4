"""Tokenizer guarantees: exact counts, markers, and seam-only merging."""
from __future__ import annotations

import random

from scorer_service.tokenizer import (CHUNK_CHARS, WORD_MARKER, count_tokens,
                                      detokenize, tokenize)


class TestTokenize:
    def test_empty_and_whitespace_count_zero(self):
        assert count_tokens("") == 0
        assert count_tokens("   \t\n  ") == 0
        assert tokenize("") == []

    def test_known_sequence(self):
        assert tokenize("Hello, world!") == [
            "▁hell", "o", ",", "▁worl", "d", "!"]

    def test_word_marker_on_first_token_of_each_piece(self):
        tokens = tokenize("alpha beta-gamma")
        starts = [t for t in tokens if t.startswith(WORD_MARKER)]
        assert len(starts) == 2  # one marker per whitespace piece
        assert tokens[0] == "▁alph"

    def test_long_run_chopped_into_fixed_chunks(self):
        tokens = tokenize("abcdefghij")
        assert tokens == ["▁abcd", "efgh", "ij"]
        assert all(len(t.removeprefix(WORD_MARKER)) <= CHUNK_CHARS
                   for t in tokens)

    def test_digits_and_mixed_case(self):
        assert tokenize("Route66") == ["▁rout", "e66"]
        assert tokenize("2024") == ["▁2024"]

    def test_non_ascii_letters_become_single_tokens(self):
        assert tokenize("café") == ["▁caf", "é"]
        assert count_tokens("naïve — déjà vu") > 0

    def test_no_empty_tokens_ever(self):
        rng = random.Random(7)
        alphabet = "abz 09AZ.,!?—…é\t\n'\"()"
        for _ in range(300):
            text = "".join(rng.choice(alphabet)
                           for _ in range(rng.randrange(0, 60)))
            assert all(tok.removeprefix(WORD_MARKER)
                       for tok in tokenize(text))


class TestCountProperties:
    def test_concatenation_is_subadditive(self):
        rng = random.Random(31337)
        alphabet = "abcdefgh XYZ 0123.,;—…éï '\""
        for _ in range(500):
            a = "".join(rng.choice(alphabet)
                        for _ in range(rng.randrange(0, 40)))
            b = "".join(rng.choice(alphabet)
                        for _ in range(rng.randrange(0, 40)))
            assert count_tokens(a) + count_tokens(b) >= count_tokens(a + b)

    def test_whitespace_join_is_exactly_additive(self):
        a, b = "some plain words", "and, punctuation!"
        assert count_tokens(f"{a} {b}") == count_tokens(a) + count_tokens(b)


class TestDetokenize:
    def test_round_trip_for_lowercase_single_spaced_text(self):
        for text in ("hello world", "hello, world.", "a b c d e",
                     "the mill by the river turned slowly."):
            assert detokenize(tokenize(text)) == text

    def test_round_trip_lowercases_and_collapses_whitespace(self):
        assert detokenize(tokenize("Hello   World")) == "hello world"
