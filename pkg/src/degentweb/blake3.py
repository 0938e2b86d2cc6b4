"""Pure-Python BLAKE3 hash (hash mode only).

Implements the standard BLAKE3 tree hash over 1024-byte chunks of 64-byte
blocks, with extendable output.  Only the plain (unkeyed) mode is provided;
the sampling code needs digests that match other BLAKE3 implementations
byte-for-byte so that hash-ordered selections are reproducible everywhere.

Verified against digests cross-checked between two independent
implementations (the reference Rust implementation compiled to WebAssembly
and a separate C implementation); see tests/fixtures/blake3_vectors.json.
"""
from __future__ import annotations

import struct

OUT_LEN = 32
BLOCK_LEN = 64
CHUNK_LEN = 1024

_CHUNK_START = 1 << 0
_CHUNK_END = 1 << 1
_PARENT = 1 << 2
_ROOT = 1 << 3

_IV = (
    0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A,
    0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19,
)

_MSG_PERMUTATION = (2, 6, 3, 10, 7, 0, 4, 13, 1, 11, 12, 5, 9, 14, 15, 8)

_MASK = 0xFFFFFFFF


def _g(state: list[int], a: int, b: int, c: int, d: int, mx: int, my: int) -> None:
    state[a] = (state[a] + state[b] + mx) & _MASK
    x = state[d] ^ state[a]
    state[d] = x = ((x >> 16) | (x << 16)) & _MASK
    state[c] = (state[c] + x) & _MASK
    x = state[b] ^ state[c]
    state[b] = x = ((x >> 12) | (x << 20)) & _MASK
    state[a] = (state[a] + x + my) & _MASK
    x = state[d] ^ state[a]
    state[d] = x = ((x >> 8) | (x << 24)) & _MASK
    state[c] = (state[c] + x) & _MASK
    x = state[b] ^ state[c]
    state[b] = ((x >> 7) | (x << 25)) & _MASK


def _round(state: list[int], m: list[int]) -> None:
    # Columns, then diagonals.
    _g(state, 0, 4, 8, 12, m[0], m[1])
    _g(state, 1, 5, 9, 13, m[2], m[3])
    _g(state, 2, 6, 10, 14, m[4], m[5])
    _g(state, 3, 7, 11, 15, m[6], m[7])
    _g(state, 0, 5, 10, 15, m[8], m[9])
    _g(state, 1, 6, 11, 12, m[10], m[11])
    _g(state, 2, 7, 8, 13, m[12], m[13])
    _g(state, 3, 4, 9, 14, m[14], m[15])


def _compress(cv: list[int], block_words: list[int], counter: int,
              block_len: int, flags: int) -> list[int]:
    state = [
        cv[0], cv[1], cv[2], cv[3], cv[4], cv[5], cv[6], cv[7],
        _IV[0], _IV[1], _IV[2], _IV[3],
        counter & _MASK, (counter >> 32) & _MASK, block_len, flags,
    ]
    m = list(block_words)
    for r in range(7):
        _round(state, m)
        if r < 6:
            m = [m[i] for i in _MSG_PERMUTATION]
    for i in range(8):
        state[i] ^= state[i + 8]
        state[i + 8] ^= cv[i]
    return state


def _block_words(block: bytes) -> list[int]:
    if len(block) < BLOCK_LEN:
        block = block + b"\x00" * (BLOCK_LEN - len(block))
    return list(struct.unpack("<16I", block))


class _Output:
    """A node whose compression is pending; may become the root."""

    __slots__ = ("cv", "block_words", "counter", "block_len", "flags")

    def __init__(self, cv: list[int], block_words: list[int], counter: int,
                 block_len: int, flags: int):
        self.cv = cv
        self.block_words = block_words
        self.counter = counter
        self.block_len = block_len
        self.flags = flags

    def chaining_value(self) -> list[int]:
        return _compress(self.cv, self.block_words, self.counter,
                         self.block_len, self.flags)[:8]

    def root_bytes(self, length: int) -> bytes:
        out = bytearray()
        block_counter = 0
        while len(out) < length:
            words = _compress(self.cv, self.block_words, block_counter,
                              self.block_len, self.flags | _ROOT)
            out += struct.pack("<16I", *words)
            block_counter += 1
        return bytes(out[:length])


class _ChunkState:
    __slots__ = ("cv", "chunk_counter", "block", "blocks_compressed")

    def __init__(self, key: tuple[int, ...], chunk_counter: int):
        self.cv = list(key)
        self.chunk_counter = chunk_counter
        self.block = bytearray()
        self.blocks_compressed = 0

    def length(self) -> int:
        return BLOCK_LEN * self.blocks_compressed + len(self.block)

    def _start_flag(self) -> int:
        return _CHUNK_START if self.blocks_compressed == 0 else 0

    def update(self, data: bytes, pos: int, end: int) -> None:
        while pos < end:
            if len(self.block) == BLOCK_LEN:
                self.cv = _compress(self.cv, _block_words(bytes(self.block)),
                                    self.chunk_counter, BLOCK_LEN,
                                    self._start_flag())[:8]
                self.blocks_compressed += 1
                self.block.clear()
            take = min(BLOCK_LEN - len(self.block), end - pos)
            self.block += data[pos:pos + take]
            pos += take

    def output(self) -> _Output:
        return _Output(self.cv, _block_words(bytes(self.block)),
                       self.chunk_counter, len(self.block),
                       self._start_flag() | _CHUNK_END)


class Blake3:
    """Incremental hasher; mirrors the hashlib interface."""

    name = "blake3"
    digest_size = OUT_LEN

    def __init__(self, data: bytes = b""):
        self._chunk = _ChunkState(_IV, 0)
        # Stack of subtree chaining values, lazily merged (one entry per set
        # bit of the total chunk count).
        self._stack: list[list[int]] = []
        if data:
            self.update(data)

    def _push_chunk_cv(self, cv: list[int], total_chunks: int) -> None:
        while total_chunks & 1 == 0:
            left = self._stack.pop()
            cv = _Output(list(_IV), left + cv, 0, BLOCK_LEN,
                         _PARENT).chaining_value()
            total_chunks >>= 1
        self._stack.append(cv)

    def update(self, data: bytes) -> "Blake3":
        pos = 0
        n = len(data)
        while pos < n:
            if self._chunk.length() == CHUNK_LEN:
                counter = self._chunk.chunk_counter
                self._push_chunk_cv(self._chunk.output().chaining_value(),
                                    counter + 1)
                self._chunk = _ChunkState(_IV, counter + 1)
            take = min(CHUNK_LEN - self._chunk.length(), n - pos)
            self._chunk.update(data, pos, pos + take)
            pos += take
        return self

    def digest(self, length: int = OUT_LEN) -> bytes:
        output = self._chunk.output()
        for cv in reversed(self._stack):
            output = _Output(list(_IV), cv + output.chaining_value(), 0,
                             BLOCK_LEN, _PARENT)
        return output.root_bytes(length)

    def hexdigest(self, length: int = OUT_LEN) -> str:
        return self.digest(length).hex()


def blake3(data: bytes = b"") -> Blake3:
    """Construct a hasher, hashlib-style: ``blake3(b"...").hexdigest()``."""
    return Blake3(data)
