"""Main-content extraction from HTML and cross-page boilerplate detection.

Extraction is a reader-mode-style block scorer: invisible and chrome
subtrees (script/style/nav/header/footer/aside/form/head) are dropped, the
remaining block elements are scored by how much of their own text is not
link text, and high-scoring blocks are emitted in document order.

Boilerplate detection chunks each page's extracted text with content-defined
chunking over a Rabin rolling hash, then measures what fraction of a page's
bytes recur verbatim on the site's other pages; pages past a cap are
excluded so navigation remnants and shared blurbs never reach the detector.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Iterable, Sequence

# ---------------------------------------------------------------------------
# Content-defined chunking (Rabin fingerprints)
# ---------------------------------------------------------------------------

# Irreducible polynomial of degree 53 over GF(2); the constant is part of the
# on-disk contract, since fingerprints must agree across platforms and runs.
RABIN_POLYNOMIAL = 0x3DA3358B4DC173
_POLY_DEGREE = 53
_FP_MASK = (1 << _POLY_DEGREE) - 1
# Fingerprints are seeded with 1 so leading zero bytes change the value.
_FP_SEED = 1


def _poly_mod(value: int) -> int:
    """Reduce an arbitrary GF(2) polynomial modulo RABIN_POLYNOMIAL."""
    while value.bit_length() > _POLY_DEGREE:
        value ^= RABIN_POLYNOMIAL << (value.bit_length() - 1 - _POLY_DEGREE)
    return value


_APPEND_TABLE = tuple(_poly_mod(t << _POLY_DEGREE) for t in range(256))
_OUT_TABLE_CACHE: dict[int, tuple[int, ...]] = {}


def _out_table(window_bytes: int) -> tuple[int, ...]:
    table = _OUT_TABLE_CACHE.get(window_bytes)
    if table is None:
        shift = 8 * (window_bytes - 1)
        table = tuple(_poly_mod(o << shift) for o in range(256))
        _OUT_TABLE_CACHE[window_bytes] = table
    return table


def rabin_fingerprint(data: bytes) -> int:
    """Rabin hash of a whole byte string (chunk identity)."""
    h = _FP_SEED
    append = _APPEND_TABLE
    for b in data:
        h = append[h >> 45] ^ (((h << 8) | b) & _FP_MASK)
    return h


@dataclass(frozen=True)
class CdcParams:
    """Chunking parameters; avg_chunk_bytes must be a power of two."""

    window_bytes: int = 48
    avg_chunk_bytes: int = 256
    min_chunk_bytes: int = 64
    max_chunk_bytes: int = 1024

    def __post_init__(self) -> None:
        if min(self.window_bytes, self.avg_chunk_bytes, self.min_chunk_bytes,
               self.max_chunk_bytes) <= 0:
            raise ValueError("chunking parameters must be positive")
        if self.avg_chunk_bytes & (self.avg_chunk_bytes - 1):
            raise ValueError("avg_chunk_bytes must be a power of two")
        if not (self.min_chunk_bytes <= self.avg_chunk_bytes <= self.max_chunk_bytes):
            raise ValueError("need min <= avg <= max chunk bytes")
        if self.window_bytes > self.min_chunk_bytes:
            raise ValueError("window_bytes must not exceed min_chunk_bytes")


@dataclass(frozen=True)
class ChunkSet:
    """Per-chunk (fingerprint, byte_length) pairs for one page."""

    chunks: tuple[tuple[int, int], ...]
    total_bytes: int


def _chunk_spans(data: bytes, params: CdcParams) -> list[tuple[int, int]]:
    """Split ``data`` into [start, end) spans at content-defined boundaries.

    A boundary is declared after position i when the rolling hash over the
    trailing window satisfies hash & (avg-1) == avg-1, provided the chunk has
    reached min_chunk_bytes; chunks are force-cut at max_chunk_bytes.  The
    window never spans a chunk boundary, so identical byte runs chunk
    identically regardless of what precedes them.
    """
    n = len(data)
    if n == 0:
        return []
    window = params.window_bytes
    boundary_mask = params.avg_chunk_bytes - 1
    min_c = params.min_chunk_bytes
    max_c = params.max_chunk_bytes
    append = _APPEND_TABLE
    out = _out_table(window)

    spans: list[tuple[int, int]] = []
    start = 0
    h = 0
    i = 0
    while i < n:
        if i - start >= window:
            h ^= out[data[i - window]]
        h = append[h >> 45] ^ (((h << 8) | data[i]) & _FP_MASK)
        length = i - start + 1
        if (length >= min_c and (h & boundary_mask) == boundary_mask) or length >= max_c:
            spans.append((start, i + 1))
            start = i + 1
            h = 0
        i += 1
    if start < n:
        spans.append((start, n))
    return spans


def chunk_text(text: str, params: CdcParams = CdcParams()) -> ChunkSet:
    """Deterministically chunk the UTF-8 bytes of ``text``.

    Text shorter than min_chunk_bytes comes back as a single chunk; the
    empty string has no chunks at all.
    """
    data = text.encode("utf-8")
    chunks = tuple((rabin_fingerprint(data[s:e]), e - s)
                   for s, e in _chunk_spans(data, params))
    return ChunkSet(chunks=chunks, total_bytes=len(data))


def duplicate_ratio(page: ChunkSet, site_index: Counter[int] | Iterable[int]) -> float:
    """Fraction of the page's bytes whose chunk fingerprint recurs elsewhere.

    ``site_index`` is the fingerprint multiset of the site's *other* pages;
    membership (count >= 1) marks a chunk as duplicated.
    """
    if page.total_bytes == 0:
        return 0.0
    if not isinstance(site_index, Counter):
        site_index = Counter(site_index)
    covered = sum(length for fp, length in page.chunks if site_index[fp] > 0)
    return covered / page.total_bytes


def build_site_index(pages: Sequence[ChunkSet], exclude: int | None = None) -> Counter[int]:
    """Fingerprint multiset over all pages except the ``exclude`` index."""
    index: Counter[int] = Counter()
    for i, page in enumerate(pages):
        if i == exclude:
            continue
        index.update(fp for fp, _ in page.chunks)
    return index


@dataclass(frozen=True)
class BoilerplateVerdict:
    duplicate_ratio: float
    excluded: bool


def flag_boilerplate_pages(texts: Sequence[str], params: CdcParams = CdcParams(),
                           cap: float = 0.5) -> list[BoilerplateVerdict]:
    """Per-page duplicate ratios against the rest of the site, with verdicts.

    Unlike :func:`duplicate_ratio`, which trusts fingerprints, this path
    confirms every fingerprint match byte-for-byte so that hash collisions
    can never exclude a page.  A page is excluded iff its ratio exceeds
    ``cap``.
    """
    encoded = [t.encode("utf-8") for t in texts]
    page_chunks: list[list[tuple[int, bytes]]] = []
    for data in encoded:
        page_chunks.append([(rabin_fingerprint(data[s:e]), data[s:e])
                            for s, e in _chunk_spans(data, params)])

    global_index: Counter[tuple[int, bytes]] = Counter()
    for chunks in page_chunks:
        global_index.update(chunks)

    verdicts = []
    for data, chunks in zip(encoded, page_chunks):
        if not data:
            verdicts.append(BoilerplateVerdict(0.0, False))
            continue
        own = Counter(chunks)
        covered = sum(len(raw) for key_fp, raw in chunks
                      if global_index[(key_fp, raw)] - own[(key_fp, raw)] > 0)
        ratio = covered / len(data)
        verdicts.append(BoilerplateVerdict(ratio, ratio > cap))
    return verdicts


# ---------------------------------------------------------------------------
# Main-content extraction
# ---------------------------------------------------------------------------

# Subtrees that are invisible or page chrome; their text never counts.
_DROP_TAGS = frozenset({
    "script", "style", "noscript", "template", "head", "title",
    "nav", "header", "footer", "aside", "form", "svg", "iframe",
})

# Elements treated as text blocks for scoring.  Containers whose text lives
# in nested blocks (ul, table, ...) naturally end up with empty own-text.
_BLOCK_TAGS = frozenset({
    "body", "p", "div", "section", "article", "main", "blockquote", "pre",
    "li", "ul", "ol", "dl", "dt", "dd", "h1", "h2", "h3", "h4", "h5", "h6",
    "table", "tr", "td", "th", "figure", "figcaption", "summary", "details",
})

_WS_RUN = re.compile(r"\s+")


def _collapse(text: str) -> str:
    return _WS_RUN.sub(" ", text).strip()


_VOID_TAGS = frozenset({
    "br", "img", "hr", "meta", "link", "input", "area", "base", "col",
    "embed", "source", "track", "wbr", "param",
})

# Tags a browser closes implicitly when a sibling opens (recovery for the
# very common unclosed <li>/<p> markup).
_IMPLICIT_CLOSERS = {
    "li": {"li"},
    "dt": {"dt", "dd"},
    "dd": {"dt", "dd"},
    "td": {"td", "th"},
    "th": {"td", "th"},
    "tr": {"tr", "td", "th"},
    "p": {"p"},
}


@dataclass
class _Block:
    first_text: int | None = None
    parts: list[str] = field(default_factory=list)
    anchor_chars: int = 0


@dataclass
class _Open:
    tag: str
    block: _Block | None
    dropped: bool
    anchor: bool


class _ContentParser(HTMLParser):
    """Builds scored text blocks from tag soup without assuming balance."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        root = _Block()
        self.blocks: list[_Block] = [root]
        self._stack: list[_Open] = [_Open("", root, False, False)]
        self._anchor_depth = 0
        self._text_counter = 0

    def _pop(self) -> None:
        entry = self._stack.pop()
        if entry.anchor:
            self._anchor_depth -= 1

    def handle_starttag(self, tag: str, attrs) -> None:
        top = self._stack[-1]
        if tag in _VOID_TAGS:
            if tag == "br" and not top.dropped and top.block is not None:
                top.block.parts.append(" ")
            return
        closers = _IMPLICIT_CLOSERS.get(tag)
        if closers:
            while len(self._stack) > 1 and self._stack[-1].tag in closers:
                self._pop()
            top = self._stack[-1]
        dropped = top.dropped or tag in _DROP_TAGS
        anchor = tag == "a" and not dropped
        if anchor:
            self._anchor_depth += 1
        if not dropped and tag in _BLOCK_TAGS:
            block = _Block()
            self.blocks.append(block)
        else:
            block = None if dropped else top.block
        self._stack.append(_Open(tag, block, dropped, anchor))

    def handle_endtag(self, tag: str) -> None:
        if tag in _VOID_TAGS:
            return
        for i in range(len(self._stack) - 1, 0, -1):
            if self._stack[i].tag == tag:
                while len(self._stack) > i:
                    self._pop()
                return
        # Stray close tag with no matching open: ignore, like a browser.

    def handle_data(self, data: str) -> None:
        top = self._stack[-1]
        if top.dropped or top.block is None or not data:
            return
        block = top.block
        if block.first_text is None and data.strip():
            block.first_text = self._text_counter
        self._text_counter += 1
        block.parts.append(data)
        if self._anchor_depth:
            block.anchor_chars += len(_collapse(data))


def try_extract(html: bytes | str) -> tuple[str, bool]:
    """Extract main content; returns (text, parse_ok).

    Never raises: hopeless input yields ("", False).
    """
    if isinstance(html, bytes):
        try:
            markup = html.decode("utf-8")
        except UnicodeDecodeError:
            markup = html.decode("latin-1", errors="replace")
    else:
        markup = html
    parser = _ContentParser()
    try:
        parser.feed(markup)
        parser.close()
    except Exception:
        return "", False

    scored: list[tuple[int, float, str]] = []
    for block in parser.blocks:
        text = _collapse("".join(block.parts))
        if not text:
            continue
        anchor_frac = min(1.0, block.anchor_chars / len(text))
        score = 0.0 if anchor_frac > 0.5 else len(text) * (1.0 - anchor_frac)
        scored.append((block.first_text or 0, score, text))

    if not scored:
        return "", True
    max_score = max(score for _, score, _ in scored)
    if max_score <= 0:
        return "", True
    kept = [(pos, text) for pos, score, text in scored
            if score >= 0.2 * max_score]
    kept.sort(key=lambda item: item[0])
    return "\n".join(text for _, text in kept), True


def extract_main_content(html: bytes | str) -> str:
    """Main textual content of an HTML document (empty string on failure)."""
    return try_extract(html)[0]
