"""Reproducible corpus sampling.

Hash-rendezvous selection (sort names by cryptographic digest and take a
prefix), index stride sampling, archive CDX record filtering, per-site page
sampling, and a small paginated CDX HTTP client with byte-range record
fetches.
"""
from __future__ import annotations

import gzip
import hashlib
import json
import logging
import time
import xml.etree.ElementTree as ET
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from urllib.parse import urlsplit

import requests

from .blake3 import blake3

logger = logging.getLogger(__name__)

ALGORITHM_BLAKE3 = "blake3"
ALGORITHM_SHA256 = "sha256"
ALGORITHMS = frozenset({ALGORITHM_BLAKE3, ALGORITHM_SHA256})

#: Language tags accepted as English in CDX metadata (ISO 639-3 and 639-1).
ENGLISH_TAGS = frozenset({"eng", "en"})


class SampleError(ValueError):
    """Invalid sampling parameters or an unusable archive record."""


@dataclass(frozen=True)
class HashSelectSpec:
    """How to select: which digest to sort by and how many names to keep."""

    algorithm: str = ALGORITHM_BLAKE3
    n: int = 1

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise SampleError(f"unknown hash algorithm: {self.algorithm!r}")
        if self.n < 1:
            raise SampleError(f"selection size must be >= 1, got {self.n}")

    def digest(self, name: str) -> bytes:
        data = name.encode("utf-8")
        if self.algorithm == ALGORITHM_BLAKE3:
            return blake3(data).digest()
        return hashlib.sha256(data).digest()


def hash_select(names: Iterable[str], spec: HashSelectSpec) -> list[str]:
    """Pick ``spec.n`` names reproducibly, independent of input order.

    Names are deduplicated, sorted ascending by their digest bytes (ties —
    cryptographically negligible — broken by the name itself), and the first
    ``n`` are returned in digest order.
    """
    unique = set(names)
    ranked = sorted(unique, key=lambda name: (spec.digest(name), name))
    return ranked[: spec.n]


def stride_sample(items: Sequence, stride: int, offset: int = 0) -> list:
    """Every ``stride``-th item starting at ``offset``, in original order."""
    if stride < 1:
        raise SampleError(f"stride must be >= 1, got {stride}")
    if offset < 0 or offset >= stride:
        raise SampleError(f"offset must be in [0, stride), got {offset}")
    return list(items[offset::stride])


@dataclass(frozen=True)
class CdxRecord:
    """One archive index line: capture location, time, and response shape."""

    url: str
    host: str
    timestamp: str
    status: int | None
    mime: str
    languages: tuple[str, ...] = ()
    length: int | None = None
    offset: int | None = None
    filename: str | None = None

    def is_english_html(self) -> bool:
        return (self.status is not None
                and 200 <= self.status <= 299
                and self.mime == "text/html"
                and any(tag.lower() in ENGLISH_TAGS
                        for tag in self.languages))


def _parse_status(raw: str) -> int | None:
    # "-" marks revisit records with no archived status; keep them parseable
    # so the filter (not the parser) rejects them.
    if raw == "-" or raw == "":
        return None
    return int(raw)


def _parse_optional_int(raw: str | None) -> int | None:
    if raw is None or raw == "-" or raw == "":
        return None
    return int(raw)


def _host_of(url: str) -> str:
    host = urlsplit(url).hostname
    if not host:
        raise SampleError(f"URL has no host: {url!r}")
    return host.lower()


def parse_cdx_line(line: str) -> CdxRecord:
    """Parse one CDX API line (JSON object or space-separated CDX-11)."""
    stripped = line.strip()
    if not stripped:
        raise SampleError("blank CDX line")
    try:
        if stripped.startswith("{"):
            data = json.loads(stripped)
            if not isinstance(data, dict):
                raise SampleError("CDX JSON line is not an object")
            url = data["url"]
            languages = tuple(tag for tag in
                              data.get("languages", "").split(",") if tag)
            return CdxRecord(
                url=url,
                host=_host_of(url),
                timestamp=str(data.get("timestamp", "")),
                status=_parse_status(str(data.get("status", "-"))),
                mime=data.get("mime", ""),
                languages=languages,
                length=_parse_optional_int(data.get("length")),
                offset=_parse_optional_int(data.get("offset")),
                filename=data.get("filename") or None,
            )
        fields = stripped.split(" ")
        if len(fields) < 11:
            raise SampleError(f"expected 11 CDX fields, got {len(fields)}")
        (_urlkey, timestamp, url, mime, status, _digest, _redirect,
         _robots, length, offset, filename) = fields[:11]
        return CdxRecord(
            url=url,
            host=_host_of(url),
            timestamp=timestamp,
            status=_parse_status(status),
            mime=mime,
            languages=(),
            length=_parse_optional_int(length),
            offset=_parse_optional_int(offset),
            filename=None if filename == "-" else filename,
        )
    except SampleError:
        raise
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise SampleError(f"malformed CDX line: {exc}") from exc


def cdx_filter(records: Iterable[CdxRecord | str],
               stats: dict[str, int] | None = None) -> Iterator[CdxRecord]:
    """Yield English 2xx text/html records; count and skip malformed lines.

    Accepts parsed records or raw lines. When ``stats`` is given it is
    updated in place with ``kept``, ``dropped``, and ``malformed`` counts.
    """
    counters = stats if stats is not None else {}
    counters.setdefault("kept", 0)
    counters.setdefault("dropped", 0)
    counters.setdefault("malformed", 0)
    for item in records:
        if isinstance(item, str):
            try:
                record = parse_cdx_line(item)
            except SampleError as exc:
                counters["malformed"] += 1
                logger.warning("skipping malformed CDX line: %s", exc)
                continue
        else:
            record = item
        if record.is_english_html():
            counters["kept"] += 1
            yield record
        else:
            counters["dropped"] += 1


def sample_pages(site: str, page_urls: Iterable[str], n: int,
                 algorithm: str = ALGORITHM_BLAKE3) -> list[str]:
    """Select up to ``n`` of a site's page URLs by digest order."""
    urls = list(page_urls)
    if not urls:
        return []
    if n < 1:
        raise SampleError(f"page sample size must be >= 1, got {n}")
    for url in urls:
        if _host_of(url) != site.lower().rstrip("."):
            raise SampleError(f"URL {url!r} is not on site {site!r}")
    return hash_select(urls, HashSelectSpec(algorithm=algorithm, n=n))


def strip_title(title: str) -> str:
    """Drop everything after the first colon; trim the kept portion."""
    if ":" not in title:
        return title
    return title.split(":", 1)[0].strip()


def _local_tag(element: ET.Element) -> str:
    tag = element.tag
    return tag.rsplit("}", 1)[-1] if "}" in tag else tag


def parse_sitemap(xml_text: str) -> tuple[list[str], list[str]]:
    """Extract (page URLs, nested sitemap URLs) from urlset/sitemapindex."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise SampleError(f"unparseable sitemap XML: {exc}") from exc
    pages: list[str] = []
    nested: list[str] = []
    kind = _local_tag(root)
    if kind not in ("urlset", "sitemapindex"):
        raise SampleError(f"unexpected sitemap root element: {kind!r}")
    for entry in root:
        if _local_tag(entry) not in ("url", "sitemap"):
            continue
        for child in entry:
            if _local_tag(child) == "loc" and child.text:
                target = pages if kind == "urlset" else nested
                target.append(child.text.strip())
    return pages, nested


class CdxClient:
    """Paginated CDX index API client: one connection, fixed retry delay."""

    def __init__(self, base_url: str, *, max_attempts: int = 3,
                 retry_delay: float = 5.0, timeout: float = 30.0,
                 session: requests.Session | None = None,
                 sleep=time.sleep):
        if max_attempts < 1:
            raise SampleError("max_attempts must be >= 1")
        self.base_url = base_url.rstrip("/")
        self.max_attempts = max_attempts
        self.retry_delay = retry_delay
        self.timeout = timeout
        self._session = session or requests.Session()
        self._sleep = sleep

    def _get(self, params: dict[str, str]) -> requests.Response:
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            if attempt > 1:
                self._sleep(self.retry_delay)
            try:
                response = self._session.get(self.base_url, params=params,
                                             timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = SampleError(
                    f"CDX endpoint returned {response.status_code}")
                continue
            return response
        raise SampleError(f"CDX request failed after "
                          f"{self.max_attempts} attempts: {last_error}")

    def page_count(self, url_pattern: str) -> int:
        response = self._get({"url": url_pattern, "output": "json",
                              "showNumPages": "true"})
        if response.status_code != 200:
            raise SampleError(f"CDX page count failed: "
                              f"HTTP {response.status_code}")
        try:
            data = json.loads(response.text.strip().splitlines()[0])
            return int(data["pages"] if isinstance(data, dict) else data)
        except (IndexError, KeyError, TypeError, ValueError) as exc:
            raise SampleError(f"bad page-count response: {exc}") from exc

    def query(self, url_pattern: str,
              stats: dict[str, int] | None = None) -> Iterator[CdxRecord]:
        """Stream filtered records across all result pages, in order."""
        pages = self.page_count(url_pattern)
        for page in range(pages):
            response = self._get({"url": url_pattern, "output": "json",
                                  "page": str(page)})
            if response.status_code == 404:
                # Archives report empty pages as 404; nothing to read there.
                continue
            if response.status_code != 200:
                raise SampleError(f"CDX query page {page} failed: "
                                  f"HTTP {response.status_code}")
            yield from cdx_filter(response.text.splitlines(), stats)


def fetch_record_bytes(archive_url: str, offset: int, length: int, *,
                       session: requests.Session | None = None,
                       timeout: float = 30.0) -> bytes:
    """Fetch one stored record by byte range and decompress its gzip member."""
    if offset < 0 or length < 1:
        raise SampleError("record range must have offset >= 0, length >= 1")
    http = session or requests.Session()
    headers = {"Range": f"bytes={offset}-{offset + length - 1}"}
    response = http.get(archive_url, headers=headers, timeout=timeout)
    if response.status_code not in (200, 206):
        raise SampleError(f"range fetch failed: HTTP {response.status_code}")
    try:
        return gzip.decompress(response.content)
    except (OSError, EOFError) as exc:
        raise SampleError(f"stored record is not gzip data: {exc}") from exc
