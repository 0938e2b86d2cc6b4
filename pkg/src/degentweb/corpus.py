"""Canonical page/site data model with line-delimited persistence.

A corpus is a UTF-8 file of one JSON object per line, one page per object.
Raw HTML is stored inline as base64; records whose HTML exceeds 1 MiB spill
into a side-car blob directory so no single line grows unbounded.  Records
are immutable value objects and serialization is a fixpoint: writing what
was just read produces byte-identical output.
"""
from __future__ import annotations

import base64
import dataclasses
import json
import logging
import math
import urllib.parse
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .blake3 import blake3
from .quality import ComplianceResult

logger = logging.getLogger(__name__)

SOURCE_LIVE = "live-crawl"
SOURCE_ARCHIVE = "archive"
SOURCE_PRE_EXTRACTED = "pre-extracted"
SOURCES = (SOURCE_LIVE, SOURCE_ARCHIVE, SOURCE_PRE_EXTRACTED)

#: HTML payloads larger than this spill into the side-car blob directory.
INLINE_HTML_LIMIT = 1 << 20


class CorpusError(ValueError):
    """Malformed record or corpus line."""

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message if line_no is None
                         else f"line {line_no}: {message}")
        self.line_no = line_no


def normalize_fqdn(host: str) -> str:
    """Lowercase and strip the trailing dot; no public-suffix collapsing."""
    return host.strip().rstrip(".").lower()


def site_of_url(url: str) -> str:
    host = urllib.parse.urlsplit(url).hostname
    if not host:
        raise CorpusError(f"URL has no host: {url!r}")
    return normalize_fqdn(host)


def _require_utc(name: str, value: datetime) -> datetime:
    if value.tzinfo is None:
        raise CorpusError(f"{name} must be timezone-aware")
    return value.astimezone(timezone.utc)


@dataclass(frozen=True)
class PageRecord:
    """One fetched (or pre-extracted) page.

    ``site`` must equal the lowercase FQDN of ``url``; use
    :func:`site_of_url` to derive it.  ``dated_at`` is a content
    last-modified estimate (a date, not a timestamp), distinct from
    ``fetched_at`` (when we retrieved it) and ``archived_at`` (when an
    archive captured it).
    """

    url: str
    site: str
    fetched_at: datetime
    source: str = SOURCE_LIVE
    archived_at: datetime | None = None
    dated_at: date | None = None
    raw_html: bytes | None = None
    extracted_text: str | None = None
    token_count: int | None = None
    compliance: ComplianceResult | None = None
    score: float | None = None

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise CorpusError(f"unknown source {self.source!r}")
        if self.site != site_of_url(self.url):
            raise CorpusError(
                f"site {self.site!r} does not match host of {self.url!r}")
        object.__setattr__(self, "fetched_at",
                           _require_utc("fetched_at", self.fetched_at))
        if self.archived_at is not None:
            object.__setattr__(self, "archived_at",
                               _require_utc("archived_at", self.archived_at))
        if self.dated_at is not None and isinstance(self.dated_at, datetime):
            raise CorpusError("dated_at must be a date, not a datetime")
        if self.token_count is not None and self.token_count < 0:
            raise CorpusError("token_count must be non-negative")
        if self.score is not None and not math.isfinite(self.score):
            raise CorpusError(f"score must be finite, got {self.score!r}")
        if (self.extracted_text is not None and self.raw_html is None
                and self.source != SOURCE_PRE_EXTRACTED):
            raise CorpusError(
                "extracted_text without raw_html requires source "
                f"{SOURCE_PRE_EXTRACTED!r}")


@dataclass(frozen=True)
class SiteSample:
    """All sampled pages of one site, in sampling order."""

    site: str
    pages: tuple[PageRecord, ...]
    earliest_archived_at: datetime | None = None

    def __post_init__(self) -> None:
        for page in self.pages:
            if page.site != self.site:
                raise CorpusError(
                    f"page {page.url!r} does not belong to site {self.site!r}")
        expected = self._earliest(self.pages)
        if self.earliest_archived_at != expected:
            raise CorpusError(
                f"earliest_archived_at {self.earliest_archived_at} != "
                f"computed {expected}")

    @staticmethod
    def _earliest(pages: Iterable[PageRecord]) -> datetime | None:
        stamps = [p.archived_at for p in pages if p.archived_at is not None]
        return min(stamps) if stamps else None

    @classmethod
    def build(cls, site: str, pages: Iterable[PageRecord]) -> "SiteSample":
        pages = tuple(pages)
        return cls(site=site, pages=pages,
                   earliest_archived_at=cls._earliest(pages))


def group_by_site(records: Iterable[PageRecord]) -> list[SiteSample]:
    """Partition records by FQDN, preserving page order and first-seen
    site order (subdomains are distinct sites)."""
    buckets: dict[str, list[PageRecord]] = {}
    for record in records:
        buckets.setdefault(record.site, []).append(record)
    return [SiteSample.build(site, pages) for site, pages in buckets.items()]


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def _format_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _parse_timestamp(value: str) -> datetime:
    return datetime.fromisoformat(value.replace("Z", "+00:00"))


def _encode_html(html: bytes, blob_dir: Path | None) -> str | dict:
    if blob_dir is not None and len(html) > INLINE_HTML_LIMIT:
        name = blake3(html).hexdigest() + ".bin"
        blob_dir.mkdir(parents=True, exist_ok=True)
        blob_path = blob_dir / name
        if not blob_path.exists():
            blob_path.write_bytes(html)
        return {"blob": name}
    return base64.b64encode(html).decode("ascii")


def _decode_html(value: str | dict, blob_dir: Path | None) -> bytes:
    if isinstance(value, str):
        return base64.b64decode(value.encode("ascii"), validate=True)
    if isinstance(value, dict) and isinstance(value.get("blob"), str):
        if blob_dir is None:
            raise CorpusError("blob reference but no blob directory")
        blob_path = blob_dir / value["blob"]
        if not blob_path.is_file():
            raise CorpusError(f"missing blob {value['blob']!r}")
        return blob_path.read_bytes()
    raise CorpusError(f"unrecognized raw_html encoding: {value!r}")


def record_to_dict(record: PageRecord, blob_dir: Path | None = None) -> dict:
    out: dict = {
        "url": record.url,
        "site": record.site,
        "fetched_at": _format_timestamp(record.fetched_at),
        "source": record.source,
    }
    if record.archived_at is not None:
        out["archived_at"] = _format_timestamp(record.archived_at)
    if record.dated_at is not None:
        out["dated_at"] = record.dated_at.isoformat()
    if record.raw_html is not None:
        out["raw_html"] = _encode_html(record.raw_html, blob_dir)
    if record.extracted_text is not None:
        out["extracted_text"] = record.extracted_text
    if record.token_count is not None:
        out["token_count"] = record.token_count
    if record.compliance is not None:
        comp = dataclasses.asdict(record.compliance)
        comp["failed_rules"] = list(record.compliance.failed_rules)
        out["compliance"] = comp
    if record.score is not None:
        out["score"] = record.score
    return out


def record_from_dict(data: dict, blob_dir: Path | None = None) -> PageRecord:
    try:
        compliance = None
        if "compliance" in data:
            comp = dict(data["compliance"])
            comp["failed_rules"] = tuple(comp.get("failed_rules", ()))
            compliance = ComplianceResult(**comp)
        return PageRecord(
            url=data["url"],
            site=data["site"],
            fetched_at=_parse_timestamp(data["fetched_at"]),
            source=data.get("source", SOURCE_LIVE),
            archived_at=(_parse_timestamp(data["archived_at"])
                         if "archived_at" in data else None),
            dated_at=(date.fromisoformat(data["dated_at"])
                      if "dated_at" in data else None),
            raw_html=(_decode_html(data["raw_html"], blob_dir)
                      if "raw_html" in data else None),
            extracted_text=data.get("extracted_text"),
            token_count=data.get("token_count"),
            compliance=compliance,
            score=data.get("score"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CorpusError):
            raise
        raise CorpusError(f"bad record: {exc}") from exc


def default_blob_dir(path: Path) -> Path:
    return path.with_name(path.name + ".blobs")


def write_records(records: Iterable[PageRecord], path: str | Path,
                  blob_dir: str | Path | None = None) -> int:
    """Write one JSON object per line; returns the number written."""
    path = Path(path)
    blob_dir = default_blob_dir(path) if blob_dir is None else Path(blob_dir)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            line = json.dumps(record_to_dict(record, blob_dir),
                              ensure_ascii=False, sort_keys=True,
                              separators=(",", ":"))
            fh.write(line + "\n")
            count += 1
    return count


def iter_records(path: str | Path, *, on_malformed: str = "fail",
                 blob_dir: str | Path | None = None) -> Iterator[PageRecord]:
    """Stream records back; malformed lines raise or are skipped with a
    logged warning, per ``on_malformed`` ("fail" or "skip")."""
    if on_malformed not in ("fail", "skip"):
        raise ValueError(f"on_malformed must be 'fail' or 'skip', "
                         f"got {on_malformed!r}")
    path = Path(path)
    blob_dir = default_blob_dir(path) if blob_dir is None else Path(blob_dir)
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                try:
                    data = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"invalid JSON: {exc}") from exc
                if not isinstance(data, dict):
                    raise CorpusError("line is not a JSON object")
                yield record_from_dict(data, blob_dir)
            except CorpusError as exc:
                if on_malformed == "fail":
                    raise CorpusError(str(exc), line_no) from exc
                logger.warning("skipping malformed corpus line %d in %s: %s",
                               line_no, path, exc)


def read_records(path: str | Path, *, on_malformed: str = "fail",
                 blob_dir: str | Path | None = None) -> list[PageRecord]:
    return list(iter_records(path, on_malformed=on_malformed,
                             blob_dir=blob_dir))
