"""Downstream corpus analyses.

Prevalence by half-year cohort, before/after transition detection with a
date-shuffle null, search-rank summaries, and monetization-signal
extraction (publisher IDs, affiliate links, ad-element counts) with
shared-ID clustering.
"""
from __future__ import annotations

import logging
import random
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from datetime import date, datetime
from email.utils import parsedate_to_datetime
from html.parser import HTMLParser
from urllib.parse import parse_qs, urlsplit

from .classify import LABEL_LLM_DOMINANT, LABEL_NOT, percentile
from .corpus import PageRecord, SiteSample

logger = logging.getLogger(__name__)

#: Default before/after split point (configurable on every entry point).
CHATGPT_CUTOFF = date(2022, 11, 30)

MIN_PAGES_PER_SIDE = 4

ADSENSE_ID_RE = re.compile(r"ca-pub-\d{16}(?!\d)")

#: Affiliate-link URL patterns applied to anchor hrefs.
DEFAULT_AFFILIATE_PATTERNS = (
    r"amazon\.[a-z.]{2,10}/.*[?&]tag=",
    r"[?&]tag=[A-Za-z0-9_-]+-2[01]\b",
    r"shareasale\.com/r\.cfm",
    r"go\.redirectingat\.com",
    r"awin1\.com/cread\.php",
    r"clickbank\.net",
    r"[?&]aff(?:_?id)?=",
)


class AnalyzeError(ValueError):
    """Invalid analysis input."""


# ---------------------------------------------------------------------------
# Cohort prevalence


@dataclass(frozen=True)
class CohortBucket:
    label: str
    n_sites: int
    n_llm_dominant: int

    @property
    def fraction(self) -> float:
        return self.n_llm_dominant / self.n_sites


@dataclass(frozen=True)
class CohortReport:
    """Per-half-year counts of LLM-dominant sites, oldest cohort first."""

    buckets: tuple[CohortBucket, ...]
    undated_sites: int = 0

    def __post_init__(self) -> None:
        keys = [_half_year_key(b.label) for b in self.buckets]
        if keys != sorted(keys):
            raise AnalyzeError("cohort buckets must be chronological")
        for bucket in self.buckets:
            if not 0 <= bucket.n_llm_dominant <= bucket.n_sites:
                raise AnalyzeError(f"impossible counts in {bucket.label}")


def half_year_label(day: date) -> str:
    return f"{day.year}H{1 if day.month <= 6 else 2}"


def _half_year_key(label: str) -> tuple[int, int]:
    try:
        year, half = label.split("H")
        return int(year), int(half)
    except ValueError as exc:
        raise AnalyzeError(f"bad half-year label {label!r}") from exc


def cohort_prevalence(
        labeled_sites: Iterable[tuple[SiteSample, str]]) -> CohortReport:
    """Bucket sites by the half-year of their earliest archived page."""
    counts: dict[str, list[int]] = {}
    undated = 0
    for sample, label in labeled_sites:
        when = sample.earliest_archived_at
        if when is None:
            undated += 1
            continue
        bucket = counts.setdefault(half_year_label(when.date()), [0, 0])
        bucket[0] += 1
        bucket[1] += label == LABEL_LLM_DOMINANT
    buckets = tuple(
        CohortBucket(label=label, n_sites=n, n_llm_dominant=n_llm)
        for label, (n, n_llm) in sorted(counts.items(),
                                        key=lambda kv: _half_year_key(kv[0])))
    return CohortReport(buckets=buckets, undated_sites=undated)


# ---------------------------------------------------------------------------
# Transition detection


@dataclass(frozen=True)
class TransitionResult:
    site: str
    n_pre: int
    n_post: int
    q25_pre: float | None
    q75_post: float | None
    flagged: bool

    def __post_init__(self) -> None:
        enough = (self.n_pre >= MIN_PAGES_PER_SIDE
                  and self.n_post >= MIN_PAGES_PER_SIDE)
        expected = (enough
                    and self.q25_pre is not None
                    and self.q75_post is not None
                    and self.q75_post < self.q25_pre)
        if self.flagged != expected:
            raise AnalyzeError(f"inconsistent flag for {self.site}")


def detect_transition(site: str, pages: Iterable[tuple[date, float]],
                      cutoff: date = CHATGPT_CUTOFF) -> TransitionResult:
    """Flag a site whose post-cutoff scores sit below its pre-cutoff ones.

    Pages dated on the cutoff day itself belong to neither side. A site
    with fewer than four pages on either side is reported unflagged.
    """
    pre: list[float] = []
    post: list[float] = []
    for day, score in pages:
        if isinstance(day, datetime):
            raise AnalyzeError(f"{site}: pages must be dated by plain date")
        if day < cutoff:
            pre.append(score)
        elif day > cutoff:
            post.append(score)
    q25_pre = percentile(pre, 25) if pre else None
    q75_post = percentile(post, 75) if post else None
    flagged = (len(pre) >= MIN_PAGES_PER_SIDE
               and len(post) >= MIN_PAGES_PER_SIDE
               and q75_post < q25_pre)
    return TransitionResult(site=site, n_pre=len(pre), n_post=len(post),
                            q25_pre=q25_pre, q75_post=q75_post,
                            flagged=flagged)


SitePages = Mapping[str, Sequence[tuple[date, float]]]


def count_transition_flags(sites: SitePages,
                           cutoff: date = CHATGPT_CUTOFF) -> int:
    return sum(detect_transition(site, pages, cutoff).flagged
               for site, pages in sites.items())


def shuffle_null(sites: SitePages, n_shuffles: int = 200, seed: int = 0,
                 cutoff: date = CHATGPT_CUTOFF, *,
                 rng_factory=random.Random) -> float:
    """Mean flag count when each site's dates are shuffled against scores.

    Each shuffle gets its own derived seed, so the work could be fanned
    out across workers without changing the result.
    """
    if n_shuffles < 1:
        raise AnalyzeError("n_shuffles must be >= 1")
    base = random.Random(seed)
    shuffle_seeds = [base.getrandbits(64) for _ in range(n_shuffles)]
    total = 0
    for shuffle_seed in shuffle_seeds:
        rng = rng_factory(shuffle_seed)
        permuted: dict[str, list[tuple[date, float]]] = {}
        for site, pages in sites.items():
            dates = [day for day, _ in pages]
            rng.shuffle(dates)
            permuted[site] = [(day, score)
                              for day, (_, score) in zip(dates, pages)]
        total += count_transition_flags(permuted, cutoff)
    return total / n_shuffles


# ---------------------------------------------------------------------------
# Page dating


_META_DATE_RE = re.compile(
    r"""<meta\s+[^>]*?(?:property=["']article:published_time["']
        |name=["'](?:date|dc\.date|article:published_time)["']
        |http-equiv=["']last-modified["'])[^>]*?>""",
    re.IGNORECASE | re.VERBOSE)
_CONTENT_RE = re.compile(r"""content=["']([^"']+)["']""", re.IGNORECASE)
_URL_DATE_RE = re.compile(r"/(20\d{2}|19\d{2})/(0[1-9]|1[0-2])(?:/|$)")


def _parse_date_text(text: str) -> date | None:
    text = text.strip()
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00")).date()
    except ValueError:
        pass
    try:
        return date.fromisoformat(text[:10])
    except ValueError:
        pass
    try:
        return parsedate_to_datetime(text).date()
    except (TypeError, ValueError):
        return None


def infer_page_date(page: PageRecord) -> date | None:
    """Best-effort page date: archive capture, meta tags, then URL path."""
    if page.dated_at is not None:
        return page.dated_at
    if page.archived_at is not None:
        return page.archived_at.date()
    if page.raw_html:
        markup = page.raw_html
        if isinstance(markup, bytes):
            markup = markup.decode("utf-8", errors="replace")
        for tag in _META_DATE_RE.finditer(markup):
            content = _CONTENT_RE.search(tag.group(0))
            if content:
                parsed = _parse_date_text(content.group(1))
                if parsed:
                    return parsed
    match = _URL_DATE_RE.search(urlsplit(page.url).path)
    if match:
        return date(int(match.group(1)), int(match.group(2)), 1)
    return None


def transition_for_site(site: str, pages: Iterable[PageRecord],
                        cutoff: date = CHATGPT_CUTOFF) -> TransitionResult:
    """detect_transition over PageRecords carrying scores; undatable or
    unscored pages are skipped."""
    dated: list[tuple[date, float]] = []
    for page in pages:
        day = infer_page_date(page)
        if day is not None and page.score is not None:
            dated.append((day, page.score))
    return detect_transition(site, dated, cutoff)


# ---------------------------------------------------------------------------
# Search-rank statistics


@dataclass(frozen=True)
class LabelRankStats:
    n_sites: int
    median_of_site_medians: float | None
    mean_of_site_medians: float | None
    mean_links_per_site: float | None


@dataclass(frozen=True)
class RankSummary:
    per_label: Mapping[str, LabelRankStats]
    frac_queries_with_llm_top10: float
    frac_queries_with_llm_top20: float
    n_queries: int


def rank_stats(results: Iterable[tuple[str, int, str]],
               labels: Mapping[str, str]) -> RankSummary:
    """Summarize search results (query, rank, site) by predicted label."""
    rows = list(results)
    for query, rank, site in rows:
        if rank < 1:
            raise AnalyzeError(f"rank must be >= 1, got {rank} for {site}")
        if site not in labels:
            raise AnalyzeError(f"no label for site {site}")

    site_ranks: dict[str, list[int]] = {}
    queries: dict[str, list[tuple[int, str]]] = {}
    for query, rank, site in rows:
        site_ranks.setdefault(site, []).append(rank)
        queries.setdefault(query, []).append((rank, site))

    per_label = {}
    for label in (LABEL_LLM_DOMINANT, LABEL_NOT):
        medians = []
        link_counts = []
        for site, ranks in site_ranks.items():
            if labels[site] != label:
                continue
            medians.append(percentile(ranks, 50))
            link_counts.append(len(ranks))
        if medians:
            per_label[label] = LabelRankStats(
                n_sites=len(medians),
                median_of_site_medians=percentile(medians, 50),
                mean_of_site_medians=sum(medians) / len(medians),
                mean_links_per_site=sum(link_counts) / len(link_counts))
        else:
            per_label[label] = LabelRankStats(0, None, None, None)

    top10 = top20 = 0
    for hits in queries.values():
        llm_ranks = [rank for rank, site in hits
                     if labels[site] == LABEL_LLM_DOMINANT]
        top10 += any(rank <= 10 for rank in llm_ranks)
        top20 += any(rank <= 20 for rank in llm_ranks)
    n_queries = len(queries)
    return RankSummary(
        per_label=per_label,
        frac_queries_with_llm_top10=top10 / n_queries if n_queries else 0.0,
        frac_queries_with_llm_top20=top20 / n_queries if n_queries else 0.0,
        n_queries=n_queries)


# ---------------------------------------------------------------------------
# Monetization signals


@dataclass(frozen=True)
class MonetizationSignals:
    adsense_ids: frozenset[str] = frozenset()
    affiliate_links: tuple[str, ...] = ()
    ad_element_count: int = 0

    def __post_init__(self) -> None:
        for pub_id in self.adsense_ids:
            if not ADSENSE_ID_RE.fullmatch(pub_id):
                raise AnalyzeError(f"not a publisher id: {pub_id!r}")
        if self.ad_element_count < 0:
            raise AnalyzeError("ad_element_count must be >= 0")


@dataclass(frozen=True)
class _Selector:
    tag: str | None
    element_id: str | None
    classes: frozenset[str]

    def matches(self, tag: str, element_id: str | None,
                classes: set[str]) -> bool:
        if self.tag is not None and self.tag != tag:
            return False
        if self.element_id is not None and self.element_id != element_id:
            return False
        return self.classes <= classes


_SELECTOR_PART_RE = re.compile(r"([.#]?)([A-Za-z0-9_-]+)")
_COMPOUND_ONLY_RE = re.compile(r"^(?:[.#]?[A-Za-z0-9_-]+)+$")


def parse_selector(selector: str) -> _Selector | None:
    """Parse one compound CSS selector (tag, #id, .classes); None if it
    uses combinators or other syntax we do not count."""
    selector = selector.strip()
    if not selector or not _COMPOUND_ONLY_RE.match(selector):
        return None
    tag: str | None = None
    element_id: str | None = None
    classes: set[str] = set()
    for prefix, name in _SELECTOR_PART_RE.findall(selector):
        if prefix == ".":
            classes.add(name)
        elif prefix == "#":
            element_id = name
        else:
            tag = name.lower()
    return _Selector(tag=tag, element_id=element_id,
                     classes=frozenset(classes))


def read_easylist_selectors(text: str) -> list[str]:
    """Generic element-hiding selectors (the ``##`` subset) from a list file."""
    selectors = []
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("##") and parse_selector(line[2:]) is not None:
            selectors.append(line[2:])
    return selectors


def read_affiliate_patterns(text: str) -> list[str]:
    """One regex per line; blanks and #-comments skipped."""
    patterns = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            re.compile(line)
        except re.error as exc:
            raise AnalyzeError(f"bad affiliate pattern {line!r}: {exc}")
        patterns.append(line)
    return patterns


class _SignalParser(HTMLParser):
    def __init__(self, selectors: Sequence[_Selector],
                 affiliate: Sequence[re.Pattern]):
        super().__init__(convert_charrefs=True)
        self.selectors = selectors
        self.affiliate = affiliate
        self.ad_elements = 0
        self.affiliate_links: list[str] = []

    def handle_starttag(self, tag: str, attrs) -> None:
        attr_map = dict(attrs)
        if tag == "a":
            href = attr_map.get("href") or ""
            if href and any(p.search(href) for p in self.affiliate):
                self.affiliate_links.append(href)
        element_id = attr_map.get("id")
        classes = set((attr_map.get("class") or "").split())
        if any(s.matches(tag, element_id, classes) for s in self.selectors):
            self.ad_elements += 1


def extract_signals(html: bytes | str,
                    ad_selectors: Sequence[str] = (),
                    affiliate_patterns: Sequence[str] =
                    DEFAULT_AFFILIATE_PATTERNS) -> MonetizationSignals:
    """Scan one page for publisher IDs, affiliate anchors, ad elements."""
    if isinstance(html, bytes):
        html = html.decode("utf-8", errors="replace")
    parsed = [s for s in (parse_selector(sel) for sel in ad_selectors)
              if s is not None]
    compiled = [re.compile(p) for p in affiliate_patterns]
    parser = _SignalParser(parsed, compiled)
    try:
        parser.feed(html)
        parser.close()
    except Exception as exc:  # count whatever parsed before the failure
        logger.warning("HTML parse stopped early: %s", exc)
    return MonetizationSignals(
        adsense_ids=frozenset(ADSENSE_ID_RE.findall(html)),
        affiliate_links=tuple(parser.affiliate_links),
        ad_element_count=parser.ad_elements)


def affiliate_tag(url: str, param_names: Sequence[str] = ("tag",)) -> str | None:
    """The affiliate tag carried by a link, when one of the known
    query parameters is present."""
    query = parse_qs(urlsplit(url).query)
    for name in param_names:
        values = query.get(name)
        if values and values[0]:
            return f"{name}={values[0]}"
    return None


# ---------------------------------------------------------------------------
# Shared-ID clustering


@dataclass(frozen=True)
class SharedIdGroup:
    sites: tuple[str, ...]
    shared_keys: tuple[str, ...]


def _signal_keys(signals: MonetizationSignals) -> set[str]:
    keys = set(signals.adsense_ids)
    for link in signals.affiliate_links:
        tag = affiliate_tag(link)
        if tag:
            keys.add(tag)
    return keys


def cluster_shared_ids(
        site_signals: Mapping[str, MonetizationSignals]) -> list[SharedIdGroup]:
    """Union-find over sites sharing any publisher ID or affiliate tag."""
    parent: dict[str, str] = {site: site for site in site_signals}

    def find(site: str) -> str:
        while parent[site] != site:
            parent[site] = parent[parent[site]]
            site = parent[site]
        return site

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    key_sites: dict[str, list[str]] = {}
    for site, signals in site_signals.items():
        for key in _signal_keys(signals):
            key_sites.setdefault(key, []).append(site)
    for sites in key_sites.values():
        for other in sites[1:]:
            union(sites[0], other)

    components: dict[str, list[str]] = {}
    for site in site_signals:
        components.setdefault(find(site), []).append(site)

    groups = []
    for members in components.values():
        if len(members) < 2:
            continue
        members_set = set(members)
        shared = sorted(
            key for key, sites in key_sites.items()
            if len(set(sites) & members_set) >= 2)
        groups.append(SharedIdGroup(sites=tuple(sorted(members)),
                                    shared_keys=tuple(shared)))
    groups.sort(key=lambda g: g.sites[0])
    return groups
