"""Polite site crawler.

Fetches a site's sampled candidate URLs through an injectable HTTP
transport while honoring robots.txt, a fixed per-host request delay, a
per-site visit budget, and a consecutive-transport-error stop. Responses
flow through extraction and the quality gate so crawling can stop as soon
as enough compliant pages are in hand.
"""
from __future__ import annotations

import logging
import re
import threading
import time
from collections import Counter
from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Protocol
from urllib.parse import urljoin, urlsplit

import requests

from .corpus import SOURCE_LIVE, PageRecord, normalize_fqdn, site_of_url
from .extract import chunk_text, duplicate_ratio, extract_main_content
from .quality import CompliancePolicy, assess_text, count_tokens

logger = logging.getLogger(__name__)

DEFAULT_USER_AGENT = ("degentweb/0.1 "
                      "(+https://degentweb.example.org/crawler-info)")

STOP_TARGET_MET = "target-met"
STOP_VISIT_CAP = "visit-cap"
STOP_ERROR = "error-stop"
STOP_EXHAUSTED = "exhausted"
STOP_REASONS = frozenset({STOP_TARGET_MET, STOP_VISIT_CAP, STOP_ERROR,
                          STOP_EXHAUSTED})

_MAX_REDIRECT_HOPS = 5


class CrawlError(ValueError):
    """Invalid crawl configuration or candidate set."""


class TransportError(RuntimeError):
    """Connection-level failure: DNS, refused, reset, timeout."""


@dataclass(frozen=True)
class CrawlPolicy:
    """Politeness budget for one site."""

    per_host_delay_s: float = 60.0
    max_site_visits: int = 340
    max_consecutive_errors: int = 3
    user_agent: str = DEFAULT_USER_AGENT
    obey_robots: bool = True
    target_compliant_pages: int = 15
    sample_cap: int = 20

    def __post_init__(self) -> None:
        if self.per_host_delay_s <= 0:
            raise CrawlError("per_host_delay_s must be positive")
        for name in ("max_site_visits", "max_consecutive_errors",
                     "target_compliant_pages", "sample_cap"):
            if getattr(self, name) < 1:
                raise CrawlError(f"{name} must be positive")
        if not self.user_agent.strip():
            raise CrawlError("user_agent must be non-empty")
        if "http" not in self.user_agent:
            raise CrawlError("user_agent must carry a project-info URL")


@dataclass(frozen=True)
class CrawlStats:
    """What one site crawl did and why it stopped."""

    requests_made: int
    robots_denied: int
    errors: int
    pages_fetched: int
    stopped_reason: str
    cross_host_redirects: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.stopped_reason not in STOP_REASONS:
            raise CrawlError(
                f"unknown stopped_reason: {self.stopped_reason!r}")


@dataclass(frozen=True)
class FetchResponse:
    """One HTTP response as seen by the crawler (redirects not followed)."""

    status: int
    body: str
    headers: Mapping[str, str] = field(default_factory=dict)
    url: str = ""

    def header(self, name: str) -> str | None:
        for key, value in self.headers.items():
            if key.lower() == name.lower():
                return value
        return None


class Fetcher(Protocol):
    def __call__(self, url: str, *, user_agent: str) -> FetchResponse:
        """Issue one GET; raise TransportError on connection failure."""


def _decode_body(response: requests.Response) -> str:
    """Body text, defaulting to UTF-8 when no charset is declared.

    ``requests`` falls back to ISO-8859-1 for charset-less text/* replies,
    which silently corrupts the UTF-8 that servers overwhelmingly send.
    """
    content_type = response.headers.get("Content-Type") or ""
    if "charset" in content_type.lower():
        return response.text
    try:
        return response.content.decode("utf-8")
    except UnicodeDecodeError:
        return response.content.decode("latin-1", errors="replace")


class RequestsFetcher:
    """Real HTTP transport; one session, no automatic redirects."""

    def __init__(self, timeout: float = 30.0,
                 session: requests.Session | None = None):
        self.timeout = timeout
        self._session = session or requests.Session()

    def __call__(self, url: str, *, user_agent: str) -> FetchResponse:
        try:
            response = self._session.get(
                url, headers={"User-Agent": user_agent},
                timeout=self.timeout, allow_redirects=False)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return FetchResponse(status=response.status_code,
                             body=_decode_body(response),
                             headers=dict(response.headers),
                             url=response.url)


class HostScheduler:
    """Serializes requests per host with a minimum gap between them.

    The only shared mutable state when many sites are crawled concurrently.
    Clock and sleep are injectable so the delay is testable with a virtual
    clock.
    """

    def __init__(self, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self._clock = clock
        self._sleep = sleep
        self._next_ok: dict[str, float] = {}
        self._lock = threading.Lock()

    def wait_turn(self, host: str, delay: float) -> float:
        """Block until the host's gap has elapsed; return the grant time."""
        with self._lock:
            now = self._clock()
            start = max(now, self._next_ok.get(host, now))
            self._next_ok[host] = start + delay
        if start > now:
            self._sleep(start - now)
        return start


@dataclass(frozen=True)
class _RobotsRule:
    allow: bool
    pattern: str
    regex: re.Pattern


def _compile_rule(allow: bool, pattern: str) -> _RobotsRule:
    parts = []
    for i, piece in enumerate(pattern.split("*")):
        if i:
            parts.append(".*")
        parts.append(re.escape(piece))
    regex = "".join(parts)
    if regex.endswith(re.escape("$")):
        regex = regex[: -len(re.escape("$"))] + "$"
    return _RobotsRule(allow=allow, pattern=pattern,
                       regex=re.compile("^" + regex))


class RobotsPolicy:
    """Allow/Disallow matching with longest-pattern-wins semantics."""

    def __init__(self, rules: Sequence[_RobotsRule] = ()):
        self._rules = tuple(rules)

    def allows(self, path: str) -> bool:
        if not path.startswith("/"):
            path = "/" + path
        best: _RobotsRule | None = None
        for rule in self._rules:
            if not rule.regex.match(path):
                continue
            if (best is None
                    or len(rule.pattern) > len(best.pattern)
                    or (len(rule.pattern) == len(best.pattern)
                        and rule.allow and not best.allow)):
                best = rule
        return best.allow if best is not None else True

    @classmethod
    def allow_all(cls) -> "RobotsPolicy":
        return cls(())


def _agent_token(user_agent: str) -> str:
    head = user_agent.split("/", 1)[0].split(" ", 1)[0]
    return head.strip().lower()


def parse_robots(text: str, user_agent: str) -> RobotsPolicy:
    """Parse robots.txt, keeping the most specific matching agent group."""
    token = _agent_token(user_agent)
    groups: list[tuple[list[str], list[_RobotsRule]]] = []
    agents: list[str] = []
    rules: list[_RobotsRule] = []
    saw_rule = False
    for raw_line in text.splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line or ":" not in line:
            continue
        name, _, value = line.partition(":")
        name = name.strip().lower()
        value = value.strip()
        if name == "user-agent":
            if saw_rule:
                groups.append((agents, rules))
                agents, rules, saw_rule = [], [], False
            agents.append(value.lower())
        elif name in ("allow", "disallow"):
            saw_rule = True
            if value:
                rules.append(_compile_rule(name == "allow", value))
            # An empty Disallow allows everything: no rule needed.
    if agents or rules:
        groups.append((agents, rules))

    chosen: list[_RobotsRule] | None = None
    chosen_specificity = -1
    for group_agents, group_rules in groups:
        for agent in group_agents:
            if agent == "*":
                specificity = 0
            elif agent and agent in token:
                specificity = len(agent)
            else:
                continue
            if specificity > chosen_specificity:
                chosen = group_rules
                chosen_specificity = specificity
    return RobotsPolicy(chosen or ())


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _is_html(response: FetchResponse) -> bool:
    content_type = response.header("Content-Type")
    return content_type is None or "text/html" in content_type.lower()


class _SiteCrawl:
    """Mutable per-site crawl state; single-threaded within one site."""

    def __init__(self, site: str, policy: CrawlPolicy, fetcher: Fetcher,
                 scheduler: HostScheduler, compliance: CompliancePolicy,
                 now: Callable[[], datetime]):
        self.site = site
        self.policy = policy
        self.fetcher = fetcher
        self.scheduler = scheduler
        self.compliance = compliance
        self.now = now
        self.requests_made = 0
        self.robots_denied = 0
        self.errors = 0
        self.consecutive_errors = 0
        self.cross_host: list[str] = []
        self.records: list[PageRecord] = []
        self.compliant = 0
        # Running fingerprint index of pages stored so far: lets the online
        # duplicate-ratio gate see each new page against its predecessors.
        self._site_index: Counter[int] = Counter()

    def budget_left(self) -> bool:
        return self.requests_made < self.policy.max_site_visits

    def request(self, url: str) -> FetchResponse | None:
        """One budgeted, delayed GET; None on transport error."""
        self.scheduler.wait_turn(self.site, self.policy.per_host_delay_s)
        self.requests_made += 1
        try:
            response = self.fetcher(url, user_agent=self.policy.user_agent)
        except TransportError as exc:
            self.errors += 1
            self.consecutive_errors += 1
            logger.info("transport error on %s: %s", url, exc)
            return None
        self.consecutive_errors = 0
        return response

    def error_stopped(self) -> bool:
        return self.consecutive_errors >= self.policy.max_consecutive_errors

    def fetch_robots(self, origin: str) -> RobotsPolicy:
        url = f"{origin}/robots.txt"
        while self.budget_left() and not self.error_stopped():
            response = self.request(url)
            if response is None:
                continue
            if 200 <= response.status < 300:
                return parse_robots(response.body, self.policy.user_agent)
            if 400 <= response.status < 500:
                return RobotsPolicy.allow_all()
            logger.warning("robots.txt on %s returned HTTP %d; "
                           "treating as allow-all", self.site,
                           response.status)
            return RobotsPolicy.allow_all()
        logger.warning("robots.txt on %s unreachable; treating as allow-all",
                       self.site)
        return RobotsPolicy.allow_all()

    def fetch_page(self, url: str, robots: RobotsPolicy) -> None:
        """Fetch one candidate, following same-host redirects."""
        current = url
        for _ in range(_MAX_REDIRECT_HOPS + 1):
            if self.policy.obey_robots and not robots.allows(
                    urlsplit(current).path or "/"):
                self.robots_denied += 1
                return
            if not self.budget_left():
                return
            response = self.request(current)
            if response is None or self.error_stopped():
                return
            if 300 <= response.status < 400:
                location = response.header("Location")
                if not location:
                    return
                target = urljoin(current, location)
                if site_of_url(target) != self.site:
                    self.cross_host.append(target)
                    return
                current = target
                continue
            if 200 <= response.status < 300 and _is_html(response):
                self.store_page(current, response.body)
            return
        logger.info("redirect chain exceeded %d hops for %s",
                    _MAX_REDIRECT_HOPS, url)

    def store_page(self, url: str, html: str) -> None:
        text = extract_main_content(html)
        chunks = chunk_text(text)
        dup = duplicate_ratio(chunks, self._site_index)
        result = assess_text(text, dup, self.compliance)
        record = PageRecord(url=url, site=self.site, fetched_at=self.now(),
                            source=SOURCE_LIVE,
                            raw_html=html.encode("utf-8"),
                            extracted_text=text,
                            token_count=count_tokens(text),
                            compliance=result)
        self.records.append(record)
        self._site_index.update(fp for fp, _ in chunks.chunks)
        if result.compliant:
            self.compliant += 1

    def stats(self, reason: str) -> CrawlStats:
        return CrawlStats(requests_made=self.requests_made,
                          robots_denied=self.robots_denied,
                          errors=self.errors,
                          pages_fetched=len(self.records),
                          stopped_reason=reason,
                          cross_host_redirects=tuple(self.cross_host))


def crawl_site(site: str, candidate_urls: Sequence[str], policy: CrawlPolicy,
               fetcher: Fetcher, *,
               scheduler: HostScheduler | None = None,
               compliance: CompliancePolicy | None = None,
               now: Callable[[], datetime] = _utc_now,
               ) -> tuple[list[PageRecord], CrawlStats]:
    """Crawl one site's sampled candidates under the politeness policy.

    Only 2xx HTML responses become PageRecords. Stops at
    ``target_compliant_pages`` quality-passing pages, the per-site visit
    budget (robots fetch included), or ``max_consecutive_errors``
    transport failures in a row.
    """
    site = normalize_fqdn(site)
    for url in candidate_urls:
        if site_of_url(url) != site:
            raise CrawlError(f"candidate {url!r} is not on site {site!r}")
    candidates = list(candidate_urls)[: policy.sample_cap]
    state = _SiteCrawl(site, policy, fetcher,
                       scheduler or HostScheduler(),
                       compliance or CompliancePolicy(), now)

    if candidates:
        first = urlsplit(candidates[0])
        # The full authority (port included) so robots.txt is fetched from
        # the server actually being crawled.
        origin = f"{first.scheme or 'https'}://{first.netloc}"
    else:
        origin = f"https://{site}"
    robots = (state.fetch_robots(origin)
              if policy.obey_robots else RobotsPolicy.allow_all())

    reason = STOP_EXHAUSTED
    for url in candidates:
        if state.error_stopped():
            reason = STOP_ERROR
            break
        if not state.budget_left():
            reason = STOP_VISIT_CAP
            break
        state.fetch_page(url, robots)
        if state.compliant >= policy.target_compliant_pages:
            reason = STOP_TARGET_MET
            break
    else:
        if state.error_stopped():
            reason = STOP_ERROR
        elif not state.budget_left():
            reason = STOP_VISIT_CAP
    return state.records, state.stats(reason)


def crawl_sites(sites: Mapping[str, Sequence[str]] | Iterable[tuple[str, Sequence[str]]],
                policy: CrawlPolicy, fetcher: Fetcher, *,
                concurrency: int = 8,
                scheduler: HostScheduler | None = None,
                compliance: CompliancePolicy | None = None,
                now: Callable[[], datetime] = _utc_now,
                ) -> dict[str, tuple[list[PageRecord], CrawlStats]]:
    """Crawl many sites concurrently; one shared host scheduler."""
    if concurrency < 1:
        raise CrawlError("concurrency must be >= 1")
    items = list(sites.items() if isinstance(sites, Mapping) else sites)
    shared = scheduler or HostScheduler()

    def run(item: tuple[str, Sequence[str]]):
        site, urls = item
        return site, crawl_site(site, urls, policy, fetcher,
                                scheduler=shared, compliance=compliance,
                                now=now)

    if concurrency == 1 or len(items) <= 1:
        results = [run(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            results = list(pool.map(run, items))
    return dict(results)
