"""Synthetic-site planning and rendering.

Validates site plans and page documents, wraps page bodies in the fixed
HTML template bundled with the package, and supplies a deterministic mock
text source so desk-scale corpora need no external text generator.
"""
from __future__ import annotations

import contextlib
import hashlib
import html
import json
import logging
import random
import re
import threading
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache, partial
from html.parser import HTMLParser
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from pathlib import Path
from string import Template
from urllib.parse import urljoin, urlsplit

from .scorer import HUMAN_TEXT_MARKER, LLM_TEXT_MARKER

logger = logging.getLogger(__name__)

PAGES_PER_SITE = 20
MIN_DEEP_SLUGS = 6
MIN_INTERNAL_LINKS = 2
MIN_VISIBLE_WORDS = 100
MAX_VISIBLE_WORDS = 900

STYLE_HUMAN = "human-like"
STYLE_LLM = "llm-like"
STYLES = frozenset({STYLE_HUMAN, STYLE_LLM})

#: Tags the template supplies; a body fragment must not nest its own.
FORBIDDEN_BODY_TAGS = frozenset({"html", "head", "body", "main", "header",
                                 "footer"})


class SitegenError(ValueError):
    """One or more plan/document violations; ``violations`` lists them all."""

    def __init__(self, violations: Iterable[str]):
        self.violations = tuple(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class PagePlan:
    slug: str
    title: str
    parent_slug: str | None
    page_type: str
    instruction: str


@dataclass(frozen=True)
class SitePlan:
    site_name: str
    tagline: str
    theme: str
    footer_blurb: str
    pages: tuple[PagePlan, ...]

    def slugs(self) -> tuple[str, ...]:
        return tuple(page.slug for page in self.pages)

    def top_level_slugs(self) -> tuple[str, ...]:
        return tuple(page.slug for page in self.pages
                     if len(_segments(page.slug)) <= 1)


@dataclass(frozen=True)
class PageDoc:
    meta_description: str
    og_type: str
    hero_heading: str
    body_html: str


def _segments(slug: str) -> list[str]:
    return [part for part in slug.split("/") if part]


def normalize_slug(slug: str) -> str:
    """Lowercase, collapse duplicate slashes, anchor at the site root."""
    collapsed = re.sub(r"/+", "/", slug.strip().lower())
    if not collapsed.startswith("/"):
        collapsed = "/" + collapsed
    if len(collapsed) > 1:
        collapsed = collapsed.rstrip("/")
    return collapsed or "/"


def _plan_violations(plan: SitePlan) -> list[str]:
    violations = []
    slugs = plan.slugs()
    if len(slugs) != PAGES_PER_SITE:
        violations.append(
            f"page count must be exactly {PAGES_PER_SITE}, got {len(slugs)}")
    duplicates = sorted({s for s in slugs if slugs.count(s) > 1})
    if duplicates:
        violations.append(f"duplicate slugs: {', '.join(duplicates)}")
    roots = [s for s in slugs if s == "/"]
    if len(roots) != 1:
        violations.append(
            f"exactly one root page with slug '/' required, got {len(roots)}")
    deep = [s for s in slugs if len(_segments(s)) >= 2]
    if len(deep) < MIN_DEEP_SLUGS:
        violations.append(f"at least {MIN_DEEP_SLUGS} slugs need >= 2 "
                          f"path segments, got {len(deep)}")
    slug_set = set(slugs)
    for page in plan.pages:
        if page.slug != normalize_slug(page.slug):
            violations.append(f"slug not normalized: {page.slug!r}")
        if page.parent_slug is not None and page.parent_slug not in slug_set:
            violations.append(f"parent_slug {page.parent_slug!r} of "
                              f"{page.slug!r} is not in the plan")
        if not page.title.strip():
            violations.append(f"empty title for slug {page.slug!r}")
    for field_name in ("site_name", "tagline", "theme", "footer_blurb"):
        if not getattr(plan, field_name).strip():
            violations.append(f"empty {field_name}")
    return violations


def validate_plan(document: str) -> SitePlan:
    """Parse plan JSON, normalize slugs, and enforce every invariant."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SitegenError([f"unparseable JSON: {exc}"])
    if not isinstance(data, dict):
        raise SitegenError(["plan document must be a JSON object"])
    try:
        pages = tuple(
            PagePlan(
                slug=normalize_slug(str(page["slug"])),
                title=str(page["title"]),
                parent_slug=(None if page.get("parent_slug") is None
                             else normalize_slug(str(page["parent_slug"]))),
                page_type=str(page.get("page_type", "page")),
                instruction=str(page.get("instruction", "")),
            )
            for page in data["pages"])
        plan = SitePlan(site_name=str(data["site_name"]),
                        tagline=str(data["tagline"]),
                        theme=str(data["theme"]),
                        footer_blurb=str(data["footer_blurb"]),
                        pages=pages)
    except (KeyError, TypeError) as exc:
        raise SitegenError([f"malformed plan structure: {exc!r}"])
    violations = _plan_violations(plan)
    if violations:
        raise SitegenError(violations)
    return plan


def plan_to_dict(plan: SitePlan) -> dict:
    return {
        "site_name": plan.site_name,
        "tagline": plan.tagline,
        "theme": plan.theme,
        "footer_blurb": plan.footer_blurb,
        "pages": [
            {"slug": p.slug, "title": p.title, "parent_slug": p.parent_slug,
             "page_type": p.page_type, "instruction": p.instruction}
            for p in plan.pages],
    }


class _FragmentAudit(HTMLParser):
    """Collects forbidden tags, visible words, and internal link targets."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.forbidden: set[str] = set()
        self.hrefs: list[str] = []
        self._text: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in FORBIDDEN_BODY_TAGS:
            self.forbidden.add(tag)
        if tag in ("script", "style"):
            self._skip_depth += 1
        if tag == "a":
            href = dict(attrs).get("href")
            if href:
                self.hrefs.append(href)

    def handle_endtag(self, tag: str) -> None:
        if tag in ("script", "style") and self._skip_depth:
            self._skip_depth -= 1

    def handle_data(self, data: str) -> None:
        if not self._skip_depth:
            self._text.append(data)

    def visible_words(self) -> int:
        return len(" ".join(self._text).split())


def _resolve_internal(href: str) -> str | None:
    """Slug a link points to, when it stays on-site; None otherwise."""
    split = urlsplit(href)
    if split.scheme or split.netloc:
        return None
    resolved = urljoin("/", split.path or "/")
    return normalize_slug(resolved)


def audit_page_doc(doc: PageDoc, plan: SitePlan) -> list[str]:
    """All invariant violations of one page document against its plan."""
    audit = _FragmentAudit()
    audit.feed(doc.body_html)
    audit.close()
    violations = []
    if audit.forbidden:
        violations.append("body_html contains forbidden tags: "
                          + ", ".join(sorted(audit.forbidden)))
    words = audit.visible_words()
    if not MIN_VISIBLE_WORDS <= words <= MAX_VISIBLE_WORDS:
        violations.append(f"visible text must be {MIN_VISIBLE_WORDS}-"
                          f"{MAX_VISIBLE_WORDS} words, got {words}")
    slug_set = set(plan.slugs())
    internal = [href for href in audit.hrefs
                if _resolve_internal(href) in slug_set]
    if len(internal) < MIN_INTERNAL_LINKS:
        violations.append(f"needs >= {MIN_INTERNAL_LINKS} internal links to "
                          f"plan slugs, found {len(internal)}")
    return violations


@lru_cache(maxsize=1)
def _template() -> Template:
    text = (resources.files("degentweb") / "data" / "template.html"
            ).read_text(encoding="utf-8")
    return Template(text)


def template_bytes() -> bytes:
    """The fixed template exactly as bundled (for integrity checks)."""
    return (resources.files("degentweb") / "data" / "template.html"
            ).read_bytes()


def _theme_slug(theme: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", theme.lower()).strip("-") or "plain"


def render_page(plan: SitePlan, page: PagePlan, doc: PageDoc) -> str:
    nav_links = "".join(
        f'<a href="{html.escape(slug, quote=True)}">'
        f"{html.escape(_title_for(plan, slug))}</a>"
        for slug in plan.top_level_slugs())
    return _template().substitute(
        title=html.escape(page.title),
        site_name=html.escape(plan.site_name),
        meta_description=html.escape(doc.meta_description, quote=True),
        og_type=html.escape(doc.og_type, quote=True),
        theme_slug=_theme_slug(plan.theme),
        tagline=html.escape(plan.tagline),
        hero_heading=html.escape(doc.hero_heading),
        nav_links=nav_links,
        body_html=doc.body_html,
        footer_blurb=html.escape(plan.footer_blurb))


def _title_for(plan: SitePlan, slug: str) -> str:
    for page in plan.pages:
        if page.slug == slug:
            return page.title if slug != "/" else "Home"
    return slug


def render_site(plan: SitePlan, docs: Mapping[str, PageDoc]) -> dict[str, str]:
    """Every plan page wrapped in the fixed template; byte-deterministic.

    Word-count violations in supplied documents are warned about, not
    fatal (the bound is advisory for external text); every other document
    invariant is enforced.
    """
    violations = []
    missing = [slug for slug in plan.slugs() if slug not in docs]
    if missing:
        violations.append(f"docs missing for slugs: {', '.join(missing)}")
    extra = sorted(set(docs) - set(plan.slugs()))
    if extra:
        violations.append(f"docs for unplanned slugs: {', '.join(extra)}")
    for page in plan.pages:
        if page.slug not in docs:
            continue
        for violation in audit_page_doc(docs[page.slug], plan):
            if "visible text" in violation:
                logger.warning("%s: %s", page.slug, violation)
            else:
                violations.append(f"{page.slug}: {violation}")
    if violations:
        raise SitegenError(violations)
    return {page.slug: render_page(plan, page, docs[page.slug])
            for page in plan.pages}


# ---------------------------------------------------------------------------
# Deterministic mock text source

_ADJECTIVES = (
    "quiet", "amber", "weathered", "brisk", "mossy", "patient", "stubborn",
    "narrow", "cedar", "coastal", "gentle", "rusted", "early", "pale",
    "crooked", "warm", "distant", "spare", "tidy", "plain", "worn", "deep",
    "slow", "bright", "faded", "rough", "steep", "thin", "broad", "calm",
)
_NOUNS = (
    "harbor", "ledger", "orchard", "lantern", "workbench", "footpath",
    "kettle", "meadow", "signal", "sawmill", "estuary", "notebook",
    "granary", "ridge", "mill", "garden", "quarry", "shoreline", "cellar",
    "bridge", "paddock", "thicket", "compass", "hearth", "valley", "loft",
    "terrace", "creek", "barrow", "spring", "hollow", "bluff", "marsh",
    "grove", "landing", "crossing", "pasture", "furrow", "beacon", "wharf",
)
_VERBS = (
    "settles", "gathers", "weathers", "carries", "anchors", "shelters",
    "steadies", "borders", "outlasts", "reaches", "holds", "turns",
    "guards", "frames", "softens", "crosses", "marks", "feeds", "drains",
    "warms", "cools", "shades", "splits", "joins", "lines", "meets",
)
_PREPOSITIONS = ("beside", "beyond", "under", "near", "along", "behind",
                 "above", "past")
_TIME_WORDS = ("early", "late", "soon", "yearly", "daily", "slowly",
               "quietly", "gradually", "briefly", "evenly", "gently",
               "steadily", "often", "rarely", "seasonally", "overnight")


def _derive_rng(slug: str, seed: int, label: str) -> random.Random:
    digest = hashlib.blake2b(
        f"{slug}\x1f{label}".encode("utf-8"),
        key=seed.to_bytes(8, "big", signed=False), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


def _sentence(rng: random.Random) -> str:
    # Every content slot draws from a pool so that no five-word window is
    # fixed; repeated 5-grams would otherwise trip the duplication gate.
    pick = rng.choice
    if rng.random() < 0.5:
        words = [
            "The", pick(_ADJECTIVES), pick(_NOUNS), pick(_VERBS),
            pick(_PREPOSITIONS), "the", pick(_ADJECTIVES), pick(_NOUNS),
            "and", pick(_VERBS), pick(_TIME_WORDS), "with", "the",
            pick(_ADJECTIVES), pick(_NOUNS),
        ]
    else:
        words = [
            pick(_TIME_WORDS).capitalize(), "the", pick(_NOUNS),
            pick(_VERBS), "the", pick(_ADJECTIVES), pick(_NOUNS),
            "while", "a", pick(_ADJECTIVES), pick(_NOUNS), pick(_VERBS),
            pick(_PREPOSITIONS), "the", pick(_NOUNS),
        ]
    return " ".join(words) + "."


def _heading(rng: random.Random) -> str:
    return (f"{rng.choice(_ADJECTIVES).capitalize()} "
            f"{rng.choice(_NOUNS)} notes")


def mock_page_text(slug: str, seed: int, label: str,
                   link_slugs: Sequence[str] = ()) -> PageDoc:
    """Deterministic filler prose for one page.

    The two styles differ only by an invisible marker consumed by the mock
    scorer; everything else about the page is identical for a given
    (slug, seed).
    """
    if label not in STYLES:
        raise SitegenError([f"unknown style {label!r}"])
    slug = normalize_slug(slug)
    # Same rng for both styles so the texts differ only by the marker.
    rng = _derive_rng(slug, seed, "style-agnostic")
    target_words = rng.randint(220, 600)
    marker = LLM_TEXT_MARKER if label == STYLE_LLM else HUMAN_TEXT_MARKER

    paragraphs: list[list[str]] = [[]]
    words = 0
    while words < target_words:
        sentence = _sentence(rng)
        if len(paragraphs[-1]) >= 4:
            paragraphs.append([])
        paragraphs[-1].append(sentence)
        words += len(sentence.split())

    links = ["/", slug]
    links.extend(s for s in link_slugs if s not in links)
    anchors = " ".join(
        f'See <a href="{html.escape(target, quote=True)}">the '
        f"{rng.choice(_ADJECTIVES)} {rng.choice(_NOUNS)}</a> that "
        f"{rng.choice(_VERBS)} {rng.choice(_PREPOSITIONS)} the "
        f"{rng.choice(_ADJECTIVES)} {rng.choice(_NOUNS)}."
        for target in links[:4])

    heading = _heading(rng)
    parts = [f"<h2>{html.escape(heading)}</h2>"]
    for i, sentences in enumerate(paragraphs):
        text = " ".join(sentences)
        if i == 0:
            # Leading position keeps the line's terminal punctuation intact
            # for line-level cleaning while the marker still survives
            # extraction.
            text = marker + text
        parts.append(f"<p>{text}</p>")
    parts.append(f"<p>{anchors}</p>")

    first = paragraphs[0][0]
    return PageDoc(
        meta_description=first[:150].rstrip("."),
        og_type="website" if slug == "/" else "article",
        hero_heading=heading,
        body_html="\n".join(parts))


_SECTION_WORDS = ("guides", "notes", "field", "harvest", "repairs", "tools",
                  "seasons", "letters", "routes", "stories")


def mock_site_plan(site_name: str, seed: int, theme: str = "field notes",
                   ) -> SitePlan:
    """A valid deterministic 20-page plan for desk-scale corpora."""
    rng = random.Random(hashlib.blake2b(
        site_name.encode("utf-8"), key=seed.to_bytes(8, "big"),
        digest_size=8).digest())
    sections = rng.sample(_SECTION_WORDS, 4)
    pages = [PagePlan(slug="/", title=f"{site_name} home", parent_slug=None,
                      page_type="home", instruction="overview")]
    for section in sections:
        pages.append(PagePlan(slug=f"/{section}",
                              title=f"{section.capitalize()}",
                              parent_slug="/", page_type="category",
                              instruction=f"index of {section}"))
    used: set[str] = set()
    while len(pages) < PAGES_PER_SITE:
        section = rng.choice(sections)
        leaf = (f"{rng.choice(_ADJECTIVES)}-{rng.choice(_NOUNS)}")
        slug = f"/{section}/{leaf}"
        if slug in used:
            continue
        used.add(slug)
        pages.append(PagePlan(slug=slug,
                              title=leaf.replace("-", " ").capitalize(),
                              parent_slug=f"/{section}",
                              page_type="article",
                              instruction=f"article about {leaf}"))
    return SitePlan(site_name=site_name, tagline="notes from the field",
                    theme=theme, footer_blurb=f"{site_name} — all rights "
                    "reserved.", pages=tuple(pages))


def mock_site_docs(plan: SitePlan, seed: int, label: str,
                   ) -> dict[str, PageDoc]:
    """Mock documents for every page, cross-linking within the plan."""
    slugs = plan.slugs()
    docs = {}
    for i, page in enumerate(plan.pages):
        extra = [slugs[(i + 3) % len(slugs)], slugs[(i + 7) % len(slugs)]]
        docs[page.slug] = mock_page_text(page.slug, seed, label,
                                         link_slugs=extra)
    return docs


# ---------------------------------------------------------------------------
# Directory output and a static server for crawl tests


def slug_path(out_dir: Path, slug: str) -> Path:
    relative = Path(*_segments(slug)) / "index.html" if slug != "/" \
        else Path("index.html")
    return out_dir / relative


def write_site(rendered: Mapping[str, str], out_dir: str | Path) -> list[Path]:
    """Write slug → index.html files under ``out_dir``; returns the paths."""
    out_dir = Path(out_dir)
    written = []
    for slug in sorted(rendered):
        target = slug_path(out_dir, slug)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(rendered[slug], encoding="utf-8")
        written.append(target)
    return written


class DirectoryFetcher:
    """Crawl-transport view of written site trees: no sockets involved.

    URLs of the form ``https://{name}{domain_suffix}/slug`` resolve to
    ``root/{name}/slug/index.html``; anything unresolvable (robots.txt
    included) is a plain 404, so the crawler treats each tree as a site
    with no robots restrictions.
    """

    def __init__(self, root: str | Path, domain_suffix: str = ".example"):
        self.root = Path(root)
        self.domain_suffix = domain_suffix

    def url_for(self, name: str, slug: str) -> str:
        return f"https://{name}{self.domain_suffix}{slug}"

    def __call__(self, url: str, *, user_agent: str):
        from .crawl import FetchResponse  # local import avoids a cycle
        split = urlsplit(url)
        host = split.hostname or ""
        status, body = 404, ""
        if host.endswith(self.domain_suffix):
            name = host[: -len(self.domain_suffix)]
            slug = normalize_slug(split.path or "/")
            site_dir = self.root / name
            target = slug_path(site_dir, slug)
            if (".." not in _segments(slug) and "/" not in name
                    and site_dir.is_dir() and target.is_file()):
                status, body = 200, target.read_text(encoding="utf-8")
        return FetchResponse(
            status=status, body=body,
            headers={"Content-Type": "text/html; charset=utf-8"}, url=url)


class _QuietHandler(SimpleHTTPRequestHandler):
    def log_message(self, *args) -> None:
        pass


@contextlib.contextmanager
def serve_directory(root: str | Path):
    """Serve a rendered site over local HTTP; yields the base URL."""
    handler = partial(_QuietHandler, directory=str(root))
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        thread.join()
