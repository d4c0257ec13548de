"""Hierarchical memory store: dimensions hold pages, pages hold sections.

The store is a plain in-memory object tree. Persistence (the wiki file tree)
lives in wiki.py; this module owns the types, their invariants, and the
mutating operations. Concurrency contract: single writer, readers work on
snapshot() copies.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterator

from .errors import NotFoundError, ValidationError
from .links import LinkGraph

SECTION_CATEGORIES = ("experience", "preference", "interest", "objective fact")
PATH_PREFIX = "user/assistant"

_UNSAFE_CHARS = re.compile(r'[/\\:*?"<>|%\x00-\x1f]')


def slugify(title: str) -> str:
    """Filename for a page title: verbatim text with unsafe characters percent-encoded.

    Spaces, apostrophes, and case are preserved so paths read like the titles.
    """
    title = title.strip()
    if not title:
        raise ValidationError("page title must be non-empty")
    return _UNSAFE_CHARS.sub(lambda m: f"%{ord(m.group(0)):02X}", title)


def page_path(dimension: str, title: str) -> str:
    return f"{PATH_PREFIX}/{dimension}/{slugify(title)}.md"


def dimension_of_path(path: str) -> str:
    parts = path.split("/")
    if len(parts) != 4 or parts[0] != "user" or parts[1] != "assistant" or not parts[3].endswith(".md"):
        raise ValidationError(f"malformed page path {path!r}")
    return parts[2]


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


Clock = Callable[[], str]


@dataclass(frozen=True)
class Fact:
    """Structured (subject, predicate, object, timestamp?) tuple."""

    subject: str
    predicate: str
    obj: str
    timestamp: str | None = None

    def to_list(self) -> list:
        return [self.subject, self.predicate, self.obj, self.timestamp]

    @classmethod
    def from_list(cls, raw: list) -> "Fact":
        subject, predicate, obj = raw[0], raw[1], raw[2]
        ts = raw[3] if len(raw) > 3 else None
        return cls(subject, predicate, obj, ts)


@dataclass
class Section:
    title: str
    category: str
    detail: str
    facts: list[Fact] = field(default_factory=list)
    confidence: float = 1.0
    temporal_context: str | None = None
    related_pages: list[str] = field(default_factory=list)
    superseded_by: str | None = None          # "<page path>#s<section index>"
    annotations: list[tuple[str, str]] = field(default_factory=list)
    original_detail: str | None = None        # pre-compression text, sidecar only


@dataclass
class Page:
    path: str
    title: str
    summary: str
    aliases: list[str] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)
    sections: list[Section] = field(default_factory=list)
    status: str = "active"
    annotations: list[tuple[str, str]] = field(default_factory=list)

    @property
    def active(self) -> bool:
        return self.status == "active"


@dataclass
class Dimension:
    name: str
    description: str = ""
    pages: list[Page] = field(default_factory=list)

    def active_pages(self) -> list[Page]:
        return [p for p in self.pages if p.active]


@dataclass
class AccessEntry:
    read_count: int = 0
    last_access: str | None = None


@dataclass
class MemoryStore:
    owner_id: str
    dimensions: list[Dimension] = field(default_factory=list)
    access_log: dict[str, AccessEntry] = field(default_factory=dict)
    creation_stats: dict[int, int] = field(default_factory=dict)
    links: LinkGraph = field(default_factory=LinkGraph)
    pending_links: list[dict] = field(default_factory=list)
    page_created: dict[str, str | None] = field(default_factory=dict)
    last_ingested: str | None = None

    # -- lookups ------------------------------------------------------------

    def dimension(self, name: str) -> Dimension | None:
        for dim in self.dimensions:
            if dim.name == name:
                return dim
        return None

    def iter_pages(self) -> Iterator[tuple[Dimension, Page]]:
        for dim in self.dimensions:
            for page in dim.pages:
                yield dim, page

    def find_page(self, path: str) -> Page | None:
        for _, page in self.iter_pages():
            if page.path == path:
                return page
        return None

    def page_paths(self) -> list[str]:
        return [page.path for _, page in self.iter_pages()]

    def page_count(self) -> int:
        return sum(len(d.pages) for d in self.dimensions)

    def snapshot(self) -> "MemoryStore":
        """Deep copy handed to readers; safe across threads of control."""
        return copy.deepcopy(self)


def make_page(
    dimension: str,
    title: str,
    summary: str,
    aliases: list[str] | None = None,
    tags: list[str] | None = None,
    sections: list[Section] | None = None,
    status: str = "active",
) -> Page:
    return Page(
        path=page_path(dimension, title),
        title=title.strip(),
        summary=summary,
        aliases=list(aliases or []),
        tags=list(tags or []),
        sections=list(sections or []),
        status=status,
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _check_inline(value: str, what: str) -> None:
    if "\n" in value or "\r" in value:
        raise ValidationError(f"{what} must not contain newlines")


def validate_section(section: Section) -> None:
    if not section.title.strip():
        raise ValidationError("section title must be non-empty")
    _check_inline(section.title, "section title")
    if section.category not in SECTION_CATEGORIES:
        raise ValidationError(f"unknown section category {section.category!r}")
    _check_inline(section.detail, "section detail")
    if not (0.0 <= section.confidence <= 1.0):
        raise ValidationError(f"confidence must be in [0, 1], got {section.confidence}")


def validate_page(page: Page) -> None:
    if not page.title.strip():
        raise ValidationError("page title must be non-empty")
    _check_inline(page.title, "page title")
    _check_inline(page.summary, "page summary")
    if page.status not in ("active", "archived"):
        raise ValidationError(f"unknown page status {page.status!r}")
    if page.active and not page.sections:
        raise ValidationError(f"active page {page.title!r} must have at least one section")
    for group, label in ((page.aliases, "alias"), (page.tags, "tag")):
        seen = set()
        for item in group:
            if "," in item or "]" in item or "\n" in item:
                raise ValidationError(f"{label} {item!r} contains reserved characters")
            if item in seen:
                raise ValidationError(f"duplicate {label} {item!r}")
            seen.add(item)
    dim = dimension_of_path(page.path)
    if page.path != page_path(dim, page.title):
        raise ValidationError(
            f"page path {page.path!r} does not match title {page.title!r} in dimension {dim!r}"
        )
    for section in page.sections:
        validate_section(section)


def validate_store(store: MemoryStore) -> None:
    if not store.owner_id:
        raise ValidationError("owner_id must be non-empty")
    seen_dims = set()
    seen_paths = set()
    for dim in store.dimensions:
        if not dim.name.strip():
            raise ValidationError("dimension name must be non-empty")
        if _UNSAFE_CHARS.search(dim.name):
            raise ValidationError(f"dimension name {dim.name!r} contains unsafe characters")
        if dim.name in seen_dims:
            raise ValidationError(f"duplicate dimension {dim.name!r}")
        seen_dims.add(dim.name)
        _check_inline(dim.description, "dimension description")
        for page in dim.pages:
            validate_page(page)
            if dimension_of_path(page.path) != dim.name:
                raise ValidationError(
                    f"page {page.path!r} filed under dimension {dim.name!r}"
                )
            if page.path in seen_paths:
                raise ValidationError(f"duplicate page path {page.path!r}")
            seen_paths.add(page.path)
    for path in seen_paths:
        if path not in store.access_log:
            raise ValidationError(f"access_log missing entry for {path!r}")


def lint_store(store: MemoryStore) -> list[str]:
    """Non-fatal issues: dangling references, orphan descriptions, stray access
    entries, inverted supersession confidences, unresolved link endpoints."""
    warnings = []
    paths = set(store.page_paths())
    sections_by_path = {page.path: page.sections for _, page in store.iter_pages()}
    for dim in store.dimensions:
        if not dim.pages and dim.description.strip():
            warnings.append(f"dimension {dim.name!r} has a description but no pages")
        for page in dim.pages:
            for i, section in enumerate(page.sections):
                for ref in section.related_pages:
                    if ref not in paths:
                        warnings.append(
                            f"{page.path} section {i} references missing page {ref!r}"
                        )
                if section.superseded_by is not None:
                    target_path, _, qualifier = section.superseded_by.partition("#s")
                    target_sections = sections_by_path.get(target_path)
                    if target_sections is None:
                        warnings.append(
                            f"{page.path} section {i} superseded by missing {section.superseded_by!r}"
                        )
                    elif qualifier.isdigit() and int(qualifier) < len(target_sections):
                        winner = target_sections[int(qualifier)]
                        if not section.confidence < winner.confidence:
                            warnings.append(
                                f"{page.path} section {i} confidence {section.confidence} "
                                f"not below its superseder's {winner.confidence}"
                            )
    for link in store.links.links:
        for endpoint in (link.source, link.target):
            if endpoint.split("#", 1)[0] not in paths:
                warnings.append(f"link endpoint {endpoint!r} does not resolve to a page")
    for path in store.access_log:
        if path not in paths:
            warnings.append(f"access_log entry for missing page {path!r}")
    return warnings


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def create_store(owner_id: str) -> MemoryStore:
    if not owner_id:
        raise ValidationError("owner_id must be non-empty")
    return MemoryStore(owner_id=owner_id)


def upsert_page(
    store: MemoryStore,
    dimension_name: str,
    page: Page,
    session: int = 0,
    created_at: str | None = None,
) -> str:
    """Insert or replace a page; returns its path.

    Replacement preserves read statistics. The owning dimension is created on
    demand; new pages bump creation_stats for the given session index.
    """
    validate_page(page)
    if dimension_of_path(page.path) != dimension_name:
        raise ValidationError(
            f"page path {page.path!r} does not encode dimension {dimension_name!r}"
        )
    dim = store.dimension(dimension_name)
    if dim is None:
        if _UNSAFE_CHARS.search(dimension_name) or not dimension_name.strip():
            raise ValidationError(f"invalid dimension name {dimension_name!r}")
        dim = Dimension(name=dimension_name)
        store.dimensions.append(dim)
    for i, existing in enumerate(dim.pages):
        if existing.path == page.path:
            dim.pages[i] = page
            return page.path
    if store.find_page(page.path) is not None:
        raise ValidationError(f"path {page.path!r} already exists in another dimension")
    dim.pages.append(page)
    store.access_log[page.path] = AccessEntry()
    store.page_created[page.path] = created_at
    store.creation_stats[session] = store.creation_stats.get(session, 0) + 1
    return page.path


def record_access(store: MemoryStore, path: str, clock: Clock | None = None) -> None:
    if store.find_page(path) is None:
        raise NotFoundError(f"unknown page {path!r}")
    entry = store.access_log.setdefault(path, AccessEntry())
    entry.read_count += 1
    stamp = (clock or now_iso)()
    if entry.last_access is None or stamp >= entry.last_access:
        entry.last_access = stamp


def merge_access(store: MemoryStore, pending: dict[str, AccessEntry]) -> None:
    """Commutative merge of buffered session accesses: counts add, timestamps max."""
    for path, buffered in pending.items():
        entry = store.access_log.setdefault(path, AccessEntry())
        entry.read_count += buffered.read_count
        if buffered.last_access is not None:
            if entry.last_access is None or buffered.last_access > entry.last_access:
                entry.last_access = buffered.last_access
