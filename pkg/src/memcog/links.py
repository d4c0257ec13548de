"""Typed cross-dimensional overlay graph and the heuristics that propose links.

Link endpoints are page paths, optionally qualified with a section index as
``path#s<index>``. Storage is page-level; the qualifier is advisory.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Collection, Iterable

from .errors import CycleError, NotFoundError, ValidationError
from .textutil import causal_cues, detail_polarity, parse_date, tokenize

if TYPE_CHECKING:  # pragma: no cover
    from .store import MemoryStore, Page, Section

LINK_KINDS = ("related_to", "temporal_next", "caused_by", "contrasts_with")
DIRECTED_BY_KIND = {
    "related_to": False,
    "temporal_next": True,
    "caused_by": True,
    "contrasts_with": False,
}
PROVENANCES = (
    "co_occurrence",
    "temporal_proximity",
    "causal_indicator",
    "model_suggested",
    "manual",
)


def endpoint_page(endpoint: str) -> str:
    """Strip an optional '#s<i>' section qualifier."""
    return endpoint.split("#", 1)[0]


@dataclass(frozen=True)
class Link:
    source: str
    target: str
    kind: str
    directed: bool
    weight: float = 1.0
    provenance: str = "manual"

    def key(self) -> tuple[str, str, str]:
        return (self.source, self.target, self.kind)

    def to_record(self) -> dict:
        # Stable field order for links.json.
        return {
            "source": self.source,
            "target": self.target,
            "kind": self.kind,
            "directed": self.directed,
            "weight": self.weight,
            "provenance": self.provenance,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Link":
        return cls(
            source=rec["source"],
            target=rec["target"],
            kind=rec["kind"],
            directed=bool(rec["directed"]),
            weight=float(rec.get("weight", 1.0)),
            provenance=rec.get("provenance", "manual"),
        )


def make_link(
    source: str,
    target: str,
    kind: str,
    weight: float = 1.0,
    provenance: str = "manual",
) -> Link:
    """Build a law-abiding link: direction flag from kind, undirected endpoints sorted."""
    if kind not in LINK_KINDS:
        raise ValidationError(f"unknown link kind {kind!r}")
    if provenance not in PROVENANCES:
        raise ValidationError(f"unknown provenance {provenance!r}")
    if not (0.0 < weight <= 1.0):
        raise ValidationError(f"link weight must be in (0, 1], got {weight}")
    directed = DIRECTED_BY_KIND[kind]
    if not directed and target < source:
        source, target = target, source
    return Link(source, target, kind, directed, weight, provenance)


def validate_link(link: Link) -> None:
    if link.kind not in LINK_KINDS:
        raise ValidationError(f"unknown link kind {link.kind!r}")
    if link.directed != DIRECTED_BY_KIND[link.kind]:
        raise ValidationError(f"{link.kind} links must have directed={DIRECTED_BY_KIND[link.kind]}")
    if endpoint_page(link.source) == endpoint_page(link.target):
        raise ValidationError(f"self-link on {link.source!r}")
    if not (0.0 < link.weight <= 1.0):
        raise ValidationError(f"link weight must be in (0, 1], got {link.weight}")
    if link.provenance not in PROVENANCES:
        raise ValidationError(f"unknown provenance {link.provenance!r}")


class LinkGraph:
    """Set of typed links plus a derived adjacency index."""

    def __init__(self, links: Iterable[Link] = ()):
        self._links: dict[tuple[str, str, str], Link] = {}
        self._out: dict[str, list[Link]] = defaultdict(list)
        self._in: dict[str, list[Link]] = defaultdict(list)
        for link in links:
            self.add(link)

    def __len__(self) -> int:
        return len(self._links)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LinkGraph) and self._links == other._links

    @property
    def links(self) -> list[Link]:
        return sorted(self._links.values(), key=Link.key)

    def has(self, link: Link) -> bool:
        return self._canonical(link).key() in self._links

    @staticmethod
    def _canonical(link: Link) -> Link:
        if not link.directed and link.target < link.source:
            return replace(link, source=link.target, target=link.source)
        return link

    def add(self, link: Link, known_paths: Collection[str] | None = None) -> bool:
        """Insert a link; returns False when the (source, target, kind) triple already exists.

        Raises ValidationError on law violations, NotFoundError on unknown
        endpoints, and CycleError when a temporal_next edge would close a cycle.
        """
        link = self._canonical(link)
        validate_link(link)
        if known_paths is not None:
            for end in (link.source, link.target):
                if endpoint_page(end) not in known_paths:
                    raise NotFoundError(f"link endpoint {end!r} does not resolve to a page")
        if link.key() in self._links:
            return False
        if link.kind == "temporal_next":
            src, dst = endpoint_page(link.source), endpoint_page(link.target)
            cycle = self._temporal_path(dst, src)
            if cycle is not None:
                raise CycleError(
                    "temporal_next cycle: " + " -> ".join(cycle + [dst]), cycle=cycle
                )
        self._links[link.key()] = link
        self._out[endpoint_page(link.source)].append(link)
        self._in[endpoint_page(link.target)].append(link)
        return True

    def _temporal_path(self, start: str, goal: str) -> list[str] | None:
        """Pages along a temporal_next path start -> goal, or None."""
        prev: dict[str, str | None] = {start: None}
        queue = deque([start])
        while queue:
            node = queue.popleft()
            if node == goal:
                path = []
                cur: str | None = node
                while cur is not None:
                    path.append(cur)
                    cur = prev[cur]
                return list(reversed(path))
            for link in self._out.get(node, ()):
                if link.kind != "temporal_next":
                    continue
                nxt = endpoint_page(link.target)
                if nxt not in prev:
                    prev[nxt] = node
                    queue.append(nxt)
        return None

    def links_of(
        self, page_path: str, known_paths: Collection[str] | None = None
    ) -> list[tuple[Link, str]]:
        """Links touching the page with a direction tag: 'out', 'in', or 'both'.

        Deterministic order: kind, then target path, then source path.
        Undirected links are reported once with direction 'both'.
        """
        if known_paths is not None and page_path not in known_paths:
            raise NotFoundError(f"unknown page {page_path!r}")
        found: dict[tuple[str, str, str], tuple[Link, str]] = {}
        for link in self._out.get(page_path, ()):
            found[link.key()] = (link, "both" if not link.directed else "out")
        for link in self._in.get(page_path, ()):
            if link.key() not in found:
                found[link.key()] = (link, "both" if not link.directed else "in")
        return sorted(found.values(), key=lambda pair: (pair[0].kind, pair[0].target, pair[0].source))

    def neighbors_within(
        self,
        start: str,
        max_hops: int,
        kinds: Collection[str] | None = None,
        known_paths: Collection[str] | None = None,
    ) -> list[tuple[str, int]]:
        """Pages reachable within max_hops, each at its minimal hop count, BFS order.

        Directed edges are traversed forward only; undirected edges both ways.
        """
        if max_hops < 0:
            raise ValidationError("max_hops must be >= 0")
        if known_paths is not None and start not in known_paths:
            raise NotFoundError(f"unknown page {start!r}")
        seen = {start: 0}
        order = [(start, 0)]
        frontier = deque([start])
        while frontier:
            node = frontier.popleft()
            depth = seen[node]
            if depth >= max_hops:
                continue
            steps: list[str] = []
            for link in self._out.get(node, ()):
                if kinds is None or link.kind in kinds:
                    steps.append(endpoint_page(link.target))
            for link in self._in.get(node, ()):
                if not link.directed and (kinds is None or link.kind in kinds):
                    steps.append(endpoint_page(link.source))
            for nxt in sorted(set(steps)):
                if nxt not in seen:
                    seen[nxt] = depth + 1
                    order.append((nxt, depth + 1))
                    frontier.append(nxt)
        return order

    def rebuild_adjacency(self) -> tuple[dict[str, list[Link]], dict[str, list[Link]]]:
        """From-scratch adjacency, for the rebuild-and-compare invariant check."""
        out: dict[str, list[Link]] = defaultdict(list)
        inc: dict[str, list[Link]] = defaultdict(list)
        for link in self._links.values():
            out[endpoint_page(link.source)].append(link)
            inc[endpoint_page(link.target)].append(link)
        return out, inc

    def adjacency_consistent(self) -> bool:
        out, inc = self.rebuild_adjacency()
        key = Link.key
        return all(
            sorted(self._out.get(k, []), key=key) == sorted(v, key=key) for k, v in out.items()
        ) and all(
            sorted(self._in.get(k, []), key=key) == sorted(v, key=key) for k, v in inc.items()
        ) and {k for k, v in self._out.items() if v} == set(out) and {
            k for k, v in self._in.items() if v
        } == set(inc)

    def to_records(self) -> list[dict]:
        return [link.to_record() for link in self.links]

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "LinkGraph":
        return cls(Link.from_record(rec) for rec in records)


def add_link(graph: LinkGraph, link: Link, known_paths: Collection[str] | None = None) -> bool:
    return graph.add(link, known_paths)


# ---------------------------------------------------------------------------
# Link suggestion heuristics
# ---------------------------------------------------------------------------

@dataclass
class LinkConfig:
    min_shared_terms: int = 2          # bare title-token overlap threshold
    temporal_window_days: int = 30
    auto_commit_threshold: float = 0.5


def page_terms(page: "Page") -> set[str]:
    """Entity terms: title tokens plus whole aliases and tags, lowercased, stop-word free."""
    terms = set(tokenize(page.title))
    terms.update(a.lower() for a in page.aliases if a.strip())
    terms.update(t.lower() for t in page.tags if t.strip())
    return terms


def section_terms(page: "Page", section: "Section") -> set[str]:
    terms = page_terms(page)
    terms.update(tokenize(section.title))
    terms.update(tokenize(section.detail))
    return terms


def _strong_terms(page: "Page") -> set[str]:
    """Aliases and tags are curated identifiers: one shared strong term links."""
    out = {a.lower() for a in page.aliases if a.strip()}
    out.update(t.lower() for t in page.tags if t.strip())
    return out


def suggest_links(
    store: "MemoryStore",
    new_or_updated_pages: list[str],
    config: LinkConfig | None = None,
) -> list[Link]:
    """Deterministic candidate links for the given pages against the whole store.

    Candidates are returned, never auto-committed; weight is the candidate's
    evidence count normalized by the batch maximum.
    """
    config = config or LinkConfig()
    pages = {p.path: p for _, p in store.iter_pages()}
    for path in new_or_updated_pages:
        if path not in pages:
            raise NotFoundError(f"unknown page {path!r}")
        if not pages[path].sections:
            raise ValidationError(f"page {path!r} has no sections")

    terms = {path: page_terms(page) for path, page in pages.items()}
    strong = {path: _strong_terms(page) for path, page in pages.items()}
    raw: dict[tuple[str, str, str], tuple[int, str]] = {}

    def propose(kind: str, source: str, target: str, evidence: int, provenance: str) -> None:
        if endpoint_page(source) == endpoint_page(target):
            return
        if not DIRECTED_BY_KIND[kind] and target < source:
            source, target = target, source
        key = (source, target, kind)
        if key not in raw or raw[key][0] < evidence:
            raw[key] = (evidence, provenance)

    batch = sorted(set(new_or_updated_pages))
    others = sorted(pages)
    for src in batch:
        for dst in others:
            if dst == src:
                continue
            shared = terms[src] & terms[dst]
            strong_hit = bool(shared & (strong[src] | strong[dst]))
            if len(shared) >= config.min_shared_terms or (strong_hit and shared):
                propose("related_to", src, dst, len(shared) + (1 if strong_hit else 0),
                        "co_occurrence")
            _propose_temporal(store, pages, src, dst, config, propose)
            _propose_causal(pages, terms, src, dst, propose)
            _propose_contrast(pages, src, dst, propose)

    if not raw:
        return []
    max_evidence = max(ev for ev, _ in raw.values())
    out = []
    for (source, target, kind), (evidence, provenance) in sorted(raw.items(),
                                                                 key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])):
        weight = max(min(evidence / max_evidence, 1.0), 1.0 / (max_evidence or 1))
        out.append(Link(source, target, kind, DIRECTED_BY_KIND[kind], weight, provenance))
    return out


def _propose_temporal(store, pages, src, dst, config, propose) -> None:
    for s_sec in pages[src].sections:
        d_src = parse_date(s_sec.temporal_context)
        if d_src is None:
            continue
        s_terms = section_terms(pages[src], s_sec)
        for d_sec in pages[dst].sections:
            d_dst = parse_date(d_sec.temporal_context)
            if d_dst is None or d_dst == d_src:
                continue
            if abs((d_dst - d_src).days) > config.temporal_window_days:
                continue
            shared = s_terms & section_terms(pages[dst], d_sec)
            if not shared:
                continue
            earlier, later = (src, dst) if d_src < d_dst else (dst, src)
            propose("temporal_next", earlier, later, len(shared), "temporal_proximity")


def _propose_causal(pages, terms, src, dst, propose) -> None:
    for sec in pages[src].sections:
        low = sec.detail.lower()
        for cue, direction in causal_cues():
            pos = low.find(cue)
            if pos < 0:
                continue
            # The cue must actually reference the other page's entity terms.
            tail = low[pos:]
            if not any(term in tail for term in terms[dst]):
                continue
            if direction == "other_is_cause":
                propose("caused_by", dst, src, 1, "causal_indicator")
            else:
                propose("caused_by", src, dst, 1, "causal_indicator")


def _propose_contrast(pages, src, dst, propose) -> None:
    for s_sec in pages[src].sections:
        if s_sec.category != "preference":
            continue
        s_pol = detail_polarity(s_sec.detail)
        if not s_pol:
            continue
        s_terms = section_terms(pages[src], s_sec)
        for d_sec in pages[dst].sections:
            if d_sec.category != "preference":
                continue
            d_pol = detail_polarity(d_sec.detail)
            if not d_pol:
                continue
            if not ((("pos" in s_pol) and ("neg" in d_pol)) or (("neg" in s_pol) and ("pos" in d_pol))):
                continue
            shared = s_terms & section_terms(pages[dst], d_sec)
            if shared:
                propose("contrasts_with", src, dst, len(shared), "co_occurrence")
