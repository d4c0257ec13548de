"""Store construction from conversation history and turn-by-turn evolution.

The model client extracts facts and names new pages; everything else
(matching, contradiction detection, supersession, linking, growth management)
is deterministic so the whole pipeline replays bit-exactly under the fixture
client. Plans apply atomically: a failure anywhere leaves the store unchanged.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Callable

from .errors import (
    IngestionError,
    OrderingError,
    StructuredOutputError,
    ValidationError,
)
from .links import LinkConfig, page_terms, suggest_links
from .llm import LanguageModelClient, LMRequest, extract_json
from .store import (
    Fact,
    MemoryStore,
    Page,
    Section,
    SECTION_CATEGORIES,
    create_store,
    make_page,
    upsert_page,
)
from .textutil import canonical_json, detail_polarity, norm, parse_timestamp, tokenize


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass
class ConversationTurn:
    session_id: int
    turn_id: int
    role: str
    content: str
    timestamp: str
    planted_units: list[str] = field(default_factory=list)
    mentioned_entities: list[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw: dict, session_id: int | None = None) -> "ConversationTurn":
        return cls(
            session_id=int(raw.get("session_id", session_id if session_id is not None else 1)),
            turn_id=int(raw["turn_id"]),
            role=raw["role"],
            content=raw["content"],
            timestamp=raw["timestamp"],
            planted_units=list(raw.get("planted_units", [])),
            mentioned_entities=list(raw.get("mentioned_entities", [])),
        )


@dataclass
class ExtractedFact:
    detail: str
    category: str
    entity_terms: list[str]
    temporal_context: str | None
    source: tuple[int, int]                    # (session_id, turn_id)
    facts: list[Fact] = field(default_factory=list)
    source_timestamp: str | None = None


@dataclass
class SectionUpdate:
    page_path: str
    section_title: str
    detail: str
    confidence_delta: float
    section: Section
    fact: ExtractedFact | None = None


@dataclass
class Contradiction:
    page_path: str
    section_index: int
    fact: ExtractedFact
    resolution: str


@dataclass
class UpdatePlan:
    section_updates: list[SectionUpdate] = field(default_factory=list)
    new_pages: list[tuple[str, Page, int, str | None]] = field(default_factory=list)
    new_links: list[dict] = field(default_factory=list)
    contradictions: list[Contradiction] = field(default_factory=list)


@dataclass
class Resolution:
    conflict: bool
    resolution: str                            # "supersede" | "noop"
    new_section: Section | None = None


@dataclass
class IngestConfig:
    match_threshold: int = 2                   # |shared terms| + 2*|shared aliases|
    cluster_threshold: int = 2
    auto_commit_weight: float = 0.5
    relink_new_sections: int = 1               # re-link pages gaining at least this many sections
    use_term_index: bool = True                # full-scan fallback for differential tests
    link_config: LinkConfig = field(default_factory=LinkConfig)


@dataclass
class GrowthPolicy:
    archive_after_days: int
    compress_over: int


@dataclass
class GrowthReport:
    archived: list[str] = field(default_factory=list)
    compressed: list[tuple[str, int]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Turn loading and validation
# ---------------------------------------------------------------------------

def load_turns(raw: object) -> list[ConversationTurn]:
    """Accepts a flat array of turn records or an array of session objects."""
    turns: list[ConversationTurn] = []
    if not isinstance(raw, list):
        raise ValidationError("conversation input must be a JSON array")
    for item in raw:
        if isinstance(item, dict) and "turns" in item:
            sid = int(item.get("session_id", 1))
            for rec in item["turns"]:
                turns.append(ConversationTurn.from_dict(rec, session_id=sid))
        elif isinstance(item, dict):
            turns.append(ConversationTurn.from_dict(item))
        else:
            raise ValidationError(f"unrecognized turn record {item!r}")
    return turns


def validate_turns(turns: list[ConversationTurn], strict_roles: bool = True) -> None:
    """Timestamps must not decrease within a session; with strict_roles, roles
    must alternate starting with user (the shape full histories carry)."""
    by_session: dict[int, list[ConversationTurn]] = defaultdict(list)
    for turn in turns:
        if turn.role not in ("user", "assistant"):
            raise ValidationError(f"unknown role {turn.role!r}")
        by_session[turn.session_id].append(turn)
    for sid, session in by_session.items():
        last_ts = None
        for i, turn in enumerate(session):
            if strict_roles:
                expected = "user" if i % 2 == 0 else "assistant"
                if turn.role != expected:
                    raise ValidationError(
                        f"session {sid}: turn {turn.turn_id} should be {expected!r}, "
                        f"got {turn.role!r}"
                    )
            ts = parse_timestamp(turn.timestamp)
            if last_ts is not None and ts < last_ts:
                raise OrderingError(
                    f"session {sid}: timestamp {turn.timestamp} decreases"
                )
            last_ts = ts


# ---------------------------------------------------------------------------
# Model requests
# ---------------------------------------------------------------------------

EXTRACTION_SYSTEM = (
    "You extract durable, user-relevant information from conversation turns. "
    "Work only from what the user said; never invent details. "
    "Output a JSON array with one record per fact and no extra text. Each record has: "
    '"turn_id" (integer source turn), "detail" (one-sentence statement), '
    '"category" (one of: experience, preference, interest, objective fact), '
    '"entity_terms" (lowercase key terms), "temporal_context" (ISO date, range, or '
    'recurrence phrase, else null), and optional "facts" '
    "(array of [subject, predicate, object, timestamp-or-null] tuples)."
)

NAMING_SYSTEM = (
    "You organize extracted facts about a user into a personal knowledge store. "
    "Given a group of related facts, choose where they belong. "
    "Output one JSON object and no extra text, with fields: "
    '"dimension" (short lowercase category such as topic, place, figure, anniversary), '
    '"title" (short page title), "summary" (one-line page summary), '
    '"aliases" (array), "tags" (array), and "section_titles" '
    "(array, one title per fact, same order)."
)

COMPRESSION_SYSTEM = (
    "You compress an over-long memory section into a shorter summary that keeps "
    "every concrete fact, name, and date. Output only the compressed text."
)


def extraction_request(session_id: int, user_turns: list[ConversationTurn]) -> LMRequest:
    payload = {
        "session_id": session_id,
        "turns": [
            {"turn_id": t.turn_id, "content": t.content, "timestamp": t.timestamp}
            for t in user_turns
        ],
    }
    return LMRequest.build(EXTRACTION_SYSTEM, [("user", canonical_json(payload))])


def naming_request(facts: list[ExtractedFact]) -> LMRequest:
    payload = [
        {
            "detail": f.detail,
            "category": f.category,
            "entity_terms": f.entity_terms,
            "temporal_context": f.temporal_context,
        }
        for f in facts
    ]
    return LMRequest.build(NAMING_SYSTEM, [("user", canonical_json(payload))])


def compression_request(detail: str, limit: int) -> LMRequest:
    payload = {"limit": limit, "text": detail}
    return LMRequest.build(COMPRESSION_SYSTEM, [("user", canonical_json(payload))])


# ---------------------------------------------------------------------------
# Fact extraction
# ---------------------------------------------------------------------------

def extract_facts(
    turns: list[ConversationTurn], llm: LanguageModelClient
) -> list[ExtractedFact]:
    """Facts drawn only from user turns; assistant-only input yields []."""
    if not turns:
        raise ValidationError("extract_facts needs at least one turn")
    validate_turns(turns, strict_roles=False)
    by_session: dict[int, list[ConversationTurn]] = defaultdict(list)
    for turn in turns:
        by_session[turn.session_id].append(turn)

    out: list[ExtractedFact] = []
    for sid in sorted(by_session):
        user_turns = [t for t in by_session[sid] if t.role == "user"]
        if not user_turns:
            continue
        turn_index = {t.turn_id: t for t in user_turns}
        request = extraction_request(sid, user_turns)
        try:
            response = llm.complete(request)
        except Exception as exc:
            raise IngestionError(
                f"fact extraction failed for session {sid}: {exc}", batch=sid
            ) from exc
        try:
            records = extract_json(response.text)
        except ValueError as exc:
            raise StructuredOutputError(
                f"unparseable extraction output for session {sid}", raw=response.text
            ) from exc
        if not isinstance(records, list):
            raise StructuredOutputError(
                f"extraction output for session {sid} is not a JSON array",
                raw=response.text,
            )
        for rec in records:
            turn_id = int(rec["turn_id"])
            if turn_id not in turn_index:
                raise ValidationError(
                    f"extracted fact cites turn {turn_id}, which is not a user turn"
                )
            category = rec.get("category", "")
            if category not in SECTION_CATEGORIES:
                raise ValidationError(f"unknown fact category {category!r}")
            detail = str(rec.get("detail", "")).strip()
            if not detail:
                raise ValidationError("extracted fact has empty detail")
            out.append(
                ExtractedFact(
                    detail=detail,
                    category=category,
                    entity_terms=[str(t).lower() for t in rec.get("entity_terms", [])],
                    temporal_context=rec.get("temporal_context"),
                    source=(sid, turn_id),
                    facts=[Fact.from_list(f) for f in rec.get("facts", [])],
                    source_timestamp=turn_index[turn_id].timestamp,
                )
            )
    return out


# ---------------------------------------------------------------------------
# Term index
# ---------------------------------------------------------------------------

class TermIndex:
    """Inverted entity-term index (term -> page paths) with a touch sequence
    used to break match ties toward the most recently updated page."""

    def __init__(self):
        self.by_term: dict[str, set[str]] = defaultdict(set)
        self.terms_of: dict[str, set[str]] = {}
        self.aliases_of: dict[str, set[str]] = {}
        self.touch_seq: dict[str, int] = {}
        self._counter = 0

    @classmethod
    def build(cls, store: MemoryStore) -> "TermIndex":
        index = cls()
        for _, page in store.iter_pages():
            index.add_page(page)
        return index

    def add_page(self, page: Page) -> None:
        old = self.terms_of.get(page.path, set())
        for term in old:
            self.by_term[term].discard(page.path)
        terms = page_terms(page)
        self.terms_of[page.path] = terms
        self.aliases_of[page.path] = {a.lower() for a in page.aliases if a.strip()}
        for term in terms:
            self.by_term[term].add(page.path)
        self.touch(page.path)

    def touch(self, path: str) -> None:
        self._counter += 1
        self.touch_seq[path] = self._counter

    def candidates(self, terms: set[str]) -> set[str]:
        found: set[str] = set()
        for term in terms:
            found |= self.by_term.get(term, set())
        return found

    def same_postings(self, other: "TermIndex") -> bool:
        mine = {t: s for t, s in self.by_term.items() if s}
        theirs = {t: s for t, s in other.by_term.items() if s}
        return mine == theirs


def ensure_index(store: MemoryStore) -> TermIndex:
    index = getattr(store, "_term_index", None)
    if index is None:
        index = TermIndex.build(store)
        store._term_index = index
    return index


# ---------------------------------------------------------------------------
# Matching and contradiction handling
# ---------------------------------------------------------------------------

def _match_score(fact_terms: set[str], path: str, index: TermIndex) -> int:
    shared = fact_terms & index.terms_of.get(path, set())
    shared_aliases = fact_terms & index.aliases_of.get(path, set())
    return len(shared) + 2 * len(shared_aliases)


def match_page(
    fact: ExtractedFact, store: MemoryStore, config: IngestConfig
) -> str | None:
    """Best existing page for the fact, or None below the match threshold."""
    index = ensure_index(store)
    fact_terms = set(fact.entity_terms)
    if config.use_term_index:
        candidates = index.candidates(fact_terms)
    else:
        candidates = set(store.page_paths())
    best: tuple[int, int, str] | None = None
    for path in sorted(candidates):
        page = store.find_page(path)
        if page is None or not page.active:
            continue
        score = _match_score(fact_terms, path, index)
        if score < config.match_threshold:
            continue
        rank = (score, index.touch_seq.get(path, 0), path)
        if best is None or rank > best:
            best = rank
    return best[2] if best else None


def _section_terms_for_conflict(section: Section) -> set[str]:
    terms = set(tokenize(section.title)) | set(tokenize(section.detail))
    for fact in section.facts:
        terms |= set(tokenize(fact.subject))
    return terms


def detect_conflict(existing: Section, incoming: ExtractedFact) -> bool:
    if norm(existing.detail) == norm(incoming.detail):
        return False
    for old in existing.facts:
        for new in incoming.facts:
            if (
                norm(old.subject) == norm(new.subject)
                and norm(old.predicate) == norm(new.predicate)
                and norm(old.obj) != norm(new.obj)
            ):
                return True
    shared = _section_terms_for_conflict(existing) & set(incoming.entity_terms)
    if shared:
        old_pol = detail_polarity(existing.detail)
        new_pol = detail_polarity(incoming.detail)
        if ("pos" in old_pol and "neg" in new_pol and "pos" not in new_pol) or (
            "neg" in old_pol and "pos" in new_pol and "neg" not in new_pol
        ):
            return True
    return False


def section_from_fact(fact: ExtractedFact, title: str | None = None) -> Section:
    detail = " ".join(fact.detail.split())
    return Section(
        title=" ".join((title or _derive_section_title(detail)).split()),
        category=fact.category,
        detail=detail,
        facts=list(fact.facts),
        confidence=1.0,
        temporal_context=fact.temporal_context,
    )


def _derive_section_title(detail: str) -> str:
    words = detail.split()
    title = " ".join(words[:8]).rstrip(".,;:")
    return title or "note"


def resolve_contradiction(existing: Section, incoming: ExtractedFact) -> Resolution:
    """Newer-wins policy: the new fact becomes a fresh full-confidence section
    and the existing one is marked for supersession. Non-conflicts are no-ops."""
    if not detect_conflict(existing, incoming):
        return Resolution(conflict=False, resolution="noop")
    return Resolution(
        conflict=True, resolution="supersede", new_section=section_from_fact(incoming)
    )


def apply_supersession(page: Page, existing_index: int, new_section: Section) -> int:
    """Append the superseding section and decay the whole superseded chain.

    Confidence halves at every supersession depth, so a chain of k supersessions
    reads 1.0, 0.5, 0.25, ... from the live head down.
    """
    page.sections.append(new_section)
    new_index = len(page.sections) - 1
    new_ref = f"{page.path}#s{new_index}"
    refs = {f"{page.path}#s{existing_index}"}
    page.sections[existing_index].superseded_by = new_ref
    page.sections[existing_index].confidence *= 0.5
    changed = True
    while changed:
        changed = False
        for i, section in enumerate(page.sections):
            if section.superseded_by in refs and f"{page.path}#s{i}" not in refs:
                section.confidence *= 0.5
                refs.add(f"{page.path}#s{i}")
                changed = True
    return new_index


# ---------------------------------------------------------------------------
# Build and update
# ---------------------------------------------------------------------------

def _cluster_facts(facts: list[ExtractedFact], threshold: int) -> list[list[int]]:
    """Union-find over facts; an edge joins facts sharing >= threshold entity terms."""
    parent = list(range(len(facts)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    by_term: dict[str, list[int]] = defaultdict(list)
    for i, fact in enumerate(facts):
        for term in set(fact.entity_terms):
            by_term[term].append(i)
    pair_counts: dict[tuple[int, int], int] = defaultdict(int)
    for indices in by_term.values():
        for a in range(len(indices)):
            for b in range(a + 1, len(indices)):
                pair_counts[(indices[a], indices[b])] += 1
    for (a, b), count in pair_counts.items():
        if count >= threshold:
            union(a, b)

    groups: dict[int, list[int]] = defaultdict(list)
    for i in range(len(facts)):
        groups[find(i)].append(i)
    return [groups[root] for root in sorted(groups)]


def _name_cluster(facts: list[ExtractedFact], llm: LanguageModelClient) -> dict:
    request = naming_request(facts)
    try:
        response = llm.complete(request)
    except Exception as exc:
        raise IngestionError(f"page naming failed: {exc}", batch=None) from exc
    try:
        named = extract_json(response.text)
    except ValueError as exc:
        raise StructuredOutputError("unparseable naming output", raw=response.text) from exc
    if not isinstance(named, dict) or not named.get("dimension") or not named.get("title"):
        raise StructuredOutputError(
            "naming output missing dimension/title", raw=response.text
        )
    return named


def _page_from_cluster(named: dict, facts: list[ExtractedFact]) -> tuple[str, Page]:
    titles = named.get("section_titles") or []
    sections = [
        section_from_fact(fact, titles[i] if i < len(titles) else None)
        for i, fact in enumerate(facts)
    ]
    page = make_page(
        dimension=named["dimension"],
        title=named["title"],
        summary=named.get("summary", facts[0].detail),
        aliases=list(dict.fromkeys(named.get("aliases", []))),
        tags=list(dict.fromkeys(named.get("tags", []))),
        sections=sections,
    )
    return named["dimension"], page


def refresh_dimension_descriptions(store: MemoryStore) -> None:
    """Regenerate empty dimension descriptions from member page summaries."""
    for dim in store.dimensions:
        actives = dim.active_pages()
        if not actives:
            dim.description = ""
        elif not dim.description:
            dim.description = actives[0].summary[:300]


def _commit_suggested_links(
    store: MemoryStore, changed_paths: list[str], config: IngestConfig
) -> list[dict]:
    from .errors import CycleError

    committed: list[dict] = []
    if not changed_paths:
        return committed
    known = set(store.page_paths())
    for link in suggest_links(store, sorted(set(changed_paths)), config.link_config):
        if link.weight >= config.auto_commit_weight:
            try:
                if store.links.add(link, known):
                    committed.append(link.to_record())
                continue
            except CycleError:
                # Section-level evidence can order two pages both ways; the
                # page-level DAG keeps the first direction and parks the rest.
                pass
        record = link.to_record()
        if record not in store.pending_links:
            store.pending_links.append(record)
    return committed


def build_store(
    history: list[ConversationTurn],
    llm: LanguageModelClient,
    owner_id: str = "user",
    config: IngestConfig | None = None,
) -> MemoryStore:
    """Three stages: extract facts, cluster into dimensions/pages, organize
    sections and commit strong link candidates."""
    config = config or IngestConfig()
    store = create_store(owner_id)
    if not history:
        return store
    validate_turns(history)
    facts = extract_facts(history, llm)
    order = {id(f): i for i, f in enumerate(facts)}
    new_paths: list[str] = []
    for cluster_ids in _cluster_facts(facts, config.cluster_threshold):
        cluster = [facts[i] for i in sorted(cluster_ids, key=lambda i: order[id(facts[i])])]
        named = _name_cluster(cluster, llm)
        dimension, page = _page_from_cluster(named, cluster)
        session = min(f.source[0] for f in cluster)
        created_at = min(
            (f.source_timestamp for f in cluster if f.source_timestamp), default=None
        )
        upsert_page(store, dimension, page, session=session, created_at=created_at)
        new_paths.append(page.path)
        ensure_index(store).add_page(page)
    refresh_dimension_descriptions(store)
    _commit_suggested_links(store, new_paths, config)
    store.last_ingested = max(t.timestamp for t in history)
    return store


def incremental_update(
    store: MemoryStore,
    new_turns: list[ConversationTurn],
    llm: LanguageModelClient,
    config: IngestConfig | None = None,
    _failpoint: Callable[[str], None] | None = None,
) -> UpdatePlan:
    """Plan and atomically apply one ingestion round; returns the applied plan."""
    config = config or IngestConfig()
    if not new_turns:
        raise ValidationError("incremental_update needs at least one turn")
    validate_turns(new_turns)
    if store.last_ingested is not None:
        low = min(parse_timestamp(t.timestamp) for t in new_turns)
        if low <= parse_timestamp(store.last_ingested):
            raise OrderingError(
                f"new turns start at {low.isoformat()}, not after {store.last_ingested}"
            )

    facts = extract_facts(new_turns, llm)
    plan = UpdatePlan()
    misses: list[ExtractedFact] = []
    for fact in facts:
        path = match_page(fact, store, config)
        if path is None:
            misses.append(fact)
            continue
        section = section_from_fact(fact)
        plan.section_updates.append(
            SectionUpdate(
                page_path=path,
                section_title=section.title,
                detail=section.detail,
                confidence_delta=0.0,
                section=section,
                fact=fact,
            )
        )
    order = {id(f): i for i, f in enumerate(misses)}
    for cluster_ids in _cluster_facts(misses, config.cluster_threshold):
        cluster = [misses[i] for i in sorted(cluster_ids, key=lambda i: order[id(misses[i])])]
        named = _name_cluster(cluster, llm)
        dimension, page = _page_from_cluster(named, cluster)
        session = min(f.source[0] for f in cluster)
        created_at = min(
            (f.source_timestamp for f in cluster if f.source_timestamp), default=None
        )
        plan.new_pages.append((dimension, page, session, created_at))

    _apply_plan(store, plan, new_turns, config, _failpoint)
    return plan


def _apply_plan(
    store: MemoryStore,
    plan: UpdatePlan,
    new_turns: list[ConversationTurn],
    config: IngestConfig,
    failpoint: Callable[[str], None] | None,
) -> None:
    """All-or-nothing application: mutate a working copy, then swap it in."""
    from .store import validate_store

    working = store.snapshot()
    fire = failpoint or (lambda stage: None)

    changed_paths: list[str] = []
    section_deltas: dict[str, int] = defaultdict(int)
    fire("start")
    for update in plan.section_updates:
        page = working.find_page(update.page_path)
        if page is None:
            raise ValidationError(f"plan references missing page {update.page_path!r}")
        fact = update.fact
        conflict_index = None
        if fact is not None:
            for i, existing in enumerate(page.sections):
                if existing.superseded_by is None and detect_conflict(existing, fact):
                    conflict_index = i
                    break
        if conflict_index is not None and fact is not None:
            resolution = resolve_contradiction(page.sections[conflict_index], fact)
            # detect_conflict held above, so this is always a supersession
            apply_supersession(page, conflict_index, resolution.new_section)
            plan.contradictions.append(
                Contradiction(
                    page_path=page.path,
                    section_index=conflict_index,
                    fact=fact,
                    resolution=resolution.resolution,
                )
            )
        else:
            if any(norm(s.detail) == norm(update.detail) for s in page.sections):
                continue
            page.sections.append(update.section)
        section_deltas[page.path] += 1
        changed_paths.append(page.path)
        fire("section_update")

    new_page_paths: set[str] = set()
    for dimension, page, session, created_at in plan.new_pages:
        existing = working.find_page(page.path)
        if existing is not None:
            # Naming collided with a page already in the store: merge sections.
            for section in page.sections:
                if not any(norm(s.detail) == norm(section.detail) for s in existing.sections):
                    existing.sections.append(section)
                    section_deltas[existing.path] += 1
        else:
            upsert_page(working, dimension, page, session=session, created_at=created_at)
            new_page_paths.add(page.path)
        ensure_index(working).add_page(working.find_page(page.path))
        changed_paths.append(page.path)
        fire("new_page")

    relink = [
        path
        for path in dict.fromkeys(changed_paths)
        if path in new_page_paths or section_deltas[path] >= config.relink_new_sections
    ]
    plan.new_links = _commit_suggested_links(working, relink, config)
    fire("links")

    refresh_dimension_descriptions(working)
    working.last_ingested = max(t.timestamp for t in new_turns)
    validate_store(working)
    fire("end")

    store.dimensions = working.dimensions
    store.access_log = working.access_log
    store.creation_stats = working.creation_stats
    store.links = working.links
    store.pending_links = working.pending_links
    store.page_created = working.page_created
    store.last_ingested = working.last_ingested
    index = getattr(working, "_term_index", None) or TermIndex.build(working)
    for path in dict.fromkeys(changed_paths):
        index.touch(path)
    store._term_index = index


# ---------------------------------------------------------------------------
# Growth management
# ---------------------------------------------------------------------------

def _heuristic_summary(detail: str, limit: int) -> str:
    if len(detail) <= limit:
        return detail
    cut = detail.rfind(". ", 0, limit)
    if cut > 0:
        return detail[: cut + 1]
    return detail[: max(limit - 1, 1)].rstrip() + "…"


def manage_growth(
    store: MemoryStore,
    policy: GrowthPolicy,
    llm: LanguageModelClient | None = None,
    clock: Callable[[], str] | None = None,
) -> GrowthReport:
    """Archive unread pages past the age threshold and compress oversized details.

    Archived pages stay on disk but disappear from browse/read; compression
    keeps the original text in the sidecar and never changes section counts.
    """
    from .store import now_iso

    report = GrowthReport()
    now = parse_timestamp((clock or now_iso)())
    horizon = timedelta(days=policy.archive_after_days)
    for _, page in store.iter_pages():
        if not page.active:
            continue
        entry = store.access_log.get(page.path)
        created = store.page_created.get(page.path)
        if entry is not None and entry.read_count == 0 and created:
            if now - parse_timestamp(created) >= horizon:
                page.status = "archived"
                report.archived.append(page.path)
                continue
        for i, section in enumerate(page.sections):
            if len(section.detail) > policy.compress_over:
                original = section.detail
                if llm is not None:
                    response = llm.complete(
                        compression_request(section.detail, policy.compress_over)
                    )
                    compressed = response.text.strip()
                else:
                    compressed = _heuristic_summary(section.detail, policy.compress_over)
                if not compressed or "\n" in compressed:
                    raise ValidationError(
                        f"invalid compressed detail for {page.path} section {i}"
                    )
                section.original_detail = (
                    section.original_detail or original
                )
                section.detail = compressed
                report.compressed.append((page.path, i))
    return report
