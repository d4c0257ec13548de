from __future__ import annotations

import json

import pytest

from memcog.errors import (
    FixtureMissingError,
    IngestionError,
    OrderingError,
    ValidationError,
)
from memcog.ingestion import (
    ConversationTurn,
    ExtractedFact,
    GrowthPolicy,
    IngestConfig,
    TermIndex,
    apply_supersession,
    build_store,
    detect_conflict,
    ensure_index,
    extract_facts,
    extraction_request,
    incremental_update,
    load_turns,
    manage_growth,
    match_page,
    naming_request,
    resolve_contradiction,
    validate_turns,
)
from memcog.llm import FixtureClient
from memcog.navigation import NavigationSession
from memcog.store import Fact, Section, create_store, make_page, upsert_page
from memcog.wiki import serialize_store

from conftest import small_store


def _turn(session, turn, role, content, ts):
    return ConversationTurn(session, turn, role, content, ts)


def _user_turns(*contents, session=1, start="2024-01-01T10:00:00"):
    turns = []
    base = start[:-8]
    for i, content in enumerate(contents):
        turns.append(_turn(session, 2 * i + 1, "user", content, f"{base}{10 + 2 * i}:00:00"))
        turns.append(_turn(session, 2 * i + 2, "assistant", "Noted.", f"{base}{11 + 2 * i}:00:00"))
    return turns


# ---------------------------------------------------------------------------
# Turn validation
# ---------------------------------------------------------------------------

def test_roles_must_alternate_user_first():
    turns = [
        _turn(1, 1, "assistant", "hi", "2024-01-01T10:00:00"),
        _turn(1, 2, "user", "hello", "2024-01-01T10:01:00"),
    ]
    with pytest.raises(ValidationError):
        validate_turns(turns)


def test_timestamps_must_not_decrease():
    turns = [
        _turn(1, 1, "user", "a", "2024-01-01T10:05:00"),
        _turn(1, 2, "assistant", "b", "2024-01-01T10:00:00"),
    ]
    with pytest.raises(OrderingError):
        validate_turns(turns)


def test_load_turns_accepts_both_shapes():
    flat = [{"turn_id": 1, "role": "user", "content": "x", "timestamp": "2024-01-01T00:00:00"}]
    nested = [{"session_id": 3, "turns": flat}]
    assert load_turns(flat)[0].session_id == 1
    assert load_turns(nested)[0].session_id == 3


# ---------------------------------------------------------------------------
# extract_facts
# ---------------------------------------------------------------------------

def _bach_fixture():
    turns = _user_turns("I practice Bach's WTC every Monday evening.")
    client = FixtureClient({})
    client.record(
        extraction_request(1, [t for t in turns if t.role == "user"]),
        json.dumps([
            {
                "turn_id": 1,
                "detail": "The user practices Bach's WTC every Monday evening.",
                "category": "experience",
                "entity_terms": ["bach", "wtc", "piano"],
                "temporal_context": "every Monday evening",
                "facts": [["user", "practices", "Bach WTC", None]],
            }
        ]),
    )
    return turns, client


def test_extract_facts_bach_example():
    turns, client = _bach_fixture()
    facts = extract_facts(turns, client)
    assert len(facts) == 1
    assert {"bach", "wtc"} <= set(facts[0].entity_terms)
    assert "monday" in facts[0].temporal_context.lower()
    assert facts[0].source == (1, 1)


def test_extract_facts_assistant_only_is_empty():
    turns = [
        _turn(1, 1, "assistant", "Welcome back!", "2024-01-01T10:00:00"),
        _turn(1, 2, "assistant", "Anything on your mind?", "2024-01-01T10:01:00"),
    ]
    assert extract_facts(turns, FixtureClient({})) == []


def test_build_store_still_requires_alternation():
    turns = [
        _turn(1, 1, "assistant", "Hi", "2024-01-01T10:00:00"),
        _turn(1, 2, "user", "Hello", "2024-01-01T10:01:00"),
    ]
    with pytest.raises(ValidationError):
        build_store(turns, FixtureClient({}))


def test_extract_facts_deterministic_under_fixture_client():
    turns, client = _bach_fixture()
    first = extract_facts(turns, client)
    second = extract_facts(turns, client)
    assert [f.__dict__ for f in first] == [f.__dict__ for f in second]


def test_extract_facts_unknown_request_is_hard_error():
    turns = _user_turns("Something never recorded.")
    with pytest.raises(IngestionError) as err:
        extract_facts(turns, FixtureClient({}))
    assert isinstance(err.value.__cause__, FixtureMissingError)
    assert err.value.batch == 1


def test_extract_facts_rejects_non_user_source():
    turns = _user_turns("hello")
    client = FixtureClient({})
    client.record(
        extraction_request(1, [t for t in turns if t.role == "user"]),
        json.dumps([
            {"turn_id": 2, "detail": "x", "category": "experience", "entity_terms": []}
        ]),
    )
    with pytest.raises(ValidationError):
        extract_facts(turns, client)


# ---------------------------------------------------------------------------
# build_store
# ---------------------------------------------------------------------------

def test_build_store_empty_history():
    store = build_store([], FixtureClient({}), owner_id="u1")
    assert store.page_count() == 0


def test_build_store_farm_fixture(farm_history, farm_client):
    store = build_store(farm_history, farm_client, owner_id="farmer")
    tree = serialize_store(store)
    farm = tree["user/assistant/place/user's farm.md"]
    assert "repaired on 2023-05-04" in farm
    assert store.creation_stats == {1: 1, 2: 1}
    kinds = [l.kind for l in store.links.links]
    assert "temporal_next" in kinds


def test_build_store_deterministic(farm_history, farm_client):
    a = build_store(farm_history, farm_client, owner_id="farmer")
    b = build_store(farm_history, farm_client, owner_id="farmer")
    assert serialize_store(a) == serialize_store(b)


# ---------------------------------------------------------------------------
# Matching and incremental update
# ---------------------------------------------------------------------------

def _fact(detail, terms, category="experience", source=(5, 1), ts="2024-02-01T10:00:00",
          facts=()):
    return ExtractedFact(
        detail=detail, category=category, entity_terms=list(terms),
        temporal_context=None, source=source, facts=list(facts), source_timestamp=ts,
    )


def _update_fixture(store, turns, facts_payload, namings=()):
    client = FixtureClient({})
    session = turns[0].session_id
    client.record(
        extraction_request(session, [t for t in turns if t.role == "user"]),
        json.dumps(facts_payload),
    )
    for fact_group, naming in namings:
        client.record(naming_request(fact_group), json.dumps(naming))
    return client


def test_update_matches_existing_page_by_alias():
    store = small_store()
    store.last_ingested = "2024-01-01T00:00:00"
    turns = _user_turns("The garden got new planters today.", session=5,
                        start="2024-02-01T10:00:00")
    client = _update_fixture(store, turns, [
        {"turn_id": 1, "detail": "The user added new planters to the garden.",
         "category": "experience", "entity_terms": ["garden", "planters"],
         "temporal_context": None},
    ])
    before = store.page_count()
    plan = incremental_update(store, turns, client)
    assert store.page_count() == before
    assert len(plan.section_updates) == 1
    assert plan.section_updates[0].page_path == "user/assistant/topic/gardening.md"
    assert len(plan.new_pages) == 0


def test_update_zero_overlap_creates_page():
    store = small_store()
    store.last_ingested = "2024-01-01T00:00:00"
    turns = _user_turns("I started archery lessons.", session=7, start="2024-03-01T10:00:00")
    fact = _fact("The user started archery lessons.", ["archery", "lessons"],
                 source=(7, 1), ts="2024-03-01T10:00:00")
    client = _update_fixture(
        store, turns,
        [{"turn_id": 1, "detail": fact.detail, "category": "experience",
          "entity_terms": fact.entity_terms, "temporal_context": None}],
        namings=[([fact], {
            "dimension": "topic", "title": "archery", "summary": "Archery lessons.",
            "aliases": [], "tags": ["archery"], "section_titles": ["Started archery lessons"],
        })],
    )
    before = store.page_count()
    stats_before = dict(store.creation_stats)
    plan = incremental_update(store, turns, client)
    assert store.page_count() == before + 1
    assert len(plan.new_pages) == 1
    assert store.creation_stats.get(7, 0) == stats_before.get(7, 0) + 1


def test_update_rejects_out_of_order_turns():
    store = small_store()
    store.last_ingested = "2024-06-01T00:00:00"
    turns = _user_turns("Old news.", session=9, start="2024-03-01T10:00:00")
    with pytest.raises(OrderingError):
        incremental_update(store, turns, FixtureClient({}))


def test_match_score_threshold_and_tiebreak():
    store = small_store()
    config = IngestConfig()
    strong = _fact("d", ["garden"])            # alias hit: score 1 + 2*1 = 3
    weak = _fact("d", ["plants"])              # single shared tag: score 1 < 2
    assert match_page(strong, store, config) == "user/assistant/topic/gardening.md"
    assert match_page(weak, store, config) is None
    both = _fact("d", ["plants", "kitchen"])   # cooking shares both tags
    assert match_page(both, store, config) == "user/assistant/topic/cooking.md"


def test_full_scan_fallback_matches_index_path():
    store = small_store()
    fact = _fact("d", ["garden", "balcony"])
    indexed = match_page(fact, store, IngestConfig(use_term_index=True))
    scanned = match_page(fact, store, IngestConfig(use_term_index=False))
    assert indexed == scanned


def test_term_index_matches_rebuild_after_updates():
    store = small_store()
    index = ensure_index(store)
    page = make_page("topic", "baking", "Bakes bread.", tags=["kitchen"],
                     sections=[Section("s", "experience", "d")])
    upsert_page(store, "topic", page)
    index.add_page(page)
    assert index.same_postings(TermIndex.build(store))


# ---------------------------------------------------------------------------
# Contradictions
# ---------------------------------------------------------------------------

def test_identical_restatement_is_noop():
    section = Section("s", "experience", "User likes tea.")
    fact = _fact("User likes tea.", ["tea"])
    resolution = resolve_contradiction(section, fact)
    assert not resolution.conflict
    assert resolution.resolution == "noop"
    assert section.confidence == 1.0


def test_predicate_value_conflict_detected():
    section = Section(
        "Follower count", "objective fact",
        "Twitter follower count is 420.",
        facts=[Fact("twitter followers", "count", "420", None)],
    )
    fact = _fact(
        "Twitter follower count grew from 420 to 540.",
        ["twitter", "followers"],
        category="objective fact",
        facts=[Fact("twitter followers", "count", "540", None)],
    )
    assert detect_conflict(section, fact)
    resolution = resolve_contradiction(section, fact)
    assert resolution.conflict and resolution.new_section is not None
    assert section.superseded_by is None  # mutation happens at apply time


def test_confidence_chain_powers_of_two():
    # Oracle: closed form 0.5^k by depth in the supersession chain.
    page = make_page("topic", "counts", "s", sections=[Section(
        "v1", "objective fact", "Count is 420.",
        facts=[Fact("count", "is", "420", None)],
    )])
    s2 = Section("v2", "objective fact", "Count is 540.",
                 facts=[Fact("count", "is", "540", None)])
    idx2 = apply_supersession(page, 0, s2)
    s3 = Section("v3", "objective fact", "Count is 700.",
                 facts=[Fact("count", "is", "700", None)])
    apply_supersession(page, idx2, s3)
    confidences = [round(s.confidence, 6) for s in page.sections]
    assert confidences == [0.25, 0.5, 1.0]
    assert page.sections[0].superseded_by.endswith("#s1")
    assert page.sections[1].superseded_by.endswith("#s2")
    assert page.sections[2].superseded_by is None


def test_polarity_conflict_detection():
    section = Section("s", "preference", "User loves cilantro in salsa.")
    fact = _fact("User hates cilantro now.", ["cilantro"], category="preference")
    assert detect_conflict(section, fact)


# ---------------------------------------------------------------------------
# Atomicity
# ---------------------------------------------------------------------------

def test_failed_plan_leaves_store_bytes_unchanged():
    store = small_store()
    store.last_ingested = "2024-01-01T00:00:00"
    before = serialize_store(store)
    turns = _user_turns("The garden got new planters today.", session=5,
                        start="2024-02-01T10:00:00")
    client = _update_fixture(store, turns, [
        {"turn_id": 1, "detail": "The user added new planters to the garden.",
         "category": "experience", "entity_terms": ["garden", "planters"],
         "temporal_context": None},
    ])

    def explode(stage: str):
        if stage == "links":
            raise RuntimeError("injected failure")

    with pytest.raises(RuntimeError):
        incremental_update(store, turns, client, _failpoint=explode)
    assert serialize_store(store) == before
    # The same update applies cleanly afterwards.
    plan = incremental_update(store, turns, client)
    assert len(plan.section_updates) == 1


def test_monotone_history_across_updates():
    store = small_store()
    store.last_ingested = "2024-01-01T00:00:00"
    turns = _user_turns("The garden got new planters today.", session=5,
                        start="2024-02-01T10:00:00")
    client = _update_fixture(store, turns, [
        {"turn_id": 1, "detail": "The user added new planters to the garden.",
         "category": "experience", "entity_terms": ["garden", "planters"],
         "temporal_context": None},
    ])
    incremental_update(store, turns, client)
    assert store.last_ingested == turns[-1].timestamp
    with pytest.raises(OrderingError):
        incremental_update(store, turns, client)


# ---------------------------------------------------------------------------
# Growth management
# ---------------------------------------------------------------------------

def test_archive_unread_old_page():
    store = small_store()
    store.page_created["user/assistant/topic/gardening.md"] = "2024-01-01T00:00:00"
    policy = GrowthPolicy(archive_after_days=30, compress_over=10_000)
    report = manage_growth(store, policy, clock=lambda: "2024-03-01T00:00:00")
    assert "user/assistant/topic/gardening.md" in report.archived
    assert store.find_page("user/assistant/topic/gardening.md").status == "archived"


def test_archived_page_excluded_from_browse():
    store = small_store()
    store.page_created["user/assistant/topic/gardening.md"] = "2024-01-01T00:00:00"
    manage_growth(store, GrowthPolicy(30, 10_000), clock=lambda: "2024-03-01T00:00:00")
    session = NavigationSession(store.snapshot())
    observation = session.browse_dimension("topic")
    assert "gardening" not in observation.content
    assert "cooking" in observation.content


def test_recently_read_page_not_archived():
    store = small_store()
    path = "user/assistant/topic/gardening.md"
    store.page_created[path] = "2024-01-01T00:00:00"
    from memcog.store import record_access

    record_access(store, path, clock=lambda: "2024-02-20T00:00:00")
    report = manage_growth(store, GrowthPolicy(30, 10_000),
                           clock=lambda: "2024-03-01T00:00:00")
    assert path not in report.archived


def test_compression_preserves_structure_and_original():
    # Oracle: structural diff over section counts and related-page lists.
    store = small_store()
    page = store.find_page("user/assistant/topic/gardening.md")
    page.sections[0].detail = "A very long detail sentence. " * 40
    shape_before = [
        (p.path, len(p.sections), [s.related_pages for s in p.sections])
        for _, p in store.iter_pages()
    ]
    links_before = store.links.to_records()
    original = page.sections[0].detail
    report = manage_growth(store, GrowthPolicy(9999, compress_over=200),
                           clock=lambda: "2024-03-01T00:00:00")
    assert ("user/assistant/topic/gardening.md", 0) in report.compressed
    shape_after = [
        (p.path, len(p.sections), [s.related_pages for s in p.sections])
        for _, p in store.iter_pages()
    ]
    assert shape_before == shape_after
    assert store.links.to_records() == links_before
    assert len(page.sections[0].detail) <= 200
    assert page.sections[0].original_detail == original


def test_compression_via_fixture_client():
    from memcog.ingestion import compression_request

    store = small_store()
    page = store.find_page("user/assistant/topic/cooking.md")
    page.sections[0].detail = "Verbose cooking notes. " * 30
    client = FixtureClient({})
    client.record(
        compression_request(page.sections[0].detail, 100),
        "User cooks nightly with balcony herbs.",
    )
    manage_growth(store, GrowthPolicy(9999, compress_over=100), llm=client,
                  clock=lambda: "2024-03-01T00:00:00")
    assert page.sections[0].detail == "User cooks nightly with balcony herbs."


# ---------------------------------------------------------------------------
# Growth sign check on a synthetic stream
# ---------------------------------------------------------------------------

def test_synthetic_stream_negative_growth_slope():
    """50 sessions with controlled vocabulary reuse: early sessions introduce
    new entities, later sessions mostly revisit them, so new-pages-per-session
    trends downward."""
    from memcog.bench import growth_slope

    vocab = [f"hobby{i}" for i in range(40)]
    store = create_store("stream")
    store.last_ingested = "2023-12-31T00:00:00"
    config = IngestConfig()
    for session in range(1, 51):
        day = f"2024-{1 + (session - 1) // 28:02d}-{1 + (session - 1) % 28:02d}"
        turns = _user_turns(f"session {session} news", session=session,
                            start=f"{day}T10:00:00")
        # Fresh vocabulary arrives early; later sessions reuse earlier terms.
        fresh_budget = max(1, 3 - session // 12)
        facts_payload = []
        namings = []
        for k in range(3):
            reuse = (session * 3 + k) % max(1, min(len(vocab), session // 2))
            if k < fresh_budget and (session * 3 + k) < len(vocab):
                term = vocab[session * 3 + k - 1] if session * 3 + k - 1 < len(vocab) else vocab[reuse]
            else:
                term = vocab[reuse]
            detail = f"The user mentioned {term} progress in session {session} item {k}."
            facts_payload.append({
                "turn_id": 1, "detail": detail, "category": "experience",
                "entity_terms": [term, f"{term}-notes"], "temporal_context": None,
            })
            fact = _fact(detail, [term, f"{term}-notes"], source=(session, 1),
                         ts=f"{day}T10:00:00")
            namings.append(([fact], {
                "dimension": "topic", "title": term, "summary": f"Notes on {term}.",
                "aliases": [f"{term}-notes"], "tags": [term],
                "section_titles": [f"{term} update"],
            }))
        client = _update_fixture(store, turns, facts_payload, namings=namings)
        incremental_update(store, turns, client, config)
    series = {s: store.creation_stats.get(s, 0) for s in range(1, 51)}
    trend = growth_slope(series, ("fixed_window", 5))
    assert trend.slope < 0
