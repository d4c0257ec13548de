from __future__ import annotations

import random

import pytest

from memcog.errors import (
    BudgetError,
    DanglingLinkError,
    InvalidLinkError,
    NotFoundError,
)
from memcog.links import make_link
from memcog.navigation import (
    NavigationAction,
    NavigationSession,
    load_trace,
    dump_trace,
    replay_trace,
    trace_records,
)
from memcog.store import Section, create_store, make_page, upsert_page
from memcog.wiki import serialize_store, store_digest

from conftest import small_store


def _session(store=None, **kwargs) -> NavigationSession:
    store = store or small_store()
    return NavigationSession(store.snapshot(), **kwargs)


# ---------------------------------------------------------------------------
# list_dimensions
# ---------------------------------------------------------------------------

def test_list_dimensions_contents():
    session = _session()
    observation = session.list_dimensions()
    assert "### topic\n- Hobbies and ongoing projects" in observation.content
    assert "### place\n- Places in the user's life" in observation.content
    assert observation.step_index == 1
    assert observation.structural_context.dimensional_position is None


def test_list_dimensions_empty_store():
    session = NavigationSession(create_store("u1").snapshot())
    observation = session.list_dimensions()
    assert observation.content == ""
    assert observation.structural_context is not None


def test_seventh_call_hits_budget():
    session = _session()
    for _ in range(6):
        session.list_dimensions()
    assert session.exhausted
    with pytest.raises(BudgetError):
        session.list_dimensions()
    assert len(session.trace) == 6


# ---------------------------------------------------------------------------
# browse_dimension
# ---------------------------------------------------------------------------

def test_browse_matches_index_rendering():
    # Oracle: compare against serialize_store output for that dimension.
    store = small_store()
    session = NavigationSession(store.snapshot())
    observation = session.browse_dimension("topic")
    assert observation.content == serialize_store(store)["user/assistant/topic/index.md"]


def test_browse_missing_dimension_keeps_trace():
    session = _session()
    with pytest.raises(NotFoundError):
        session.browse_dimension("finance")
    assert session.trace == []


def test_browse_fixture_contains_degree_entry(case_stores):
    session = NavigationSession(case_stores["simple_factual"].snapshot())
    observation = session.browse_dimension("topic")
    assert "graduated with a degree in Business Administration" in observation.content


# ---------------------------------------------------------------------------
# read_page
# ---------------------------------------------------------------------------

def test_read_page_renders_full_page(case_stores):
    session = NavigationSession(case_stores["timeline"].snapshot())
    observation = session.read_page("user/assistant/place/user's farm.md")
    assert "The fence was repaired on 2023-05-04" in observation.content
    observation = session.read_page("user/assistant/topic/pet goat.md")
    assert "On 2023-05-11, the user successfully" in observation.content


def test_read_page_records_access_buffered_then_flushed():
    store = small_store()
    session = NavigationSession(store.snapshot(), clock=lambda: "2023-06-01T00:00:00")
    session.read_page("user/assistant/topic/gardening.md")
    assert store.access_log["user/assistant/topic/gardening.md"].read_count == 0
    session.flush_access(store)
    assert store.access_log["user/assistant/topic/gardening.md"].read_count == 1
    assert store.access_log["user/assistant/topic/gardening.md"].last_access == "2023-06-01T00:00:00"


def test_read_archived_page_not_found():
    store = small_store()
    store.find_page("user/assistant/topic/gardening.md").status = "archived"
    session = NavigationSession(store.snapshot())
    with pytest.raises(NotFoundError):
        session.read_page("user/assistant/topic/gardening.md")
    assert session.trace == []


def test_structural_context_lists_links_of():
    store = small_store()
    link = make_link(
        "user/assistant/topic/gardening.md", "user/assistant/place/balcony.md", "related_to"
    )
    store.links.add(link, set(store.page_paths()))
    session = NavigationSession(store.snapshot())
    observation = session.read_page("user/assistant/topic/gardening.md")
    records = observation.structural_context.available_links
    assert len(records) == 1
    assert records[0]["kind"] == "related_to"
    assert records[0]["direction"] == "both"
    siblings = observation.structural_context.sibling_pages
    assert ("cooking", "User cooks with home-grown herbs most evenings.") in siblings
    assert all(title != "gardening" for title, _ in siblings)
    position = observation.structural_context.dimensional_position
    assert (position.dimension, position.page_index, position.page_count) == ("topic", 0, 2)


# ---------------------------------------------------------------------------
# follow_link
# ---------------------------------------------------------------------------

def test_follow_body_wiki_link(case_stores):
    store = case_stores["enumeration"]
    session = NavigationSession(store.snapshot())
    session.read_page("user/assistant/topic/home decor.md")
    observation = session.follow_link("[[user/assistant/topic/home office.md]]")
    assert "IKEA bookshelf" in observation.content


def test_follow_unobserved_link_rejected():
    session = _session()
    session.list_dimensions()
    with pytest.raises(InvalidLinkError):
        session.follow_link("user/assistant/topic/gardening.md")
    assert len(session.trace) == 1


def test_follow_equals_read_page_except_step_index():
    # Oracle: direct read_page on a twin session over the same snapshot.
    store = small_store()
    snapshot = store.snapshot()
    nav = NavigationSession(snapshot)
    nav.read_page("user/assistant/place/balcony.md")
    followed = nav.follow_link("user/assistant/topic/gardening.md")
    twin = NavigationSession(snapshot)
    direct = twin.read_page("user/assistant/topic/gardening.md")
    followed_dict = followed.to_dict()
    direct_dict = direct.to_dict()
    assert followed_dict.pop("step_index") == 2
    assert direct_dict.pop("step_index") == 1
    assert followed_dict == direct_dict


def test_follow_dangling_target():
    store = small_store()
    # The balcony section references gardening; archive the target to dangle it.
    store.find_page("user/assistant/topic/gardening.md").status = "archived"
    session = NavigationSession(store.snapshot())
    session.read_page("user/assistant/place/balcony.md")
    with pytest.raises(DanglingLinkError):
        session.follow_link("user/assistant/topic/gardening.md")


def test_failed_actions_consume_no_budget():
    session = _session(budget=2)
    for _ in range(4):
        with pytest.raises(NotFoundError):
            session.read_page("user/assistant/topic/nope.md")
    assert session.steps_used == 0
    session.list_dimensions()
    session.browse_dimension("topic")
    assert session.exhausted


# ---------------------------------------------------------------------------
# Read-only law and ablation
# ---------------------------------------------------------------------------

def test_navigation_read_only_except_access_log():
    store = small_store()
    digest_before = store_digest(store)
    session = NavigationSession(store.snapshot())
    session.list_dimensions()
    session.browse_dimension("topic")
    session.read_page("user/assistant/topic/gardening.md")
    assert store_digest(store) == digest_before
    session.flush_access(store)
    assert store.access_log["user/assistant/topic/gardening.md"].read_count == 1


def test_access_flush_merge_commutative():
    # Two sessions' buffered reads merge identically in either flush order.
    def run(order):
        store = small_store()
        a = NavigationSession(store.snapshot(), clock=lambda: "2023-06-01T00:00:00")
        b = NavigationSession(store.snapshot(), clock=lambda: "2023-06-02T00:00:00")
        a.read_page("user/assistant/topic/gardening.md")
        a.read_page("user/assistant/topic/cooking.md")
        b.read_page("user/assistant/topic/gardening.md")
        for session in (order == "ab" and (a, b) or (b, a)):
            session.flush_access(store)
        return {p: (e.read_count, e.last_access) for p, e in store.access_log.items()}

    assert run("ab") == run("ba")


def test_graph_overlay_disabled_hides_links():
    store = small_store()
    store.links.add(
        make_link("user/assistant/topic/gardening.md", "user/assistant/place/balcony.md",
                  "related_to"),
        set(store.page_paths()),
    )
    session = NavigationSession(store.snapshot(), show_links=False)
    observation = session.read_page("user/assistant/topic/gardening.md")
    assert observation.structural_context.available_links == []
    with pytest.raises(InvalidLinkError):
        session.follow_link("user/assistant/place/balcony.md")


# ---------------------------------------------------------------------------
# Budget law property (part of the acceptance gate runs a bigger version)
# ---------------------------------------------------------------------------

def _random_store(rng: random.Random):
    store = create_store("prop")
    for d in range(rng.randint(1, 3)):
        for p in range(rng.randint(0, 3)):
            title = f"page {d}{p}"
            upsert_page(store, f"dim{d}", make_page(
                f"dim{d}", title, f"summary {d}{p}",
                tags=[f"tag{rng.randint(0, 2)}"],
                sections=[Section("s", "experience", f"detail {d}{p}")],
            ))
        if store.dimension(f"dim{d}") is None:
            from memcog.store import Dimension

            store.dimensions.append(Dimension(name=f"dim{d}"))
    return store


def test_budget_law_random_scripts():
    rng = random.Random(42)
    for _ in range(150):
        store = _random_store(rng)
        budget = rng.randint(1, 6)
        session = NavigationSession(store.snapshot(), budget=budget)
        successes = 0
        for _ in range(rng.randint(1, 14)):
            kind = rng.choice(("list_dimensions", "browse_dimension", "read_page"))
            arg = None
            if kind == "browse_dimension":
                arg = rng.choice(["dim0", "dim1", "missing"])
            elif kind == "read_page":
                arg = rng.choice(store.page_paths() + ["user/assistant/dim0/none.md"])
            try:
                session.apply(NavigationAction(kind, arg))
                successes += 1
            except BudgetError:
                assert session.steps_used == budget
            except NotFoundError:
                pass
        assert session.steps_used == successes <= budget
        assert session.exhausted == (session.steps_used == budget)


# ---------------------------------------------------------------------------
# Trace replay
# ---------------------------------------------------------------------------

def test_trace_replay_determinism():
    store = small_store()
    session = NavigationSession(store.snapshot())
    session.list_dimensions()
    session.browse_dimension("topic")
    session.read_page("user/assistant/topic/gardening.md")
    records = trace_records(session)
    text = dump_trace(records)
    result = replay_trace(store.snapshot(), load_trace(text))
    assert result.ok
    assert result.steps == 3


def test_replay_detects_divergence():
    store = small_store()
    session = NavigationSession(store.snapshot())
    session.read_page("user/assistant/topic/gardening.md")
    records = trace_records(session)
    records[0]["observation_digest"] = "0" * 64
    result = replay_trace(store.snapshot(), records)
    assert not result.ok
    assert result.mismatches[0]["step"] == 1


def test_fixture_traces_replay(case_stores, fixtures_dir):
    for case, store in case_stores.items():
        text = (fixtures_dir / "traces" / f"{case}.jsonl").read_text(encoding="utf-8")
        result = replay_trace(store.snapshot(), load_trace(text))
        assert result.ok, (case, result.mismatches)
        assert result.answer
