from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

FIXTURES = ROOT / "fixtures"
CASES = ("simple_factual", "enumeration", "comparative", "timeline", "open_ended")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture()
def case_stores():
    """Parsed reference fixture stores, keyed by case name.

    Function-scoped: agent runs flush access statistics into the store they
    are given, so tests must not share instances.
    """
    from memcog.wiki import read_store

    return {case: read_store(FIXTURES / "stores" / case) for case in CASES}


@pytest.fixture()
def farm_history():
    from memcog.ingestion import load_turns

    raw = json.loads((FIXTURES / "conversations" / "farm.json").read_text(encoding="utf-8"))
    return load_turns(raw)


@pytest.fixture()
def farm_client():
    from memcog.llm import FixtureClient

    return FixtureClient(FIXTURES / "llm" / "ingest")


def small_store(owner: str = "tester"):
    """Two-dimension store used across unit tests."""
    from memcog.store import Section, create_store, make_page, upsert_page

    store = create_store(owner)
    upsert_page(store, "topic", make_page(
        "topic", "gardening",
        "User grows tomatoes and herbs on a small balcony.",
        aliases=["garden"],
        tags=["plants", "balcony"],
        sections=[
            Section("Balcony garden", "experience",
                    "User grows tomatoes and herbs on a small balcony started in spring.",
                    temporal_context="2023-04-02"),
        ],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "cooking",
        "User cooks with home-grown herbs most evenings.",
        tags=["plants", "kitchen"],
        sections=[
            Section("Herb cooking", "preference",
                    "User likes cooking with home-grown herbs from the balcony garden.",
                    temporal_context="2023-04-20"),
        ],
    ))
    upsert_page(store, "place", make_page(
        "place", "balcony",
        "The small balcony where the garden lives.",
        tags=["home"],
        sections=[
            Section("Balcony", "objective fact",
                    "The balcony faces south and holds the planter boxes.",
                    related_pages=["user/assistant/topic/gardening.md"]),
        ],
    ))
    store.dimensions[0].description = "Hobbies and ongoing projects"
    store.dimensions[1].description = "Places in the user's life"
    return store
