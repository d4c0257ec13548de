"""memcog: hierarchical wiki-style agent memory with navigable structure,
proactive recall, and a benchmark construction/evaluation toolkit."""

from .store import (
    AccessEntry,
    Dimension,
    Fact,
    MemoryStore,
    Page,
    Section,
    create_store,
    make_page,
    record_access,
    upsert_page,
)
from .links import Link, LinkGraph, add_link, make_link, suggest_links
from .wiki import parse_store, read_store, serialize_store, store_digest, write_store
from .navigation import NavigationAction, NavigationSession, Observation, replay_trace
from .llm import FixtureClient, LiveClient, LMRequest, LMResponse, RecordingClient
from .ingestion import (
    ConversationTurn,
    ExtractedFact,
    GrowthPolicy,
    UpdatePlan,
    build_store,
    extract_facts,
    incremental_update,
    manage_growth,
    resolve_contradiction,
)
from .agent import (
    AgentStep,
    ProtocolConfig,
    SurfacingDecision,
    apply_surfacing,
    run_proactive,
    run_reactive,
    scripted_client,
)

__version__ = "0.1.0"
