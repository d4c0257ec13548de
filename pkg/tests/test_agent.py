from __future__ import annotations

import json

import pytest

from memcog.agent import (
    FEW_SHOT_EXAMPLES,
    GENERATE_PROMPT_TEMPLATE,
    PROACTIVE_PROTOCOL,
    AgentStep,
    ProtocolConfig,
    apply_surfacing,
    generate_request,
    run_proactive,
    run_reactive,
    scripted_client,
)
from memcog.errors import (
    FixtureMissingError,
    StructuredOutputError,
    ValidationError,
)
from memcog.llm import LMRequest, LMResponse, request_digest
from memcog.store import Fact, Section
from memcog.textutil import norm

from conftest import CASES, small_store

EXPECTED_ANSWERS = {
    "simple_factual": "Business Administration",
    "enumeration": "4",
    "comparative": "TikTok",
    "timeline": "Fixing the fence",
    "open_ended": "podcasts",
}

STEP_RANGES = {
    "simple_factual": (1, 2),
    "enumeration": (3, 5),
    "comparative": (3, 4),
    "timeline": (3, 4),
    "open_ended": (2, 4),
}


def _run_case(case, case_stores, fixtures_dir, config=None):
    client = scripted_client(fixtures_dir / "llm" / "agent" / f"{case}.json")
    store = case_stores[case]
    questions = {
        "simple_factual": "What degree did I graduate with?",
        "enumeration": "How many pieces of furniture did I buy, assemble, sell, or fix in the past few months?",
        "comparative": "Which social media platform did I gain the most followers on over the past month?",
        "timeline": "Which task did I complete first, fixing the fence or trimming the goats' hooves?",
        "open_ended": "Can you suggest some activities I can do during my commute to work?",
    }
    return run_reactive(store, questions[case], client, config or ProtocolConfig())


# ---------------------------------------------------------------------------
# Protocol constants
# ---------------------------------------------------------------------------

def test_protocol_prompt_core_clauses():
    assert "Proactive association" in PROACTIVE_PROTOCOL
    assert "(most important)" in PROACTIVE_PROTOCOL
    assert "Reactive response" in PROACTIVE_PROTOCOL
    assert "Navigate progressively" in PROACTIVE_PROTOCOL
    assert "according to my records" in PROACTIVE_PROTOCOL
    assert "Think before acting" in PROACTIVE_PROTOCOL


def test_few_shot_covers_all_five_trigger_styles():
    assert "User likes running to relieve stress" in FEW_SHOT_EXAMPLES
    assert "Yantai" in FEW_SHOT_EXAMPLES
    assert "Promised kid a year-end trip" in FEW_SHOT_EXAMPLES
    assert "AI startup project progress" in FEW_SHOT_EXAMPLES
    assert "Architecture proposal ambient music material" in FEW_SHOT_EXAMPLES


def test_generate_prompt_slots():
    request = generate_request("Where is Joe?", "mem", "entity", "people bindings")
    prompt = request.messages[0][1]
    assert 'User message: "Where is Joe?"' in prompt
    assert "Trigger type: entity (people bindings)" in prompt
    assert "up to 5" in prompt
    assert prompt.index(FEW_SHOT_EXAMPLES.splitlines()[0].strip("1. ")) > 0
    assert GENERATE_PROMPT_TEMPLATE.count("{") >= 5  # all five slots present


# ---------------------------------------------------------------------------
# Reactive replays (scripted client)
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("case", CASES)
def test_reactive_replay_cases(case, case_stores, fixtures_dir):
    answer, steps = _run_case(case, case_stores, fixtures_dir)
    assert EXPECTED_ANSWERS[case].lower() in answer.lower()
    nav_steps = [s for s in steps if s.action is not None]
    low, high = STEP_RANGES[case]
    assert low <= len(nav_steps) <= high <= 6


def test_enumeration_reads_four_pages_and_follows_a_link(case_stores, fixtures_dir):
    answer, steps = _run_case("enumeration", case_stores, fixtures_dir)
    reads = [s for s in steps if s.action and s.action.kind in ("read_page", "follow_link")]
    follows = [s for s in steps if s.action and s.action.kind == "follow_link"]
    assert len(reads) >= 4
    assert len(follows) >= 1


def test_timeline_answer_cites_dates(case_stores, fixtures_dir):
    answer, _ = _run_case("timeline", case_stores, fixtures_dir)
    assert "2023-05-04" in answer and "2023-05-11" in answer


def test_open_ended_answer_grounded_in_observations(case_stores, fixtures_dir):
    answer, steps = _run_case("open_ended", case_stores, fixtures_dir)
    assert "podcast" in answer.lower()
    assert "indie rock" in answer.lower() or "the killers" in answer.lower()
    observed = " ".join(norm(s.observation.content) for s in steps if s.observation)
    for name in ("hardcore history", "the killers", "how i built this"):
        if norm(name) in norm(answer):
            assert norm(name) in observed


def test_replay_reproduces_recorded_thoughts(case_stores, fixtures_dir):
    # The scripted client replays the recorded responses verbatim, so thoughts
    # and actions must match the committed trace exactly on a second run.
    a1, s1 = _run_case("comparative", case_stores, fixtures_dir)
    a2, s2 = _run_case("comparative", case_stores, fixtures_dir)
    assert a1 == a2
    assert [(s.thought, s.action and s.action.to_dict()) for s in s1] == [
        (s.thought, s.action and s.action.to_dict()) for s in s2
    ]


def test_budget_respected_in_all_replays(case_stores, fixtures_dir):
    for case in CASES:
        _, steps = _run_case(case, case_stores, fixtures_dir)
        assert len([s for s in steps if s.action is not None]) <= 6


def test_agent_reads_flush_into_access_log(case_stores, fixtures_dir):
    store = case_stores["timeline"]
    assert store.access_log["user/assistant/topic/pet goat.md"].read_count == 0
    _run_case("timeline", case_stores, fixtures_dir)
    assert store.access_log["user/assistant/topic/pet goat.md"].read_count == 1
    assert store.access_log["user/assistant/place/user's farm.md"].read_count == 1


# ---------------------------------------------------------------------------
# Scripted client behavior
# ---------------------------------------------------------------------------

def test_scripted_client_replays_identically(fixtures_dir):
    client = scripted_client(fixtures_dir / "llm" / "agent" / "simple_factual.json")
    digest, text = next(iter(client.responses.items()))
    request = LMRequest.build("s", [("user", "u")])
    client.responses[request_digest(request)] = "pinned"
    assert client.complete(request).text == "pinned"
    assert client.complete(request).text == "pinned"


def test_scripted_client_unknown_digest_errors():
    client = scripted_client({})
    request = LMRequest.build("s", [("user", "never recorded")])
    with pytest.raises(FixtureMissingError) as err:
        client.complete(request)
    assert request_digest(request) in str(err.value)


# ---------------------------------------------------------------------------
# Budget exhaustion forces an answer
# ---------------------------------------------------------------------------

class _LoopingClient:
    """Always proposes another browse; must be forced to answer at the budget."""

    def __init__(self):
        self.forced_seen = False

    def complete(self, request):
        last = request.messages[-1][1] if request.messages else ""
        if "budget is exhausted" in last:
            self.forced_seen = True
            return LMResponse("Thought: out of budget.\nAction: answer[forced answer]")
        return LMResponse("Thought: keep looking.\nAction: list_dimensions[]")


def test_forced_answer_on_budget_exhaustion():
    store = small_store()
    client = _LoopingClient()
    answer, steps = run_reactive(store, "anything?", client, ProtocolConfig(budget=3))
    assert client.forced_seen
    assert answer == "forced answer"
    assert len([s for s in steps if s.action is not None]) == 3


class _GarbageClient:
    def complete(self, request):
        return LMResponse("I refuse to follow the format.")


def test_unparseable_output_reprompts_then_errors():
    store = small_store()
    with pytest.raises(StructuredOutputError):
        run_reactive(store, "q", _GarbageClient(), ProtocolConfig(budget=2))


# ---------------------------------------------------------------------------
# Proactive runs
# ---------------------------------------------------------------------------

def test_proactive_run_open_ended(case_stores, fixtures_dir):
    client = scripted_client(fixtures_dir / "llm" / "agent" / "proactive_open_ended.json")
    store = case_stores["open_ended"]
    recalled, steps = run_proactive(
        store, "Feeling terrible, don't want to do anything.", client, ProtocolConfig()
    )
    assert 1 <= len(recalled) <= 5
    observed = " ".join(norm(s.observation.content) for s in steps if s.observation)
    for item in recalled:
        assert set(item) == {"memory_unit", "reason"}
        assert item["reason"].startswith("Association path:")
        assert norm(item["memory_unit"]) in observed  # groundedness
    assert any("mindful breathing" in item["memory_unit"] for item in recalled)


def test_proactive_refuses_when_disabled():
    store = small_store()
    with pytest.raises(ValidationError):
        run_proactive(store, "hi", scripted_client({}),
                      ProtocolConfig(proactive_enabled=False))


class _ProactivePolicy:
    def __init__(self, generation):
        self.generation = generation

    def complete(self, request):
        prompt = request.messages[-1][1]
        if "triggered memories" in prompt or "memory retrieval assistant" in request.messages[0][1][:80]:
            return LMResponse(self.generation)
        return LMResponse("Thought: check pages.\nAction: answer[done]")


def test_proactive_zero_overlap_gives_empty_list():
    store = small_store()
    client = _ProactivePolicy("[]")
    recalled, _ = run_proactive(store, "Completely unrelated topic.", client)
    assert recalled == []


def test_proactive_truncates_to_five_and_drops_ungrounded():
    store = small_store()
    items = [
        {"memory_unit": "User grows tomatoes and herbs", "reason": "Association path: garden"},
    ] * 7 + [
        {"memory_unit": "entirely fabricated unit", "reason": "Association path: nowhere"},
    ]

    class Policy:
        def __init__(self):
            self.phase = 0

        def complete(self, request):
            prompt = request.messages[-1][1]
            if "memory retrieval assistant" in request.messages[-1][1][:120]:
                return LMResponse(json.dumps(items))
            if self.phase == 0:
                self.phase = 1
                return LMResponse(
                    "Thought: read the garden page.\n"
                    "Action: read_page[user/assistant/topic/gardening.md]"
                )
            return LMResponse("Thought: done.\nAction: answer[done]")

    recalled, _ = run_proactive(store, "Thinking about my tomatoes", Policy())
    assert all("fabricated" not in item["memory_unit"] for item in recalled)
    assert len(recalled) <= 5


# ---------------------------------------------------------------------------
# Ablation switches
# ---------------------------------------------------------------------------

def test_no_graph_overlay_trace_has_no_follow_link(case_stores, fixtures_dir):
    client = scripted_client(fixtures_dir / "llm" / "agent" / "timeline_no_overlay.json")
    config = ProtocolConfig(graph_overlay_enabled=False)
    answer, steps = run_reactive(
        case_stores["timeline"],
        "Which task did I complete first, fixing the fence or trimming the goats' hooves?",
        client, config,
    )
    assert "fixing the fence" in answer.lower()
    assert all(s.action is None or s.action.kind != "follow_link" for s in steps)
    for step in steps:
        if step.observation is not None:
            assert step.observation.structural_context.available_links == []


# ---------------------------------------------------------------------------
# Surfacing checks
# ---------------------------------------------------------------------------

def test_surfacing_redundancy_gate():
    candidates = [
        {"memory_unit": "likes running", "reason": "Association path: stress"},
        {"memory_unit": "Likes Running", "reason": "Association path: stress again"},
    ]
    decisions = apply_surfacing(candidates, "feeling stressed", None)
    assert decisions[0].surfaced
    assert not decisions[1].redundancy
    assert not decisions[1].surfaced


def test_surfacing_temporal_validity_superseded_section():
    # Oracle: the superseded_by flag on the section carrying the unit text.
    store = small_store()
    page = store.find_page("user/assistant/topic/cooking.md")
    stale = Section("old count", "objective fact", "Follower count is 420.",
                    facts=[Fact("count", "is", "420", None)])
    page.sections.append(stale)
    from memcog.ingestion import apply_supersession

    fresh = Section("new count", "objective fact", "Follower count is 540.",
                    facts=[Fact("count", "is", "540", None)])
    apply_supersession(page, len(page.sections) - 1, fresh)
    decisions = apply_surfacing(
        [{"memory_unit": "Follower count is 420.", "reason": "Association path: counts"}],
        "how are my follower counts?",
        None,
        store=store,
    )
    assert not decisions[0].temporal_validity
    assert not decisions[0].surfaced


def test_surfacing_all_pass_conjunction():
    decisions = apply_surfacing(
        [{"memory_unit": "running habit", "reason": "Association path: running relieves stress"}],
        "stress is high, need to unwind with running",
        None,
    )
    d = decisions[0]
    assert d.relevance and d.temporal_validity and d.sensitivity and d.redundancy
    assert d.surfaced


# ---------------------------------------------------------------------------
# Step record shape
# ---------------------------------------------------------------------------

def test_agent_step_invariant():
    with pytest.raises(ValidationError):
        AgentStep(thought="t")  # neither action nor answer
    with pytest.raises(ValidationError):
        from memcog.navigation import NavigationAction

        AgentStep(thought="t", action=NavigationAction("list_dimensions"),
                  terminal_answer="x")
