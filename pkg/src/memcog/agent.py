"""ReAct loop over the navigation interface with proactive recall.

Two entry points: run_reactive answers explicit questions; run_proactive
surfaces at most five associated memory units for a conversational utterance,
with every emitted unit grounded in the trace's observations and gated by the
four-check surfacing filter (relevance, temporal validity, sensitivity,
redundancy).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    AgentRunError,
    BudgetError,
    MemCogError,
    StructuredOutputError,
    ValidationError,
)
from .llm import FixtureClient, LanguageModelClient, LMRequest, extract_json
from .navigation import DEFAULT_BUDGET, NavigationAction, NavigationSession, Observation
from .store import MemoryStore
from .textutil import norm, tokenize

# The behavioral contract injected as the system prompt. Defines when the
# assistant engages memory on its own and how it navigates and shares results.
PROACTIVE_PROTOCOL = """\
## Your Memory System

You have access to a Navigable Memory Store about the user, organized by \
dimensions (personal preferences, work, relationships, events, etc.).

### When to use memory

Proactive association (most important):
- When the user mentions people, places, topics, or situations that may \
connect to stored knowledge → navigate your memory to check for relevant context
- When you sense the conversation could benefit from historical context → \
browse relevant dimensions
- When the user's statement might contradict or update stored information → \
verify against memory

Reactive response (traditional):
- When the user explicitly asks about past information → search or navigate

### How to use memory

- Navigate progressively: Don't stop at the first result. If a page has \
relevant links, follow them. Build a complete picture.
- Integrate naturally: Use recalled information as if you naturally remember \
it. Don't say "according to my records."
- Be selective: Not everything you find needs to be shared. Consider whether \
the information is relevant, timely, and appropriate.
- Think before acting: Before navigating, briefly reason about which \
dimension/topic is most likely relevant.
"""

_TOOLBOX_FULL = """\
You interact with the memory store through navigation actions. Reply with \
exactly two lines:

Thought: <your reasoning>
Action: <one action>

Available actions:
- list_dimensions[] — all top-level dimensions with brief descriptions
- browse_dimension[<dimension>] — page titles and summaries within a dimension
- read_page[<page path>] — full content of a page, including sections and links
- follow_link[<page path>] — follow a link visible in the latest observation
- answer[<final answer>] — finish with your answer
"""

_TOOLBOX_NO_LINKS = """\
You interact with the memory store through navigation actions. Reply with \
exactly two lines:

Thought: <your reasoning>
Action: <one action>

Available actions:
- list_dimensions[] — all top-level dimensions with brief descriptions
- browse_dimension[<dimension>] — page titles and summaries within a dimension
- read_page[<page path>] — full content of a page
- answer[<final answer>] — finish with your answer
"""

_FORCED_ANSWER = (
    "Your navigation budget is exhausted. Answer now using only the "
    "observations above. Reply with exactly one line:\n\nAction: answer[<final answer>]"
)

_REPROMPT = (
    "Your last reply did not match the required format. Reply with exactly "
    "two lines: 'Thought: ...' then 'Action: <action>[...]'."
)

FEW_SHOT_EXAMPLES = """\
1. Temporal Association
User message: "It's almost New Year, anything I should do?"
Triggered memories:
[
  {"memory_unit": "Promised kid a year-end trip",
   "reason": "Association path: user says it's almost New Year → find promise of year-end trip with kid"}
]

2. Entity Association
User message: "How is Tim doing lately?"
Triggered memories:
[
  {"memory_unit": "AI startup project progress",
   "reason": "Association path: user mentions Tim → find co-founded startup in Hangzhou → find AI startup project progress"}
]

3. Emotional Association
User message: "Feeling terrible, don't want to do anything."
Triggered memories:
[
  {"memory_unit": "User likes running to relieve stress",
   "reason": "Association path: user expresses negative emotion → scan relaxation/hobby pages → find user likes running to relieve stress"}
]

4. Behavioral Pattern Association
User message: "Just improvised on the piano and recorded it."
Triggered memories:
[
  {"memory_unit": "Architecture proposal ambient music material",
   "reason": "Association path: user mentions improvising piano and recording → find user previously used recordings as ambient music material for architecture proposals → suggest adding to material library"}
]

5. Multi-hop Association
User message: "Where is Joe's hometown?"
Triggered memories:
[
  {"memory_unit": "Yantai",
   "reason": "Association path: user asks about Joe's hometown → find Joe once gifted hometown specialty Yantai apples → answer is Yantai"}
]
"""

GENERATE_PROMPT_TEMPLATE = """\
You are a memory retrieval assistant. Given a user message and relevant memory \
fragments, identify the most relevant triggered memory units based on the \
memory content. You only need to output the list of retrieved memory units in \
the specified JSON format, with no extra text.

---
Examples of triggered memory units:
{few_shot}

---

Now please complete the following task:

Trigger type: {trigger_type} ({desc})

User message: "{question}"

Please retrieve from the memory store and find the most relevant up to 5 \
triggered memories for this user message. Each memory should include:
- memory_unit: memory unit name
- reason: association path explanation

Please strictly output in the following JSON format, with no extra text:
[
  {{"memory_unit": "...", "reason": "Association path: ..."}},
  ...
]

---
The following are relevant memory fragments retrieved from the memory store \
for your reference:
{mem_context}

Based on the above memories, output up to 5 triggered memories (in JSON format).
"""

MAX_RECALLED = 5

_ACTION_RE = re.compile(r"Action:\s*([a-z_]+)\s*\[(.*)\]\s*$", re.DOTALL)
_THOUGHT_RE = re.compile(r"Thought:\s*(.*?)(?:\n|$)", re.DOTALL)


@dataclass
class ProtocolConfig:
    system_prompt: str = PROACTIVE_PROTOCOL
    proactive_enabled: bool = True
    graph_overlay_enabled: bool = True
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.budget < 1:
            raise ValidationError("budget must be >= 1")

    def toolbox(self) -> str:
        return _TOOLBOX_FULL if self.graph_overlay_enabled else _TOOLBOX_NO_LINKS

    def to_dict(self) -> dict:
        return {
            "proactive_enabled": self.proactive_enabled,
            "graph_overlay_enabled": self.graph_overlay_enabled,
            "budget": self.budget,
        }


@dataclass
class AgentStep:
    thought: str
    action: NavigationAction | None = None
    observation: Observation | None = None
    terminal_answer: str | None = None
    error: str | None = None

    def __post_init__(self):
        if (self.action is None) == (self.terminal_answer is None):
            raise ValidationError("a step carries exactly one of action or terminal answer")

    def to_dict(self) -> dict:
        return {
            "thought": self.thought,
            "action": self.action.to_dict() if self.action else None,
            "observation_digest": self.observation.digest() if self.observation else None,
            "terminal_answer": self.terminal_answer,
            "error": self.error,
        }


@dataclass
class SurfacingDecision:
    candidate: dict
    relevance: bool
    temporal_validity: bool
    sensitivity: bool
    redundancy: bool

    @property
    def surfaced(self) -> bool:
        return self.relevance and self.temporal_validity and self.sensitivity and self.redundancy

    def to_dict(self) -> dict:
        return {
            "candidate": self.candidate,
            "relevance": self.relevance,
            "temporal_validity": self.temporal_validity,
            "sensitivity": self.sensitivity,
            "redundancy": self.redundancy,
            "surfaced": self.surfaced,
        }


def scripted_client(fixtures: dict[str, str] | str | Path) -> FixtureClient:
    """Test double: replay recorded responses, hard error on unknown digests."""
    return FixtureClient(fixtures)


# ---------------------------------------------------------------------------
# The loop
# ---------------------------------------------------------------------------

def _parse_step(text: str) -> tuple[str, str, str]:
    """Returns (thought, action name, action argument)."""
    action_match = _ACTION_RE.search(text)
    if action_match is None:
        raise ValueError("no Action line")
    thought_match = _THOUGHT_RE.search(text)
    thought = thought_match.group(1).strip() if thought_match else ""
    return thought, action_match.group(1), action_match.group(2).strip()


def _loop_request(config: ProtocolConfig, task: str, transcript: list[tuple[str, str]]) -> LMRequest:
    system = config.system_prompt + "\n\n" + config.toolbox()
    return LMRequest.build(system, [("user", task)] + transcript)


def _run_loop(
    store: MemoryStore,
    task: str,
    llm: LanguageModelClient,
    config: ProtocolConfig,
    terminal_action: str,
) -> tuple[str | None, list[AgentStep], NavigationSession]:
    """Think→Act→Observe until the terminal action or budget exhaustion.

    Navigation happens on a snapshot; buffered page reads merge into the given
    store's access log when the loop ends.
    """
    session = NavigationSession(
        store.snapshot(), budget=config.budget, show_links=config.graph_overlay_enabled
    )
    steps: list[AgentStep] = []
    transcript: list[tuple[str, str]] = []
    actions_taken = 0
    reprompted = False

    while True:
        forced = actions_taken >= config.budget
        request = _loop_request(config, task, transcript)
        if forced:
            request = _loop_request(config, task, transcript + [("user", _FORCED_ANSWER)])
        try:
            response = llm.complete(request)
        except MemCogError as exc:
            raise AgentRunError(f"client failure mid-loop: {exc}", trace=steps) from exc
        parsed_step: tuple[str, NavigationAction | None, str] | None = None
        try:
            thought, name, arg = _parse_step(response.text)
            if name == terminal_action:
                parsed_step = (thought, None, arg)
            else:
                parsed_step = (thought, NavigationAction(kind=name, argument=arg or None), arg)
        except (ValueError, ValidationError):
            if reprompted:
                raise StructuredOutputError(
                    "model output failed to parse after one reprompt",
                    raw=response.text,
                    trace=steps,
                )
            reprompted = True
            transcript.append(("assistant", response.text))
            transcript.append(("user", _REPROMPT))
            continue
        reprompted = False
        transcript.append(("assistant", response.text))
        thought, action, arg = parsed_step

        if action is None:
            steps.append(AgentStep(thought=thought, terminal_answer=arg))
            session.flush_access(store)
            return arg, steps, session
        if forced:
            # The model ignored the forced-answer instruction; force an empty answer.
            steps.append(AgentStep(thought=thought, terminal_answer=""))
            session.flush_access(store)
            return "", steps, session

        try:
            observation = session.apply(action)
        except BudgetError as exc:
            raise AgentRunError(f"budget accounting mismatch: {exc}", trace=steps) from exc
        except MemCogError as exc:
            steps.append(AgentStep(thought=thought, action=action, error=str(exc)))
            transcript.append(("user", f"Error: {exc}"))
            actions_taken += 1
            continue
        steps.append(AgentStep(thought=thought, action=action, observation=observation))
        transcript.append(("user", f"Observation:\n{observation.content}"))
        actions_taken += 1


def run_reactive(
    store: MemoryStore,
    question: str,
    llm: LanguageModelClient,
    config: ProtocolConfig | None = None,
) -> tuple[str, list[AgentStep]]:
    """Navigate memory to answer an explicit question."""
    config = config or ProtocolConfig()
    task = f"Question: {question}"
    answer, steps, _ = _run_loop(store, task, llm, config, terminal_action="answer")
    return answer or "", steps


# ---------------------------------------------------------------------------
# Proactive recall
# ---------------------------------------------------------------------------

def generate_request(
    question: str,
    mem_context: str,
    trigger_type: str = "open",
    desc: str = "any association type that fits the user message",
    few_shot: str = FEW_SHOT_EXAMPLES,
) -> LMRequest:
    prompt = GENERATE_PROMPT_TEMPLATE.format(
        few_shot=few_shot,
        trigger_type=trigger_type,
        desc=desc,
        question=question,
        mem_context=mem_context,
    )
    return LMRequest.build("", [("user", prompt)])


def _grounded(memory_unit: str, observations: list[Observation], store: MemoryStore) -> bool:
    """True when the unit text appears in an observation (normalized substring)
    or names an alias of an observed page."""
    needle = norm(memory_unit)
    if not needle:
        return False
    contents = [norm(obs.content) for obs in observations]
    if any(needle in content for content in contents):
        return True
    for _, page in store.iter_pages():
        if any(norm(alias) == needle for alias in page.aliases):
            if any(norm(page.title) in content for content in contents):
                return True
    return False


def run_proactive(
    store: MemoryStore,
    user_utterance: str,
    llm: LanguageModelClient,
    config: ProtocolConfig | None = None,
    trigger_type: str = "open",
    trigger_desc: str = "any association type that fits the user message",
) -> tuple[list[dict], list[AgentStep]]:
    """Spontaneous recall: navigate from the utterance, then emit at most five
    grounded {memory_unit, reason} records after selective surfacing."""
    config = config or ProtocolConfig()
    if not config.proactive_enabled:
        raise ValidationError("proactive mode is disabled in this configuration")
    task = (
        "The user just said (not a direct question to you):\n"
        f"{user_utterance}\n\n"
        "Navigate memory to find stored information this connects to. "
        "When you have seen enough, reply with Action: answer[done]."
    )
    _, steps, session = _run_loop(store, task, llm, config, terminal_action="answer")
    observations = [s.observation for s in steps if s.observation is not None]
    mem_context = "\n\n".join(obs.content for obs in observations)

    request = generate_request(user_utterance, mem_context, trigger_type, trigger_desc)
    raw_items = None
    for attempt in range(2):
        try:
            response = llm.complete(request)
        except MemCogError as exc:
            raise AgentRunError(f"client failure in recall generation: {exc}", trace=steps) from exc
        try:
            parsed = extract_json(response.text)
            if not isinstance(parsed, list):
                raise ValueError("expected a JSON array")
            raw_items = parsed
            break
        except ValueError:
            if attempt == 1:
                raise StructuredOutputError(
                    "recall output failed to parse after one reprompt",
                    raw=response.text,
                    trace=steps,
                )
            request = LMRequest.build(
                "",
                list(request.messages) + [("assistant", response.text), ("user", _REPROMPT_JSON)],
            )

    candidates = []
    for item in raw_items or []:
        if not isinstance(item, dict) or "memory_unit" not in item or "reason" not in item:
            continue
        unit = str(item["memory_unit"])
        if _grounded(unit, observations, store):
            candidates.append({"memory_unit": unit, "reason": str(item["reason"])})

    decisions = apply_surfacing(candidates, user_utterance, llm, config, store=store)
    recalled = [d.candidate for d in decisions if d.surfaced][:MAX_RECALLED]
    return recalled, steps


_REPROMPT_JSON = (
    "Your last reply was not valid JSON. Output only the JSON array of "
    '{"memory_unit": ..., "reason": ...} records, nothing else.'
)


def apply_surfacing(
    candidates: list[dict],
    context: str,
    llm: LanguageModelClient | None,
    config: ProtocolConfig | None = None,
    store: MemoryStore | None = None,
) -> list[SurfacingDecision]:
    """Four checks per candidate; a candidate surfaces only if all four pass.

    The deterministic core: relevance is lexical overlap with the context or an
    association-path reason; temporal validity fails for superseded sections;
    sensitivity rides on the generating model's own reasoning (no keyword list
    ships with the engine); redundancy compares against items already surfaced
    in the same reply.
    """
    decisions: list[SurfacingDecision] = []
    surfaced_units: set[str] = set()
    context_terms = set(tokenize(context))
    for candidate in candidates:
        unit = str(candidate.get("memory_unit", ""))
        reason = str(candidate.get("reason", ""))
        unit_terms = set(tokenize(unit)) | set(tokenize(reason))
        relevance = bool(unit_terms & context_terms) or norm(reason).startswith(
            "association path"
        )
        temporal_validity = True
        if store is not None:
            needle = norm(unit)
            for _, page in store.iter_pages():
                for section in page.sections:
                    if section.superseded_by is not None and needle and needle in norm(
                        section.detail
                    ):
                        temporal_validity = False
        sensitivity = True
        redundancy = norm(unit) not in surfaced_units
        decision = SurfacingDecision(
            candidate=candidate,
            relevance=relevance,
            temporal_validity=temporal_validity,
            sensitivity=sensitivity,
            redundancy=redundancy,
        )
        if decision.surfaced:
            surfaced_units.add(norm(unit))
        decisions.append(decision)
    return decisions


# ---------------------------------------------------------------------------
# Run records
# ---------------------------------------------------------------------------

def run_record(
    task: str,
    config: ProtocolConfig,
    steps: list[AgentStep],
    answer: str | None = None,
    recalled: list[dict] | None = None,
    proactive: bool = False,
) -> dict:
    record = {
        ("utterance" if proactive else "question"): task,
        "config": config.to_dict(),
        "steps": [
            {
                "thought": s.thought,
                "action": s.action.to_dict() if s.action else None,
                "observation_digest": s.observation.digest() if s.observation else None,
            }
            for s in steps
        ],
    }
    if proactive:
        record["recalled"] = recalled or []
    else:
        record["answer"] = answer if answer is not None else ""
    return record
