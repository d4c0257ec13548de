"""ProactiveMemBench construction pipeline and evaluation metrics.

Six steps build a suite: a fixed persona (authored by hand), 60 memory units
across five trigger types, pairwise association scoring, graph-aware session
allocation, 20-turn dialogue generation with planted units, and question
generation with exactly three ground-truth candidates each. Evaluation
reports Recall@5 and Precision per trigger type and overall, with a
deterministic exact-match judge as the CI default and model judges as
drop-in replacements.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import (
    CoverageError,
    InfeasibleAllocationError,
    InsufficientDataError,
    JudgeFormatError,
    ValidationError,
)
from .llm import LanguageModelClient, LMRequest, extract_json
from .textutil import canonical_json, norm, ols_slope, parse_timestamp

TRIGGER_TYPES = ("temporal", "entity", "emotional", "behavioral_pattern", "multi_hop")

JSON_TYPE = {
    "temporal": "temporal trigger",
    "entity": "entity trigger",
    "emotional": "emotional trigger",
    "behavioral_pattern": "behavioral pattern trigger",
    "multi_hop": "multi-hop trigger",
}
TYPE_FROM_JSON = {v: k for k, v in JSON_TYPE.items()}

ID_PREFIX = {
    "temporal": "time",
    "entity": "entity",
    "emotional": "emo",
    "behavioral_pattern": "behav",
    "multi_hop": "multi",
}

TRIGGER_DESCRIPTIONS = {
    "temporal": "Things the user does at specific times/cycles",
    "entity": "User's comparative evaluations, associations, or bindings with entities/people",
    "emotional": "Bindings between specific emotions and user behaviors",
    "behavioral_pattern": "Accompanying habits when the user performs certain actions",
    "multi_hop": "Unit chains requiring 2-3 hops of reasoning through intermediate entities",
}

SCORE_DIMENSIONS = (
    "entity_overlap",
    "semantic_relevance",
    "association_reasonability",
    "conversation_coherence",
)
SCORE_WEIGHTS = {
    "entity_overlap": 0.2,
    "semantic_relevance": 0.25,
    "association_reasonability": 0.35,
    "conversation_coherence": 0.2,
}

UNITS_PER_TYPE = 12
N_SESSIONS = 20
SESSION_MIN, SESSION_MAX = 3, 4
TURNS_PER_SESSION = 20
QUESTIONS_PER_TYPE = 20
DIFFICULTY_SPLIT = {"easy": 6, "medium": 8, "hard": 6}
HIGH_ASSOCIATION = 3.5
SCORING_BATCH = 10
MAX_RETRIEVED = 5

DEFAULT_TOPICS = ("music", "cooking", "travel", "fitness", "film")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass
class MemoryUnit:
    id: str
    trigger_type: str
    natural_expression: str
    involved_entities: list[str]
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"id": self.id, "type": JSON_TYPE[self.trigger_type]}
        out.update(self.extra)
        out["natural_expression"] = self.natural_expression
        out["involved_entities"] = self.involved_entities
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "MemoryUnit":
        json_type = raw.get("type", "")
        if json_type not in TYPE_FROM_JSON:
            raise ValidationError(f"unknown unit type {json_type!r}")
        extra = {
            k: v
            for k, v in raw.items()
            if k not in ("id", "type", "natural_expression", "involved_entities")
        }
        unit = cls(
            id=raw["id"],
            trigger_type=TYPE_FROM_JSON[json_type],
            natural_expression=raw["natural_expression"],
            involved_entities=list(raw["involved_entities"]),
            extra=extra,
        )
        validate_unit(unit)
        return unit


def validate_unit(unit: MemoryUnit) -> None:
    if unit.trigger_type not in TRIGGER_TYPES:
        raise ValidationError(f"unknown trigger type {unit.trigger_type!r}")
    prefix = ID_PREFIX[unit.trigger_type] + "_"
    if not unit.id.startswith(prefix):
        raise ValidationError(
            f"unit id {unit.id!r} does not carry the {unit.trigger_type} prefix {prefix!r}"
        )
    if not unit.involved_entities:
        raise ValidationError(f"unit {unit.id} has no involved entities")
    if not unit.natural_expression.strip():
        raise ValidationError(f"unit {unit.id} has an empty natural expression")


@dataclass
class AssociationEdge:
    a: str
    b: str
    scores: dict[str, int]
    shared_entities: list[str] = field(default_factory=list)
    association_path: str = ""

    def __post_init__(self):
        if self.a == self.b:
            raise ValidationError(f"unit {self.a!r} paired with itself")
        for dim in SCORE_DIMENSIONS:
            score = self.scores.get(dim)
            if not isinstance(score, int) or not (1 <= score <= 5):
                raise ValidationError(
                    f"edge ({self.a}, {self.b}): score {dim}={score!r} outside 1-5"
                )

    @property
    def overall(self) -> float:
        return sum(SCORE_WEIGHTS[dim] * self.scores[dim] for dim in SCORE_DIMENSIONS)

    def to_dict(self) -> dict:
        return {
            "pair_a_id": self.a,
            "pair_b_id": self.b,
            "shared_entities": self.shared_entities,
            "scores": dict(self.scores),
            "association_path": self.association_path,
            "overall": round(self.overall, 4),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AssociationEdge":
        return cls(
            a=raw["pair_a_id"],
            b=raw["pair_b_id"],
            scores={dim: int(raw["scores"][dim]) for dim in SCORE_DIMENSIONS},
            shared_entities=list(raw.get("shared_entities", [])),
            association_path=raw.get("association_path", ""),
        )


@dataclass
class BenchQuestion:
    id: str
    trigger_type: str
    question: str
    trigger_memory_unit: str
    candidate_set: list[dict]
    difficulty: str
    source_units: list[str]
    reasoning: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "trigger_type": JSON_TYPE[self.trigger_type],
            "question": self.question,
            "trigger_memory_unit": self.trigger_memory_unit,
            "candidate_set": self.candidate_set,
            "difficulty": self.difficulty,
            "source_units": self.source_units,
            "reasoning": self.reasoning,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchQuestion":
        json_type = raw["trigger_type"]
        if json_type not in TYPE_FROM_JSON:
            raise ValidationError(f"unknown trigger type {json_type!r}")
        return cls(
            id=raw["id"],
            trigger_type=TYPE_FROM_JSON[json_type],
            question=raw["question"],
            trigger_memory_unit=raw.get("trigger_memory_unit", ""),
            candidate_set=list(raw["candidate_set"]),
            difficulty=raw["difficulty"],
            source_units=list(raw.get("source_units", [])),
            reasoning=raw.get("reasoning", ""),
        )


# ---------------------------------------------------------------------------
# Prompts
# ---------------------------------------------------------------------------

UNIT_SYSTEM = (
    "You are a data construction expert. Please generate memory units strictly "
    "based on the given user persona. Output a JSON array directly."
)

TYPE_INSTRUCTIONS = {
    "temporal": (
        "Temporal trigger = a {topic}-related activity the user performs at a "
        "specific/periodic time.\n"
        "Requirements:\n"
        "(1) Must be consistent with the persona's daily_routines; extend with more details.\n"
        "(2) Diversify time patterns: daily, specific weekday, monthly, seasonal, holidays.\n"
        "(3) Activities must be specific: name people, works, and concrete content."
    ),
    "entity": (
        "Entity trigger = a memory unit binding a {topic} entity to people, "
        "places, or evaluations.\n"
        "Requirements: entities and people must be consistent with the persona."
    ),
    "emotional": (
        "Emotional trigger = a memory unit linking emotions to {topic} behaviors, "
        "covering both directions (emotion to behavior and behavior to emotion)."
    ),
    "behavioral_pattern": (
        "Behavioral pattern trigger = a memory unit capturing habitual "
        "co-occurrences of {topic} activities and companion behaviors."
    ),
    "multi_hop": (
        "Multi-hop trigger = an inference chain (3-4 nodes) built by connecting "
        "entities from previously generated memory units, requiring at least 2 "
        "reasoning hops."
    ),
}

UNIT_FORMAT_EXAMPLE = (
    '[{"id": "time_01", "type": "temporal trigger", "time_pattern": '
    '"every Monday evening at 8pm", "activity": "practice Bach WTC", '
    '"natural_expression": "I practice Bach\'s WTC every Monday evening.", '
    '"involved_entities": ["Bach", "WTC", "piano"]}]'
)

SCORING_SYSTEM = (
    "You are a semantic association evaluation expert. Please assess the "
    "association strength between given memory unit combinations. Output a "
    "JSON array directly."
)

SCORING_RUBRIC = """\
For each combination, score along 4 dimensions (1-5 scale):
(1) Entity overlap: Do the two memory units share named entities?
(2) Semantic relevance: How close are they topically?
(3) Association reasonability (highest weight): Would recalling B upon hearing A feel natural?
(4) Conversational coherence: Would transitioning from A to B in dialogue be smooth?

Scoring rubric:
5 = Strong association (mentioning A should almost certainly trigger B)
4 = Moderate-strong (associating B from A is natural)
3 = Moderate (some connection but not obligatory)
2 = Weak (indirect link; proactive mention may feel abrupt)
1 = No association (should not proactively recall)

Output format:
[{"pair_a_id": "...", "pair_b_id": "...", "shared_entities": [...], \
"scores": {"entity_overlap": 1, "semantic_relevance": 1, \
"association_reasonability": 1, "conversation_coherence": 1}, \
"association_path": "..."}]
"""

DIALOGUE_SYSTEM = (
    "You are a dialogue generation expert. Generate natural, realistic "
    "multi-turn conversations based on the given session information and user "
    "persona. Output one JSON object directly."
)

DIALOGUE_RULES = """\
Rules:
(1) Dialogue content must not contradict the user persona.
(2) People, places, and experiences must be consistent with the persona.
(3) The user's language should sound like a real person.

Requirements:
(1) Total 20 alternating turns (user 10 turns + assistant 10 turns), user first.
(2) Each memory unit must be naturally mentioned at least once.
(3) Plantings should be dispersed (not clustered in consecutive turns).
(4) Use colloquial, authentic language.
(5) Memory unit information is revealed by the user (not elicited by the assistant).
(6) Each turn must carry an ISO 8601 timestamp.

Output format:
{"session_id": 1, "turns": [{"turn_id": 1, "role": "user", "content": "...", \
"timestamp": "2024-03-01T20:15:00", "planted_units": ["time_01"], \
"mentioned_entities": ["piano", "Monday"]}], \
"unit_coverage": {"time_01": {"planted": true, "turns": [1, 3]}}}
"""

QUESTION_SYSTEM = (
    "You are a benchmark design expert. You need to generate evaluation "
    "questions for the proactive memory association capability. Output a JSON "
    "array directly."
)

QUESTION_RULES = """\
Background:
Proactive memory association means: when a user mentions concept A in the \
current turn, the model should, based on memorized conversation history, \
proactively recall related concepts B, C, D that the user is not currently \
mentioning but has previously shared.

Core design logic:
The user says A in the current turn; the model should recall B, C, D from \
history, things the user is not saying now but mentioned before.

Anti-pattern (DO NOT do this):
- User says "I listen to BBC Radio 3 every morning" -> candidate_set = ["BBC Radio 3"]
- Wrong! The user already said these; the model doesn't need to recall them.

Correct pattern:
- User says "I heard a Debussy piece on the radio this morning"
- candidate_set: ["Moonlight (piece user is practicing)", "Teacher Zhang \
(guides tone)", "Wednesday practice day (also plays Debussy)"]
- These are things the user did not say, but the model should proactively \
surface from prior sessions.

Question structure:
(1) question: A short user utterance containing only 1-2 trigger memory units.
(2) trigger_memory_unit: The core trigger word in the question.
(3) candidate_set: 3 memory units the model should recall from history (MUST \
be absent from the question).
(4) difficulty: easy (1-hop) / medium (2-hop) / hard (cross-session multi-hop).
(5) reasoning: Full association chain.

Difficulty distribution: easy: 6, medium: 8, hard: 6.

Output format:
[{"id": "q_001", "trigger_type": "temporal trigger", "question": "...", \
"trigger_memory_unit": "...", "candidate_set": [{"memory_unit": "A", \
"reason": "path..."}, {"memory_unit": "B", "reason": "path..."}, \
{"memory_unit": "C", "reason": "path..."}], "difficulty": "easy", \
"source_units": ["time_01"], "reasoning": "..."}]
"""

RECALL_JUDGE_SYSTEM = (
    "You are an evaluation expert responsible for determining whether the "
    "content retrieved by the model from the memory store matches the "
    "ground-truth answers. Your task is: for each memory unit in the "
    "ground-truth answers, determine whether the model's retrieval results "
    "contain semantically identical or highly similar content. Output must be "
    "in JSON format only, with no extra text."
)

RECALL_JUDGE_USER = """\
User message: {question}

Memory unit list from ground-truth (candidate_set):
{candidate_units}

Memory unit list from model retrieval results:
{retrieved_units}

Please determine: for each memory unit in the ground-truth, whether there is \
a semantically identical or highly similar match in the model's retrieval \
results.
Note: Exact wording does not need to match, but the core memory unit must be \
the same.

Please output in the following JSON format:
{{"matches": [{{"candidate_unit": "...", "matched": true, \
"matched_retrieved_unit": "... or null"}}]}}
"""

PRECISION_JUDGE_SYSTEM = """\
You are a memory recall evaluation expert. Your task is: given a user message \
and the raw content actually retrieved by the agent from the memory store, \
score each "retrieved unit" output by the agent on a 0-5 quality scale.

Scoring criteria (integer, 0-5):
0: Fabrication - the memory unit has no basis in the retrieved content and is \
entirely made up; or the memory unit can be directly extracted from the user \
message;
1: Reasonable unit name - the memory unit sounds reasonable but has no clear \
support in the retrieved content;
2: Reasonable path - association evidence can be found in the retrieved \
content, and the association path is basically logical;
3: Matches trigger condition - the memory unit is supported by raw content, \
and the association path explicitly matches the trigger type \
(temporal/entity/emotional/behavioral pattern/multi-hop);
4: High quality - the memory unit highly aligns with the retrieved content, \
the path is clear and natural, and strongly relevant to the user's context;
5: Excellent quality - the memory unit is precise and compelling, the path is \
impeccable, and represents the most valuable memory association for the \
user's context.

Output must be in JSON format only, with no extra text.
"""

PRECISION_JUDGE_USER = """\
Trigger type: {trigger_type} ({desc})

User message: {question}

Raw content actually retrieved by the agent from the memory store:
{context_str}

List of retrieved memory units output by the agent:
{retrieved_str}

Please score each memory unit on the 0-5 scale and provide justification.

Please output in the following JSON format:
{{"judgments": [{{"memory_unit": "...", "score": 0, "reason": "..."}}], \
"overall_comment": "..."}}
"""


# ---------------------------------------------------------------------------
# Request builders
# ---------------------------------------------------------------------------

def unit_generation_request(
    persona: dict, topic: str, trigger_type: str, prior_units: list[MemoryUnit]
) -> LMRequest:
    body = (
        "[Global Constraint: User Persona]\n"
        + canonical_json(persona)
        + "\n\n[Previously Generated Memory Units]\n"
        + canonical_json([u.to_dict() for u in prior_units])
        + "\n\n[Task]\n"
        + f"Based on the user persona, generate {UNITS_PER_TYPE} "
        + f'"{JSON_TYPE[trigger_type]}" memory units.\n'
        + TYPE_INSTRUCTIONS[trigger_type].format(topic=topic)
        + "\n\nOutput format (JSON array):\n"
        + UNIT_FORMAT_EXAMPLE
    )
    return LMRequest.build(UNIT_SYSTEM, [("user", body)])


def scoring_request(batch: list[tuple[MemoryUnit, MemoryUnit]]) -> LMRequest:
    payload = [
        {"pair_a": a.to_dict(), "pair_b": b.to_dict()}
        for a, b in batch
    ]
    body = (
        f"Please evaluate the following {len(batch)} memory unit combinations.\n\n"
        + SCORING_RUBRIC
        + "\nMemory units to evaluate:\n"
        + canonical_json(payload)
    )
    return LMRequest.build(SCORING_SYSTEM, [("user", body)])


def dialogue_request(
    persona: dict,
    session_id: int,
    units: list[MemoryUnit],
    time_range: str,
    theme: str,
    note: str = "",
) -> LMRequest:
    body = (
        "[User Persona]\n"
        + canonical_json(persona)
        + "\n\n"
        + DIALOGUE_RULES
        + f"\nGenerate {TURNS_PER_SESSION} turns for Session {session_id}.\n\n"
        + "Session info:\n"
        + f"- Time: {time_range}\n"
        + f"- Theme: {theme}\n\n"
        + "Memory units to plant:\n"
        + canonical_json([u.to_dict() for u in units])
    )
    if note:
        body += "\n\nNote: " + note
    return LMRequest.build(DIALOGUE_SYSTEM, [("user", body)])


def question_request(
    persona: dict,
    trigger_type: str,
    type_units: list[MemoryUnit],
    cross_assocs: list[dict],
    entity_pool: list[str],
    count: int = QUESTIONS_PER_TYPE,
    note: str = "",
) -> LMRequest:
    body = (
        "[User Persona]\n"
        + canonical_json(persona)
        + "\n\n"
        + QUESTION_RULES
        + f'\nGenerate {count} proactive evaluation questions based on '
        + f'"{JSON_TYPE[trigger_type]}".\n\n'
        + "Memory units of this type:\n"
        + canonical_json([u.to_dict() for u in type_units])
        + "\n\nRelevant cross-type associations:\n"
        + canonical_json(cross_assocs)
        + "\n\nAvailable entity pool:\n"
        + canonical_json(entity_pool)
    )
    if note:
        body += "\n\nNote: " + note
    return LMRequest.build(QUESTION_SYSTEM, [("user", body)])


# ---------------------------------------------------------------------------
# Step 2: memory units
# ---------------------------------------------------------------------------

def _complete_json(llm: LanguageModelClient, request: LMRequest, what: str) -> object:
    response = llm.complete(request)
    try:
        return extract_json(response.text)
    except ValueError as exc:
        raise ValidationError(f"unparseable {what} output: {exc}") from exc


def generate_units(
    persona: dict, topic: str, llm: LanguageModelClient
) -> list[MemoryUnit]:
    """12 units per trigger type, generated in the fixed type order with all
    previously generated units passed as contradiction-avoidance context."""
    units: list[MemoryUnit] = []
    for trigger_type in TRIGGER_TYPES:
        raw = _complete_json(
            llm, unit_generation_request(persona, topic, trigger_type, units),
            f"{trigger_type} unit generation",
        )
        if not isinstance(raw, list) or len(raw) != UNITS_PER_TYPE:
            raise ValidationError(
                f"{trigger_type} unit generation must yield exactly {UNITS_PER_TYPE} units"
            )
        for rec in raw:
            unit = MemoryUnit.from_dict(rec)
            if unit.trigger_type != trigger_type:
                raise ValidationError(
                    f"unit {unit.id} has type {unit.trigger_type}, expected {trigger_type}"
                )
            units.append(unit)
    ids = [u.id for u in units]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate unit ids in generated set")
    return units


# ---------------------------------------------------------------------------
# Step 3: association scoring
# ---------------------------------------------------------------------------

def score_associations(
    units: list[MemoryUnit], llm: LanguageModelClient, batch_size: int = SCORING_BATCH
) -> list[AssociationEdge]:
    if len(units) < 2:
        raise ValidationError("need at least two units to score associations")
    ids = [u.id for u in units]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate unit ids")
    ordered = sorted(units, key=lambda u: u.id)
    pairs = list(itertools.combinations(ordered, 2))
    edges: list[AssociationEdge] = []
    for start in range(0, len(pairs), batch_size):
        batch = pairs[start : start + batch_size]
        raw = _complete_json(llm, scoring_request(batch), "association scoring")
        if not isinstance(raw, list):
            raise ValidationError("association scoring output is not a JSON array")
        got = {(rec.get("pair_a_id"), rec.get("pair_b_id")): rec for rec in raw}
        for a, b in batch:
            rec = got.get((a.id, b.id)) or got.get((b.id, a.id))
            if rec is None:
                raise ValidationError(f"batch missing score for pair ({a.id}, {b.id})")
            edges.append(AssociationEdge.from_dict({**rec, "pair_a_id": a.id, "pair_b_id": b.id}))
    return edges


# ---------------------------------------------------------------------------
# Step 4: session allocation
# ---------------------------------------------------------------------------

def _greedy_clique(seed: str, conflicts: dict[str, set[str]]) -> list[str]:
    clique = [seed]
    for candidate in sorted(conflicts.get(seed, ())):
        if all(candidate in conflicts.get(member, set()) for member in clique):
            clique.append(candidate)
    return clique


def allocate_sessions(
    units: list[MemoryUnit],
    edges: list[AssociationEdge],
    n_sessions: int = N_SESSIONS,
    min_size: int = SESSION_MIN,
    max_size: int = SESSION_MAX,
) -> list[list[str]]:
    """Assign every unit to one session so that highly associated pairs
    (overall >= 3.5) land in different sessions and sizes stay in [min, max].

    Deterministic: greedy by descending conflict degree (ties by id) with
    smallest-session-first placement, completed by bounded backtracking.
    """
    ids = [u.id for u in units]
    if not (n_sessions * min_size <= len(ids) <= n_sessions * max_size):
        raise ValidationError(
            f"{len(ids)} units cannot fill {n_sessions} sessions of {min_size}-{max_size}"
        )
    conflicts: dict[str, set[str]] = {uid: set() for uid in ids}
    for edge in edges:
        if edge.overall >= HIGH_ASSOCIATION:
            if edge.a not in conflicts or edge.b not in conflicts:
                raise ValidationError(f"edge references unknown unit ({edge.a}, {edge.b})")
            conflicts[edge.a].add(edge.b)
            conflicts[edge.b].add(edge.a)

    order = sorted(ids, key=lambda uid: (-len(conflicts[uid]), uid))
    sessions: list[list[str]] = [[] for _ in range(n_sessions)]
    members: list[set[str]] = [set() for _ in range(n_sessions)]
    nodes = [0]
    node_cap = 500_000

    def deficit() -> int:
        return sum(max(0, min_size - len(s)) for s in sessions)

    def place(pos: int) -> bool:
        nodes[0] += 1
        if nodes[0] > node_cap:
            return False
        if pos == len(order):
            return all(min_size <= len(s) <= max_size for s in sessions)
        uid = order[pos]
        remaining = len(order) - pos
        candidates = [
            i
            for i in range(n_sessions)
            if len(sessions[i]) < max_size and not (conflicts[uid] & members[i])
        ]
        candidates.sort(key=lambda i: (len(sessions[i]), i))
        for i in candidates:
            sessions[i].append(uid)
            members[i].add(uid)
            if deficit() <= remaining - 1 and place(pos + 1):
                return True
            sessions[i].pop()
            members[i].discard(uid)
        return False

    if not place(0):
        stuck = max(order, key=lambda uid: (len(conflicts[uid]), uid))
        clique = _greedy_clique(stuck, conflicts)
        raise InfeasibleAllocationError(
            f"cannot separate {len(clique)} mutually conflicting units", clique=clique
        )

    for edge in edges:
        if edge.overall >= HIGH_ASSOCIATION:
            for session in sessions:
                if edge.a in session and edge.b in session:
                    raise InfeasibleAllocationError(
                        f"allocation left conflicting pair ({edge.a}, {edge.b}) together",
                        clique=[edge.a, edge.b],
                    )
    return sessions


# ---------------------------------------------------------------------------
# Step 5: dialogue generation
# ---------------------------------------------------------------------------

def verify_planting(
    turns: list[dict], units: list[MemoryUnit]
) -> dict[str, list[int]]:
    """Independent lexical coverage check: a unit counts as planted in a user
    turn when its natural expression is a normalized substring of the turn, or
    every involved entity appears in it."""
    coverage: dict[str, list[int]] = {u.id: [] for u in units}
    for turn in turns:
        if turn.get("role") != "user":
            continue
        content = norm(str(turn.get("content", "")))
        for unit in units:
            expr = norm(unit.natural_expression)
            entities = [norm(e) for e in unit.involved_entities]
            if (expr and expr in content) or (
                entities and all(e in content for e in entities)
            ):
                coverage[unit.id].append(int(turn["turn_id"]))
    return coverage


def _validate_dialogue(raw: dict, session_id: int, units: list[MemoryUnit]) -> list[str]:
    """Returns a list of problems (empty when the dialogue is acceptable)."""
    problems = []
    turns = raw.get("turns")
    if not isinstance(turns, list) or len(turns) != TURNS_PER_SESSION:
        return [f"session {session_id}: expected {TURNS_PER_SESSION} turns"]
    last_ts = None
    for i, turn in enumerate(turns):
        expected_role = "user" if i % 2 == 0 else "assistant"
        if turn.get("role") != expected_role:
            problems.append(f"turn {i + 1}: expected role {expected_role}")
        try:
            ts = parse_timestamp(str(turn.get("timestamp", "")))
            if last_ts is not None and ts < last_ts:
                problems.append(f"turn {i + 1}: timestamp decreases")
            last_ts = ts
        except ValueError:
            problems.append(f"turn {i + 1}: invalid timestamp")
    coverage = verify_planting(turns, units)
    unplanted = sorted(uid for uid, hits in coverage.items() if not hits)
    if unplanted:
        problems.append("unplanted units: " + ", ".join(unplanted))
    if len(units) >= 3:
        first_hits = sorted(hits[0] for hits in coverage.values() if hits)
        for x, y in zip(first_hits, first_hits[1:]):
            if y - x < 4:  # same or adjacent user turn
                problems.append(f"plantings clustered at turns {x} and {y}")
                break
    return problems


def generate_dialogues(
    sessions: list[list[str]],
    units: list[MemoryUnit],
    persona: dict,
    llm: LanguageModelClient,
) -> list[dict]:
    """One 20-turn dialogue per session with every assigned unit planted and
    dispersed; a failed validation triggers exactly one regeneration."""
    by_id = {u.id: u for u in units}
    dialogues = []
    for idx, assigned_ids in enumerate(sessions, start=1):
        assigned = [by_id[uid] for uid in assigned_ids]
        time_range = f"2024-03-{idx:02d}"
        theme = ", ".join(sorted({JSON_TYPE[u.trigger_type] for u in assigned}))
        request = dialogue_request(persona, idx, assigned, time_range, theme)
        raw = _complete_json(llm, request, f"dialogue for session {idx}")
        problems = _validate_dialogue(raw, idx, assigned) if isinstance(raw, dict) else ["not an object"]
        if problems:
            retry = dialogue_request(
                persona, idx, assigned, time_range, theme,
                note="Previous attempt failed validation: " + "; ".join(problems),
            )
            raw = _complete_json(llm, retry, f"dialogue for session {idx} (retry)")
            problems = _validate_dialogue(raw, idx, assigned) if isinstance(raw, dict) else ["not an object"]
            if problems:
                unplanted = [
                    p.removeprefix("unplanted units: ").split(", ")
                    for p in problems
                    if p.startswith("unplanted units")
                ]
                raise CoverageError(
                    f"session {idx} dialogue failed after one regeneration: "
                    + "; ".join(problems),
                    unplanted=unplanted[0] if unplanted else [],
                )
        raw["session_id"] = idx
        raw["unit_coverage"] = {
            uid: {"planted": bool(hits), "turns": hits}
            for uid, hits in verify_planting(raw["turns"], assigned).items()
        }
        dialogues.append(raw)
    return dialogues


# ---------------------------------------------------------------------------
# Step 6: question generation
# ---------------------------------------------------------------------------

def _planted_expressions(dialogues: list[dict]) -> str:
    return norm(
        " ".join(
            str(turn.get("content", ""))
            for d in dialogues
            for turn in d.get("turns", [])
            if turn.get("role") == "user"
        )
    )


def _validate_questions(
    raw: list,
    trigger_type: str,
    units_by_id: dict[str, MemoryUnit],
    dialogue_text: str,
    expected_count: int = QUESTIONS_PER_TYPE,
) -> tuple[list[BenchQuestion], list[str]]:
    problems = []
    questions = []
    if not isinstance(raw, list) or len(raw) != expected_count:
        return [], [f"expected {expected_count} questions"]
    histogram = {"easy": 0, "medium": 0, "hard": 0}
    for rec in raw:
        try:
            question = BenchQuestion.from_dict(rec)
        except (KeyError, ValidationError) as exc:
            problems.append(f"bad question record: {exc}")
            continue
        if question.trigger_type != trigger_type:
            problems.append(f"{question.id}: wrong trigger type")
        if question.difficulty not in histogram:
            problems.append(f"{question.id}: unknown difficulty {question.difficulty!r}")
            continue
        histogram[question.difficulty] += 1
        if len(question.candidate_set) != 3:
            problems.append(f"{question.id}: candidate_set must have exactly 3 entries")
        q_norm = norm(question.question)
        for candidate in question.candidate_set:
            unit_text = norm(str(candidate.get("memory_unit", "")))
            if not unit_text:
                problems.append(f"{question.id}: empty candidate")
            elif unit_text in q_norm:
                problems.append(f"{question.id}: candidate leaked into the question")
            elif unit_text not in dialogue_text and not any(
                unit_text in norm(u.natural_expression) or norm(u.natural_expression) in unit_text
                for u in units_by_id.values()
            ):
                problems.append(f"{question.id}: candidate absent from dialogue history")
        for uid in question.source_units:
            if uid not in units_by_id:
                problems.append(f"{question.id}: unknown source unit {uid}")
        questions.append(question)
    if expected_count == QUESTIONS_PER_TYPE and histogram != DIFFICULTY_SPLIT:
        problems.append(f"difficulty histogram {histogram} != {DIFFICULTY_SPLIT}")
    return questions, problems


def generate_questions(
    units: list[MemoryUnit],
    edges: list[AssociationEdge],
    dialogues: list[dict],
    persona: dict,
    llm: LanguageModelClient,
) -> list[BenchQuestion]:
    """20 questions per trigger type (6/8/6 difficulty split), anti-pattern
    checked mechanically, candidates verified against the dialogue history."""
    units_by_id = {u.id: u for u in units}
    dialogue_text = _planted_expressions(dialogues)
    entity_pool = sorted({e for u in units for e in u.involved_entities})
    out: list[BenchQuestion] = []
    for trigger_type in TRIGGER_TYPES:
        type_units = [u for u in units if u.trigger_type == trigger_type]
        prefix = ID_PREFIX[trigger_type] + "_"
        cross = [
            e.to_dict()
            for e in edges
            if e.overall >= HIGH_ASSOCIATION
            and (e.a.startswith(prefix)) != (e.b.startswith(prefix))
        ]
        request = question_request(persona, trigger_type, type_units, cross, entity_pool)
        raw = _complete_json(llm, request, f"{trigger_type} questions")
        questions, problems = _validate_questions(raw, trigger_type, units_by_id, dialogue_text)
        if problems:
            retry = question_request(
                persona, trigger_type, type_units, cross, entity_pool,
                note="Previous attempt failed validation: " + "; ".join(problems),
            )
            raw = _complete_json(llm, retry, f"{trigger_type} questions (retry)")
            questions, problems = _validate_questions(
                raw, trigger_type, units_by_id, dialogue_text
            )
            if problems:
                raise ValidationError(
                    f"{trigger_type} question generation failed after one retry: "
                    + "; ".join(problems)
                )
        out.extend(questions)
    return out


# ---------------------------------------------------------------------------
# Suite build and IO
# ---------------------------------------------------------------------------

@dataclass
class BenchSuite:
    topic: str
    persona: dict
    units: list[MemoryUnit]
    edges: list[AssociationEdge]
    sessions: list[list[str]]
    dialogues: list[dict]
    questions: list[BenchQuestion]


def build_suite(
    topic: str, persona: dict, llm: LanguageModelClient, out_dir: str | Path | None = None
) -> BenchSuite:
    units = generate_units(persona, topic, llm)
    edges = score_associations(units, llm)
    sessions = allocate_sessions(units, edges)
    dialogues = generate_dialogues(sessions, units, persona, llm)
    questions = generate_questions(units, edges, dialogues, persona, llm)
    suite = BenchSuite(topic, persona, units, edges, sessions, dialogues, questions)
    if out_dir is not None:
        save_suite(suite, out_dir)
    return suite


def save_suite(suite: BenchSuite, out_dir: str | Path) -> Path:
    root = Path(out_dir) / suite.topic
    (root / "dialogues").mkdir(parents=True, exist_ok=True)

    def dump(name: str, payload: object) -> None:
        (root / name).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )

    dump("persona.json", suite.persona)
    dump("units.json", [u.to_dict() for u in suite.units])
    dump("edges.json", [e.to_dict() for e in suite.edges])
    dump("sessions.json", [
        {"session_id": i + 1, "units": session} for i, session in enumerate(suite.sessions)
    ])
    for dialogue in suite.dialogues:
        sid = dialogue["session_id"]
        (root / "dialogues" / f"session_{sid:02d}.json").write_text(
            json.dumps(dialogue, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    dump("questions.json", [q.to_dict() for q in suite.questions])
    return root


def load_suite(topic_dir: str | Path) -> BenchSuite:
    root = Path(topic_dir)
    read = lambda name: json.loads((root / name).read_text(encoding="utf-8"))
    dialogues = [
        json.loads(p.read_text(encoding="utf-8"))
        for p in sorted((root / "dialogues").glob("session_*.json"))
    ]
    return BenchSuite(
        topic=root.name,
        persona=read("persona.json"),
        units=[MemoryUnit.from_dict(r) for r in read("units.json")],
        edges=[AssociationEdge.from_dict(r) for r in read("edges.json")],
        sessions=[rec["units"] for rec in read("sessions.json")],
        dialogues=dialogues,
        questions=[BenchQuestion.from_dict(r) for r in read("questions.json")],
    )


# ---------------------------------------------------------------------------
# Judges
# ---------------------------------------------------------------------------

class RecallJudge(Protocol):
    def judge_recall(
        self, question: str, candidates: list[str], retrieved: list[str]
    ) -> list[dict]: ...


class PrecisionJudge(Protocol):
    def judge_precision(
        self,
        trigger_type: str,
        question: str,
        context_str: str,
        retrieved: list[dict],
    ) -> list[dict]: ...


class ExactMatchJudge:
    """Deterministic default: case-folded string equality with alias expansion."""

    def __init__(self, aliases: Mapping[str, Iterable[str]] | None = None):
        self.aliases = {
            norm(k): {norm(v) for v in vals} for k, vals in (aliases or {}).items()
        }

    def _accepted(self, candidate: str) -> set[str]:
        key = norm(candidate)
        return {key} | self.aliases.get(key, set())

    def judge_recall(
        self, question: str, candidates: list[str], retrieved: list[str]
    ) -> list[dict]:
        retrieved_norm = {norm(r): r for r in retrieved}
        out = []
        for candidate in candidates:
            accepted = self._accepted(candidate)
            hit = next((raw for n, raw in retrieved_norm.items() if n in accepted), None)
            out.append(
                {
                    "candidate_unit": candidate,
                    "matched": hit is not None,
                    "matched_retrieved_unit": hit,
                }
            )
        return out


class RulePrecisionJudge:
    """Deterministic scoring: 0 for fabrications and question echoes, 3 for
    supported units with an association-path reason, 2 for bare support."""

    def judge_precision(self, trigger_type, question, context_str, retrieved):
        context = norm(context_str)
        q_norm = norm(question)
        out = []
        for item in retrieved:
            unit = str(item.get("memory_unit", item)) if isinstance(item, dict) else str(item)
            reason = str(item.get("reason", "")) if isinstance(item, dict) else ""
            unit_norm = norm(unit)
            if not unit_norm or unit_norm not in context:
                score, why = 0, "no basis in the retrieved content"
            elif unit_norm in q_norm:
                score, why = 0, "directly extracted from the user message"
            elif norm(reason).startswith("association path"):
                score, why = 3, "supported with a typed association path"
            else:
                score, why = 2, "supported by the retrieved content"
            out.append({"memory_unit": unit, "score": score, "reason": why})
        return out


class ModelRecallJudge:
    def __init__(self, llm: LanguageModelClient):
        self.llm = llm

    def judge_recall(self, question, candidates, retrieved):
        body = RECALL_JUDGE_USER.format(
            question=question,
            candidate_units=canonical_json(candidates),
            retrieved_units=canonical_json(retrieved),
        )
        response = self.llm.complete(
            LMRequest.build(RECALL_JUDGE_SYSTEM, [("user", body)])
        )
        try:
            parsed = extract_json(response.text)
        except ValueError as exc:
            raise JudgeFormatError(f"unparseable recall judgment: {exc}") from exc
        matches = parsed.get("matches") if isinstance(parsed, dict) else None
        if not isinstance(matches, list):
            raise JudgeFormatError("recall judgment missing 'matches' array")
        return matches


class ModelPrecisionJudge:
    def __init__(self, llm: LanguageModelClient):
        self.llm = llm

    def judge_precision(self, trigger_type, question, context_str, retrieved):
        body = PRECISION_JUDGE_USER.format(
            trigger_type=JSON_TYPE.get(trigger_type, trigger_type),
            desc=TRIGGER_DESCRIPTIONS.get(trigger_type, ""),
            question=question,
            context_str=context_str,
            retrieved_str=canonical_json(retrieved),
        )
        response = self.llm.complete(
            LMRequest.build(PRECISION_JUDGE_SYSTEM, [("user", body)])
        )
        try:
            parsed = extract_json(response.text)
        except ValueError as exc:
            raise JudgeFormatError(f"unparseable precision judgment: {exc}") from exc
        judgments = parsed.get("judgments") if isinstance(parsed, dict) else None
        if not isinstance(judgments, list):
            raise JudgeFormatError("precision judgment missing 'judgments' array")
        return judgments


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass
class RecallResult:
    question_id: str
    trigger_type: str
    matched: int
    total: int
    matches: list[dict]
    truncated: bool = False

    @property
    def recall(self) -> float:
        return self.matched / self.total if self.total else 0.0


@dataclass
class PrecisionResult:
    question_id: str
    trigger_type: str
    scores: list[int]
    judgments: list[dict]


def _retrieved_texts(retrieved: Sequence) -> list[str]:
    texts = []
    for item in retrieved:
        if isinstance(item, dict):
            texts.append(str(item.get("memory_unit", "")))
        else:
            texts.append(str(item))
    return texts


def eval_recall(
    instance: BenchQuestion, retrieved: Sequence, judge: RecallJudge
) -> RecallResult:
    """Per-candidate matched flags; instance recall = matched / 3."""
    texts = _retrieved_texts(retrieved)
    truncated = len(texts) > MAX_RETRIEVED
    texts = texts[:MAX_RETRIEVED]
    candidates = [str(c.get("memory_unit", "")) for c in instance.candidate_set]
    matches = judge.judge_recall(instance.question, candidates, texts)
    verdicts = {norm(str(m.get("candidate_unit", ""))): m for m in matches}
    for candidate in candidates:
        if norm(candidate) not in verdicts:
            raise JudgeFormatError(f"judge output missing verdict for {candidate!r}")
        if not isinstance(verdicts[norm(candidate)].get("matched"), bool):
            raise JudgeFormatError(f"non-boolean verdict for {candidate!r}")
    matched = sum(1 for c in candidates if verdicts[norm(c)]["matched"])
    return RecallResult(
        question_id=instance.id,
        trigger_type=instance.trigger_type,
        matched=matched,
        total=len(candidates),
        matches=matches,
        truncated=truncated,
    )


def eval_precision(
    instance: BenchQuestion,
    retrieved: Sequence,
    trace_context: str,
    judge: PrecisionJudge,
) -> PrecisionResult:
    """0-5 score per retrieved unit; empty retrieval yields no scores."""
    items = [
        item if isinstance(item, dict) else {"memory_unit": str(item), "reason": ""}
        for item in list(retrieved)[:MAX_RETRIEVED]
    ]
    if not items:
        return PrecisionResult(instance.id, instance.trigger_type, [], [])
    judgments = judge.judge_precision(
        instance.trigger_type, instance.question, trace_context, items
    )
    if len(judgments) != len(items):
        raise JudgeFormatError(
            f"expected {len(items)} judgments, got {len(judgments)}"
        )
    scores = []
    for judgment in judgments:
        score = judgment.get("score")
        if not isinstance(score, int) or not (0 <= score <= 5):
            raise JudgeFormatError(f"score {score!r} outside 0-5")
        scores.append(score)
    return PrecisionResult(instance.id, instance.trigger_type, scores, judgments)


def aggregate_recall(results: list[RecallResult]) -> dict:
    """Macro-averaged Recall@5, overall and per trigger type."""
    def mean(items: list[RecallResult]) -> float | None:
        return sum(r.recall for r in items) / len(items) if items else None

    per_type = {
        t: mean([r for r in results if r.trigger_type == t]) for t in TRIGGER_TYPES
    }
    return {"overall": mean(results), "per_type": per_type}


def aggregate_precision(results: list[PrecisionResult]) -> dict:
    """mean(score)/5*100 over every retrieved unit; empty retrievals are
    excluded from the mean rather than counted as zero."""
    def agg(items: list[PrecisionResult]) -> float | None:
        scores = [s for r in items for s in r.scores]
        return (sum(scores) / len(scores)) / 5 * 100 if scores else None

    per_type = {
        t: agg([r for r in results if r.trigger_type == t]) for t in TRIGGER_TYPES
    }
    return {"overall": agg(results), "per_type": per_type}


def eval_report(
    recalls: list[RecallResult], precisions: list[PrecisionResult]
) -> dict:
    return {
        "recall_at_5": aggregate_recall(recalls),
        "precision": aggregate_precision(precisions),
        "instances": len(recalls),
    }


def report_table(report: dict) -> str:
    """Plain-text table, one row per trigger type plus overall.

    Recall is reported as a percentage; precision already lives on [0, 100].
    """
    def fmt_recall(value: float | None) -> str:
        return f"{value * 100:6.2f}" if value is not None else "   n/a"

    def fmt_precision(value: float | None) -> str:
        return f"{value:6.2f}" if value is not None else "   n/a"

    recall = report["recall_at_5"]
    precision = report["precision"]
    rows = [f"{'trigger type':<22} {'Recall@5':>9} {'Precision':>10}"]
    for t in TRIGGER_TYPES:
        rows.append(
            f"{t:<22} {fmt_recall(recall['per_type'].get(t)):>9}"
            f" {fmt_precision(precision['per_type'].get(t)):>10}"
        )
    rows.append(
        f"{'overall':<22} {fmt_recall(recall['overall']):>9}"
        f" {fmt_precision(precision['overall']):>10}"
    )
    return "\n".join(rows)


# ---------------------------------------------------------------------------
# Growth slope
# ---------------------------------------------------------------------------

@dataclass
class GrowthTrend:
    grouping: str
    group_size: int
    group_means: list[float]
    slope: float


def growth_slope(
    creation_stats: Mapping[int, float] | Sequence[float],
    grouping: tuple[str, int] = ("fixed_window", 5),
) -> GrowthTrend:
    """Group per-session page-creation counts and fit an OLS slope over the
    group index. Groupings: ('fixed_window', w) or ('percentile', p)."""
    if isinstance(creation_stats, Mapping):
        values = [float(creation_stats[k]) for k in sorted(creation_stats)]
    else:
        values = [float(v) for v in creation_stats]
    mode, param = grouping
    if param <= 0:
        raise ValidationError("grouping parameter must be positive")
    if mode == "fixed_window":
        groups = [values[i : i + param] for i in range(0, len(values), param)]
    elif mode == "percentile":
        k = max(1, round(100 / param))
        bounds = [round(j * len(values) / k) for j in range(k + 1)]
        groups = [values[bounds[j] : bounds[j + 1]] for j in range(k)]
        groups = [g for g in groups if g]
    else:
        raise ValidationError(f"unknown grouping mode {mode!r}")
    if len(groups) < 2:
        raise InsufficientDataError("growth_slope needs at least two groups of data")
    means = [sum(g) / len(g) for g in groups]
    return GrowthTrend(
        grouping=mode, group_size=param, group_means=means, slope=ols_slope(means)
    )
