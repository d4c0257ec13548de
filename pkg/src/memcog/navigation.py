"""Budgeted multi-step navigation over a store snapshot.

Every action returns the requested content plus structural context (available
links, sibling pages, dimensional position). Successful actions consume one
budget step; failed lookups consume nothing. Sessions are read-only against
the snapshot; page reads are buffered and flushed to the live store at the end.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import (
    BudgetError,
    DanglingLinkError,
    InvalidLinkError,
    NotFoundError,
    ValidationError,
)
from .links import LinkGraph, endpoint_page
from .store import AccessEntry, Clock, MemoryStore, now_iso
from .wiki import index_text, page_text
from .textutil import digest

DEFAULT_BUDGET = 6

ACTION_KINDS = ("list_dimensions", "browse_dimension", "read_page", "follow_link")

_FULL_PATH_LINK_RE = re.compile(r"\[\[(user/assistant/[^\[\]]+)\]\]")


@dataclass(frozen=True)
class NavigationAction:
    kind: str
    argument: str | None = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValidationError(f"unknown navigation action {self.kind!r}")
        if self.kind == "list_dimensions" and self.argument is not None:
            raise ValidationError("list_dimensions takes no argument")
        if self.kind != "list_dimensions" and not self.argument:
            raise ValidationError(f"{self.kind} requires an argument")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "arg": self.argument}

    @classmethod
    def from_dict(cls, raw: dict) -> "NavigationAction":
        return cls(kind=raw["kind"], argument=raw.get("arg"))


@dataclass
class DimensionalPosition:
    dimension: str
    page_index: int | None
    page_count: int

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "page_index": self.page_index,
            "page_count": self.page_count,
        }


@dataclass
class StructuralContext:
    available_links: list[dict] = field(default_factory=list)
    sibling_pages: list[tuple[str, str]] = field(default_factory=list)
    dimensional_position: DimensionalPosition | None = None

    def to_dict(self) -> dict:
        return {
            "available_links": self.available_links,
            "sibling_pages": [list(pair) for pair in self.sibling_pages],
            "dimensional_position": (
                self.dimensional_position.to_dict() if self.dimensional_position else None
            ),
        }


@dataclass
class Observation:
    content: str
    structural_context: StructuralContext
    step_index: int

    def to_dict(self) -> dict:
        return {
            "content": self.content,
            "structural_context": self.structural_context.to_dict(),
            "step_index": self.step_index,
        }

    def digest(self) -> str:
        return digest(self.to_dict())


def visible_link_targets(observation: Observation) -> list[str]:
    """Page paths reachable by follow_link from this observation.

    The union of overlay-link endpoints in the structural context and full-path
    wiki links embedded in the content; sorted for determinism.
    """
    targets: set[str] = set()
    for record in observation.structural_context.available_links:
        targets.add(endpoint_page(record["source"]))
        targets.add(endpoint_page(record["target"]))
    for match in _FULL_PATH_LINK_RE.finditer(observation.content):
        targets.add(match.group(1))
    return sorted(targets)


class NavigationSession:
    """One budgeted action sequence over an immutable snapshot."""

    def __init__(
        self,
        snapshot: MemoryStore,
        budget: int = DEFAULT_BUDGET,
        show_links: bool = True,
        clock: Clock | None = None,
    ):
        if budget < 1:
            raise ValidationError("budget must be >= 1")
        self.store = snapshot
        self.graph: LinkGraph = snapshot.links
        self.budget = budget
        self.show_links = show_links
        self.clock = clock or now_iso
        self.trace: list[tuple[NavigationAction, Observation]] = []
        self.pending_access: dict[str, AccessEntry] = {}

    @property
    def exhausted(self) -> bool:
        return len(self.trace) >= self.budget

    @property
    def steps_used(self) -> int:
        return len(self.trace)

    def last_observation(self) -> Observation | None:
        return self.trace[-1][1] if self.trace else None

    # -- internals ----------------------------------------------------------

    def _guard(self) -> None:
        if self.exhausted:
            raise BudgetError(f"session budget of {self.budget} steps exhausted")

    def _commit(self, action: NavigationAction, content: str, context: StructuralContext) -> Observation:
        observation = Observation(
            content=content,
            structural_context=context,
            step_index=len(self.trace) + 1,
        )
        self.trace.append((action, observation))
        return observation

    def _links_context(self, path: str) -> list[dict]:
        if not self.show_links:
            return []
        out = []
        for link, direction in self.graph.links_of(path):
            record = link.to_record()
            record["direction"] = direction
            out.append(record)
        return out

    def _render_page(self, action: NavigationAction, path: str) -> Observation:
        located = None
        for dim in self.store.dimensions:
            actives = dim.active_pages()
            for idx, page in enumerate(actives):
                if page.path == path:
                    located = (dim, idx, len(actives), page)
                    break
            if located:
                break
        if located is None:
            raise NotFoundError(f"unknown or archived page {path!r}")
        dim, idx, count, page = located
        context = StructuralContext(
            available_links=self._links_context(path),
            sibling_pages=[(p.title, p.summary) for p in dim.active_pages() if p.path != path],
            dimensional_position=DimensionalPosition(dim.name, idx, count),
        )
        self._guard()
        entry = self.pending_access.setdefault(path, AccessEntry())
        entry.read_count += 1
        stamp = self.clock()
        if entry.last_access is None or stamp >= entry.last_access:
            entry.last_access = stamp
        return self._commit(action, page_text(page), context)

    # -- the four operations --------------------------------------------------

    def list_dimensions(self) -> Observation:
        self._guard()
        content = "\n\n".join(
            f"### {dim.name}\n- {dim.description}" for dim in self.store.dimensions
        )
        context = StructuralContext(
            dimensional_position=None,
        )
        return self._commit(NavigationAction("list_dimensions"), content, context)

    def browse_dimension(self, name: str) -> Observation:
        dim = self.store.dimension(name)
        if dim is None:
            raise NotFoundError(f"unknown dimension {name!r}")
        self._guard()
        actives = dim.active_pages()
        context = StructuralContext(
            sibling_pages=[(p.title, p.summary) for p in actives],
            dimensional_position=DimensionalPosition(dim.name, None, len(actives)),
        )
        return self._commit(
            NavigationAction("browse_dimension", name), index_text(dim), context
        )

    def read_page(self, path: str) -> Observation:
        return self._render_page(NavigationAction("read_page", path), path)

    def follow_link(self, link_ref: str) -> Observation:
        if not self.show_links:
            raise InvalidLinkError("links are not visible in this session")
        target = link_ref.strip()
        if target.startswith("[[") and target.endswith("]]"):
            target = target[2:-2]
        last = self.last_observation()
        visible = visible_link_targets(last) if last else []
        if target not in visible:
            raise InvalidLinkError(
                f"link {target!r} is not visible in the current observation"
            )
        try:
            return self._render_page(NavigationAction("follow_link", target), target)
        except NotFoundError:
            raise DanglingLinkError(f"link target {target!r} does not resolve") from None

    def apply(self, action: NavigationAction) -> Observation:
        if action.kind == "list_dimensions":
            return self.list_dimensions()
        if action.kind == "browse_dimension":
            return self.browse_dimension(action.argument)
        if action.kind == "read_page":
            return self.read_page(action.argument)
        return self.follow_link(action.argument)

    def flush_access(self, live_store: MemoryStore) -> None:
        """Merge buffered reads into the live store (count addition, max timestamp)."""
        from .store import merge_access

        merge_access(live_store, self.pending_access)
        self.pending_access = {}


# ---------------------------------------------------------------------------
# Trace records (JSON lines)
# ---------------------------------------------------------------------------

def trace_records(session: NavigationSession) -> list[dict]:
    records = []
    for step, (action, observation) in enumerate(session.trace, start=1):
        records.append(
            {
                "step": step,
                "action": action.to_dict(),
                "observation_digest": observation.digest(),
                "links_seen": visible_link_targets(observation),
            }
        )
    return records


def dump_trace(records: Iterable[dict]) -> str:
    return "".join(json.dumps(rec, ensure_ascii=False) + "\n" for rec in records)


def load_trace(text: str) -> list[dict]:
    records = []
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"trace line {i}: invalid JSON ({exc})") from None
    return records


@dataclass
class ReplayResult:
    steps: int
    mismatches: list[dict]
    answer: str | None
    session: NavigationSession

    @property
    def ok(self) -> bool:
        return not self.mismatches


def replay_trace(
    snapshot: MemoryStore,
    records: list[dict],
    budget: int = DEFAULT_BUDGET,
    show_links: bool = True,
) -> ReplayResult:
    """Re-execute a recorded action sequence and verify observation digests."""
    session = NavigationSession(snapshot, budget=budget, show_links=show_links)
    mismatches = []
    answer = None
    for record in records:
        if "answer" in record and "action" not in record:
            answer = record["answer"]
            continue
        action = NavigationAction.from_dict(record["action"])
        observation = session.apply(action)
        expected = record.get("observation_digest")
        if expected and observation.digest() != expected:
            mismatches.append(
                {
                    "step": record.get("step", observation.step_index),
                    "expected": expected,
                    "actual": observation.digest(),
                }
            )
    return ReplayResult(
        steps=session.steps_used, mismatches=mismatches, answer=answer, session=session
    )
