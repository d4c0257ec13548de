"""Local HTTP facade over the engine for external agent frameworks.

Responses reuse the library's canonical JSON serialization byte-for-byte, so
anything built against the wire format also works against the library. Budget
state is server-held: sessions live on the server with a 10-minute idle
eviction, and external callers cannot overspend.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import unquote

from .agent import ProtocolConfig, run_proactive, run_reactive, run_record
from .errors import (
    BudgetError,
    ClientError,
    DanglingLinkError,
    InvalidLinkError,
    MemCogError,
    NotFoundError,
    ValidationError,
)
from .ingestion import incremental_update, load_turns
from .llm import LanguageModelClient
from .navigation import NavigationAction, NavigationSession
from .store import MemoryStore
from .textutil import canonical_json
from .wiki import write_store

SESSION_IDLE_SECONDS = 600.0


class _Session:
    def __init__(self, nav: NavigationSession):
        self.nav = nav
        self.lock = threading.Lock()
        self.last_used = time.monotonic()


class EngineService:
    """Holds the live store, server-side navigation sessions, and the single-writer lock."""

    def __init__(
        self,
        store: MemoryStore,
        store_root: str | None = None,
        llm: LanguageModelClient | None = None,
        config: ProtocolConfig | None = None,
        clock=None,
    ):
        self.store = store
        self.store_root = store_root
        self.llm = llm
        self.config = config or ProtocolConfig()
        self.clock = clock or time.monotonic
        self.sessions: dict[str, _Session] = {}
        self.sessions_lock = threading.Lock()
        self.write_lock = threading.Lock()

    # -- session registry -----------------------------------------------------

    def _evict_idle(self) -> None:
        now = self.clock()
        stale = [
            sid
            for sid, session in self.sessions.items()
            if now - session.last_used > SESSION_IDLE_SECONDS
        ]
        for sid in stale:
            del self.sessions[sid]

    def create_session(self, budget: int | None = None) -> tuple[str, NavigationSession]:
        nav = NavigationSession(
            self.store.snapshot(),
            budget=budget or self.config.budget,
            show_links=self.config.graph_overlay_enabled,
        )
        sid = uuid.uuid4().hex[:12]
        with self.sessions_lock:
            self._evict_idle()
            self.sessions[sid] = _Session(nav)
        return sid, nav

    def get_session(self, sid: str) -> _Session | None:
        with self.sessions_lock:
            self._evict_idle()
            session = self.sessions.get(sid)
            if session is not None:
                session.last_used = self.clock()
            return session


def _routes(service: EngineService):
    """Builds the route table: (method, matcher) -> handler(body, groups)."""

    def dimensions_list(_body, _groups):
        return 200, [
            {"name": d.name, "description": d.description}
            for d in service.store.dimensions
        ]

    def dimension_get(_body, groups):
        nav = NavigationSession(service.store.snapshot(),
                                show_links=service.config.graph_overlay_enabled)
        observation = nav.browse_dimension(unquote(groups[0]))
        return 200, observation.to_dict()

    def page_get(_body, groups):
        nav = NavigationSession(service.store.snapshot(),
                                show_links=service.config.graph_overlay_enabled)
        observation = nav.read_page(unquote(groups[0]))
        nav.flush_access(service.store)
        return 200, observation.to_dict()

    def session_create(body, _groups):
        budget = None
        if isinstance(body, dict) and "budget" in body:
            budget = int(body["budget"])
        sid, nav = service.create_session(budget)
        return 200, {"session_id": sid, "budget": nav.budget, "remaining": nav.budget}

    def session_action(body, groups):
        session = service.get_session(groups[0])
        if session is None:
            return 404, {"error": f"unknown session {groups[0]!r}"}
        if not isinstance(body, dict) or "kind" not in body:
            return 422, {"error": "action body must be {kind, arg}"}
        try:
            action = NavigationAction(kind=body["kind"], argument=body.get("arg"))
        except ValidationError as exc:
            return 422, {"error": str(exc)}
        with session.lock:
            try:
                observation = session.nav.apply(action)
            except BudgetError:
                return 409, {"error": "budget exhausted", "remaining": 0}
            except (InvalidLinkError, DanglingLinkError) as exc:
                return 422, {"error": str(exc)}
            except NotFoundError as exc:
                return 404, {"error": str(exc)}
            session.nav.flush_access(service.store)
            remaining = session.nav.budget - session.nav.steps_used
        payload = observation.to_dict()
        payload["remaining"] = remaining
        return 200, payload

    def agent_ask(body, _groups):
        if service.llm is None:
            return 503, {"error": "no language-model client configured"}
        question = (body or {}).get("question", "")
        if not question:
            return 422, {"error": "body must carry a question"}
        answer, steps = run_reactive(service.store, question, service.llm, service.config)
        return 200, run_record(question, service.config, steps, answer=answer)

    def agent_proactive(body, _groups):
        if not service.config.proactive_enabled:
            return 403, {"error": "proactive mode disabled"}
        if service.llm is None:
            return 503, {"error": "no language-model client configured"}
        utterance = (body or {}).get("utterance", "")
        if not utterance:
            return 422, {"error": "body must carry an utterance"}
        recalled, steps = run_proactive(
            service.store, utterance, service.llm, service.config
        )
        return 200, run_record(
            utterance, service.config, steps, recalled=recalled, proactive=True
        )

    def ingest_turns(body, _groups):
        if service.llm is None:
            return 503, {"error": "no language-model client configured"}
        if not service.write_lock.acquire(blocking=False):
            return 503, {"error": "another ingestion is in progress"}
        try:
            turns = load_turns(body)
            plan = incremental_update(service.store, turns, service.llm)
            if service.store_root:
                write_store(service.store, service.store_root)
            return 200, {
                "section_updates": len(plan.section_updates),
                "new_pages": len(plan.new_pages),
                "new_links": len(plan.new_links),
                "contradictions": len(plan.contradictions),
            }
        finally:
            service.write_lock.release()

    import re as _re

    return [
        ("GET", _re.compile(r"^/dimensions$"), dimensions_list),
        ("GET", _re.compile(r"^/dimensions/([^/]+)$"), dimension_get),
        ("GET", _re.compile(r"^/pages/(.+)$"), page_get),
        ("POST", _re.compile(r"^/sessions$"), session_create),
        ("POST", _re.compile(r"^/sessions/([^/]+)/actions$"), session_action),
        ("POST", _re.compile(r"^/agent/ask$"), agent_ask),
        ("POST", _re.compile(r"^/agent/proactive$"), agent_proactive),
        ("POST", _re.compile(r"^/ingest/turns$"), ingest_turns),
    ]


def make_server(service: EngineService, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    routes = _routes(service)

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet by default
            pass

        def _reply(self, status: int, payload: object) -> None:
            body = canonical_json(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _dispatch(self, method: str) -> None:
            body = None
            if method == "POST":
                length = int(self.headers.get("Content-Length", 0) or 0)
                raw = self.rfile.read(length) if length else b""
                if raw:
                    try:
                        body = json.loads(raw.decode("utf-8"))
                    except json.JSONDecodeError:
                        self._reply(422, {"error": "request body is not valid JSON"})
                        return
            for verb, pattern, handler in routes:
                if verb != method:
                    continue
                match = pattern.match(self.path)
                if match:
                    try:
                        status, payload = handler(body, match.groups())
                    except NotFoundError as exc:
                        status, payload = 404, {"error": str(exc)}
                    except ValidationError as exc:
                        status, payload = 422, {"error": str(exc)}
                    except ClientError as exc:
                        status, payload = 502, {"error": str(exc)}
                    except MemCogError as exc:
                        status, payload = 500, {"error": str(exc)}
                    self._reply(status, payload)
                    return
            self._reply(404, {"error": f"no route for {method} {self.path}"})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

    return ThreadingHTTPServer((host, port), Handler)


def serve(service: EngineService, host: str = "127.0.0.1", port: int = 8700) -> None:
    server = make_server(service, host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
