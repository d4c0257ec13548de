"""Operator command-line front-end.

Exit codes: 0 success, 1 validation failure, 2 client/fixture failure,
64 usage error. Machine-readable JSON goes to stdout under --json; human
tables otherwise.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import bench as benchkit
from .agent import ProtocolConfig, run_proactive, run_reactive, run_record
from .errors import (
    ClientError,
    IngestionError,
    MemCogError,
    StructuredOutputError,
    AgentRunError,
)
from .ingestion import GrowthPolicy, build_store, incremental_update, load_turns, manage_growth
from .llm import ENV_API_KEY, ENV_ENDPOINT, FixtureClient, LanguageModelClient, LiveClient
from .navigation import (
    NavigationAction,
    NavigationSession,
    dump_trace,
    load_trace,
    replay_trace,
    trace_records,
    visible_link_targets,
)
from .store import create_store, lint_store
from .wiki import read_store, write_store

USAGE_EXIT = 64
CLIENT_EXIT = 2
VALIDATION_EXIT = 1


@dataclass
class EngineConfig:
    store_root: str = "."
    budget: int = 6
    proactive_enabled: bool = True
    graph_overlay_enabled: bool = True
    client_mode: str = "fixtures"
    fixture_dir: str | None = None
    link_threshold: float = 0.5
    match_threshold: int = 2
    archive_after_days: int = 30
    compress_over: int = 600

    def validate_client(self) -> None:
        if self.client_mode == "fixtures" and not self.fixture_dir:
            raise ClientError("fixtures mode requires --fixtures <dir>")
        if self.client_mode == "live" and not (
            os.environ.get(ENV_ENDPOINT) and os.environ.get(ENV_API_KEY)
        ):
            raise ClientError(
                f"live mode requires {ENV_ENDPOINT} and {ENV_API_KEY} in the environment"
            )

    def make_client(self) -> LanguageModelClient:
        self.validate_client()
        if self.client_mode == "fixtures":
            return FixtureClient(self.fixture_dir)
        return LiveClient()

    def protocol(self) -> ProtocolConfig:
        return ProtocolConfig(
            proactive_enabled=self.proactive_enabled,
            graph_overlay_enabled=self.graph_overlay_enabled,
            budget=self.budget,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _emit(args, payload: dict, human: str | None = None) -> None:
    if args.json:
        print(json.dumps(payload, ensure_ascii=False, indent=2))
    else:
        print(human if human is not None else json.dumps(payload, ensure_ascii=False, indent=2))


def _config_from(args) -> EngineConfig:
    return EngineConfig(
        store_root=getattr(args, "store", "."),
        budget=getattr(args, "budget", 6),
        proactive_enabled=not getattr(args, "no_proactive", False),
        graph_overlay_enabled=not getattr(args, "no_graph_overlay", False),
        client_mode=getattr(args, "client", "fixtures"),
        fixture_dir=getattr(args, "fixtures", None),
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_init(args) -> int:
    root = Path(args.store)
    if (root / ".memcog" / "meta.json").exists() or (root / "user" / "assistant").exists():
        raise MemCogError(f"store already initialized at {root}")
    store = create_store(args.owner)
    write_store(store, root)
    _emit(args, {"store": str(root), "owner": args.owner}, f"initialized empty store at {root}")
    return 0


def cmd_ingest(args) -> int:
    config = _config_from(args)
    client = config.make_client()
    turns = load_turns(json.loads(Path(args.turns).read_text(encoding="utf-8")))
    root = Path(args.store)
    owner = args.owner
    if (root / ".memcog" / "meta.json").exists():
        existing = read_store(root)
        if existing.page_count() > 0:
            raise MemCogError(
                f"store at {root} already holds pages; use `memcog update` for new turns"
            )
        owner = existing.owner_id
    store = build_store(turns, client, owner_id=owner)
    write_store(store, root)
    _emit(
        args,
        {
            "pages": store.page_count(),
            "dimensions": len(store.dimensions),
            "links": len(store.links),
        },
        f"built store with {store.page_count()} pages in {len(store.dimensions)} dimensions",
    )
    return 0


def cmd_update(args) -> int:
    config = _config_from(args)
    client = config.make_client()
    store = read_store(args.store)
    turns = load_turns(json.loads(Path(args.turns).read_text(encoding="utf-8")))
    plan = incremental_update(store, turns, client)
    write_store(store, args.store)
    _emit(
        args,
        {
            "section_updates": len(plan.section_updates),
            "new_pages": len(plan.new_pages),
            "new_links": len(plan.new_links),
            "contradictions": len(plan.contradictions),
        },
        f"applied update: {len(plan.section_updates)} section updates, "
        f"{len(plan.new_pages)} new pages, {len(plan.contradictions)} contradictions",
    )
    return 0


def cmd_nav(args) -> int:
    store = read_store(args.store)
    show_links = not args.no_graph_overlay
    if args.replay:
        records = load_trace(Path(args.replay).read_text(encoding="utf-8"))
        result = replay_trace(store.snapshot(), records, budget=args.budget, show_links=show_links)
        payload = {
            "steps": result.steps,
            "mismatches": result.mismatches,
            "answer": result.answer,
            "ok": result.ok,
        }
        human = (
            f"replayed {result.steps} steps, "
            + ("all digests match" if result.ok else f"{len(result.mismatches)} mismatches")
            + (f"\nfinal answer: {result.answer}" if result.answer is not None else "")
        )
        _emit(args, payload, human)
        return 0 if result.ok else 1
    session = NavigationSession(store.snapshot(), budget=args.budget, show_links=show_links)
    observations = []
    for spec in args.action or []:
        kind, _, arg = spec.partition(":")
        observation = session.apply(NavigationAction(kind, arg or None))
        observations.append(observation.to_dict())
    session.flush_access(store)
    write_store(store, args.store)
    _emit(
        args,
        {"observations": observations, "trace": trace_records(session)},
        "\n\n".join(o["content"] for o in observations),
    )
    return 0


def _write_agent_trace(path: str, steps, answer: str) -> None:
    records = []
    step_no = 0
    for step in steps:
        if step.observation is None or step.action is None:
            continue
        step_no += 1
        records.append(
            {
                "step": step_no,
                "action": step.action.to_dict(),
                "observation_digest": step.observation.digest(),
                "links_seen": visible_link_targets(step.observation),
            }
        )
    records.append({"answer": answer})
    Path(path).write_text(dump_trace(records), encoding="utf-8")


def cmd_agent_ask(args) -> int:
    config = _config_from(args)
    client = config.make_client()
    store = read_store(args.store)
    protocol = config.protocol()
    answer, steps = run_reactive(store, args.question, client, protocol)
    if args.trace_out:
        _write_agent_trace(args.trace_out, steps, answer)
    record = run_record(args.question, protocol, steps, answer=answer)
    _emit(args, record, f"answer: {answer}")
    return 0


def cmd_agent_proactive(args) -> int:
    config = _config_from(args)
    client = config.make_client()
    store = read_store(args.store)
    protocol = config.protocol()
    recalled, steps = run_proactive(store, args.utterance, client, protocol)
    record = run_record(args.utterance, protocol, steps, recalled=recalled, proactive=True)
    human = "\n".join(
        f"- {item['memory_unit']}: {item['reason']}" for item in recalled
    ) or "(nothing recalled)"
    _emit(args, record, human)
    return 0


def cmd_bench_build(args) -> int:
    config = _config_from(args)
    client = config.make_client()
    persona = json.loads(Path(args.persona).read_text(encoding="utf-8"))
    suite = benchkit.build_suite(args.topic, persona, client, out_dir=args.out)
    _emit(
        args,
        {
            "topic": suite.topic,
            "units": len(suite.units),
            "sessions": len(suite.sessions),
            "dialogues": len(suite.dialogues),
            "questions": len(suite.questions),
            "out": str(Path(args.out) / suite.topic),
        },
        f"built suite '{suite.topic}': {len(suite.units)} units, "
        f"{len(suite.sessions)} sessions, {len(suite.questions)} questions",
    )
    return 0


def cmd_bench_eval(args) -> int:
    suite = benchkit.load_suite(args.suite)
    results = json.loads(Path(args.results).read_text(encoding="utf-8"))
    by_qid = {q.id: q for q in suite.questions}
    if args.judge == "model":
        config = _config_from(args)
        client = config.make_client()
        recall_judge = benchkit.ModelRecallJudge(client)
        precision_judge = benchkit.ModelPrecisionJudge(client)
    else:
        recall_judge = benchkit.ExactMatchJudge()
        precision_judge = benchkit.RulePrecisionJudge()
    recalls, precisions = [], []
    for entry in results:
        question = by_qid.get(entry["question_id"])
        if question is None:
            raise MemCogError(f"results reference unknown question {entry['question_id']!r}")
        retrieved = entry.get("retrieved", [])
        recalls.append(benchkit.eval_recall(question, retrieved, recall_judge))
        precisions.append(
            benchkit.eval_precision(
                question, retrieved, entry.get("trace_context", ""), precision_judge
            )
        )
    report = benchkit.eval_report(recalls, precisions)
    _emit(args, report, benchkit.report_table(report))
    return 0


def cmd_stats_growth(args) -> int:
    if args.series:
        raw = json.loads(Path(args.series).read_text(encoding="utf-8"))
        series = raw if isinstance(raw, list) else {int(k): v for k, v in raw.items()}
    else:
        store = read_store(args.store)
        series = {int(k): v for k, v in store.creation_stats.items()}
    mode, _, param = args.grouping.partition(":")
    mode = {"fixed": "fixed_window", "fixed_window": "fixed_window",
            "pct": "percentile", "percentile": "percentile"}.get(mode, mode)
    trend = benchkit.growth_slope(series, (mode, int(param or 5)))
    payload = {
        "grouping": trend.grouping,
        "group_size": trend.group_size,
        "group_means": trend.group_means,
        "slope": trend.slope,
    }
    _emit(
        args,
        payload,
        f"{trend.grouping} groups: "
        + ", ".join(f"{m:.2f}" for m in trend.group_means)
        + f"\nslope: {trend.slope:+.4f}",
    )
    return 0


def cmd_lint(args) -> int:
    store = read_store(args.store)
    warnings = lint_store(store)
    _emit(
        args,
        {"warnings": warnings},
        "\n".join(warnings) if warnings else "no lint warnings",
    )
    return 0


def cmd_growth(args) -> int:
    config = _config_from(args)
    client = config.make_client() if args.client else None
    store = read_store(args.store)
    policy = GrowthPolicy(
        archive_after_days=args.archive_after, compress_over=args.compress_over
    )
    report = manage_growth(store, policy, llm=client)
    write_store(store, args.store)
    _emit(
        args,
        {"archived": report.archived, "compressed": [list(c) for c in report.compressed]},
        f"archived {len(report.archived)} pages, compressed {len(report.compressed)} sections",
    )
    return 0


def cmd_serve(args) -> int:
    from .service import EngineService, make_server

    config = _config_from(args)
    client = config.make_client() if args.client else None
    store = read_store(args.store)
    service = EngineService(
        store, store_root=args.store, llm=client, config=config.protocol()
    )
    server = make_server(service, host=args.host, port=args.port)
    print(f"serving on http://{args.host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(parser, client: bool = False):
    parser.add_argument("--store", default=".", help="store root directory")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    if client:
        parser.add_argument("--client", choices=("live", "fixtures"), default=None)
        parser.add_argument("--fixtures", help="fixture directory for the fixture client")


def build_parser() -> _Parser:
    parser = _Parser(prog="memcog", description="wiki-style agent memory engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create an empty store")
    _add_common(p)
    p.add_argument("--owner", required=True)
    p.set_defaults(fn=cmd_init)

    p = sub.add_parser("ingest", help="build a store from conversation history")
    _add_common(p, client=True)
    p.add_argument("--turns", required=True, help="JSON file of conversation turns")
    p.add_argument("--owner", default="user")
    p.set_defaults(fn=cmd_ingest, client_required=True)

    p = sub.add_parser("update", help="apply new turns incrementally")
    _add_common(p, client=True)
    p.add_argument("--turns", required=True)
    p.set_defaults(fn=cmd_update, client_required=True)

    p = sub.add_parser("nav", help="run or replay navigation actions")
    _add_common(p)
    p.add_argument("--replay", help="trace JSONL to replay and verify")
    p.add_argument(
        "--action",
        action="append",
        help="scripted action kind[:argument], repeatable",
    )
    p.add_argument("--budget", type=int, default=6)
    p.add_argument("--no-graph-overlay", action="store_true")
    p.set_defaults(fn=cmd_nav)

    agent = sub.add_parser("agent", help="agent runs over the store")
    agent_sub = agent.add_subparsers(dest="agent_command", required=True)

    p = agent_sub.add_parser("ask", help="answer an explicit question")
    _add_common(p, client=True)
    p.add_argument("--question", required=True)
    p.add_argument("--budget", type=int, default=6)
    p.add_argument("--no-graph-overlay", action="store_true")
    p.add_argument("--trace-out", help="write the navigation trace as JSONL")
    p.set_defaults(fn=cmd_agent_ask, client_required=True)

    p = agent_sub.add_parser("proactive", help="surface associated memories")
    _add_common(p, client=True)
    p.add_argument("--utterance", required=True)
    p.add_argument("--budget", type=int, default=6)
    p.add_argument("--no-graph-overlay", action="store_true")
    p.add_argument("--no-proactive", action="store_true")
    p.set_defaults(fn=cmd_agent_proactive, client_required=True)

    bench = sub.add_parser("bench", help="benchmark construction and evaluation")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True)

    p = bench_sub.add_parser("build", help="run the six-step suite pipeline")
    _add_common(p, client=True)
    p.add_argument("--topic", required=True)
    p.add_argument("--persona", required=True, help="persona JSON (pipeline step 1)")
    p.add_argument("--out", required=True, help="suite output directory")
    p.set_defaults(fn=cmd_bench_build, client_required=True)

    p = bench_sub.add_parser("eval", help="score retrieval results against a suite")
    _add_common(p, client=True)
    p.add_argument("--suite", required=True, help="suite topic directory")
    p.add_argument("--results", required=True, help="JSON results file")
    p.add_argument("--judge", choices=("exact", "model"), default="exact")
    p.set_defaults(fn=cmd_bench_eval)

    stats = sub.add_parser("stats", help="store statistics")
    stats_sub = stats.add_subparsers(dest="stats_command", required=True)

    p = stats_sub.add_parser("growth", help="new-pages-per-session trend")
    _add_common(p)
    p.add_argument("--series", help="JSON series file instead of store creation stats")
    p.add_argument("--grouping", default="fixed:5", help="fixed:<w> or pct:<p>")
    p.set_defaults(fn=cmd_stats_growth)

    p = sub.add_parser("lint", help="report non-fatal store issues")
    _add_common(p)
    p.set_defaults(fn=cmd_lint)

    p = sub.add_parser("growth", help="apply the archival/compression policy")
    _add_common(p, client=True)
    p.add_argument("--archive-after", type=int, default=30, help="days without reads")
    p.add_argument("--compress-over", type=int, default=600, help="detail length threshold")
    p.set_defaults(fn=cmd_growth)

    p = sub.add_parser("serve", help="run the local HTTP facade")
    _add_common(p, client=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--budget", type=int, default=6)
    p.add_argument("--no-graph-overlay", action="store_true")
    p.add_argument("--no-proactive", action="store_true")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    if getattr(args, "client_required", False) and not getattr(args, "client", None):
        sys.stderr.write("error: this command requires --client {live,fixtures}\n")
        return USAGE_EXIT
    try:
        return args.fn(args)
    except (ClientError, IngestionError, StructuredOutputError, AgentRunError) as exc:
        sys.stderr.write(f"client error: {exc}\n")
        return CLIENT_EXIT
    except MemCogError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return VALIDATION_EXIT


if __name__ == "__main__":
    raise SystemExit(main())
