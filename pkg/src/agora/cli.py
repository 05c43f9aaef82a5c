"""Command-line entry points: run, decide, eval, verify-log, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PatternConfig, baseline_config, load_config
from .decisions import decide_patterns
from .errors import AgoraError
from .evaluator import evaluate, load_suite, report_table, report_to_dict
from .events import read_jsonl, to_jsonable, verify_log
from .runtime import assemble


def _load_config(path: str | None) -> PatternConfig:
    if path is None:
        return baseline_config()
    return load_config(path)


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    overrides = {}
    if args.corpus:
        overrides.update(corpus_path=args.corpus, rag_enabled=True)
    if args.detectors:
        overrides.update(detectors_path=args.detectors,
                         goal_creator="proactive")
    if overrides:
        import dataclasses
        config = dataclasses.replace(config, **overrides)
    runtime = assemble(config)
    if args.state:
        runtime.state_dir = Path(args.state)
        runtime.state_dir.mkdir(parents=True, exist_ok=True)
    result = runtime.run(args.goal, args.seed)
    out = {
        "run_id": result.run_id,
        "status": result.status,
        "final_answer": result.final_answer,
        "steps": {sid: text for sid, text in result.step_results.items()},
        "event_range": list(result.event_range),
        "usage": to_jsonable(result.usage),
        "error": result.error,
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0 if result.status == "complete" else 1


def cmd_decide(args: argparse.Namespace) -> int:
    requirements = {tag.strip() for tag in args.require.split(",")
                    if tag.strip()}
    config, report = decide_patterns(requirements)
    print(json.dumps({"config": config.to_dict(), "report": report},
                     indent=2, sort_keys=True))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    suite = load_suite(args.suite)
    report = evaluate(config, suite)
    if args.report:
        Path(args.report).write_text(
            json.dumps(report_to_dict(report), indent=2, sort_keys=True)
            + "\n", encoding="utf-8")
    print(report_table(report))
    return 0 if report.pass_rate == 1.0 else 1


def _roster_and_log(args):
    from .cooperation import load_roster
    from .events import EventLog

    roster = load_roster(args.roster)
    return roster, EventLog()


def cmd_vote(args: argparse.Namespace) -> int:
    from .cooperation import run_vote

    roster, log = _roster_and_log(args)
    candidates = [c.strip() for c in args.candidates.split(",") if c.strip()]
    result = run_vote(args.question, candidates, roster, args.method,
                      event_log=log, seed=args.seed)
    print(json.dumps({
        "winner": result.winner,
        "tied": result.tied,
        "tally": {c: str(v) for c, v in sorted(result.tally.items())},
        "abstained": result.abstained,
        "events": len(log),
    }, indent=2, sort_keys=True))
    return 0


def cmd_workflow(args: argparse.Namespace) -> int:
    from .cooperation import run_role_workflow
    from .goals import create_goal_passive

    roster, log = _roster_and_log(args)
    goal = create_goal_passive(args.goal, None, 0)
    result = run_role_workflow(goal, roster, event_log=log, seed=args.seed)
    print(json.dumps({
        "plan_id": result.plan_id,
        "assignments": result.assignments,
        "spawned_agents": result.spawned_agents,
        "step_results": result.step_results,
        "events": len(log),
    }, indent=2, sort_keys=True))
    return 0


def cmd_debate(args: argparse.Namespace) -> int:
    from .cooperation import run_debate

    roster, log = _roster_and_log(args)
    transcript = run_debate(args.question, roster, args.max_rounds,
                            event_log=log, seed=args.seed)
    print(json.dumps({
        "terminated_by": transcript.terminated_by,
        "consensus": transcript.consensus,
        "rounds": [[[agent, text] for agent, text in round_statements]
                   for round_statements in transcript.rounds],
        "events": len(log),
    }, indent=2, sort_keys=True))
    return 0


def cmd_verify_log(args: argparse.Namespace) -> int:
    records = read_jsonl(args.log)
    bad_seq = verify_log(records)
    if bad_seq is None:
        print(json.dumps({"ok": True, "records": len(records)}))
        return 0
    print(json.dumps({"ok": False, "first_bad_seq": bad_seq}))
    return 1


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import make_app

    app = make_app(_load_config(args.config), args.state)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agora",
        description="Agent pattern orchestration over a scripted backend")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one goal end to end")
    p_run.add_argument("--config", help="pattern config JSON")
    p_run.add_argument("--goal", required=True)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--state", help="state directory for durable runs")
    p_run.add_argument("--corpus", help="JSON-lines corpus to retrieve from")
    p_run.add_argument("--detectors",
                       help="JSON-lines detector event fixture")
    p_run.set_defaults(func=cmd_run)

    p_vote = sub.add_parser("vote", help="hold a vote across a roster")
    p_vote.add_argument("--roster", required=True)
    p_vote.add_argument("--question", required=True)
    p_vote.add_argument("--candidates", required=True,
                        help="comma-separated choice ids")
    p_vote.add_argument("--method", default="head_count",
                        choices=["head_count", "weighted", "average_score"])
    p_vote.add_argument("--seed", type=int, default=0)
    p_vote.set_defaults(func=cmd_vote)

    p_workflow = sub.add_parser("workflow",
                                help="run a role-based workflow")
    p_workflow.add_argument("--roster", required=True)
    p_workflow.add_argument("--goal", required=True)
    p_workflow.add_argument("--seed", type=int, default=0)
    p_workflow.set_defaults(func=cmd_workflow)

    p_debate = sub.add_parser("debate", help="debate a question")
    p_debate.add_argument("--roster", required=True)
    p_debate.add_argument("--question", required=True)
    p_debate.add_argument("--max-rounds", type=int, default=3)
    p_debate.add_argument("--seed", type=int, default=0)
    p_debate.set_defaults(func=cmd_debate)

    p_decide = sub.add_parser("decide",
                              help="map quality requirements to a config")
    p_decide.add_argument("--require", required=True,
                          help="comma-separated requirement tags")
    p_decide.set_defaults(func=cmd_decide)

    p_eval = sub.add_parser("eval", help="run an evaluation suite")
    p_eval.add_argument("--suite", required=True)
    p_eval.add_argument("--config", help="pattern config JSON")
    p_eval.add_argument("--report", help="write the JSON report here")
    p_eval.set_defaults(func=cmd_eval)

    p_verify = sub.add_parser("verify-log",
                              help="check an event log hash chain")
    p_verify.add_argument("log")
    p_verify.set_defaults(func=cmd_verify_log)

    p_serve = sub.add_parser("serve", help="start the HTTP API")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--config", help="pattern config JSON")
    p_serve.add_argument("--state", help="state directory")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AgoraError as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
