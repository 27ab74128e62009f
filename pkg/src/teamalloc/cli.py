"""Command-line front end.

Subcommands::

    teamalloc run <job.json> [--variant collab-mt|coop-mt|coop-st]
                  [--cost duration|distance] [--seed N] [--trace OUT]
                  [--gantt OUT] [--log OUT] [--reject WORKER:ACTION[:TIMES]]
                  [--kernel auto|numba|python] [--jitter J] [--frequency HZ]
    teamalloc bench --topology series|parallel --actions A[..B[..STEP]]
                  --agents N[..M[..STEP]] [--variant V] [--reps R]
                  [--kernel auto|numba|python|both] [--seed N] [--json]
    teamalloc serve <job.json> [--port P] [--host H] [--log-dir DIR]
    teamalloc replay <run.log> [--json]

Every subcommand prints a machine-readable JSON summary on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import BenchmarkSpec, format_table, run_benchmark
from .gateways import AnswerPolicy
from .job import JobValidationError, load_job
from .runtime import replay_log
from .sim import export_gantt, export_trace, run_sim


def _parse_range(text: str) -> list[int]:
    parts = text.split("..")
    if len(parts) == 1:
        return [int(p) for p in text.split(",")]
    start, stop = int(parts[0]), int(parts[1])
    step = int(parts[2]) if len(parts) > 2 else 1
    return list(range(start, stop + 1, step))


def _parse_reject(specs: list[str], delay: float) -> dict[str, AnswerPolicy]:
    policies: dict[str, AnswerPolicy] = {}
    for spec in specs:
        fields = spec.split(":")
        if len(fields) < 2:
            raise SystemExit(f"--reject expects WORKER:ACTION[:TIMES], got {spec!r}")
        worker, action = fields[0], fields[1]
        times = int(fields[2]) if len(fields) > 2 else 1
        policy = policies.setdefault(
            worker, AnswerPolicy(reject=set(), decision_delay=delay))
        policy.reject.add(action)
        policy.reject_times = max(policy.reject_times, times)
    return policies


def cmd_run(args) -> int:
    job = load_job(args.job)
    if args.cost:
        job.cost_metric = args.cost
    policies = _parse_reject(args.reject or [], args.decision_delay)
    result = run_sim(job, variant=args.variant, seed=args.seed,
                     policies=policies, kernel=args.kernel,
                     frequency=args.frequency, duration_jitter=args.jitter,
                     log_path=Path(args.log) if args.log else None)
    if args.trace:
        export_trace(result.trace, args.trace)
    if args.gantt:
        export_gantt(result.trace, args.gantt)
    summary = {
        "job": job.name, "variant": result.state.variant,
        "verdict": result.verdict, "reason": result.reason,
        "makespan": round(result.makespan, 3),
        "actions": len(job.actions),
        "completed": sum(1 for info in result.state.actions.values()
                         if info["status"] == "completed"),
        "rejections": len(result.rejections),
        "ticks": result.ticks,
        "compute_seconds": round(result.compute_seconds, 4),
    }
    print(json.dumps(summary))
    return 0 if result.ok else 1


def cmd_bench(args) -> int:
    spec = BenchmarkSpec(topology=args.topology,
                         action_counts=_parse_range(args.actions),
                         agent_counts=_parse_range(args.agents),
                         variant=args.variant, repetitions=args.reps,
                         seed=args.seed, kernel=args.kernel)
    rows = run_benchmark(spec)
    if args.json:
        for row in rows:
            print(json.dumps(row.as_dict()))
    else:
        print(format_table(rows))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    job = load_job(args.job)
    app = create_app(job, log_dir=Path(args.log_dir) if args.log_dir else None)
    print(json.dumps({"serving": job.name, "host": args.host,
                      "port": args.port}), flush=True)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_replay(args) -> int:
    state = replay_log(args.log)
    snap = state.snapshot()
    if args.json:
        print(json.dumps(snap))
    else:
        summary = {"run_id": snap["run_id"], "job": snap["job"],
                   "variant": snap["variant"], "verdict": snap["verdict"],
                   "makespan": snap["makespan"],
                   "actions": len(snap["actions"]),
                   "trace_entries": len(snap["trace"]),
                   "rejections": len(snap["rejections"])}
        print(json.dumps(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teamalloc",
        description="Task planning and dynamic role allocation for mixed "
                    "human-robot teams")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a job and report the trace")
    p_run.add_argument("job")
    p_run.add_argument("--variant", choices=["collab-mt", "coop-mt", "coop-st"],
                       default=None)
    p_run.add_argument("--cost", choices=["duration", "distance"], default=None)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--trace", default=None)
    p_run.add_argument("--gantt", default=None)
    p_run.add_argument("--log", default=None, help="write the event log here")
    p_run.add_argument("--reject", action="append", default=None,
                       metavar="WORKER:ACTION[:TIMES]",
                       help="scripted rejection policy (repeatable)")
    p_run.add_argument("--decision-delay", type=float, default=0.0,
                       help="seconds a scripted worker takes to answer an offer")
    p_run.add_argument("--kernel", choices=["auto", "numba", "python"],
                       default="auto")
    p_run.add_argument("--jitter", type=float, default=0.0,
                       help="multiplicative duration jitter amplitude")
    p_run.add_argument("--frequency", type=float, default=100.0)
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="allocation compute-time benchmark")
    p_bench.add_argument("--topology", choices=["series", "parallel"],
                         required=True)
    p_bench.add_argument("--actions", required=True,
                         help="count, comma list, or A..B[..STEP]")
    p_bench.add_argument("--agents", required=True,
                         help="count, comma list, or N..M[..STEP]")
    p_bench.add_argument("--variant",
                         choices=["collab-mt", "coop-mt", "coop-st"],
                         default="collab-mt")
    p_bench.add_argument("--reps", type=int, default=10)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--kernel",
                         choices=["auto", "numba", "python", "both"],
                         default="auto")
    p_bench.add_argument("--json", action="store_true",
                         help="one JSON object per configuration")
    p_bench.set_defaults(func=cmd_bench)

    p_serve = sub.add_parser("serve", help="run the negotiation service")
    p_serve.add_argument("job")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--log-dir", default=None)
    p_serve.set_defaults(func=cmd_serve)

    p_replay = sub.add_parser("replay", help="rebuild run state from a log")
    p_replay.add_argument("log")
    p_replay.add_argument("--json", action="store_true",
                          help="print the full reconstructed snapshot")
    p_replay.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except JobValidationError as exc:
        print(str(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
