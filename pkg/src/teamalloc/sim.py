"""Discrete-event simulation of a team executing a job.

Durations are deterministic: an action takes exactly the assigned
candidate's cost (optionally perturbed by a seeded multiplicative jitter).
Simulated humans answer negotiation offers per their policy; robots execute
primitive programs on the simulated backend.  The run yields a trace that
feeds Gantt exports, the makespan figure and the benchmark harness.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from .allocator.candidates import PAIR_SEP, combination_id
from .gateways import AnswerPolicy
from .job import Group, Job, JobAction, Worker
from .runtime import RunResult, Runtime, TraceEntry, makespan

__all__ = ["run_sim", "makespan", "generate_plan", "export_trace",
           "export_gantt", "check_no_agent_overlap", "check_precedence",
           "AnswerPolicy"]


def run_sim(job: Job, *,
            variant: Optional[str] = None,
            policies: Optional[dict[str, AnswerPolicy]] = None,
            seed: int = 0,
            frequency: float = 100.0,
            kernel: str = "auto",
            fast_forward: bool = True,
            duration_jitter: float = 0.0,
            fault_at: Optional[dict[str, int]] = None,
            log_path: Optional[Path] = None) -> RunResult:
    """Drive the full tree + allocator in virtual time and return the trace.

    ``variant`` selects the scheduling semantics: ``collab-mt`` (pairs
    allowed), ``coop-mt`` (singles only) or ``coop-st`` (singles only, next
    allocation round only after the whole current batch finished).
    """
    runtime = Runtime(job, variant=variant, mode="simulated", seed=seed,
                      frequency=frequency, policies=policies or {},
                      fault_at=fault_at, kernel=kernel,
                      fast_forward=fast_forward,
                      duration_jitter=duration_jitter, log_path=log_path)
    return runtime.run_virtual()


def export_trace(trace: list[TraceEntry], path) -> None:
    """Line-delimited records: worker,action,start,end,outcome (3 decimals)."""
    lines = [entry.line() for entry in trace]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def export_gantt(trace: list[TraceEntry], path) -> None:
    """Plot-ready table: one row per entry with a lane per base worker.

    Combination entries produce one row per member so each worker lane shows
    its own occupancy.
    """
    rows = ["worker,action,start,end,duration"]
    for entry in trace:
        for member in entry.candidate.split(PAIR_SEP):
            rows.append(f"{member},{entry.action},{entry.start:.3f},"
                        f"{entry.end:.3f},{entry.end - entry.start:.3f}")
    Path(path).write_text("\n".join(rows) + "\n")


def check_no_agent_overlap(trace: list[TraceEntry]) -> list[str]:
    """Independent cross-check: no base agent holds two overlapping entries."""
    by_agent: dict[str, list[tuple[float, float, str]]] = {}
    for entry in trace:
        for member in entry.candidate.split(PAIR_SEP):
            by_agent.setdefault(member, []).append(
                (entry.start, entry.end, entry.action))
    problems = []
    for agent, intervals in by_agent.items():
        intervals.sort()
        for (s1, e1, a1), (s2, e2, a2) in zip(intervals, intervals[1:]):
            if s2 < e1 - 1e-9:
                problems.append(f"{agent}: {a1} [{s1},{e1}] overlaps "
                                f"{a2} [{s2},{e2}]")
    return problems


def check_precedence(job: Job, trace: list[TraceEntry]) -> list[str]:
    """Independent cross-check: sequence groups execute in order."""
    times = {t.action: (t.start, t.end) for t in trace}
    problems: list[str] = []

    def span(item) -> Optional[tuple[float, float]]:
        if isinstance(item, str):
            return times.get(item)
        spans = [span(sub) for sub in item.items]
        spans = [s for s in spans if s is not None]
        if not spans:
            return None
        return min(s[0] for s in spans), max(s[1] for s in spans)

    def walk(group: Group) -> None:
        if group.kind == "sequence":
            previous = None
            for item in group.items:
                current = span(item)
                if previous is not None and current is not None \
                        and current[0] < previous[1] - 1e-9:
                    problems.append(
                        f"sequence violated: item starting {current[0]} "
                        f"before predecessor ended {previous[1]}")
                if current is not None:
                    previous = current
        for item in group.items:
            if isinstance(item, Group):
                walk(item)

    walk(job.structure)
    return problems


def generate_plan(topology: str, n_actions: int, n_agents: int,
                  seed: int = 0, collaborative: bool = True) -> Job:
    """Synthetic job for the scalability benchmarks.

    ``series`` puts all actions in one long sequence; ``parallel`` in one
    parallel group.  Costs are uniform integers in [5, 50] seconds; pair
    costs are drawn independently of the singles.
    """
    if topology not in ("series", "parallel"):
        raise ValueError("topology must be 'series' or 'parallel'")
    if n_actions < 1 or n_agents < 1:
        raise ValueError("action and agent counts must be positive")
    rng = np.random.default_rng(seed)
    worker_ids = [f"w{i+1}" for i in range(n_agents)]
    workers = [Worker(w, "robot") for w in worker_ids]
    action_ids = [f"a{i+1}" for i in range(n_actions)]

    actions = []
    for aid in action_ids:
        costs = {w: int(rng.integers(5, 51)) for w in worker_ids}
        if collaborative:
            for i in range(n_agents):
                for j in range(i + 1, n_agents):
                    pair = combination_id((worker_ids[i], worker_ids[j]))
                    costs[pair] = int(rng.integers(5, 51))
        actions.append(JobAction(id=aid, label=aid,
                                 collaborative=collaborative, costs=costs))

    structure = Group("sequence" if topology == "series" else "parallel",
                      list(action_ids))
    return Job(
        name=f"bench-{topology}-{n_actions}x{n_agents}",
        workers=workers, actions=actions, structure=structure,
        allocation_mode="collaborative" if collaborative else "cooperative",
        epsilon_mode="always")
