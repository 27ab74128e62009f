"""Scalability benchmark: allocation compute time across problem sizes.

Compute time is the wall-clock spent inside tick processing (solver plus
tree machinery) from initialization until the last action is dispatched,
with simulated execution excluded -- execution costs nothing on the virtual
clock.  Each configuration re-runs the same generated job ``repetitions``
times and reports mean and spread.

The kernel axis exists because the hot search loop ships in two forms
(numba-compiled and pure Python); ``kernel="both"`` times the sweep on each
for comparison.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Optional

from .allocator import active_kernel_name, warm_kernel
from .sim import generate_plan, run_sim


@dataclass
class BenchmarkSpec:
    topology: str = "series"                  # "series" | "parallel"
    action_counts: list[int] = field(default_factory=lambda: [10])
    agent_counts: list[int] = field(default_factory=lambda: [3])
    variant: str = "collab-mt"                # collab-mt | coop-mt | coop-st
    repetitions: int = 10
    seed: int = 0
    kernel: str = "auto"                      # auto | numba | python | both
    frequency: float = 100.0

    def __post_init__(self) -> None:
        if self.topology not in ("series", "parallel"):
            raise ValueError("topology must be 'series' or 'parallel'")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if any(c < 1 for c in self.action_counts + self.agent_counts):
            raise ValueError("action and agent counts must be positive")


@dataclass
class BenchmarkRow:
    topology: str
    actions: int
    agents: int
    candidates: int
    variant: str
    kernel: str
    repetitions: int
    mean_s: float
    std_s: float
    min_s: float
    max_s: float
    per_action_ms: float
    solver_mean_s: float
    makespan: float

    def as_dict(self) -> dict:
        return {k: (round(v, 6) if isinstance(v, float) else v)
                for k, v in self.__dict__.items()}


def _measure(job, variant: str, kernel: str, repetitions: int,
             frequency: float) -> tuple[list[float], list[float], float]:
    totals, solver_totals, makespan = [], [], 0.0
    for _ in range(repetitions):
        result = run_sim(job, variant=variant, seed=0, kernel=kernel,
                         frequency=frequency, fast_forward=True)
        if not result.ok:
            raise RuntimeError(
                f"benchmark run failed ({result.verdict}): {result.reason}")
        totals.append(result.compute_seconds)
        solver_totals.append(sum(e[3]["solve_time"] for e in result.events
                                 if e[2] == "allocation"))
        makespan = result.makespan
    return totals, solver_totals, makespan


def run_benchmark(spec: BenchmarkSpec,
                  progress: Optional[callable] = None) -> list[BenchmarkRow]:
    kernels = ["numba", "python"] if spec.kernel == "both" else [spec.kernel]
    collaborative = spec.variant == "collab-mt"
    rows: list[BenchmarkRow] = []
    for kernel in kernels:
        if kernel != "python":
            warm_kernel(kernel)  # compile outside the timed region
        for agents in spec.agent_counts:
            for actions in spec.action_counts:
                job = generate_plan(spec.topology, actions, agents,
                                    seed=spec.seed,
                                    collaborative=collaborative)
                candidates = (agents * (agents + 1) // 2 if collaborative
                              else agents)
                totals, solver_totals, ms = _measure(
                    job, spec.variant, kernel, spec.repetitions,
                    spec.frequency)
                row = BenchmarkRow(
                    topology=spec.topology, actions=actions, agents=agents,
                    candidates=candidates, variant=spec.variant,
                    kernel=active_kernel_name() if kernel == "auto" else kernel,
                    repetitions=spec.repetitions,
                    mean_s=statistics.fmean(totals),
                    std_s=statistics.pstdev(totals) if len(totals) > 1 else 0.0,
                    min_s=min(totals), max_s=max(totals),
                    per_action_ms=statistics.fmean(totals) / actions * 1e3,
                    solver_mean_s=statistics.fmean(solver_totals),
                    makespan=ms)
                rows.append(row)
                if progress:
                    progress(row)
    return rows


def format_table(rows: list[BenchmarkRow]) -> str:
    header = ("topology actions agents candidates variant  kernel "
              "mean_s   std_s    per_action_ms")
    lines = [header]
    for r in rows:
        lines.append(f"{r.topology:8s} {r.actions:7d} {r.agents:6d} "
                     f"{r.candidates:10d} {r.variant:8s} {r.kernel:6s} "
                     f"{r.mean_s:8.4f} {r.std_s:8.4f} {r.per_action_ms:13.3f}")
    return "\n".join(lines)
