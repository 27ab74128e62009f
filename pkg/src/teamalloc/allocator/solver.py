"""Exact solver front end: preprocessing, kernel dispatch, verification."""

from __future__ import annotations

import time

import numpy as np

from .kernels import active_kernel_name, get_search_kernel
from .problem import (AllocationProblem, AllocationSolution,
                      diagnose_infeasibility, verify_solution)

MAX_AGENTS = 63  # member bit masks live in an int64


class SolverError(RuntimeError):
    """Internal inconsistency: the solver produced an infeasible assignment."""


def _suffix_bounds(cost: np.ndarray, weight: np.ndarray, quota: int):
    """Admissible completion bounds per action suffix.

    ``bound[j, r]`` underestimates the cost of gathering ``r`` more count
    units from actions j..L-1: actions are filled greedily by their cheapest
    per-unit rate, each up to its largest feasible weight, ignoring agent
    conflicts.  ``suffix_cap[j]`` caps the units obtainable from the suffix.
    """
    l = cost.shape[1]
    rate_matrix = np.where(np.isfinite(cost), cost / weight[:, None], np.inf)
    unit_rate = rate_matrix.min(axis=0)
    max_w = np.where(np.isfinite(cost), weight[:, None], 0).max(axis=0) \
        if l else np.zeros(0, dtype=np.int64)

    suffix_cap = np.zeros(l + 1, dtype=np.int64)
    suffix_cap[:l] = np.cumsum(max_w[::-1])[::-1]

    bound = np.full((l + 1, quota + 1), np.inf)
    bound[:, 0] = 0.0
    # cheapest suffix entries, kept only until their capacity covers the
    # quota (inserting one action costs O(quota), so the whole table is
    # O(L * quota^2))
    best: list[tuple[float, int]] = []
    for j in range(l - 1, -1, -1):
        if np.isfinite(unit_rate[j]) and max_w[j] > 0:
            entry = (float(unit_rate[j]), int(max_w[j]))
            lo = 0
            while lo < len(best) and best[lo][0] <= entry[0]:
                lo += 1
            best.insert(lo, entry)
            covered = 0
            for k, (_, cap) in enumerate(best):
                covered += cap
                if covered >= quota:
                    del best[k + 1:]
                    break
        for r in range(1, quota + 1):
            need = r
            total = 0.0
            for rate, cap in best:
                take = cap if cap < need else need
                total += take * rate
                need -= take
                if need == 0:
                    break
            bound[j, r] = total if need == 0 else np.inf
    return bound, suffix_cap


def solve(problem: AllocationProblem, kernel: str = "auto") -> AllocationSolution:
    """Solve an allocation instance to proven optimality.

    Depth-first branch and bound over the binary assignment variables; the
    returned assignment is re-checked by the independent feasibility checker
    before it is handed back.  Infeasible instances yield a solution object
    with ``status="infeasible"`` and a diagnostic naming the violated
    requirement.
    """
    problem.validate()
    if problem.n_agents > MAX_AGENTS:
        raise ValueError(f"more than {MAX_AGENTS} base agents are not supported")

    t0 = time.perf_counter()
    if problem.n_actions == 0:
        return AllocationSolution(assignment=[], objective=0.0,
                                  solve_time=time.perf_counter() - t0,
                                  status="optimal", stats={"nodes": 0})

    cost = problem.total_cost()
    p, l = cost.shape
    weight = problem.weights.astype(np.int64)
    mask = np.array([c.member_mask() for c in problem.candidates], dtype=np.int64)
    msize = np.array([c.size for c in problem.candidates], dtype=np.int64)
    quota = problem.quota

    # per-action candidate order: ascending cost, index as stable tiebreak;
    # inf (infeasible) entries sort last and stay outside order_len
    order = np.argsort(cost, axis=0, kind="stable").T.copy()
    order_len = np.isfinite(cost).sum(axis=0).astype(np.int64)

    bound, suffix_cap = _suffix_bounds(cost, weight, quota)

    n_budgets = len(problem.budgets)
    if n_budgets:
        b_use = np.stack([b.use.astype(np.float64) for b in problem.budgets])
        b_cap = np.array([b.cap for b in problem.budgets], dtype=np.float64)
    else:
        b_use = np.zeros((0, p, l))
        b_cap = np.zeros(0)

    run = get_search_kernel(kernel)
    status, best_cost, best_choice, nodes = run(
        np.ascontiguousarray(cost), weight, mask, msize,
        np.int64(quota), np.int64(problem.n_agents),
        order, order_len, bound, suffix_cap, b_use, b_cap)
    elapsed = time.perf_counter() - t0

    stats = {"nodes": int(nodes),
             "kernel": kernel if kernel != "auto" else active_kernel_name()}
    if status != 0:
        return AllocationSolution(
            assignment=[], objective=float("inf"), solve_time=elapsed,
            status="infeasible", reason=diagnose_infeasibility(problem),
            stats=stats)

    assignment = [(problem.candidates.candidates[int(i)].id, problem.actions[j])
                  for j, i in enumerate(best_choice) if i >= 0]
    solution = AllocationSolution(assignment=assignment,
                                  objective=float(best_cost),
                                  solve_time=elapsed, status="optimal",
                                  stats=stats)
    violations = verify_solution(problem, solution)
    if violations:
        raise SolverError("solver returned an infeasible assignment: "
                          + "; ".join(violations))
    return solution
