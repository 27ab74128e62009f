"""Exhaustive reference solver for small allocation instances.

Enumerates every assignment satisfying the constraints and keeps the best
one.  This is the test oracle for the branch-and-bound solver: same problem
definition, completely independent search.  Guarded against large instances;
use it below roughly 2^24 enumeration states only.
"""

from __future__ import annotations

import time

from .problem import (AllocationProblem, AllocationSolution,
                      diagnose_infeasibility)

ENUMERATION_LIMIT = 2 ** 24


class OracleSizeError(ValueError):
    """Instance too large for exhaustive enumeration."""


def _tie_key(assignment: list[tuple[int, int]], member_counts: list[int]):
    """Deterministic preference among equal-objective optima: fewer total
    members first, then the lexicographically smallest sorted pair list."""
    total_members = sum(member_counts[i] for i, _ in assignment)
    return (total_members, sorted(assignment))


def brute_force_solve(problem: AllocationProblem) -> AllocationSolution:
    problem.validate()
    p = problem.candidates.size
    l = problem.n_actions
    states = (p + 1) ** l if l else 1
    if states > ENUMERATION_LIMIT:
        raise OracleSizeError(
            f"(P+1)^L = {states} enumeration states exceed the safety limit "
            f"{ENUMERATION_LIMIT}; use solve() for instances this size")

    t0 = time.perf_counter()
    total = problem.total_cost()
    weights = [int(w) for w in problem.weights]
    masks = [c.member_mask() for c in problem.candidates]
    member_counts = [c.size for c in problem.candidates]
    quota = problem.quota
    budgets = [(b.use, float(b.cap)) for b in problem.budgets]

    best: dict = {"cost": None, "assignment": None, "key": None}

    def consider(assignment: list[tuple[int, int]], cost: float) -> None:
        key = _tie_key(assignment, member_counts)
        if best["cost"] is None or cost < best["cost"] or (
                cost == best["cost"] and key < best["key"]):
            best["cost"] = cost
            best["assignment"] = list(assignment)
            best["key"] = key

    def recurse(j: int, used_mask: int, units: int, cost: float,
                spent: list[float], assignment: list[tuple[int, int]]) -> None:
        if j == l:
            if units == quota:
                consider(assignment, cost)
            return
        # option 1: leave the action unassigned
        recurse(j + 1, used_mask, units, cost, spent, assignment)
        # option 2: each feasible, non-conflicting candidate
        for i in range(p):
            if not problem.feasible[i, j]:
                continue
            if used_mask & masks[i]:
                continue
            if units + weights[i] > quota:
                continue
            new_spent = spent
            if budgets:
                new_spent = list(spent)
                over = False
                for k, (use, cap) in enumerate(budgets):
                    new_spent[k] += float(use[i, j])
                    if new_spent[k] > cap + 1e-12:
                        over = True
                        break
                if over:
                    continue
            assignment.append((i, j))
            recurse(j + 1, used_mask | masks[i], units + weights[i],
                    cost + float(total[i, j]), new_spent, assignment)
            assignment.pop()

    recurse(0, 0, 0, 0.0, [0.0] * len(budgets), [])
    elapsed = time.perf_counter() - t0

    if best["assignment"] is None:
        return AllocationSolution(
            assignment=[], objective=float("inf"), solve_time=elapsed,
            status="infeasible", reason=diagnose_infeasibility(problem),
            stats={"method": "exhaustive"})

    names = [(problem.candidates.candidates[i].id, problem.actions[j])
             for i, j in sorted(best["assignment"], key=lambda pair: pair[1])]
    return AllocationSolution(
        assignment=names, objective=float(best["cost"]), solve_time=elapsed,
        status="optimal", stats={"method": "exhaustive"})
