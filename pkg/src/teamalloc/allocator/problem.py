"""Allocation problem instances and the post-solve feasibility checker.

An instance couples a candidate set with the currently allocatable actions
and the cost terms: per-pair base cost, per-pair preference penalty, and a
per-candidate availability penalty.  Infeasible (candidate, action) pairs are
encoded in a boolean mask.  Two modes exist: *cooperative* (single workers
only) and *collaborative* (singles plus combinations, count-weighted so the
assignment quota stays meaningful).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .candidates import Candidate, CandidateSet, build_candidates, count_weight

COOPERATIVE = "cooperative"
COLLABORATIVE = "collaborative"


class ProblemError(ValueError):
    """Malformed allocation problem."""


@dataclass
class Budget:
    """Optional joint resource limit: sum of use[i, j] * x[i, j] <= cap."""

    use: np.ndarray
    cap: float
    name: str = "budget"


@dataclass
class AllocationProblem:
    candidates: CandidateSet
    actions: list[str]
    base_cost: np.ndarray        # (P, L), finite where feasible
    preference: np.ndarray       # (P, L)
    availability: np.ndarray     # (P,)  combined per-candidate penalty
    feasible: np.ndarray         # (P, L) bool
    weights: np.ndarray          # (P,)  count weight per candidate
    mode: str = COLLABORATIVE
    epsilon_mode: str = "n1_only"
    budgets: list[Budget] = field(default_factory=list)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_agents(self) -> int:
        return self.candidates.base_count

    @property
    def quota(self) -> int:
        """How many count-weight units the solution must carry."""
        return min(self.n_actions, self.n_agents)

    def total_cost(self) -> np.ndarray:
        """Objective coefficients: base + preference + availability, inf if infeasible."""
        total = self.base_cost + self.preference + self.availability[:, None]
        return np.where(self.feasible, total, np.inf)

    def validate(self) -> None:
        p, l = self.candidates.size, len(self.actions)
        if self.base_cost.shape != (p, l) or self.preference.shape != (p, l) \
                or self.feasible.shape != (p, l):
            raise ProblemError("cost/mask shapes do not match candidates x actions")
        if self.availability.shape != (p,) or self.weights.shape != (p,):
            raise ProblemError("per-candidate vector shapes do not match")
        if len(set(self.actions)) != l:
            raise ProblemError("duplicate action ids")
        for arr, label in ((self.base_cost, "base cost"),
                           (self.preference, "preference"),
                           (self.availability, "availability")):
            vals = arr[self.feasible] if arr.ndim == 2 else arr
            if not np.all(np.isfinite(vals)):
                raise ProblemError(f"{label} contains non-finite values")
            if np.any(vals < 0):
                raise ProblemError(f"{label} contains negative values")
        if self.mode == COOPERATIVE:
            if any(c.is_combination for c in self.candidates):
                raise ProblemError("cooperative mode admits single workers only")
        for b in self.budgets:
            if b.use.shape != (p, l):
                raise ProblemError(f"{b.name}: use matrix shape mismatch")
            if np.any(b.use < 0):
                raise ProblemError(f"{b.name}: negative budget use")


@dataclass
class AllocationSolution:
    assignment: list[tuple[str, str]]   # (candidate id, action id)
    objective: float
    solve_time: float = 0.0
    status: str = "optimal"
    reason: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def by_action(self) -> dict[str, str]:
        return {action: cand for cand, action in self.assignment}


def _cost_lookup(table: Mapping, cand: Candidate, action: str):
    row = table.get(cand.id)
    if row is None and cand.size == 1:
        row = table.get(cand.members[0])
    if row is None:
        return None
    return row.get(action)


def _build(candidates: CandidateSet,
           actions: Sequence[str],
           cost_table: Mapping,
           *,
           mode: str,
           worker_availability: Optional[Mapping[str, float]] = None,
           preference: Optional[Mapping[tuple[str, str], float]] = None,
           collaborative_enabled: Optional[set[str]] = None,
           budgets: Optional[list[Budget]] = None,
           epsilon_mode: str = "n1_only") -> AllocationProblem:
    actions = list(actions)
    p, l = candidates.size, len(actions)
    base = np.zeros((p, l))
    pref = np.zeros((p, l))
    mask = np.zeros((p, l), dtype=bool)
    avail = np.zeros(p)
    ready = max(l, 1)

    worker_availability = worker_availability or {}
    preference = preference or {}

    weights = np.empty(p, dtype=np.int64)
    for i, cand in enumerate(candidates):
        weights[i] = count_weight(cand.size, ready, candidates.base_count,
                                  epsilon_mode=epsilon_mode)
        # availability of a combination is the worst member's penalty
        member_costs = [float(worker_availability.get(m, 0.0)) for m in cand.members]
        avail[i] = max(member_costs)
        for j, action in enumerate(actions):
            if cand.is_combination and collaborative_enabled is not None \
                    and action not in collaborative_enabled:
                continue
            c = _cost_lookup(cost_table, cand, action)
            if c is None:
                continue
            base[i, j] = float(c)
            pref[i, j] = float(preference.get((cand.id, action), 0.0))
            mask[i, j] = True

    problem = AllocationProblem(
        candidates=candidates, actions=actions, base_cost=base,
        preference=pref, availability=avail, feasible=mask,
        weights=weights, mode=mode, epsilon_mode=epsilon_mode,
        budgets=list(budgets or []))
    problem.validate()
    return problem


def build_cooperative(workers: Sequence[str],
                      actions: Sequence[str],
                      cost_table: Mapping,
                      *,
                      worker_availability: Optional[Mapping[str, float]] = None,
                      preference: Optional[Mapping[tuple[str, str], float]] = None,
                      budgets: Optional[list[Budget]] = None) -> AllocationProblem:
    """Single-worker assignment: at most one action per agent, one agent per
    action, exactly min(L, N) assignments, optional budgets."""
    candidates = build_candidates(workers, max_combo=1)
    return _build(candidates, actions, cost_table, mode=COOPERATIVE,
                  worker_availability=worker_availability,
                  preference=preference, budgets=budgets)


def build_collaborative(workers: Sequence[str],
                        actions: Sequence[str],
                        cost_table: Mapping,
                        *,
                        worker_availability: Optional[Mapping[str, float]] = None,
                        preference: Optional[Mapping[tuple[str, str], float]] = None,
                        collaborative_enabled: Optional[set[str]] = None,
                        budgets: Optional[list[Budget]] = None,
                        max_combo: int = 2,
                        epsilon_mode: str = "n1_only") -> AllocationProblem:
    """Assignment over singles plus worker combinations.

    ``collaborative_enabled`` restricts combinations to the listed actions;
    ``None`` leaves every action open to any candidate with a cost entry.
    """
    candidates = build_candidates(workers, max_combo=max_combo)
    return _build(candidates, actions, cost_table, mode=COLLABORATIVE,
                  worker_availability=worker_availability,
                  preference=preference,
                  collaborative_enabled=collaborative_enabled,
                  budgets=budgets, epsilon_mode=epsilon_mode)


def verify_solution(problem: AllocationProblem,
                    solution: AllocationSolution) -> list[str]:
    """Independent constraint check of a solved assignment.

    Returns a list of human-readable violations (empty when the solution is
    feasible).  Deliberately written against the problem definition, not the
    solver internals.
    """
    if not solution.ok:
        return []
    violations: list[str] = []
    cand_ids = {c.id for c in problem.candidates}
    action_index = {a: j for j, a in enumerate(problem.actions)}

    seen_actions: set[str] = set()
    seen_candidates: set[str] = set()
    agent_use: dict[str, int] = {}
    units = 0
    objective = 0.0
    total = problem.total_cost()

    for cand_id, action in solution.assignment:
        if cand_id not in cand_ids:
            violations.append(f"unknown candidate {cand_id!r}")
            continue
        if action not in action_index:
            violations.append(f"unknown action {action!r}")
            continue
        if action in seen_actions:
            violations.append(f"action {action!r} assigned more than once")
        if cand_id in seen_candidates:
            violations.append(f"candidate {cand_id!r} assigned more than once")
        seen_actions.add(action)
        seen_candidates.add(cand_id)
        i = problem.candidates.index_of(cand_id)
        j = action_index[action]
        if not problem.feasible[i, j]:
            violations.append(f"infeasible pair ({cand_id!r}, {action!r}) assigned")
            continue
        cand = problem.candidates.by_id(cand_id)
        for member in cand.members:
            agent_use[member] = agent_use.get(member, 0) + 1
        units += int(problem.weights[i])
        objective += float(total[i, j])

    for member, uses in agent_use.items():
        if uses > 1:
            violations.append(f"agent {member!r} appears in {uses} assignments")
    if units != problem.quota:
        violations.append(
            f"count constraint: weights sum to {units}, required {problem.quota}")
    if abs(objective - solution.objective) > 1e-9 * max(1.0, abs(objective)):
        violations.append(
            f"objective mismatch: recomputed {objective}, reported {solution.objective}")
    for b in problem.budgets:
        spent = sum(float(b.use[problem.candidates.index_of(c), action_index[a]])
                    for c, a in solution.assignment)
        if spent > b.cap + 1e-9:
            violations.append(f"{b.name}: spent {spent} over cap {b.cap}")
    return violations


def diagnose_infeasibility(problem: AllocationProblem) -> str:
    """Explain why no feasible assignment exists, naming offending actions."""
    parts = []
    uncovered = [a for j, a in enumerate(problem.actions)
                 if not problem.feasible[:, j].any()]
    if uncovered:
        parts.append("no feasible candidate for action(s): " + ", ".join(uncovered))
    # upper bound on achievable count units ignoring conflicts
    best = 0
    for j in range(len(problem.actions)):
        feas = problem.feasible[:, j]
        if feas.any():
            best += int(problem.weights[feas].max())
    best = min(best, problem.n_agents)
    if best < problem.quota:
        parts.append(
            f"count constraint unreachable: requires {problem.quota} assignment "
            f"units, at most {best} achievable")
    if not parts:
        parts.append("assignment constraints are jointly unsatisfiable "
                     "(agent unicity vs required count)")
    return "; ".join(parts)
