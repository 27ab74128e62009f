"""Cross-check the search against a general-purpose MILP solver.

The exhaustive oracle covers small instances; here scipy's HiGHS-backed
integer programming solver independently confirms optimal objectives on
sizes beyond the oracle's reach.  Build the binary program directly from
the problem definition: one variable per feasible (candidate, action) cell,
at most one candidate per action, member-unicity rows, and the count-weight
equality.
"""

import numpy as np
import pytest

scipy_opt = pytest.importorskip("scipy.optimize")

from teamalloc.allocator import build_collaborative, build_candidates, solve

from conftest import random_problem


def milp_objective(problem) -> float | None:
    total = problem.total_cost()
    cells = [(i, j) for i in range(problem.candidates.size)
             for j in range(problem.n_actions)
             if problem.feasible[i, j]]
    if not cells:
        return 0.0 if problem.quota == 0 else None
    c = np.array([total[i, j] for i, j in cells])
    n = len(cells)

    rows_ub, b_ub = [], []
    for j in range(problem.n_actions):
        row = np.array([1.0 if cj == j else 0.0 for _, cj in cells])
        rows_ub.append(row)
        b_ub.append(1.0)
    for cand in problem.candidates:
        idx = problem.candidates.index_of(cand.id)
        row = np.array([1.0 if ci == idx else 0.0 for ci, _ in cells])
        rows_ub.append(row)
        b_ub.append(1.0)
    for agent_pos in range(problem.n_agents):
        row = np.array([
            1.0 if problem.candidates.candidates[ci].membership(
                problem.n_agents)[agent_pos] else 0.0
            for ci, _ in cells])
        rows_ub.append(row)
        b_ub.append(1.0)
    for budget in problem.budgets:
        row = np.array([float(budget.use[ci, cj]) for ci, cj in cells])
        rows_ub.append(row)
        b_ub.append(float(budget.cap))

    count_row = np.array([float(problem.weights[ci]) for ci, _ in cells])
    constraints = [
        scipy_opt.LinearConstraint(np.vstack(rows_ub), -np.inf, np.array(b_ub)),
        scipy_opt.LinearConstraint(count_row.reshape(1, -1),
                                   float(problem.quota), float(problem.quota)),
    ]
    result = scipy_opt.milp(
        c=c, constraints=constraints,
        integrality=np.ones(n), bounds=scipy_opt.Bounds(0, 1))
    if not result.success:
        return None
    return float(result.fun)


def test_matches_general_milp_on_midsize_instances():
    rng = np.random.default_rng(424242)
    agreed = 0
    for _ in range(60):
        problem = random_problem(rng, max_agents=6, max_actions=6)
        mine = solve(problem)
        reference = milp_objective(problem)
        if reference is None:
            assert not mine.ok
        else:
            assert mine.ok
            assert mine.objective == pytest.approx(reference, abs=1e-6)
            agreed += 1
    assert agreed > 30


def test_matches_general_milp_on_a_large_instance():
    rng = np.random.default_rng(9)
    workers = [f"w{k}" for k in range(12)]
    actions = [f"a{k}" for k in range(8)]
    cands = build_candidates(workers, max_combo=2)
    table = {c.id: {a: int(rng.integers(1, 51)) for a in actions}
             for c in cands}
    problem = build_collaborative(workers, actions, table,
                                  epsilon_mode="always")
    mine = solve(problem)
    reference = milp_objective(problem)
    assert mine.ok and reference is not None
    assert mine.objective == pytest.approx(reference, abs=1e-6)
