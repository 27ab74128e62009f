"""Randomized cross-checks of the exact solver against the oracle."""

import numpy as np
import pytest

from teamalloc.allocator import (OracleSizeError, brute_force_solve,
                                 build_collaborative, get_search_kernel,
                                 solve, verify_solution)

from conftest import random_problem


def test_oracle_equivalence_small_sweep():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        problem = random_problem(rng)
        mine = solve(problem)
        ref = brute_force_solve(problem)
        assert mine.status == ref.status
        if mine.ok:
            assert mine.objective == ref.objective
            assert mine.assignment == ref.assignment
            assert verify_solution(problem, mine) == []


def test_python_and_numba_kernels_agree():
    get_search_kernel("numba")  # compile up front
    rng = np.random.default_rng(11)
    for _ in range(60):
        problem = random_problem(rng)
        a = solve(problem, kernel="numba")
        b = solve(problem, kernel="python")
        assert a.status == b.status
        assert a.assignment == b.assignment
        if a.ok:
            assert a.objective == b.objective


def test_scaling_all_costs_preserves_the_argmin():
    rng = np.random.default_rng(5)
    for _ in range(40):
        problem = random_problem(rng, with_budgets=False)
        base = solve(problem)
        problem.base_cost = problem.base_cost * 2.0
        problem.preference = problem.preference * 2.0
        problem.availability = problem.availability * 2.0
        scaled = solve(problem)
        assert scaled.status == base.status
        if base.ok:
            assert scaled.assignment == base.assignment
            assert scaled.objective == base.objective * 2.0


def test_raising_preference_never_recruits_the_pair():
    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(60):
        problem = random_problem(rng, with_budgets=False)
        before = solve(problem)
        if not before.ok:
            continue
        chosen = set(before.assignment)
        action_index = {a: j for j, a in enumerate(problem.actions)}
        for i, cand in enumerate(problem.candidates):
            for action, j in action_index.items():
                if not problem.feasible[i, j] or (cand.id, action) in chosen:
                    continue
                problem.preference[i, j] += float(rng.integers(1, 30))
                after = solve(problem)
                assert (cand.id, action) not in set(after.assignment)
                problem.preference[i, j] = 0.0
                checked += 1
                break
            else:
                continue
            break
    assert checked > 20


def test_solution_units_and_unicity():
    rng = np.random.default_rng(33)
    for _ in range(100):
        problem = random_problem(rng)
        solution = solve(problem)
        if not solution.ok:
            continue
        units = 0
        used: set[str] = set()
        for cand_id, _ in solution.assignment:
            cand = problem.candidates.by_id(cand_id)
            units += int(problem.weights[problem.candidates.index_of(cand_id)])
            for member in cand.members:
                assert member not in used
                used.add(member)
        assert units == problem.quota


def test_oracle_guard_refuses_oversized_instances():
    workers = [f"w{i}" for i in range(20)]
    table = {w: {f"a{j}": 10.0 for j in range(8)} for w in workers}
    problem = build_collaborative(workers, [f"a{j}" for j in range(8)], table)
    with pytest.raises(OracleSizeError):
        brute_force_solve(problem)
