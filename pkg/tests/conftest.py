import importlib.resources as resources

import numpy as np
import pytest

from teamalloc.allocator import Budget, build_candidates, build_collaborative
from teamalloc.job import load_job

# Thirteen-action benchmark cost table (seconds), row order:
# w1, w2, w3, w1+w2, w2+w3, w1+w3
TABLE13 = {
    "a1":  (15, 20, 25, 32, 33, 29),
    "a2":  (27, 22, 20, 33, 31, 32),
    "a3":  (17, 21, 19, 25, 27, 12),
    "a4":  (13, 14, 11, 9, 20, 17),
    "a5":  (18, 17, 25, 27, 32, 30),
    "a6":  (27, 29, 31, 36, 40, 38),
    "a7":  (37, 35, 27, 41, 47, 42),
    "a8":  (38, 33, 39, 45, 43, 44),
    "a9":  (27, 25, 24, 30, 34, 31),
    "a10": (13, 19, 18, 11, 25, 23),
    "a11": (17, 12, 20, 15, 23, 24),
    "a12": (31, 25, 24, 38, 37, 36),
    "a13": (10, 9, 12, 15, 7, 18),
}
CANDIDATE_ORDER = ("w1", "w2", "w3", "w1+w2", "w2+w3", "w1+w3")

# reference allocation columns for the same job
COLLAB_MT_COLUMN = {
    "a1": "w1", "a2": "w3", "a3": "w1+w3", "a4": "w1+w2", "a5": "w2",
    "a6": "w1", "a7": "w3", "a8": "w2", "a9": "w3", "a10": "w1+w2",
    "a11": "w2", "a12": "w3", "a13": "w2+w3",
}
COOP_ST_COLUMN = {
    "a1": "w1", "a2": "w3", "a3": "w1", "a4": "w3", "a5": "w2",
    "a6": "w1", "a7": "w3", "a8": "w2", "a9": "w3", "a10": "w1",
    "a11": "w2", "a12": "w3", "a13": "w2",
}
COOP_MT_COLUMN = {
    "a1": "w1", "a2": "w3", "a3": "w1", "a4": "w1", "a5": "w2",
    "a6": "w1", "a7": "w3", "a8": "w2", "a9": "w3", "a10": "w1",
    "a11": "w2", "a12": "w3", "a13": "w2",
}


def table13_rows() -> dict[str, dict[str, float]]:
    rows: dict[str, dict[str, float]] = {c: {} for c in CANDIDATE_ORDER}
    for action, values in TABLE13.items():
        for cand, value in zip(CANDIDATE_ORDER, values):
            rows[cand][action] = float(value)
    return rows


@pytest.fixture(scope="session")
def table13():
    return table13_rows()


def data_path(name: str) -> str:
    return str(resources.files("teamalloc.data") / name)


@pytest.fixture(scope="session")
def simulated_job():
    return load_job(data_path("simulated_job.json"))


@pytest.fixture()
def assembly_job():
    return load_job(data_path("assembly_job.json"))


@pytest.fixture()
def assembly_job_distance():
    return load_job(data_path("assembly_job_distance.json"))


def random_problem(rng: np.random.Generator, max_agents: int = 4,
                   max_actions: int = 4, cost_lo: int = 1, cost_hi: int = 50,
                   with_budgets: bool = True):
    """Random collaborative instance in the oracle-checkable size range."""
    n = int(rng.integers(1, max_agents + 1))
    l = int(rng.integers(1, max_actions + 1))
    workers = [f"w{k + 1}" for k in range(n)]
    actions = [f"a{k + 1}" for k in range(l)]
    cands = build_candidates(workers, max_combo=2)
    table: dict[str, dict[str, float]] = {}
    for cand in cands:
        row = {}
        for action in actions:
            if rng.random() < 0.85:
                row[action] = int(rng.integers(cost_lo, cost_hi + 1))
        if row:
            table[cand.id] = row
    availability = {w: (float(rng.integers(0, 60)) if rng.random() < 0.3 else 0.0)
                    for w in workers}
    preference = {}
    for cand in cands:
        for action in actions:
            if rng.random() < 0.2:
                preference[(cand.id, action)] = float(rng.integers(0, 40))
    enabled = {a for a in actions if rng.random() < 0.7}
    budgets = []
    if with_budgets and rng.random() < 0.15:
        use = rng.integers(0, 10, size=(len(cands), l)).astype(float)
        budgets.append(Budget(use=use, cap=float(rng.integers(5, 40))))
    epsilon_mode = "always" if rng.random() < 0.3 else "n1_only"
    return build_collaborative(
        workers, actions, table, worker_availability=availability,
        preference=preference, collaborative_enabled=enabled,
        budgets=budgets, epsilon_mode=epsilon_mode)
