"""Allocation candidates: single workers and unordered worker combinations.

A candidate is the unit the allocator assigns to an action.  Besides every
single worker, the candidate set contains the k-combinations of the team
(pairs by default), so one assignment can bind several physical agents to the
same action.  Each candidate carries a binary membership vector over the base
agents; the solver uses it to keep any physical agent inside at most one
assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

PAIR_SEP = "+"


@dataclass(frozen=True)
class Candidate:
    """A single worker or an unordered combination of workers."""

    id: str
    members: tuple[str, ...]          # base worker ids, in roster order
    member_indexes: tuple[int, ...]   # positions in the roster

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def is_combination(self) -> bool:
        return len(self.members) > 1

    def membership(self, base_count: int) -> np.ndarray:
        """Binary membership vector of length ``base_count``."""
        vec = np.zeros(base_count, dtype=np.int64)
        for idx in self.member_indexes:
            vec[idx] = 1
        return vec

    def member_mask(self) -> int:
        """Membership as a bit mask (bit i set for roster position i)."""
        mask = 0
        for idx in self.member_indexes:
            mask |= 1 << idx
        return mask


def combination_id(members: tuple[str, ...]) -> str:
    return PAIR_SEP.join(members)


@dataclass
class CandidateSet:
    """Every single worker plus every unordered combination up to ``max_combo``."""

    base_workers: tuple[str, ...]
    max_combo: int = 2
    candidates: list[Candidate] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.candidates:
            self.candidates = _enumerate(self.base_workers, self.max_combo)
        self._by_id = {c.id: c for c in self.candidates}

    @property
    def base_count(self) -> int:
        return len(self.base_workers)

    @property
    def size(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def __len__(self) -> int:
        return len(self.candidates)

    def by_id(self, candidate_id: str) -> Candidate:
        return self._by_id[candidate_id]

    def index_of(self, candidate_id: str) -> int:
        return self.candidates.index(self._by_id[candidate_id])


def _enumerate(base_workers: tuple[str, ...], max_combo: int) -> list[Candidate]:
    if not base_workers:
        raise ValueError("at least one base worker is required")
    if len(set(base_workers)) != len(base_workers):
        raise ValueError("duplicate worker ids in roster")
    for wid in base_workers:
        if PAIR_SEP in wid:
            raise ValueError(f"worker id {wid!r} must not contain {PAIR_SEP!r}")
    if not 1 <= max_combo <= len(base_workers):
        max_combo = min(max(max_combo, 1), len(base_workers))

    out: list[Candidate] = []
    for k in range(1, max_combo + 1):
        for combo in combinations(range(len(base_workers)), k):
            members = tuple(base_workers[i] for i in combo)
            out.append(Candidate(
                id=members[0] if k == 1 else combination_id(members),
                members=members,
                member_indexes=combo,
            ))
    return out


def build_candidates(base_workers, max_combo: int = 2) -> CandidateSet:
    """Enumerate singles and combinations for a roster.

    With ``max_combo=2`` the set holds N singles plus N(N-1)/2 pairs, i.e.
    N(N+1)/2 candidates in total.
    """
    workers = tuple(base_workers)
    if max_combo not in (1, 2):
        raise ValueError("max_combo must be 1 or 2")
    return CandidateSet(workers, max_combo=min(max_combo, len(workers)) or 1)


def count_weight(members: int, n_ready: int, n_agents: int,
                 epsilon_mode: str = "n1_only", epsilon: float = 1e-9) -> int:
    """Weight of a k-member candidate toward the assignment-count quota.

    The solver requires the weights of all assigned candidates to sum to
    ``min(n_ready, n_agents)``.  Singles always weigh 1; a full-team
    combination weighs the entire quota.  In between the weight interpolates
    linearly and is floored to an integer.

    ``epsilon_mode`` controls the denominator guard:

    * ``"n1_only"`` (default) -- the guard applies only to the degenerate
      one-agent team, so the top endpoint is exact: weight(N) = quota.
    * ``"always"`` -- the guard is always in the denominator, which pulls
      every interpolated value just below the next integer.  Pairs then
      weigh 1 even when the quota equals the team size, so a combination can
      never swallow more than one ready action's slot.  Allocation traces of
      busy multi-action phases need this behaviour; see the package docs.
    """
    if members < 1 or members > n_agents:
        raise ValueError(f"member count {members} outside [1, {n_agents}]")
    if n_ready < 1:
        raise ValueError("n_ready must be >= 1")
    quota = min(n_ready, n_agents)
    if n_agents == 1:
        return 1
    if epsilon_mode == "always":
        denom = n_agents - 1 + epsilon
        return int(math.floor((members - 1) / denom * (quota - 1) + 1))
    if epsilon_mode == "n1_only":
        return (members - 1) * (quota - 1) // (n_agents - 1) + 1
    raise ValueError(f"unknown epsilon_mode {epsilon_mode!r}")
