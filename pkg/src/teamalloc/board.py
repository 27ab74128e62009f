"""Shared allocation state: agent records, the allocation board, and the
team context object the custom tree nodes work against.

All of this is owned by the single ticking thread.  External inputs reach it
only through the runtime's inbox, drained at tick boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Optional

if TYPE_CHECKING:
    from .allocator.candidates import Candidate, CandidateSet
    from .costs import CostModel


class AllocationInfeasible(RuntimeError):
    """No feasible assignment exists for the current ready set."""


class LogicFault(RuntimeError):
    """A node observed state that the tree wiring should make impossible."""


@dataclass
class AgentRecord:
    """Live state of one physical agent."""

    id: str
    type: str                      # "human" | "robot"
    available: bool = True
    busy_action: Optional[str] = None
    busy_candidate: Optional[str] = None
    busy_since: Optional[float] = None   # execution start; None while negotiating
    busy_duration: float = 0.0

    def occupy(self, action: str, candidate_id: str, duration: float) -> None:
        self.available = False
        self.busy_action = action
        self.busy_candidate = candidate_id
        self.busy_since = None
        self.busy_duration = float(duration)

    def start_execution(self, now: float) -> None:
        if self.busy_since is None:
            self.busy_since = float(now)

    def release(self) -> None:
        self.available = True
        self.busy_action = None
        self.busy_candidate = None
        self.busy_since = None
        self.busy_duration = 0.0


class AllocationBoard:
    """Blackboard-resident exchange between the allocation nodes.

    * ``to_allocate`` -- actions currently awaiting (re-)assignment;
    * ``rejected`` -- actions whose last offer a human turned down;
    * ``allocation`` -- the current action -> candidate decisions;
    * ``dispatched`` -- actions whose execution or negotiation is in flight
      (these leave ``to_allocate`` so a running action is never re-solved);
    * ``completed`` -- actions that reached Success (never re-registered).

    ``revision`` increments on every observable mutation; the virtual-time
    loop uses it to detect quiescent ticks.
    """

    def __init__(self) -> None:
        self.to_allocate: set[str] = set()
        self.rejected: set[str] = set()
        self.allocation: dict[str, str] = {}
        self.dispatched: set[str] = set()
        self.completed: set[str] = set()
        self.revision = 0

    def _bump(self) -> None:
        self.revision += 1

    # -- registration -----------------------------------------------------
    def register(self, action: str) -> None:
        """Ask for an assignment; no-op while the action runs or is done."""
        if action in self.completed or action in self.dispatched:
            return
        if action not in self.to_allocate:
            self.to_allocate.add(action)
            self._bump()

    # -- solver output ----------------------------------------------------
    def write_allocation(self, solved_actions: list[str],
                         assignment: dict[str, str]) -> None:
        changed = False
        for action in solved_actions:
            new = assignment.get(action)
            old = self.allocation.get(action)
            if new is None:
                if old is not None:
                    del self.allocation[action]
                    changed = True
            elif new != old:
                self.allocation[action] = new
                changed = True
        if changed:
            self._bump()

    def candidate_for(self, action: str) -> Optional[str]:
        return self.allocation.get(action)

    # -- lifecycle transitions ---------------------------------------------
    def mark_dispatched(self, action: str) -> None:
        self.to_allocate.discard(action)
        if action not in self.dispatched:
            self.dispatched.add(action)
            self._bump()

    def mark_rejected(self, action: str) -> None:
        self.rejected.add(action)
        self.dispatched.discard(action)
        if action not in self.completed:
            self.to_allocate.add(action)
        self._bump()

    def clear_rejected(self, action: str) -> None:
        if action in self.rejected:
            self.rejected.discard(action)
            self._bump()

    def drop_allocation(self, action: str) -> None:
        if self.allocation.pop(action, None) is not None:
            self._bump()

    def mark_completed(self, action: str) -> None:
        self.completed.add(action)
        self.dispatched.discard(action)
        self.to_allocate.discard(action)
        self.allocation.pop(action, None)
        self._bump()

    def in_flight(self) -> set[str]:
        return set(self.dispatched)


@dataclass
class TeamContext:
    """Everything the allocation nodes need, stored once on the blackboard
    under the shared namespace."""

    board: AllocationBoard
    agents: dict[str, AgentRecord]
    candidates: "CandidateSet"
    cost_model: "CostModel"
    gateway: object                    # NegotiationGateway
    robot_backend: object
    clock: object
    action_order: dict[str, int]
    collaborative_enabled: set[str]
    allocation_mode: str = "collaborative"
    epsilon_mode: str = "n1_only"
    kernel: str = "auto"
    solve_barrier: bool = False        # single-task variant: no solve while work runs
    emit: Callable = lambda kind, **payload: None
    labels: dict[str, str] = field(default_factory=dict)
    robot_programs: dict[str, tuple] = field(default_factory=dict)
    collab_programs: dict[str, tuple] = field(default_factory=dict)

    SHARED_NS = "shared"
    KEY = "team"

    def candidate(self, candidate_id: str) -> "Candidate":
        return self.candidates.by_id(candidate_id)

    def duration(self, candidate_id: str, action: str) -> float:
        return self.cost_model.duration(candidate_id, action)

    def human_members(self, candidate_id: str) -> list[str]:
        cand = self.candidate(candidate_id)
        return [m for m in cand.members if self.agents[m].type == "human"]

    def now(self) -> float:
        return self.clock.now


def put_team(blackboard, team: TeamContext) -> None:
    blackboard.set(TeamContext.SHARED_NS, TeamContext.KEY, team)


def get_team(blackboard) -> TeamContext:
    return blackboard.get(TeamContext.SHARED_NS, TeamContext.KEY)
