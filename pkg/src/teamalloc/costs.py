"""Cost terms feeding the allocator.

Three ingredients shape every assignment decision:

* a base suitability cost per (candidate, action) -- either a fixed duration
  table or a distance-augmented variant that penalizes robot work close to
  the human and collaboration across large separations;
* an availability penalty per busy agent -- binary, or proportional to the
  remaining execution time of whatever the agent is doing;
* a preference penalty per (candidate, action) grown from the accept/reject
  history of the negotiation phase.

Gains are calibrated so the three terms stay numerically comparable: the
availability and preference gains of a row default to the row's largest base
cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .allocator.candidates import Candidate

BINARY = "binary"
REMAINING_TIME = "remaining_time"

DURATION_METRIC = "duration"
DISTANCE_METRIC = "distance"

DEFAULT_DISTANCE_GUARD = 1e-3


class CostError(ValueError):
    pass


@dataclass
class WorkerAvailability:
    """Availability snapshot of one base worker."""

    available: bool = True
    busy_action: Optional[str] = None
    nominal_duration: float = 0.0
    elapsed: float = 0.0

    def __post_init__(self) -> None:
        if not self.available and self.nominal_duration > 0:
            self.elapsed = min(max(self.elapsed, 0.0), self.nominal_duration)


def availability_cost(state: WorkerAvailability, gain: float,
                      mode: str = REMAINING_TIME) -> float:
    """Penalty for assigning more work to this agent right now.

    Zero when the agent is free.  Busy agents pay the full gain in binary
    mode; in remaining-time mode the penalty decays linearly to zero as the
    current action approaches completion.
    """
    if state.available:
        return 0.0
    if mode == BINARY:
        return float(gain)
    if mode == REMAINING_TIME:
        t_total = state.nominal_duration
        if t_total <= 0:
            return float(gain)
        frac = (t_total - min(state.elapsed, t_total)) / t_total
        return float(gain) * frac
    raise CostError(f"unknown availability mode {mode!r}")


def collaborative_availability(member_costs: Sequence[float]) -> float:
    """Availability of a candidate: a combination is only as free as its
    busiest member."""
    if not member_costs:
        raise CostError("candidate has no members")
    return max(float(c) for c in member_costs)


@dataclass
class NegotiationCounts:
    negations: int = 0
    negotiations: int = 0


class PreferenceLedger:
    """Accept/reject history per (candidate, action)."""

    def __init__(self) -> None:
        self._counts: dict[tuple[str, str], NegotiationCounts] = {}

    def counts(self, candidate_id: str, action: str) -> NegotiationCounts:
        return self._counts.get((candidate_id, action), NegotiationCounts())

    def record(self, candidate_id: str, action: str, outcome: str) -> NegotiationCounts:
        if outcome not in ("accepted", "rejected"):
            raise CostError(f"unknown negotiation outcome {outcome!r}")
        entry = self._counts.setdefault((candidate_id, action), NegotiationCounts())
        entry.negotiations += 1
        if outcome == "rejected":
            entry.negations += 1
        return entry

    def items(self):
        return self._counts.items()


def preference_cost(counts: NegotiationCounts, gain: float) -> float:
    """Rejection-rate penalty: gain * negations / negotiations.

    No negotiation history means no penalty (the ratio is taken as zero).
    """
    if counts.negotiations == 0:
        return 0.0
    if not 0 <= counts.negations <= counts.negotiations:
        raise CostError("negation count exceeds negotiation count")
    return float(gain) * counts.negations / counts.negotiations


def record_negotiation(ledger: PreferenceLedger, candidate_id: str,
                       action: str, outcome: str) -> NegotiationCounts:
    """Register one negotiation round for the exact candidate (combinations
    keep their own entries, separate from their members')."""
    return ledger.record(candidate_id, action, outcome)


def calibrate_gains(cost_table: Mapping[str, Mapping[str, float]]
                    ) -> dict[str, float]:
    """Gain per table row: the row's maximum base cost.

    Used for both the availability gain (per worker) and the preference gain
    (per candidate), keeping all cost terms in the same numeric range.
    """
    gains: dict[str, float] = {}
    for row_id, row in cost_table.items():
        if not row:
            raise CostError(f"{row_id!r} has no feasible actions; gain undefined")
        gains[row_id] = float(max(row.values()))
    return gains


def _norm(vec: Iterable[float]) -> float:
    return math.sqrt(sum(float(x) * float(x) for x in vec))


def _delta(a: Sequence[float], b: Sequence[float]) -> list[float]:
    return [float(x) - float(y) for x, y in zip(a, b)]


@dataclass
class DistanceContext:
    """Geometry for the distance-augmented cost metric.

    ``robot_gain`` scales the inverse human-to-action distance added to robot
    candidates (keep the robot away from where the human stands);
    ``pair_gain`` scales the human-to-robot distance added to collaborative
    candidates (collaborate when already close).  ``guard`` keeps the inverse
    term finite when the human stands exactly on the action spot.
    """

    human_position: Sequence[float] = (0.0, 0.0, 0.0)
    robot_position: Sequence[float] = (0.0, 0.0, 0.0)
    action_positions: dict[str, Sequence[float]] = field(default_factory=dict)
    robot_gain: float = 20.0
    pair_gain: float = 35.0
    guard: float = DEFAULT_DISTANCE_GUARD

    def __post_init__(self) -> None:
        if self.guard <= 0:
            raise CostError("distance guard must be positive")
        if self.robot_gain <= 0 or self.pair_gain <= 0:
            raise CostError("distance gains must be positive")

    def update_human(self, position: Sequence[float]) -> None:
        self.human_position = tuple(float(x) for x in position)

    def update_robot(self, position: Sequence[float]) -> None:
        self.robot_position = tuple(float(x) for x in position)

    def human_to_action(self, action: str) -> float:
        pos = self.action_positions.get(action)
        if pos is None:
            return _norm(_delta(self.robot_position, self.human_position))
        return _norm(_delta(pos, self.human_position))

    def human_to_robot(self) -> float:
        return _norm(_delta(self.robot_position, self.human_position))


def candidate_kind(candidate: Candidate,
                   worker_types: Mapping[str, str]) -> str:
    """Classify a candidate for the distance metric branches."""
    kinds = {worker_types[m] for m in candidate.members}
    if kinds == {"human"}:
        return "human"
    if kinds == {"robot"}:
        return "robot"
    return "pair"


def distance_cost(context: DistanceContext, kind: str, base: float,
                  action: str) -> float:
    """Distance-augmented cost of one (candidate, action) pair.

    Humans keep the base cost.  Robot candidates pay the base plus an inverse
    human-to-action distance term, diverging as the human approaches the
    action's location.  Mixed human-robot candidates pay the base plus a term
    growing linearly with the human-to-robot separation.
    """
    if kind == "human":
        return float(base)
    if kind == "robot":
        return float(base) + context.robot_gain / (
            context.human_to_action(action) + context.guard)
    if kind == "pair":
        return float(base) + context.pair_gain * context.human_to_robot()
    raise CostError(f"unknown candidate kind {kind!r}")


class CostModel:
    """Assembles the solver inputs from the current team state.

    ``base_table`` maps candidate id -> {action id: cost}; a missing entry
    means the pair is infeasible.  Worker availability gains and candidate
    preference gains default to the calibrated row maxima.
    """

    def __init__(self,
                 base_table: Mapping[str, Mapping[str, float]],
                 worker_types: Mapping[str, str],
                 *,
                 metric: str = DURATION_METRIC,
                 availability_mode: str = REMAINING_TIME,
                 availability_gains: Optional[Mapping[str, float]] = None,
                 preference_gains: Optional[Mapping[str, float]] = None,
                 distance: Optional[DistanceContext] = None) -> None:
        if metric not in (DURATION_METRIC, DISTANCE_METRIC):
            raise CostError(f"unknown cost metric {metric!r}")
        if metric == DISTANCE_METRIC and distance is None:
            distance = DistanceContext()
        self.base_table = {k: dict(v) for k, v in base_table.items()}
        self.worker_types = dict(worker_types)
        self.metric = metric
        self.availability_mode = availability_mode
        self.distance = distance
        self.ledger = PreferenceLedger()
        calibrated = calibrate_gains(self.base_table)
        self.availability_gains = dict(availability_gains) if availability_gains \
            else {w: g for w, g in calibrated.items() if w in worker_types}
        self.preference_gains = dict(preference_gains) if preference_gains \
            else calibrated
        for worker in self.worker_types:
            if worker not in self.availability_gains and worker in self.base_table:
                self.availability_gains[worker] = calibrated[worker]

    def duration(self, candidate_id: str, action: str) -> float:
        """Nominal execution time of an action by a candidate."""
        try:
            return float(self.base_table[candidate_id][action])
        except KeyError:
            raise CostError(
                f"candidate {candidate_id!r} cannot execute {action!r}") from None

    def cost_table(self, candidates: Iterable[Candidate]) -> dict[str, dict[str, float]]:
        """Current base-cost rows (distance terms applied when enabled)."""
        if self.metric == DURATION_METRIC:
            return {c.id: dict(self.base_table.get(c.id, {})) for c in candidates}
        table: dict[str, dict[str, float]] = {}
        for cand in candidates:
            row = self.base_table.get(cand.id, {})
            kind = candidate_kind(cand, self.worker_types)
            table[cand.id] = {
                action: distance_cost(self.distance, kind, base, action)
                for action, base in row.items()}
        return table

    def availability_map(self, states: Mapping[str, WorkerAvailability]
                         ) -> dict[str, float]:
        out = {}
        for worker, state in states.items():
            gain = self.availability_gains.get(worker, 0.0)
            out[worker] = availability_cost(state, gain, self.availability_mode)
        return out

    def preference_map(self) -> dict[tuple[str, str], float]:
        out = {}
        for (cand, action), counts in self.ledger.items():
            gain = self.preference_gains.get(cand, 0.0)
            psi = preference_cost(counts, gain)
            if psi > 0:
                out[(cand, action)] = psi
        return out

    def record_outcome(self, candidate_id: str, action: str, outcome: str
                       ) -> NegotiationCounts:
        return record_negotiation(self.ledger, candidate_id, action, outcome)
