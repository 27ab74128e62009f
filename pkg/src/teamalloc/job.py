"""Job documents: the plan, the roster, cost tables and run configuration.

A job document is a JSON file::

    {
      "name": "...",
      "workers": [{"id": "h", "type": "human", "console": true}, ...],
      "actions": [
        {"id": "a1", "label": "Move J1 in S1", "collaborative": false,
         "costs": {"h": 19, "r": 28}, "position": [0.8, 0.6, 0.0]},
        ...
      ],
      "structure": {"sequence": ["a1", {"parallel": ["a2", "a3"]}]},
      "allocation": {"mode": "collaborative", "max_combo": 2,
                      "count_epsilon": "n1_only"},
      "cost_model": {"metric": "duration", "availability": "remaining_time",
                      "robot_gain": 20, "pair_gain": 35,
                      "distance_guard": 0.001,
                      "human_position": [2.2, 0, 0],
                      "robot_position": [0, 0, 0]}
    }

Cost rows may name single workers or canonical pairs ("h+r"); a missing
entry means the candidate cannot execute the action.  Validation reports
every problem with its field path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .allocator.candidates import PAIR_SEP
from .costs import (BINARY, DISTANCE_METRIC, DURATION_METRIC, REMAINING_TIME,
                    CostModel, DistanceContext)
from .nodes import PRIMITIVES

VARIANTS = ("collab-mt", "coop-mt", "coop-st")


class JobValidationError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid job document:\n  " + "\n  ".join(errors))


@dataclass
class Worker:
    id: str
    type: str
    console: bool = False


@dataclass
class JobAction:
    id: str
    label: str = ""
    collaborative: bool = False
    costs: dict[str, float] = field(default_factory=dict)
    position: Optional[tuple[float, float, float]] = None
    program: Optional[tuple[str, ...]] = None
    collab_program: Optional[tuple[str, ...]] = None


@dataclass
class Group:
    kind: str                       # "sequence" | "parallel"
    items: list[Union["Group", str]]

    def leaf_actions(self) -> list[str]:
        out: list[str] = []
        for item in self.items:
            if isinstance(item, str):
                out.append(item)
            else:
                out.extend(item.leaf_actions())
        return out


@dataclass
class Job:
    name: str
    workers: list[Worker]
    actions: list[JobAction]
    structure: Group
    allocation_mode: str = "collaborative"
    max_combo: int = 2
    epsilon_mode: str = "n1_only"
    cost_metric: str = DURATION_METRIC
    availability_mode: str = REMAINING_TIME
    availability_gains: Optional[dict[str, float]] = None
    preference_gains: Optional[dict[str, float]] = None
    robot_gain: float = 20.0
    pair_gain: float = 35.0
    distance_guard: float = 1e-3
    human_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    robot_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    notes: str = ""

    @property
    def worker_ids(self) -> list[str]:
        return [w.id for w in self.workers]

    @property
    def action_ids(self) -> list[str]:
        return [a.id for a in self.actions]

    def worker_types(self) -> dict[str, str]:
        return {w.id: w.type for w in self.workers}

    def action(self, action_id: str) -> JobAction:
        return self._by_id[action_id]

    def __post_init__(self) -> None:
        self._by_id = {a.id: a for a in self.actions}

    def labels(self) -> dict[str, str]:
        return {a.id: (a.label or a.id) for a in self.actions}

    def collaborative_enabled(self) -> set[str]:
        return {a.id for a in self.actions if a.collaborative}

    def cost_table(self) -> dict[str, dict[str, float]]:
        """Rows keyed by candidate id: {action id: base cost}."""
        rows: dict[str, dict[str, float]] = {}
        for action in self.actions:
            for cand, value in action.costs.items():
                rows.setdefault(cand, {})[action.id] = float(value)
        return rows

    def action_positions(self) -> dict[str, tuple[float, float, float]]:
        return {a.id: a.position for a in self.actions if a.position is not None}

    def robot_programs(self) -> dict[str, tuple[str, ...]]:
        return {a.id: a.program for a in self.actions if a.program is not None}

    def collab_programs(self) -> dict[str, tuple[str, ...]]:
        return {a.id: a.collab_program for a in self.actions
                if a.collab_program is not None}

    def build_cost_model(self) -> CostModel:
        distance = None
        if self.cost_metric == DISTANCE_METRIC:
            distance = DistanceContext(
                human_position=self.human_position,
                robot_position=self.robot_position,
                action_positions=dict(self.action_positions()),
                robot_gain=self.robot_gain, pair_gain=self.pair_gain,
                guard=self.distance_guard)
        return CostModel(
            self.cost_table(), self.worker_types(),
            metric=self.cost_metric,
            availability_mode=self.availability_mode,
            availability_gains=self.availability_gains,
            preference_gains=self.preference_gains,
            distance=distance)


def _canonical_candidate(key: str, roster: list[str],
                         errors: list[str], path: str) -> Optional[str]:
    if PAIR_SEP not in key:
        if key not in roster:
            errors.append(f"{path}: unknown worker {key!r}")
            return None
        return key
    parts = key.split(PAIR_SEP)
    if len(parts) != len(set(parts)) or not all(p in roster for p in parts):
        errors.append(f"{path}: unknown or duplicate workers in pair {key!r}")
        return None
    ordered = sorted(parts, key=roster.index)
    return PAIR_SEP.join(ordered)


def _parse_structure(raw, errors: list[str], path: str) -> Union[Group, str, None]:
    if isinstance(raw, str):
        return raw
    if isinstance(raw, dict) and len(raw) == 1:
        kind, items = next(iter(raw.items()))
        if kind not in ("sequence", "parallel"):
            errors.append(f"{path}: unknown group kind {kind!r}")
            return None
        if not isinstance(items, list) or not items:
            errors.append(f"{path}.{kind}: group must be a non-empty list")
            return None
        parsed = [_parse_structure(item, errors, f"{path}.{kind}[{i}]")
                  for i, item in enumerate(items)]
        if any(p is None for p in parsed):
            return None
        return Group(kind, parsed)
    errors.append(f"{path}: expected an action id or a single-key group object")
    return None


def load_job(source: Union[str, Path, dict]) -> Job:
    """Parse and validate a job document; raises JobValidationError with one
    line per problem."""
    name_hint = "job"
    if isinstance(source, (str, Path)):
        path = Path(source)
        name_hint = path.stem
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise JobValidationError([f"file not found: {path}"])
        except json.JSONDecodeError as exc:
            raise JobValidationError([f"invalid JSON: {exc}"])
    else:
        raw = source
    if not isinstance(raw, dict) or not raw:
        raise JobValidationError(["document is empty or not an object"])

    errors: list[str] = []
    workers: list[Worker] = []
    roster: list[str] = []
    for i, entry in enumerate(raw.get("workers", [])):
        path = f"workers[{i}]"
        wid = entry.get("id")
        wtype = entry.get("type")
        if not wid or not isinstance(wid, str):
            errors.append(f"{path}.id: missing worker id")
            continue
        if PAIR_SEP in wid:
            errors.append(f"{path}.id: {PAIR_SEP!r} is reserved for pair ids")
            continue
        if wid in roster:
            errors.append(f"{path}.id: duplicate worker {wid!r}")
            continue
        if wtype not in ("human", "robot"):
            errors.append(f"{path}.type: must be 'human' or 'robot', got {wtype!r}")
            continue
        workers.append(Worker(wid, wtype, bool(entry.get("console", False))))
        roster.append(wid)
    if not workers:
        errors.append("workers: at least one worker is required")

    actions: list[JobAction] = []
    seen_actions: set[str] = set()
    for i, entry in enumerate(raw.get("actions", [])):
        path = f"actions[{i}]"
        aid = entry.get("id")
        if not aid or not isinstance(aid, str):
            errors.append(f"{path}.id: missing action id")
            continue
        if aid in seen_actions:
            errors.append(f"{path}.id: duplicate action {aid!r}")
            continue
        seen_actions.add(aid)
        collaborative = bool(entry.get("collaborative", False))
        costs: dict[str, float] = {}
        raw_costs = entry.get("costs", {})
        if not isinstance(raw_costs, dict):
            errors.append(f"{path}.costs: must be an object")
            raw_costs = {}
        for key, value in raw_costs.items():
            cand = _canonical_candidate(key, roster, errors, f"{path}.costs.{key}")
            if cand is None:
                continue
            if not isinstance(value, (int, float)) or value < 0:
                errors.append(f"{path}.costs.{key}: cost must be a number >= 0")
                continue
            if PAIR_SEP in cand and not collaborative:
                errors.append(f"{path}.costs.{key}: pair cost on an action "
                              f"not enabled as collaborative")
                continue
            costs[cand] = float(value)
        if not costs:
            errors.append(f"{path}: action {aid!r} has no feasible candidate")
        position = entry.get("position")
        if position is not None:
            if (not isinstance(position, list) or len(position) != 3
                    or not all(isinstance(x, (int, float)) for x in position)):
                errors.append(f"{path}.position: expected [x, y, z]")
                position = None
            else:
                position = tuple(float(x) for x in position)
        program = entry.get("program")
        collab_program = entry.get("collab_program")
        for label, prog in (("program", program), ("collab_program", collab_program)):
            if prog is not None:
                bad = [p for p in prog if p not in PRIMITIVES]
                if bad:
                    errors.append(f"{path}.{label}: unknown primitive(s) {bad}")
        actions.append(JobAction(
            id=aid, label=str(entry.get("label", "")),
            collaborative=collaborative, costs=costs, position=position,
            program=tuple(program) if program is not None else None,
            collab_program=(tuple(collab_program)
                            if collab_program is not None else None)))
    if not actions:
        errors.append("actions: at least one action is required")

    structure = None
    if "structure" not in raw:
        errors.append("structure: missing")
    else:
        parsed = _parse_structure(raw["structure"], errors, "structure")
        if isinstance(parsed, str):
            parsed = Group("sequence", [parsed])
        structure = parsed
    if structure is not None:
        leaves = structure.leaf_actions()
        for leaf in leaves:
            if leaf not in seen_actions:
                errors.append(f"structure: unknown action {leaf!r}")
        if len(leaves) != len(set(leaves)):
            errors.append("structure: an action is referenced more than once")
        missing = seen_actions - set(leaves)
        if missing:
            errors.append(f"structure: action(s) never referenced: "
                          f"{sorted(missing)}")

    alloc = raw.get("allocation", {})
    mode = alloc.get("mode", "collaborative")
    if mode not in ("collaborative", "cooperative"):
        errors.append(f"allocation.mode: unknown mode {mode!r}")
    epsilon_mode = alloc.get("count_epsilon", "n1_only")
    if epsilon_mode not in ("n1_only", "always"):
        errors.append(f"allocation.count_epsilon: must be 'n1_only' or 'always'")
    max_combo = alloc.get("max_combo", 2)
    if max_combo not in (1, 2):
        errors.append("allocation.max_combo: must be 1 or 2")

    cm = raw.get("cost_model", {})
    metric = cm.get("metric", DURATION_METRIC)
    if metric not in (DURATION_METRIC, DISTANCE_METRIC):
        errors.append(f"cost_model.metric: unknown metric {metric!r}")
    availability = cm.get("availability", REMAINING_TIME)
    if availability not in (BINARY, REMAINING_TIME):
        errors.append("cost_model.availability: must be 'binary' or "
                      "'remaining_time'")

    if errors:
        raise JobValidationError(errors)

    def _vec(key, default):
        v = cm.get(key)
        return tuple(float(x) for x in v) if v else default

    return Job(
        name=str(raw.get("name", name_hint)),
        workers=workers, actions=actions, structure=structure,
        allocation_mode=mode, max_combo=int(max_combo),
        epsilon_mode=epsilon_mode, cost_metric=metric,
        availability_mode=availability,
        availability_gains=cm.get("availability_gains"),
        preference_gains=cm.get("preference_gains"),
        robot_gain=float(cm.get("robot_gain", 20.0)),
        pair_gain=float(cm.get("pair_gain", 35.0)),
        distance_guard=float(cm.get("distance_guard", 1e-3)),
        human_position=_vec("human_position", (0.0, 0.0, 0.0)),
        robot_position=_vec("robot_position", (0.0, 0.0, 0.0)),
        notes=str(raw.get("notes", "")))


def job_to_dict(job: Job) -> dict:
    """Inverse of load_job, for generated plans and round-trips."""

    def group_to_raw(group: Group):
        return {group.kind: [item if isinstance(item, str) else group_to_raw(item)
                             for item in group.items]}

    doc = {
        "name": job.name,
        "workers": [{"id": w.id, "type": w.type, "console": w.console}
                    for w in job.workers],
        "actions": [],
        "structure": group_to_raw(job.structure),
        "allocation": {"mode": job.allocation_mode, "max_combo": job.max_combo,
                       "count_epsilon": job.epsilon_mode},
        "cost_model": {"metric": job.cost_metric,
                       "availability": job.availability_mode,
                       "robot_gain": job.robot_gain,
                       "pair_gain": job.pair_gain,
                       "distance_guard": job.distance_guard,
                       "human_position": list(job.human_position),
                       "robot_position": list(job.robot_position)},
    }
    if job.notes:
        doc["notes"] = job.notes
    for action in job.actions:
        entry = {"id": action.id, "label": action.label,
                 "collaborative": action.collaborative,
                 "costs": dict(action.costs)}
        if action.position is not None:
            entry["position"] = list(action.position)
        if action.program is not None:
            entry["program"] = list(action.program)
        if action.collab_program is not None:
            entry["collab_program"] = list(action.collab_program)
        doc["actions"].append(entry)
    return doc
