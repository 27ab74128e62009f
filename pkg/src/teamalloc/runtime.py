"""Run lifecycle: tick loops, event log, state reconstruction.

One ``Runtime`` owns a compiled tree, the allocation board, the agent records
and the negotiation gateway.  A single logical thread ticks the tree; worker
responses and position updates arrive through a queue drained at the start of
each tick.

Two clocks exist.  The virtual clock advances one tick period per cycle and
is used by the simulator; because every future change is carried by a
scheduled event, the loop may fast-forward across provably idle stretches
without changing any timestamp.  The wall clock drives live runs at the
configured tick frequency.

Everything observable is an event; the run state (action statuses, trace,
makespan) is a pure fold over the event sequence, so replaying a log file
reconstructs the exact final state of the original run.
"""

from __future__ import annotations

import itertools
import json
import math
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .allocator import build_candidates
from .board import (AgentRecord, AllocationBoard, AllocationInfeasible,
                    LogicFault, TeamContext, put_team)
from .bt import RUNNING, SUCCESS, Blackboard, validate_tree
from .gateways import (AnswerPolicy, MixedGateway, RobotBackend, Scheduler,
                       SessionGateway, SimGateway)
from .job import Job, VARIANTS
from .nodes import compile_plan

DEFAULT_FREQUENCY = 100.0


class VirtualClock:
    """Simulated time: ticks advance the clock by one period."""

    def __init__(self, frequency: float = DEFAULT_FREQUENCY) -> None:
        self.frequency = float(frequency)
        self.tick_index = 0

    @property
    def now(self) -> float:
        return self.tick_index / self.frequency

    def advance(self) -> None:
        self.tick_index += 1

    def tick_of(self, when: float) -> int:
        """First tick index at or after an absolute time."""
        return max(int(math.ceil(when * self.frequency - 1e-9)), self.tick_index)

    def jump_to(self, tick_index: int) -> None:
        if tick_index > self.tick_index:
            self.tick_index = tick_index


class WallClock:
    def __init__(self) -> None:
        self._t0 = time.monotonic()

    @property
    def now(self) -> float:
        return time.monotonic() - self._t0


@dataclass
class TraceEntry:
    candidate: str
    action: str
    start: float
    end: float
    outcome: str = "completed"

    def line(self) -> str:
        return (f"{self.candidate},{self.action},"
                f"{self.start:.3f},{self.end:.3f},{self.outcome}")


@dataclass
class Rejection:
    worker: str
    action: str
    time: float


class RunState:
    """Pure fold over the event stream; also the replay engine."""

    def __init__(self) -> None:
        self.run_id: str = ""
        self.job_name: str = ""
        self.variant: str = ""
        self.workers: dict[str, dict] = {}
        self.actions: dict[str, dict] = {}
        self.allocations: dict[str, str] = {}
        self.trace: list[TraceEntry] = []
        self.rejections: list[Rejection] = []
        self.verdict: str = "running"
        self.reason: str = ""
        self.makespan: Optional[float] = None
        self.last_seq = -1
        self.preferences: dict[str, dict] = {}

    def apply(self, seq: int, timestamp: float, kind: str, payload: dict) -> None:
        if seq <= self.last_seq:
            raise ValueError(f"event {seq} out of order (last {self.last_seq})")
        self.last_seq = seq
        if kind == "run_started":
            self.run_id = payload["run_id"]
            self.job_name = payload["job"]
            self.variant = payload["variant"]
            self.workers = {w["id"]: dict(w) for w in payload["workers"]}
            self.actions = {a: {"status": "pending", "candidate": None,
                                "start": None, "end": None}
                            for a in payload["actions"]}
        elif kind == "allocation":
            for action in payload["actions"]:
                candidate = payload["assignment"].get(action)
                info = self.actions[action]
                if candidate is None:
                    self.allocations.pop(action, None)
                    if info["status"] == "allocated":
                        info.update(status="pending", candidate=None)
                else:
                    self.allocations[action] = candidate
                    if info["status"] in ("pending", "allocated"):
                        info.update(status="allocated", candidate=candidate)
        elif kind == "request":
            self.actions[payload["action"]].update(
                status="negotiating", candidate=payload["candidate"])
        elif kind == "exec_start":
            self.actions[payload["action"]].update(
                status="executing", candidate=payload["candidate"],
                start=payload["start"])
        elif kind == "executed":
            self.actions[payload["action"]].update(
                status="completed", candidate=payload["candidate"],
                start=payload["start"], end=payload["end"])
            self.allocations.pop(payload["action"], None)
            self.trace.append(TraceEntry(payload["candidate"], payload["action"],
                                         payload["start"], payload["end"],
                                         payload.get("outcome", "completed")))
        elif kind == "rejected":
            for worker in payload.get("workers", []):
                self.rejections.append(
                    Rejection(worker, payload["action"], payload["time"]))
            self.actions[payload["action"]].update(status="pending",
                                                   candidate=None)
            self.allocations.pop(payload["action"], None)
        elif kind == "preference":
            key = f'{payload["candidate"]}:{payload["action"]}'
            self.preferences[key] = {"negations": payload["negations"],
                                     "negotiations": payload["negotiations"]}
        elif kind == "run_finished":
            self.verdict = payload["verdict"]
            self.reason = payload.get("reason", "")
            self.makespan = payload.get("makespan")
        # decision/completion/position/robot_fault/alert events carry no
        # state for the snapshot fold

    def snapshot(self) -> dict:
        busy: dict[str, Optional[str]] = {w: None for w in self.workers}
        for action, info in self.actions.items():
            if info["status"] in ("negotiating", "executing"):
                for member in (info["candidate"] or "").split("+"):
                    if member in busy:
                        busy[member] = action
        return {
            "run_id": self.run_id,
            "job": self.job_name,
            "variant": self.variant,
            "verdict": self.verdict,
            "reason": self.reason,
            "makespan": self.makespan,
            "actions": {a: dict(info) for a, info in self.actions.items()},
            "workers": {w: {**info, "busy_action": busy[w],
                            "available": busy[w] is None}
                        for w, info in self.workers.items()},
            "allocations": dict(self.allocations),
            "trace": [entry.line() for entry in self.trace],
            "rejections": [[r.worker, r.action, round(r.time, 6)]
                           for r in self.rejections],
            "preferences": dict(self.preferences),
        }


class EventLog:
    """Append-only run journal: ``seq,timestamp,kind,payload`` per line."""

    def __init__(self, path: Optional[Path] = None) -> None:
        self.path = Path(path) if path else None
        self.events: list[tuple[int, float, str, dict]] = []
        self._seq = itertools.count()
        self._fh = self.path.open("w") if self.path else None

    def append(self, timestamp: float, kind: str, payload: dict) -> tuple:
        event = (next(self._seq), float(timestamp), kind, payload)
        self.events.append(event)
        if self._fh:
            seq, ts, k, p = event
            self._fh.write(f"{seq},{ts:.6f},{k},{json.dumps(p, sort_keys=True)}\n")
            self._fh.flush()
        return event

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None

    @staticmethod
    def parse_line(line: str) -> tuple[int, float, str, dict]:
        seq, timestamp, kind, payload = line.rstrip("\n").split(",", 3)
        return int(seq), float(timestamp), kind, json.loads(payload)


def replay_log(path) -> RunState:
    """Fold a persisted event log back into a final run state."""
    state = RunState()
    with open(path) as fh:
        for line in fh:
            if line.strip():
                state.apply(*EventLog.parse_line(line))
    return state


@dataclass
class RunResult:
    state: RunState
    trace: list[TraceEntry]
    rejections: list[Rejection]
    makespan: float
    verdict: str
    reason: str = ""
    ticks: int = 0
    compute_seconds: float = 0.0
    events: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.verdict == "completed"


def _variant_config(job: Job, variant: Optional[str]) -> tuple[str, str, bool]:
    """(variant name, allocation mode, solve barrier) for a run."""
    if variant is None:
        variant = "collab-mt" if job.allocation_mode == "collaborative" else "coop-mt"
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if variant == "collab-mt":
        return variant, "collaborative", False
    if variant == "coop-mt":
        return variant, "cooperative", False
    return variant, "cooperative", True


_run_ids = itertools.count(1)


class Runtime:
    """One run of one job: tree, board, agents, gateway, event log."""

    def __init__(self, job: Job, *,
                 variant: Optional[str] = None,
                 mode: str = "simulated",
                 seed: int = 0,
                 frequency: float = DEFAULT_FREQUENCY,
                 policies: Optional[dict[str, AnswerPolicy]] = None,
                 fault_at: Optional[dict[str, int]] = None,
                 kernel: str = "auto",
                 fast_forward: bool = True,
                 duration_jitter: float = 0.0,
                 log_path: Optional[Path] = None,
                 run_id: Optional[str] = None,
                 alert_after: Optional[float] = 120.0) -> None:
        if mode not in ("simulated", "live", "mixed"):
            raise ValueError(f"unknown run mode {mode!r}")
        self.job = job
        self.mode = mode
        self.fast_forward = fast_forward and mode == "simulated"
        self.frequency = float(frequency)
        self.run_id = run_id or f"run-{next(_run_ids)}"
        self.variant, alloc_mode, barrier = _variant_config(job, variant)

        self.clock = VirtualClock(frequency) if mode == "simulated" else WallClock()
        self.scheduler = Scheduler()
        self.inbox: "queue.Queue[tuple]" = queue.Queue()
        self.log = EventLog(log_path)
        self.state = RunState()
        self.rng = np.random.default_rng(seed)

        self.cost_model = job.build_cost_model()
        self._jitter = float(duration_jitter)
        self._jittered: dict[tuple[str, str], float] = {}

        workers = job.worker_ids
        self.candidates = build_candidates(workers, max_combo=job.max_combo)
        self.agents = {w.id: AgentRecord(w.id, w.type) for w in job.workers}
        self.board = AllocationBoard()
        self.backend = RobotBackend(self.scheduler, self.clock, fault_at)
        self.session_gateway: Optional[SessionGateway] = None
        gateway = self._build_gateway(policies or {})

        plain_model_duration = self.cost_model.duration

        def duration_of(candidate_id: str, action: str) -> float:
            base = plain_model_duration(candidate_id, action)
            if self._jitter <= 0:
                return base
            key = (candidate_id, action)
            if key not in self._jittered:
                factor = 1.0 + self._jitter * float(self.rng.uniform(-1.0, 1.0))
                self._jittered[key] = base * max(factor, 0.0)
            return self._jittered[key]

        self.duration_of = duration_of
        self.cost_model.duration = duration_of  # agents and gateway share jitter

        self.team = TeamContext(
            board=self.board, agents=self.agents, candidates=self.candidates,
            cost_model=self.cost_model, gateway=gateway,
            robot_backend=self.backend, clock=self.clock,
            action_order={a: i for i, a in enumerate(job.action_ids)},
            collaborative_enabled=job.collaborative_enabled(),
            allocation_mode=alloc_mode, epsilon_mode=job.epsilon_mode,
            kernel=kernel, solve_barrier=barrier, emit=self.emit,
            labels=job.labels(), robot_programs=job.robot_programs(),
            collab_programs=job.collab_programs())

        self.blackboard = Blackboard()
        put_team(self.blackboard, self.team)
        self.tree = compile_plan(job.structure, job.action_ids)
        validate_tree(self.tree)

        self.status = RUNNING
        self.verdict = "running"
        self.reason = ""
        self.ticks = 0
        self.compute_seconds = 0.0
        self.alert_after = alert_after
        self._request_seen: dict[str, float] = {}
        self._alerted: set[str] = set()
        self._lock = threading.Lock()
        self._thread: Optional[threading.Thread] = None
        self._stop = threading.Event()

        self.emit("run_started", run_id=self.run_id, job=job.name,
                  variant=self.variant, mode=mode, seed=seed,
                  frequency=self.frequency,
                  workers=[{"id": w.id, "type": w.type, "console": w.console}
                           for w in job.workers],
                  actions=job.action_ids)

    # -- construction helpers ---------------------------------------------
    def _build_gateway(self, policies: dict[str, AnswerPolicy]):
        sim = SimGateway(self.scheduler, self.clock, policies,
                         duration_of=lambda cand, act: self.duration_of(cand, act),
                         rng=self.rng, on_event=self.emit)
        if self.mode == "simulated":
            return sim
        self.session_gateway = SessionGateway(on_event=self.emit)
        if self.mode == "live":
            live = {w.id for w in self.job.workers if w.type == "human"}
        else:
            live = {w.id for w in self.job.workers
                    if w.type == "human" and w.console}
        return MixedGateway(self.session_gateway, sim, live)

    # -- events -------------------------------------------------------------
    def emit(self, kind: str, **payload) -> None:
        event = self.log.append(self.clock.now, kind, payload)
        self.state.apply(*event)

    # -- external inputs ----------------------------------------------------
    def post_decision(self, worker: str, request_id: str, decision: str) -> None:
        self.inbox.put(("decision", worker, request_id, decision))

    def post_completion(self, worker: str, request_id: str) -> None:
        self.inbox.put(("completion", worker, request_id))

    def post_position(self, worker: str, position) -> None:
        self.inbox.put(("position", worker, tuple(float(x) for x in position)))

    def _drain_inbox(self) -> int:
        handled = 0
        while True:
            try:
                message = self.inbox.get_nowait()
            except queue.Empty:
                return handled
            handled += 1
            kind = message[0]
            if kind == "decision" and self.session_gateway:
                _, worker, request_id, decision = message
                self.session_gateway.resolve(worker, request_id, decision)
            elif kind == "completion" and self.session_gateway:
                _, worker, request_id = message
                self.session_gateway.resolve(worker, request_id, "completed")
            elif kind == "position":
                _, worker, position = message
                self._apply_position(worker, position)

    def _apply_position(self, worker: str, position: tuple) -> None:
        distance = self.cost_model.distance
        if distance is None:
            return
        agent = self.agents.get(worker)
        if agent is None:
            return
        if agent.type == "human":
            distance.update_human(position)
        else:
            distance.update_robot(position)
        self.emit("position", worker=worker, position=list(position))

    def _check_negotiation_alerts(self) -> None:
        """A request left unanswered past the soft timeout raises one
        operator alert event; the system never decides on the worker's
        behalf."""
        if self.alert_after is None or self.session_gateway is None:
            return
        now = self.clock.now
        for worker, request_id in list(self.session_gateway.pending_by_worker.items()):
            first = self._request_seen.setdefault(request_id, now)
            if request_id in self._alerted:
                continue
            if now - first >= self.alert_after:
                self._alerted.add(request_id)
                req = self.session_gateway.requests[request_id]
                self.emit("alert", worker=worker, request=request_id,
                          action=req.action, phase=req.phase,
                          pending_seconds=round(now - first, 3))

    # -- ticking -------------------------------------------------------------
    def _tick_once(self) -> None:
        t0 = time.perf_counter()
        with self._lock:
            self._drain_inbox()
            self.scheduler.run_due(self.clock.now)
            self._check_negotiation_alerts()
            try:
                self.status = self.tree.tick(self.blackboard)
            except (AllocationInfeasible, LogicFault) as exc:
                self.status = None
                self.verdict = "failed"
                self.reason = str(exc)
            self.ticks += 1
            if self.status is SUCCESS:
                self.verdict = "completed"
            elif self.status is not RUNNING and self.verdict == "running":
                self.verdict = "failed"
                self.reason = self.reason or "task structure returned Failure"
        self.compute_seconds += time.perf_counter() - t0

    def _finish(self) -> None:
        makespan = max((e.end for e in self.state.trace), default=0.0)
        self.emit("run_finished", verdict=self.verdict, reason=self.reason,
                  makespan=makespan, ticks=self.ticks,
                  compute_seconds=round(self.compute_seconds, 6))
        self.log.close()

    def run_virtual(self, max_ticks: Optional[int] = None) -> RunResult:
        """Run a simulated job to termination on the virtual clock."""
        if self.mode != "simulated":
            raise RuntimeError("run_virtual requires simulated mode")
        if max_ticks is None:
            total = sum(max(a.costs.values(), default=0.0)
                        for a in self.job.actions)
            max_ticks = int((total + 300.0) * self.frequency) * 3
        idle_streak = 0
        while self.verdict == "running":
            revision_before = self.board.revision
            self._tick_once()
            if self.verdict != "running":
                break
            if self.ticks >= max_ticks:
                self.verdict = "stalled"
                self.reason = f"no termination within {max_ticks} ticks"
                break
            next_due = self.scheduler.next_due()
            quiet = self.board.revision == revision_before
            if quiet and next_due is None:
                idle_streak += 1
                if idle_streak > 3:
                    self.verdict = "stalled"
                    self.reason = ("tree is running but no event is scheduled "
                                   "and the board does not change")
                    break
            else:
                idle_streak = 0
            self.clock.advance()
            if self.fast_forward and quiet and next_due is not None:
                due_tick = self.clock.tick_of(next_due)
                if due_tick > self.clock.tick_index:
                    self.clock.jump_to(due_tick)
        self._finish()
        return self.result()

    def result(self) -> RunResult:
        makespan = max((e.end for e in self.state.trace), default=0.0)
        return RunResult(state=self.state, trace=list(self.state.trace),
                         rejections=list(self.state.rejections),
                         makespan=makespan, verdict=self.verdict,
                         reason=self.reason, ticks=self.ticks,
                         compute_seconds=self.compute_seconds,
                         events=list(self.log.events))

    # -- live loop ------------------------------------------------------------
    def start(self) -> None:
        """Run the tick loop on a background thread (live/mixed modes)."""
        if self._thread is not None:
            return
        period = 1.0 / self.frequency

        def loop() -> None:
            while not self._stop.is_set() and self.verdict == "running":
                started = time.monotonic()
                self._tick_once()
                if self.verdict != "running":
                    break
                remaining = period - (time.monotonic() - started)
                if remaining > 0:
                    self._stop.wait(remaining)
            with self._lock:
                self._finish()

        self._thread = threading.Thread(target=loop, daemon=True,
                                        name=f"tick-{self.run_id}")
        self._thread.start()

    def stop(self, timeout: float = 5.0) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout)

    def snapshot(self) -> dict:
        with self._lock:
            snap = self.state.snapshot()
            snap["ticks"] = self.ticks
            snap["time"] = round(self.clock.now, 6)
            if self.session_gateway is not None:
                pending = {}
                for worker in self.job.worker_ids:
                    req = self.session_gateway.pending_for(worker)
                    if req is not None:
                        pending[worker] = {
                            "request": req.id, "action": req.action,
                            "phase": req.phase, "candidate": req.candidate,
                            "collaborative": req.collaborative,
                            "instruction": req.instruction}
                snap["pending"] = pending
            return snap


def makespan(trace: list[TraceEntry]) -> float:
    """Total completion time: latest end over the trace (0 when empty)."""
    return max((entry.end for entry in trace), default=0.0)
