"""Negotiation gateways and the robot execution backend.

The tree's communication nodes talk to human workers through a small
contract: ``send_request`` / ``send_completion_query`` hand work out,
``poll_response`` reports {pending | accepted | rejected | completed}, and
``cancel`` withdraws an offer whose allocation moved on.  Two gateways
implement it: a simulated one driven by per-worker answer policies on the
virtual clock, and a session-backed one fed by the HTTP service.  The mixed
gateway routes each worker to one or the other.

Robot work goes through ``RobotBackend``: primitives are submitted one at a
time and complete on the clock; a configured fault makes the affected
primitive fail, which the tree surfaces as an action Failure.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

log = logging.getLogger("teamalloc.gateway")

PENDING = "pending"
ACCEPTED = "accepted"
REJECTED = "rejected"
COMPLETED = "completed"

_request_ids = itertools.count(1)


@dataclass
class Request:
    id: str
    worker: str
    action: str
    candidate: str
    collaborative: bool
    phase: str                     # "decision" | "completion"
    instruction: str = ""
    state: str = PENDING


class Scheduler:
    """Due-time ordered callbacks, driven by the runtime's clock."""

    def __init__(self) -> None:
        self._items: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = itertools.count()

    def at(self, due: float, callback: Callable[[], None]) -> None:
        self._items.append((due, next(self._seq), callback))
        self._items.sort(key=lambda item: (item[0], item[1]))

    def next_due(self) -> Optional[float]:
        return self._items[0][0] if self._items else None

    def run_due(self, now: float) -> int:
        fired = 0
        while self._items and self._items[0][0] <= now + 1e-12:
            _, _, callback = self._items.pop(0)
            callback()
            fired += 1
        return fired


@dataclass
class AnswerPolicy:
    """How a simulated human responds to offers.

    ``reject`` holds action ids to turn down; each is rejected at most
    ``reject_times`` times, then accepted.  ``reject_probability`` adds
    seeded random refusals on top (0 disables).
    """

    reject: set[str] = field(default_factory=set)
    reject_times: int = 1
    reject_probability: float = 0.0
    decision_delay: float = 0.0

    def decide(self, action: str, history: dict[str, int], rng) -> str:
        count = history.get(action, 0)
        if action in self.reject and count < self.reject_times:
            return REJECTED
        if self.reject_probability > 0 and rng is not None \
                and rng.random() < self.reject_probability:
            return REJECTED
        return ACCEPTED


class SimGateway:
    """Policy-driven gateway for simulated humans.

    Decisions arrive after the policy's delay (at least one tick later);
    completion confirmations arrive when the simulated execution time has
    elapsed.
    """

    def __init__(self, scheduler: Scheduler, clock,
                 policies: dict[str, AnswerPolicy],
                 duration_of: Callable[[str, str], float],
                 rng=None,
                 on_event: Callable = None) -> None:
        self.scheduler = scheduler
        self.clock = clock
        self.policies = policies
        self.duration_of = duration_of
        self.rng = rng
        self.on_event = on_event or (lambda kind, **payload: None)
        self.requests: dict[str, Request] = {}
        self._reject_history: dict[tuple[str, str], int] = {}

    def _new_request(self, worker: str, action: str, candidate: str,
                     collaborative: bool, phase: str, instruction: str) -> Request:
        req = Request(id=f"req-{next(_request_ids)}", worker=worker,
                      action=action, candidate=candidate,
                      collaborative=collaborative, phase=phase,
                      instruction=instruction)
        self.requests[req.id] = req
        return req

    def send_request(self, worker: str, action: str, candidate: str,
                     collaborative: bool, instruction: str = "") -> str:
        req = self._new_request(worker, action, candidate, collaborative,
                                "decision", instruction)
        policy = self.policies.get(worker, AnswerPolicy())
        history = {a: n for (w, a), n in self._reject_history.items() if w == worker}
        outcome = policy.decide(action, history, self.rng)
        if outcome == REJECTED:
            key = (worker, action)
            self._reject_history[key] = self._reject_history.get(key, 0) + 1

        def deliver(req_id=req.id, outcome=outcome):
            request = self.requests.get(req_id)
            if request is None or request.state != PENDING:
                log.warning("response for expired request %s ignored", req_id)
                return
            request.state = outcome
            self.on_event("decision", worker=request.worker,
                          action=request.action, request=req_id,
                          decision=outcome)

        self.scheduler.at(self.clock.now + max(policy.decision_delay, 0.0), deliver)
        return req.id

    def send_completion_query(self, worker: str, action: str, candidate: str,
                              instruction: str = "") -> str:
        req = self._new_request(worker, action, candidate, False,
                                "completion", instruction)
        duration = self.duration_of(candidate, action)

        def deliver(req_id=req.id):
            request = self.requests.get(req_id)
            if request is None or request.state != PENDING:
                log.warning("completion for expired request %s ignored", req_id)
                return
            request.state = COMPLETED
            self.on_event("completion", worker=request.worker,
                          action=request.action, request=req_id)

        self.scheduler.at(self.clock.now + duration, deliver)
        return req.id

    def poll_response(self, request_id: str) -> str:
        req = self.requests.get(request_id)
        if req is None:
            log.warning("poll of unknown request %s", request_id)
            return PENDING
        return req.state

    def cancel(self, request_id: str) -> None:
        req = self.requests.get(request_id)
        if req is not None and req.state == PENDING:
            req.state = "cancelled"


class SessionGateway:
    """Gateway backed by per-worker sessions the HTTP service exposes.

    ``send_*`` set the session's single pending request; the service enqueues
    worker decisions into the runtime inbox, and the runtime calls
    ``resolve`` on the tick thread.  At most one pending request per worker
    is allowed at any time.
    """

    def __init__(self, on_push: Callable = None,
                 on_event: Callable = None) -> None:
        self.requests: dict[str, Request] = {}
        self.pending_by_worker: dict[str, str] = {}
        self.on_push = on_push or (lambda worker, request: None)
        self.on_event = on_event or (lambda kind, **payload: None)

    def _new_request(self, worker: str, action: str, candidate: str,
                     collaborative: bool, phase: str, instruction: str) -> Request:
        if worker in self.pending_by_worker:
            stale = self.pending_by_worker[worker]
            if self.requests[stale].state == PENDING:
                raise RuntimeError(
                    f"worker {worker} already holds pending request {stale}")
        req = Request(id=f"req-{next(_request_ids)}", worker=worker,
                      action=action, candidate=candidate,
                      collaborative=collaborative, phase=phase,
                      instruction=instruction)
        self.requests[req.id] = req
        self.pending_by_worker[worker] = req.id
        self.on_push(worker, req)
        return req

    def send_request(self, worker: str, action: str, candidate: str,
                     collaborative: bool, instruction: str = "") -> str:
        return self._new_request(worker, action, candidate, collaborative,
                                 "decision", instruction).id

    def send_completion_query(self, worker: str, action: str, candidate: str,
                              instruction: str = "") -> str:
        return self._new_request(worker, action, candidate, False,
                                 "completion", instruction).id

    def pending_for(self, worker: str) -> Optional[Request]:
        req_id = self.pending_by_worker.get(worker)
        if req_id is None:
            return None
        req = self.requests[req_id]
        return req if req.state == PENDING else None

    def resolve(self, worker: str, request_id: str, outcome: str) -> str:
        """Apply a worker response on the tick thread.

        Returns "ok", "duplicate" (same terminal outcome already recorded)
        or "stale" (unknown/expired id, or outcome conflict).
        """
        req = self.requests.get(request_id)
        if req is None or req.worker != worker:
            log.warning("response for unknown request %s from %s ignored",
                        request_id, worker)
            return "stale"
        if req.state == outcome:
            return "duplicate"
        if req.state != PENDING:
            log.warning("response for settled request %s ignored", request_id)
            return "stale"
        req.state = outcome
        if self.pending_by_worker.get(worker) == request_id:
            del self.pending_by_worker[worker]
        self.on_event("decision" if req.phase == "decision" else "completion",
                      worker=worker, action=req.action, request=request_id,
                      decision=outcome)
        return "ok"

    def poll_response(self, request_id: str) -> str:
        req = self.requests.get(request_id)
        if req is None:
            log.warning("poll of unknown request %s", request_id)
            return PENDING
        return req.state

    def cancel(self, request_id: str) -> None:
        req = self.requests.get(request_id)
        if req is not None and req.state == PENDING:
            req.state = "cancelled"
            if self.pending_by_worker.get(req.worker) == request_id:
                del self.pending_by_worker[req.worker]
            self.on_push(req.worker, None)


class MixedGateway:
    """Routes workers to a live session gateway or the simulated one."""

    def __init__(self, live: SessionGateway, sim: SimGateway,
                 live_workers: set[str]) -> None:
        self.live = live
        self.sim = sim
        self.live_workers = live_workers
        self._owner: dict[str, object] = {}

    def _route(self, worker: str):
        return self.live if worker in self.live_workers else self.sim

    def send_request(self, worker, action, candidate, collaborative,
                     instruction="") -> str:
        gw = self._route(worker)
        rid = gw.send_request(worker, action, candidate, collaborative, instruction)
        self._owner[rid] = gw
        return rid

    def send_completion_query(self, worker, action, candidate,
                              instruction="") -> str:
        gw = self._route(worker)
        rid = gw.send_completion_query(worker, action, candidate, instruction)
        self._owner[rid] = gw
        return rid

    def poll_response(self, request_id: str) -> str:
        gw = self._owner.get(request_id)
        return gw.poll_response(request_id) if gw else PENDING

    def cancel(self, request_id: str) -> None:
        gw = self._owner.get(request_id)
        if gw:
            gw.cancel(request_id)


@dataclass
class PrimitiveHandle:
    id: str
    action: str
    primitive: str
    state: str = "running"         # running | done | fault


class RobotBackend:
    """Simulated execution backend for robot primitives.

    Each submitted primitive completes after its share of the action's
    duration.  ``fault_at`` maps an action id to a zero-based primitive index
    that fails instead of completing.
    """

    def __init__(self, scheduler: Scheduler, clock,
                 fault_at: Optional[dict[str, int]] = None) -> None:
        self.scheduler = scheduler
        self.clock = clock
        self.fault_at = fault_at or {}
        self.handles: dict[str, PrimitiveHandle] = {}
        self._seq = itertools.count(1)

    def submit(self, action: str, primitive: str, index: int,
               duration: float) -> str:
        handle = PrimitiveHandle(id=f"prim-{next(self._seq)}", action=action,
                                 primitive=primitive)
        self.handles[handle.id] = handle
        if self.fault_at.get(action) == index:
            handle.state = "fault"
            return handle.id

        def finish(hid=handle.id):
            h = self.handles.get(hid)
            if h is not None and h.state == "running":
                h.state = "done"

        self.scheduler.at(self.clock.now + max(duration, 0.0), finish)
        return handle.id

    def poll(self, handle_id: str) -> str:
        handle = self.handles.get(handle_id)
        return handle.state if handle else "fault"
