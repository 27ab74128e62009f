"""HTTP service: run lifecycle, worker sessions, live state.

Endpoints (JSON bodies):

* ``POST /runs``                        start a run of the served job
* ``GET  /runs/{run_id}/state``         full snapshot (actions, workers, trace)
* ``GET  /runs/{run_id}/log``           the append-only event log
* ``GET  /workers/{worker_id}/pending`` the worker's pending request, if any
* ``POST /workers/{worker_id}/decision``    accept/reject an offered action
* ``POST /workers/{worker_id}/completion``  confirm an action finished
* ``POST /workers/{worker_id}/position``    update the worker's position
* ``GET  /workers/{worker_id}/events``      server-push stream (SSE)

Handlers never mutate run state directly: decisions and positions are
enqueued and the tick thread applies them, so the tree and board stay
single-threaded.  Stale or unknown request ids get a 409/404 with a distinct
error code; duplicate decisions are acknowledged idempotently.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import time
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel

from ..gateways import PENDING
from ..job import Job
from ..runtime import Runtime


class StartRunRequest(BaseModel):
    mode: Literal["simulated", "live", "mixed"] = "live"
    variant: Optional[Literal["collab-mt", "coop-mt", "coop-st"]] = None
    seed: int = 0
    frequency: float = 100.0
    alert_after: Optional[float] = 120.0   # soft negotiation timeout, seconds


class DecisionRequest(BaseModel):
    request: str
    decision: Literal["accepted", "rejected"]


class CompletionRequest(BaseModel):
    request: str


class PositionRequest(BaseModel):
    position: list[float]


class ServiceState:
    def __init__(self, job: Job, log_dir: Optional[Path] = None) -> None:
        self.job = job
        self.log_dir = Path(log_dir) if log_dir else None
        if self.log_dir:
            self.log_dir.mkdir(parents=True, exist_ok=True)
        self.runs: dict[str, Runtime] = {}
        self.active: Optional[Runtime] = None
        self._push_subscribers: dict[str, list[asyncio.Queue]] = {}
        self._loop: Optional[asyncio.AbstractEventLoop] = None

    def notify(self, worker: str, request) -> None:
        """Wake the worker's SSE subscribers (called from the tick thread)."""
        loop = self._loop
        if loop is None:
            return
        payload = {"kind": "pending", "worker": worker,
                   "request": None if request is None else request.id}
        for q in self._push_subscribers.get(worker, []):
            loop.call_soon_threadsafe(q.put_nowait, payload)


def create_app(job: Job, log_dir: Optional[Path] = None) -> FastAPI:
    from ..allocator import warm_kernel
    warm_kernel()  # compile ahead of the first live allocation

    state = ServiceState(job, log_dir)

    @contextlib.asynccontextmanager
    async def lifespan(_: FastAPI):
        state._loop = asyncio.get_running_loop()
        yield
        for run in state.runs.values():
            run.stop(timeout=1.0)

    app = FastAPI(title="teamalloc scheduler", version="0.1.0",
                  lifespan=lifespan)
    app.state.service = state

    console_dir = Path(__file__).resolve().parents[3] / "frontend" / "dist"

    def _get_run(run_id: str) -> Runtime:
        run = state.runs.get(run_id)
        if run is None:
            raise HTTPException(404, detail={"error": "unknown_run",
                                             "run_id": run_id})
        return run

    def _session_gateway():
        run = state.active
        if run is None or run.session_gateway is None:
            raise HTTPException(409, detail={"error": "no_live_run"})
        return run, run.session_gateway

    @app.post("/runs")
    def start_run(body: StartRunRequest) -> dict:
        if state.active is not None and state.active.verdict == "running":
            raise HTTPException(409, detail={
                "error": "run_in_progress", "run_id": state.active.run_id})
        log_path = None
        run_id = f"run-{int(time.time() * 1000) % 10**10}"
        if state.log_dir:
            log_path = state.log_dir / f"{run_id}.log"
        runtime = Runtime(job, mode=body.mode, variant=body.variant,
                          seed=body.seed, frequency=body.frequency,
                          log_path=log_path, run_id=run_id,
                          alert_after=body.alert_after)
        if runtime.session_gateway is not None:
            runtime.session_gateway.on_push = state.notify
        state.runs[runtime.run_id] = runtime
        state.active = runtime
        if body.mode == "simulated":
            runtime.run_virtual()
        else:
            runtime.start()
        return {"run_id": runtime.run_id, "mode": body.mode,
                "variant": runtime.variant}

    @app.get("/runs/{run_id}/state")
    def run_state(run_id: str) -> dict:
        return _get_run(run_id).snapshot()

    @app.get("/runs/{run_id}/log")
    def run_log(run_id: str) -> PlainTextResponse:
        run = _get_run(run_id)
        lines = [f"{seq},{ts:.6f},{kind},{json.dumps(payload, sort_keys=True)}"
                 for seq, ts, kind, payload in run.log.events]
        return PlainTextResponse("\n".join(lines) + "\n")

    @app.get("/workers/{worker_id}/pending")
    def pending(worker_id: str) -> dict:
        if worker_id not in {w.id for w in job.workers}:
            raise HTTPException(404, detail={"error": "unknown_worker"})
        run, gateway = _session_gateway()
        req = gateway.pending_for(worker_id)
        if req is None:
            return {"pending": None, "run_id": run.run_id}
        return {"pending": {
            "request": req.id, "action": req.action, "phase": req.phase,
            "candidate": req.candidate, "collaborative": req.collaborative,
            "instruction": req.instruction}, "run_id": run.run_id}

    def _resolve(worker_id: str, request_id: str, outcome: str) -> dict:
        run, gateway = _session_gateway()
        req = gateway.requests.get(request_id)
        if req is None or req.worker != worker_id:
            raise HTTPException(404, detail={"error": "unknown_request",
                                             "request": request_id})
        if req.state == outcome:
            return {"status": "duplicate", "request": request_id}
        if req.state != PENDING:
            raise HTTPException(409, detail={"error": "request_settled",
                                             "request": request_id,
                                             "state": req.state})
        if outcome in ("accepted", "rejected"):
            run.post_decision(worker_id, request_id, outcome)
        else:
            run.post_completion(worker_id, request_id)
        return {"status": "ok", "request": request_id}

    @app.post("/workers/{worker_id}/decision")
    def decision(worker_id: str, body: DecisionRequest) -> dict:
        return _resolve(worker_id, body.request, body.decision)

    @app.post("/workers/{worker_id}/completion")
    def completion(worker_id: str, body: CompletionRequest) -> dict:
        return _resolve(worker_id, body.request, "completed")

    @app.post("/workers/{worker_id}/position")
    def position(worker_id: str, body: PositionRequest) -> dict:
        if len(body.position) != 3:
            raise HTTPException(422, detail={"error": "bad_position"})
        run = state.active
        if run is None:
            raise HTTPException(409, detail={"error": "no_live_run"})
        run.post_position(worker_id, body.position)
        return {"status": "ok"}

    @app.get("/workers/{worker_id}/events")
    async def events(worker_id: str) -> StreamingResponse:
        queue: asyncio.Queue = asyncio.Queue()
        state._push_subscribers.setdefault(worker_id, []).append(queue)

        async def stream():
            try:
                yield "event: hello\ndata: {}\n\n"
                while True:
                    try:
                        item = await asyncio.wait_for(queue.get(), timeout=15.0)
                        yield f"event: pending\ndata: {json.dumps(item)}\n\n"
                    except asyncio.TimeoutError:
                        yield "event: ping\ndata: {}\n\n"
            finally:
                state._push_subscribers.get(worker_id, []).remove(queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/")
    def index():
        page = console_dir / "index.html"
        if page.exists():
            return FileResponse(page)
        return {"service": "teamalloc", "job": job.name,
                "workers": [w.id for w in job.workers]}

    @app.get("/console/{path:path}")
    def console_assets(path: str):
        target = (console_dir / path).resolve()
        if not str(target).startswith(str(console_dir.resolve())) \
                or not target.is_file():
            raise HTTPException(404, detail={"error": "not_found"})
        return FileResponse(target)

    return app
