import logging

import pytest

from teamalloc.gateways import (ACCEPTED, PENDING, REJECTED, AnswerPolicy,
                                RobotBackend, Scheduler, SessionGateway,
                                SimGateway)


class FakeClock:
    def __init__(self):
        self.now = 0.0


class TestSessionGateway:
    def test_single_pending_request_per_worker(self):
        gw = SessionGateway()
        rid = gw.send_request("h", "a1", "h", False)
        with pytest.raises(RuntimeError):
            gw.send_request("h", "a2", "h", False)
        assert gw.resolve("h", rid, ACCEPTED) == "ok"
        gw.send_request("h", "a2", "h", False)  # slot free again

    def test_resolution_outcomes(self):
        gw = SessionGateway()
        rid = gw.send_request("h", "a1", "h", False)
        assert gw.resolve("h", rid, ACCEPTED) == "ok"
        assert gw.resolve("h", rid, ACCEPTED) == "duplicate"
        assert gw.resolve("h", rid, REJECTED) == "stale"
        assert gw.resolve("h", "req-nope", ACCEPTED) == "stale"
        assert gw.resolve("other", rid, ACCEPTED) == "stale"

    def test_cancel_clears_the_pending_slot(self):
        gw = SessionGateway()
        rid = gw.send_request("h", "a1", "h", False)
        gw.cancel(rid)
        assert gw.pending_for("h") is None
        assert gw.resolve("h", rid, ACCEPTED) == "stale"


class TestSimGateway:
    def test_expired_request_response_is_ignored_and_logged(self, caplog):
        clock = FakeClock()
        sched = Scheduler()
        gw = SimGateway(sched, clock, {"h": AnswerPolicy(decision_delay=1.0)},
                        duration_of=lambda c, a: 5.0)
        rid = gw.send_request("h", "a1", "h", False)
        gw.cancel(rid)
        clock.now = 2.0
        with caplog.at_level(logging.WARNING, logger="teamalloc.gateway"):
            sched.run_due(clock.now)
        assert gw.poll_response(rid) == "cancelled"
        assert any("expired request" in r.message for r in caplog.records)

    def test_scripted_rejection_budget(self):
        clock = FakeClock()
        sched = Scheduler()
        gw = SimGateway(sched, clock,
                        {"h": AnswerPolicy(reject={"a1"}, reject_times=2)},
                        duration_of=lambda c, a: 5.0)
        outcomes = []
        for _ in range(3):
            rid = gw.send_request("h", "a1", "h", False)
            sched.run_due(clock.now)
            outcomes.append(gw.poll_response(rid))
        assert outcomes == [REJECTED, REJECTED, ACCEPTED]

    def test_unknown_poll_is_pending(self):
        gw = SimGateway(Scheduler(), FakeClock(), {},
                        duration_of=lambda c, a: 1.0)
        assert gw.poll_response("req-unknown") == PENDING


class TestRobotBackend:
    def test_primitive_completion_on_schedule(self):
        clock = FakeClock()
        sched = Scheduler()
        backend = RobotBackend(sched, clock)
        handle = backend.submit("a1", "MOVE", 0, 2.0)
        assert backend.poll(handle) == "running"
        clock.now = 1.9
        sched.run_due(clock.now)
        assert backend.poll(handle) == "running"
        clock.now = 2.0
        sched.run_due(clock.now)
        assert backend.poll(handle) == "done"

    def test_configured_fault(self):
        backend = RobotBackend(Scheduler(), FakeClock(), fault_at={"a1": 1})
        ok = backend.submit("a1", "MOVE", 0, 1.0)
        bad = backend.submit("a1", "GRASP", 1, 1.0)
        assert backend.poll(ok) == "running"
        assert backend.poll(bad) == "fault"
