"""Behaviour of the custom allocation nodes, driven tick by tick."""

import pytest

from teamalloc.allocator import build_candidates
from teamalloc.board import (AgentRecord, AllocationBoard,
                             AllocationInfeasible, LogicFault, TeamContext,
                             put_team)
from teamalloc.bt import FAILURE, RUNNING, SUCCESS, Blackboard
from teamalloc.costs import CostModel
from teamalloc.gateways import AnswerPolicy, RobotBackend, Scheduler, SimGateway
from teamalloc.nodes import (ActionCompletedNode, AgentHandlerNode,
                             AllocatorManagerNode, CollaborativeHandlerNode,
                             CollaborativeRobotActionNode,
                             HumanCommunicationNode, RejectionPendingNode,
                             RobotActionNode, RoleAllocatorNode,
                             build_helper_subtree, compile_plan)
from teamalloc.runtime import VirtualClock


class Harness:
    def __init__(self, worker_types, costs, actions, collaborative=(),
                 policies=None, fault_at=None, epsilon_mode="always"):
        self.clock = VirtualClock(100.0)
        self.scheduler = Scheduler()
        self.events = []
        workers = list(worker_types)
        self.candidates = build_candidates(workers, max_combo=2)
        self.model = CostModel(costs, worker_types)
        self.board = AllocationBoard()
        self.agents = {w: AgentRecord(w, worker_types[w]) for w in workers}
        self.gateway = SimGateway(self.scheduler, self.clock, policies or {},
                                  duration_of=self.model.duration,
                                  on_event=self.emit)
        self.backend = RobotBackend(self.scheduler, self.clock, fault_at)
        self.team = TeamContext(
            board=self.board, agents=self.agents, candidates=self.candidates,
            cost_model=self.model, gateway=self.gateway,
            robot_backend=self.backend, clock=self.clock,
            action_order={a: i for i, a in enumerate(actions)},
            collaborative_enabled=set(collaborative),
            allocation_mode="collaborative", epsilon_mode=epsilon_mode,
            emit=self.emit)
        self.bb = Blackboard()
        put_team(self.bb, self.team)

    def emit(self, kind, **payload):
        self.events.append((kind, payload))

    def step(self, node):
        """Deliver due responses, tick the node once, advance the clock."""
        self.scheduler.run_due(self.clock.now)
        status = node.tick(self.bb)
        self.clock.advance()
        return status

    def kinds(self):
        return [k for k, _ in self.events]


def two_worker_harness(**kw):
    return Harness({"h": "human", "r": "robot"},
                   {"h": {"a1": 10.0, "a2": 8.0},
                    "r": {"a1": 12.0, "a2": 6.0},
                    "h+r": {"a1": 7.0}},
                   ["a1", "a2"], collaborative=["a1"], **kw)


class TestRoleAllocator:
    def test_empty_set_only_ticks_child(self):
        h = two_worker_harness()
        child = AllocatorManagerNode("a1", build_helper_subtree("a1"))
        node = RoleAllocatorNode(child)
        assert h.step(node) is RUNNING
        assert "allocation" not in h.kinds()  # nothing registered yet
        assert h.step(node) is RUNNING
        assert "allocation" in h.kinds()      # registered on the first pass

    def test_child_failure_propagates(self):
        h = two_worker_harness(fault_at={"a2": 0})
        # drive only a2 (robot-cheapest) so the backend fault surfaces
        h_actions = AllocatorManagerNode("a2", build_helper_subtree("a2"))
        node = RoleAllocatorNode(h_actions)
        statuses = [h.step(node) for _ in range(6)]
        assert FAILURE in statuses

    def test_infeasible_allocation_raises(self):
        h = Harness({"w1": "robot"}, {"w1": {"a1": 5.0}}, ["a1", "a2"])
        h.board.register("a2")  # no candidate can execute a2
        node = RoleAllocatorNode(
            AllocatorManagerNode("a2", build_helper_subtree("a2")))
        with pytest.raises(AllocationInfeasible) as err:
            h.step(node)
        assert "a2" in str(err.value)


class TestAllocatorManager:
    def test_unallocated_action_registers_and_runs(self):
        h = two_worker_harness()
        node = AllocatorManagerNode("a1", build_helper_subtree("a1"))
        assert h.step(node) is RUNNING
        assert "a1" in h.board.to_allocate

    def test_busy_candidate_blocks_the_child(self):
        h = two_worker_harness()
        h.board.register("a1")
        h.board.write_allocation(["a1"], {"a1": "h"})
        h.agents["h"].occupy("other", "h", 10.0)
        node = AllocatorManagerNode("a1", build_helper_subtree("a1"))
        assert h.step(node) is RUNNING
        assert "request" not in h.kinds()  # helper never ticked

    def test_success_with_rejection_flag_waits_for_reallocation(self):
        h = two_worker_harness()
        h.board.register("a1")
        h.board.write_allocation(["a1"], {"a1": "h"})
        h.board.rejected.add("a1")
        node = AllocatorManagerNode("a1", RejectionPendingNode("a1"))
        assert h.step(node) is RUNNING
        assert "a1" not in h.board.rejected          # flag erased
        assert h.board.candidate_for("a1") is None   # stale assignment dropped
        assert "a1" not in h.board.completed

    def test_completion_is_sticky(self):
        h = two_worker_harness()
        h.board.register("a2")
        h.board.write_allocation(["a2"], {"a2": "r"})
        node = AllocatorManagerNode("a2", build_helper_subtree("a2"))
        statuses = []
        for _ in range(int(6.0 * h.clock.frequency) + 10):
            statuses.append(h.step(node))
            if statuses[-1] is SUCCESS:
                break
        assert statuses[-1] is SUCCESS
        assert "a2" in h.board.completed
        assert h.step(node) is SUCCESS  # no re-execution
        executed = [p for k, p in h.events if k == "executed"]
        assert len(executed) == 1


class TestAgentHandler:
    def test_robot_only_succeeds(self):
        h = two_worker_harness()
        h.board.write_allocation(["a1"], {"a1": "r"})
        assert AgentHandlerNode("a1").tick(h.bb) is SUCCESS

    def test_human_fails(self):
        h = two_worker_harness()
        h.board.write_allocation(["a1"], {"a1": "h"})
        assert AgentHandlerNode("a1").tick(h.bb) is FAILURE

    def test_pair_fails(self):
        h = two_worker_harness()
        h.board.write_allocation(["a1"], {"a1": "h+r"})
        assert AgentHandlerNode("a1").tick(h.bb) is FAILURE

    def test_unallocated_is_a_logic_fault(self):
        h = two_worker_harness()
        with pytest.raises(LogicFault):
            AgentHandlerNode("a1").tick(h.bb)


class TestHumanCommunication:
    def test_robot_only_candidate_fails_over(self):
        h = two_worker_harness()
        h.board.write_allocation(["a1"], {"a1": "r"})
        assert HumanCommunicationNode("a1").tick(h.bb) is FAILURE

    def test_offer_reserves_and_pins(self):
        h = two_worker_harness()
        h.board.register("a1")
        h.board.write_allocation(["a1"], {"a1": "h"})
        node = HumanCommunicationNode("a1")
        assert h.step(node) is RUNNING
        assert not h.agents["h"].available
        assert "a1" not in h.board.to_allocate  # pinned while negotiating
        assert h.gateway.requests  # offer out

    def test_accept_erases_and_succeeds(self):
        h = two_worker_harness()
        h.board.register("a1")
        h.board.write_allocation(["a1"], {"a1": "h"})
        node = HumanCommunicationNode("a1")
        assert h.step(node) is RUNNING
        assert h.step(node) is SUCCESS
        assert "a1" not in h.board.to_allocate
        counts = h.model.ledger.counts("h", "a1")
        assert (counts.negations, counts.negotiations) == (0, 1)

    def test_reject_records_and_releases(self):
        h = two_worker_harness(policies={"h": AnswerPolicy(reject={"a1"})})
        h.board.register("a1")
        h.board.write_allocation(["a1"], {"a1": "h"})
        node = HumanCommunicationNode("a1")
        assert h.step(node) is RUNNING
        assert h.step(node) is FAILURE
        assert h.agents["h"].available
        assert "a1" in h.board.rejected
        assert "a1" in h.board.to_allocate
        counts = h.model.ledger.counts("h", "a1")
        assert (counts.negations, counts.negotiations) == (1, 1)
        assert "preference" in h.kinds()

    def test_no_response_keeps_running(self):
        h = two_worker_harness(
            policies={"h": AnswerPolicy(decision_delay=1.0)})
        h.board.register("a1")
        h.board.write_allocation(["a1"], {"a1": "h"})
        node = HumanCommunicationNode("a1")
        statuses = {h.step(node) for _ in range(5)}
        assert statuses == {RUNNING}

    def test_pair_offer_goes_to_the_human_only(self):
        h = two_worker_harness()
        h.board.register("a1")
        h.board.write_allocation(["a1"], {"a1": "h+r"})
        node = HumanCommunicationNode("a1")
        h.step(node)
        assert len(h.gateway.requests) == 1
        req = next(iter(h.gateway.requests.values()))
        assert req.worker == "h" and req.collaborative
        assert not h.agents["r"].available  # the robot half is reserved too


class TestCollaborativeHandler:
    def test_pair_succeeds_single_fails(self):
        h = two_worker_harness()
        h.board.write_allocation(["a1"], {"a1": "h+r"})
        assert CollaborativeHandlerNode("a1").tick(h.bb) is SUCCESS
        h.board.write_allocation(["a1"], {"a1": "h"})
        assert CollaborativeHandlerNode("a1").tick(h.bb) is FAILURE
        h.board.write_allocation(["a1"], {"a1": "r"})
        assert CollaborativeHandlerNode("a1").tick(h.bb) is FAILURE


class TestActionCompleted:
    def test_running_until_confirmation_then_release(self):
        h = two_worker_harness()
        h.board.write_allocation(["a1"], {"a1": "h"})
        h.agents["h"].occupy("a1", "h", 10.0)
        node = ActionCompletedNode("a1")
        status = h.step(node)
        assert status is RUNNING
        # confirmation arrives after the simulated execution time (10 s)
        for _ in range(int(10.0 * h.clock.frequency) + 2):
            h.scheduler.run_due(h.clock.now)
            status = node.tick(h.bb)
            if status is SUCCESS:
                break
            h.clock.advance()
        assert status is SUCCESS
        assert h.agents["h"].available
        executed = [p for k, p in h.events if k == "executed"]
        assert len(executed) == 1
        entry = executed[0]
        assert entry["end"] - entry["start"] == pytest.approx(10.0, abs=1e-9)

    def test_pair_completion_frees_both_members(self):
        h = two_worker_harness()
        h.board.write_allocation(["a1"], {"a1": "h+r"})
        h.agents["h"].occupy("a1", "h+r", 7.0)
        h.agents["r"].occupy("a1", "h+r", 7.0)
        node = ActionCompletedNode("a1")
        assert h.step(node) is RUNNING
        for _ in range(int(7.0 * h.clock.frequency) + 2):
            h.scheduler.run_due(h.clock.now)
            if node.tick(h.bb) is SUCCESS:
                break
            h.clock.advance()
        assert h.agents["h"].available and h.agents["r"].available


class TestRobotAction:
    def test_program_runs_to_completion(self):
        h = two_worker_harness()
        h.board.register("a2")
        h.board.write_allocation(["a2"], {"a2": "r"})
        node = RobotActionNode("a2")
        status = h.step(node)
        submitted = [hd.primitive for hd in h.backend.handles.values()]
        assert status is RUNNING and submitted == ["MOVE"]
        # r's cost for a2 is 6 s over four primitives
        for _ in range(int(6.0 * h.clock.frequency) + 4):
            h.scheduler.run_due(h.clock.now)
            status = node.tick(h.bb)
            if status is SUCCESS:
                break
            h.clock.advance()
        assert status is SUCCESS
        assert [hd.primitive for hd in h.backend.handles.values()] == \
            ["MOVE", "GRASP", "MOVE", "RELEASE"]
        assert h.agents["r"].available

    def test_empty_program_succeeds_immediately(self):
        h = two_worker_harness()
        h.team.robot_programs["a2"] = ()
        h.board.write_allocation(["a2"], {"a2": "r"})
        assert RobotActionNode("a2").tick(h.bb) is SUCCESS

    def test_backend_fault_fails_the_action(self):
        h = two_worker_harness(fault_at={"a2": 1})
        h.board.register("a2")
        h.board.write_allocation(["a2"], {"a2": "r"})
        node = RobotActionNode("a2")
        status = RUNNING
        for _ in range(int(6.0 * h.clock.frequency) + 4):
            h.scheduler.run_due(h.clock.now)
            status = node.tick(h.bb)
            if status is not RUNNING:
                break
            h.clock.advance()
        assert status is FAILURE
        assert any(k == "robot_fault" for k in h.kinds())


class TestHelperSubtree:
    CUSTOM = (AgentHandlerNode, HumanCommunicationNode,
              CollaborativeHandlerNode, ActionCompletedNode,
              CollaborativeRobotActionNode, RejectionPendingNode)

    def test_exactly_one_node_of_each_custom_kind(self):
        tree = build_helper_subtree("a1")
        for node_type in self.CUSTOM:
            found = [n for n in tree.iter_nodes()
                     if type(n) is node_type]
            assert len(found) == 1, node_type
        robots = [n for n in tree.iter_nodes() if type(n) is RobotActionNode]
        assert len(robots) == 1

    def test_two_actions_get_disjoint_subtrees(self):
        t1 = build_helper_subtree("a1")
        t2 = build_helper_subtree("a2")
        assert {id(n) for n in t1.iter_nodes()}.isdisjoint(
            {id(n) for n in t2.iter_nodes()})

    def test_rejection_surfaces_as_success_for_the_manager(self):
        h = two_worker_harness(policies={"h": AnswerPolicy(reject={"a1"})})
        h.board.register("a1")
        h.board.write_allocation(["a1"], {"a1": "h"})
        tree = build_helper_subtree("a1")
        assert h.step(tree) is RUNNING      # offer out
        assert h.step(tree) is SUCCESS      # rejection absorbed
        assert "a1" in h.board.rejected


class TestCompilePlan:
    def test_single_action_plan_shape(self, simulated_job):
        from teamalloc.job import Group
        root = compile_plan(Group("sequence", ["x"]), ["x"])
        assert root.kind == "root"
        allocator = root.children[0]
        assert allocator.kind == "role-allocator"
        managers = [n for n in root.iter_nodes()
                    if isinstance(n, AllocatorManagerNode)]
        assert len(managers) == 1
        depth = 0
        node = root
        while node.children:
            node = node.children[0]
            depth += 1
        assert depth >= 3

    def test_sequence_with_parallel_group(self):
        from teamalloc.job import Group
        plan = Group("sequence", ["a", Group("parallel", ["b", "c"])])
        root = compile_plan(plan, ["a", "b", "c"])
        task = root.children[0].children[0]
        assert task.kind == "sequence"
        par = task.children[1]
        assert par.kind == "parallel"
        assert par.success_threshold == 2

    def test_thirteen_action_job_has_thirteen_managers(self, simulated_job):
        root = compile_plan(simulated_job.structure, simulated_job.action_ids)
        managers = [n for n in root.iter_nodes()
                    if isinstance(n, AllocatorManagerNode)]
        assert len(managers) == 13

    def test_duplicate_names_rejected(self):
        from teamalloc.job import Group
        from teamalloc.nodes import PlanError
        with pytest.raises(PlanError):
            compile_plan(Group("sequence", ["a", "a"]), ["a", "a"])

    def test_empty_plan_rejected(self):
        from teamalloc.job import Group
        from teamalloc.nodes import PlanError
        with pytest.raises(PlanError):
            compile_plan(Group("sequence", []), [])
