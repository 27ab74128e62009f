"""Custom tree nodes that weave role allocation into the plan.

The compiled tree looks like::

    root
     `- role allocator (decorator, solves the assignment problem)
         `- task structure (the plan's sequence/parallel groups)
             `- one allocation manager per action
                 `- helper subtree (negotiation + execution routing)

The helper subtree routes each allocated action to its executor::

    fallback
     |- sequence                     # human branch
     |   |- human communication     # offer, wait for accept/reject
     |   `- parallel (all must succeed)
     |       |- fallback            # collaborative gate
     |       |   |- inverter(collaborative handler)
     |       |   `- collaborative robot action
     |       `- action completed    # human executes, confirms done
     |- sequence                     # robot branch
     |   |- agent handler           # succeeds only for robot-only teams
     |   `- robot action            # primitive program on the backend
     `- rejection-pending check

The final check turns a just-rejected offer into Success so the manager can
erase the rejection flag and wait for a fresh assignment; a genuine executor
failure still falls out of the fallback as Failure and aborts the run.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence as Seq

import numpy as np

from .allocator import COOPERATIVE, build_candidates, solve
from .allocator.candidates import count_weight
from .allocator.problem import AllocationProblem
from .board import (AllocationBoard, AllocationInfeasible, LogicFault,
                    TeamContext, get_team)
from .bt import (FAILURE, RUNNING, SUCCESS, Action, Blackboard, BtNode,
                 Decorator, Fallback, Inverter, NodeStatus, Parallel,
                 Sequence, validate_tree)
from .costs import DISTANCE_METRIC, WorkerAvailability, candidate_kind
from .gateways import ACCEPTED, COMPLETED, PENDING, REJECTED

log = logging.getLogger("teamalloc.nodes")

PRIMITIVES = ("MOVE", "GRASP", "RELEASE", "SWITCH_CONTROLLER", "WAIT")
DEFAULT_PROGRAM = ("MOVE", "GRASP", "MOVE", "RELEASE")
DEFAULT_COLLAB_PROGRAM = ("MOVE", "GRASP", "SWITCH_CONTROLLER", "WAIT")


class PlanError(ValueError):
    """Invalid plan handed to the compiler."""


def _availability_states(team: TeamContext) -> dict[str, WorkerAvailability]:
    now = team.now()
    out = {}
    for worker, rec in team.agents.items():
        if rec.available:
            out[worker] = WorkerAvailability()
        else:
            elapsed = (now - rec.busy_since) if rec.busy_since is not None else 0.0
            out[worker] = WorkerAvailability(
                available=False, busy_action=rec.busy_action,
                nominal_duration=rec.busy_duration, elapsed=elapsed)
    return out


class _ProblemFactory:
    """Precomputed cost matrices for fast per-tick problem construction.

    The base cost and feasibility of every (candidate, action) pair are
    static for a run (distance terms are applied on top of the cached
    initial costs); each solve only slices the ready columns and adds the
    current availability and preference penalties.
    """

    def __init__(self, team: TeamContext) -> None:
        self.team = team
        model = team.cost_model
        workers = list(team.candidates.base_workers)
        if team.allocation_mode == COOPERATIVE:
            self.candidates = build_candidates(workers, max_combo=1)
        else:
            self.candidates = team.candidates
        cands = self.candidates.candidates
        p = len(cands)
        ordered_actions = sorted(team.action_order,
                                 key=team.action_order.__getitem__)
        self.col = {a: j for j, a in enumerate(ordered_actions)}
        m = len(ordered_actions)
        self.base = np.zeros((p, m))
        self.mask = np.zeros((p, m), dtype=bool)
        for i, cand in enumerate(cands):
            for action, value in model.base_table.get(cand.id, {}).items():
                if cand.is_combination and action not in team.collaborative_enabled:
                    continue
                j = self.col[action]
                self.base[i, j] = float(value)
                self.mask[i, j] = True
        self.members = np.zeros((p, len(workers)), dtype=bool)
        for i, cand in enumerate(cands):
            for idx in cand.member_indexes:
                self.members[i, idx] = True
        self.sizes = np.array([c.size for c in cands], dtype=np.int64)
        self.workers = workers
        if model.metric == DISTANCE_METRIC:
            kinds = [candidate_kind(c, model.worker_types) for c in cands]
            self.robot_rows = np.array([k == "robot" for k in kinds])
            self.pair_rows = np.array([k == "pair" for k in kinds])
        else:
            self.robot_rows = self.pair_rows = None

    def build(self, ready: list[str]) -> AllocationProblem:
        team = self.team
        model = team.cost_model
        cols = np.array([self.col[a] for a in ready], dtype=np.int64)
        base = self.base[:, cols].copy()
        mask = self.mask[:, cols]
        if self.robot_rows is not None:
            distance = model.distance
            to_action = np.array([distance.human_to_action(a) for a in ready])
            base[self.robot_rows] += distance.robot_gain / (to_action
                                                            + distance.guard)
            base[self.pair_rows] += distance.pair_gain * distance.human_to_robot()

        worker_cost = model.availability_map(_availability_states(team))
        avail = np.array([worker_cost[w] for w in self.workers])
        cand_avail = np.where(self.members, avail[None, :], 0.0).max(axis=1)

        pref = np.zeros_like(base)
        ready_col = {a: j for j, a in enumerate(ready)}
        cand_index = {c.id: i for i, c in enumerate(self.candidates.candidates)}
        for (cand_id, action), psi in model.preference_map().items():
            if action in ready_col and cand_id in cand_index:
                pref[cand_index[cand_id], ready_col[action]] = psi

        quota_basis = max(len(ready), 1)
        weights = np.array(
            [count_weight(s, quota_basis, len(self.workers),
                          epsilon_mode=team.epsilon_mode)
             for s in self.sizes], dtype=np.int64)
        problem = AllocationProblem(
            candidates=self.candidates, actions=list(ready), base_cost=base,
            preference=pref, availability=cand_avail, feasible=mask,
            weights=weights, mode=team.allocation_mode,
            epsilon_mode=team.epsilon_mode)
        problem.validate()
        return problem


class RoleAllocatorNode(Decorator):
    """Child of the root; re-solves the assignment over the ready actions.

    Runs the solver whenever actions await allocation (in single-task mode
    only while nothing is executing), publishes the candidate-action pairs on
    the board, then forwards the task structure's status.
    """

    kind = "role-allocator"

    def __init__(self, child: BtNode, node_id: Optional[str] = None) -> None:
        super().__init__(child, node_id)
        self._factory: Optional[_ProblemFactory] = None

    def _tick(self, bb: Blackboard) -> NodeStatus:
        team = get_team(bb)
        board = team.board
        ready = sorted(board.to_allocate, key=team.action_order.__getitem__)
        if ready and not (team.solve_barrier and board.in_flight()):
            # a fresh assignment can only be acted upon when some agent is
            # free, so skip the re-solve while the whole team is occupied
            if any(rec.available for rec in team.agents.values()):
                self._allocate(team, board, ready)
        status = self.child.tick(bb)
        if status is FAILURE:
            return FAILURE
        if status is SUCCESS:
            return SUCCESS
        return RUNNING

    def _allocate(self, team: TeamContext, board: AllocationBoard,
                  ready: list[str]) -> None:
        if self._factory is None:
            self._factory = _ProblemFactory(team)
        problem = self._factory.build(ready)
        solution = solve(problem, kernel=team.kernel)
        if not solution.ok:
            raise AllocationInfeasible(
                f"allocation over {ready} is infeasible: {solution.reason}")
        board.write_allocation(ready, solution.by_action())
        team.emit("allocation", actions=list(ready),
                  assignment=solution.by_action(),
                  objective=solution.objective,
                  solve_time=solution.solve_time,
                  nodes=solution.stats.get("nodes", 0))

    def reset(self) -> None:
        self._factory = None
        super().reset()


class AllocatorManagerNode(Decorator):
    """Per-action gate between the plan structure and the helper subtree.

    Registers its action for allocation until the action is dispatched or
    done, and only ticks the helper while every member of the assigned
    candidate is free or already engaged on this very action.  A Success that
    carries a rejection flag erases the flag and keeps the node Running until
    a new assignment arrives.
    """

    kind = "allocator-manager"

    def __init__(self, action: str, child: BtNode,
                 node_id: Optional[str] = None) -> None:
        super().__init__(child, node_id or f"manage:{action}")
        self.action = action

    def _tick(self, bb: Blackboard) -> NodeStatus:
        team = get_team(bb)
        board = team.board
        if self.action in board.completed:
            return SUCCESS
        board.register(self.action)

        candidate_id = board.candidate_for(self.action)
        if candidate_id is None:
            return RUNNING
        cand = team.candidate(candidate_id)
        engaged = all(
            team.agents[m].available or team.agents[m].busy_action == self.action
            for m in cand.members)
        if not engaged:
            return RUNNING

        status = self.child.tick(bb)
        if status is SUCCESS:
            if self.action in board.rejected:
                board.clear_rejected(self.action)
                board.drop_allocation(self.action)
                self.child.reset()
                return RUNNING
            board.mark_completed(self.action)
            return SUCCESS
        if status is FAILURE:
            return FAILURE
        return RUNNING


class AgentHandlerNode(BtNode):
    """Condition guarding the robot branch: Success only when the assigned
    candidate contains no human."""

    kind = "agent-handler"

    def __init__(self, action: str, node_id: Optional[str] = None) -> None:
        super().__init__(node_id or f"agent-check:{action}")
        self.action = action

    def _tick(self, bb: Blackboard) -> NodeStatus:
        team = get_team(bb)
        candidate_id = team.board.candidate_for(self.action)
        if candidate_id is None:
            raise LogicFault(f"agent handler ticked for unallocated {self.action}")
        humans = team.human_members(candidate_id)
        return FAILURE if humans else SUCCESS


class HumanCommunicationNode(Action):
    """Offers the action to the assigned human(s) and awaits the verdict.

    Sending the offer reserves every member of the candidate and removes the
    action from the allocation set, pinning the assignment for the duration
    of the negotiation.  All human members must accept; one refusal rejects
    the offer for the whole candidate, releases the members, re-registers the
    action and bumps the candidate's preference penalty.
    """

    kind = "human-communication"

    def __init__(self, action: str, node_id: Optional[str] = None) -> None:
        BtNode.__init__(self, node_id or f"comm:{action}")
        self.action = action
        self._requests: Optional[dict[str, str]] = None
        self._candidate: Optional[str] = None

    def _tick(self, bb: Blackboard) -> NodeStatus:
        team = get_team(bb)
        board = team.board
        candidate_id = board.candidate_for(self.action)
        if candidate_id is None:
            raise LogicFault(f"communication ticked for unallocated {self.action}")
        cand = team.candidate(candidate_id)
        humans = team.human_members(candidate_id)
        if not humans:
            return FAILURE  # robot-only assignment: let the robot branch take it

        if self._requests is not None and self._candidate != candidate_id:
            # assignment moved under a pending offer; withdraw and restart
            log.warning("offer for %s superseded (%s -> %s)", self.action,
                        self._candidate, candidate_id)
            self._cancel_pending(team)
            self._requests = None

        if self._requests is None:
            counts = team.cost_model.ledger.counts(candidate_id, self.action)
            if counts.negations:
                # nothing cheaper is available right now, so the refused
                # candidate is asked again at its raised preference cost;
                # there is no termination bound on this loop
                log.warning("re-offering %s to %s after %d refusal(s)",
                            self.action, candidate_id, counts.negations)
            duration = team.duration(candidate_id, self.action)
            for member in cand.members:
                team.agents[member].occupy(self.action, candidate_id, duration)
            board.mark_dispatched(self.action)
            instruction = team.labels.get(self.action, self.action)
            self._candidate = candidate_id
            self._requests = {}
            for member in humans:
                rid = team.gateway.send_request(
                    member, self.action, candidate_id,
                    collaborative=cand.is_combination, instruction=instruction)
                self._requests[member] = rid
                team.emit("request", worker=member, action=self.action,
                          candidate=candidate_id, request=rid,
                          collaborative=cand.is_combination)
            return RUNNING

        states = {m: team.gateway.poll_response(rid)
                  for m, rid in self._requests.items()}
        if any(s == REJECTED for s in states.values()):
            rejecting = [m for m, s in states.items() if s == REJECTED]
            counts = team.cost_model.record_outcome(candidate_id, self.action,
                                                    "rejected")
            team.emit("preference", candidate=candidate_id, action=self.action,
                      negations=counts.negations,
                      negotiations=counts.negotiations)
            self._cancel_pending(team)
            for member in cand.members:
                team.agents[member].release()
            board.mark_rejected(self.action)
            team.emit("rejected", action=self.action, candidate=candidate_id,
                      workers=rejecting, time=team.now())
            self._requests = None
            self._candidate = None
            return FAILURE
        if all(s == ACCEPTED for s in states.values()):
            team.cost_model.record_outcome(candidate_id, self.action, "accepted")
            board.to_allocate.discard(self.action)
            return SUCCESS
        return RUNNING

    def _cancel_pending(self, team: TeamContext) -> None:
        for rid in (self._requests or {}).values():
            if team.gateway.poll_response(rid) == PENDING:
                team.gateway.cancel(rid)

    def reset(self) -> None:
        self._requests = None
        self._candidate = None


class CollaborativeHandlerNode(BtNode):
    """Condition: Success when the assigned candidate is a combination."""

    kind = "collaborative-handler"

    def __init__(self, action: str, node_id: Optional[str] = None) -> None:
        super().__init__(node_id or f"collab-check:{action}")
        self.action = action

    def _tick(self, bb: Blackboard) -> NodeStatus:
        team = get_team(bb)
        candidate_id = team.board.candidate_for(self.action)
        if candidate_id is None:
            raise LogicFault(
                f"collaborative handler ticked for unallocated {self.action}")
        return SUCCESS if team.candidate(candidate_id).is_combination else FAILURE


class ActionCompletedNode(Action):
    """Human-side execution: Running until every human member confirms the
    action is done, then frees the whole candidate."""

    kind = "action-completed"

    def __init__(self, action: str, node_id: Optional[str] = None) -> None:
        BtNode.__init__(self, node_id or f"confirm:{action}")
        self.action = action
        self._queries: Optional[dict[str, str]] = None
        self._started: float = 0.0

    def _tick(self, bb: Blackboard) -> NodeStatus:
        team = get_team(bb)
        candidate_id = team.board.candidate_for(self.action)
        if candidate_id is None:
            raise LogicFault(f"completion ticked for unallocated {self.action}")
        cand = team.candidate(candidate_id)
        humans = team.human_members(candidate_id)
        if not humans:
            raise LogicFault(f"completion node reached without humans on "
                             f"{self.action}")

        if self._queries is None:
            now = team.now()
            self._started = now
            for member in cand.members:
                team.agents[member].start_execution(now)
            instruction = team.labels.get(self.action, self.action)
            self._queries = {}
            for member in humans:
                qid = team.gateway.send_completion_query(
                    member, self.action, candidate_id, instruction=instruction)
                self._queries[member] = qid
            team.emit("exec_start", action=self.action, candidate=candidate_id,
                      start=now)
            return RUNNING

        states = [team.gateway.poll_response(qid)
                  for qid in self._queries.values()]
        if all(s == COMPLETED for s in states):
            for member in cand.members:
                team.agents[member].release()
            team.emit("executed", action=self.action, candidate=candidate_id,
                      start=self._started, end=team.now(), outcome="completed")
            return SUCCESS
        return RUNNING

    def reset(self) -> None:
        self._queries = None
        self._started = 0.0


class RobotActionNode(Action):
    """Autonomous execution: runs the action's primitive program on the
    backend; the program's total time equals the candidate's cost."""

    kind = "robot-action"

    def __init__(self, action: str, node_id: Optional[str] = None) -> None:
        BtNode.__init__(self, node_id or f"robot-exec:{action}")
        self.action = action
        self._program: Optional[tuple] = None
        self._handle: Optional[str] = None
        self._index = 0
        self._started = 0.0
        self._duration = 0.0

    def _tick(self, bb: Blackboard) -> NodeStatus:
        team = get_team(bb)
        board = team.board
        candidate_id = board.candidate_for(self.action)
        if candidate_id is None:
            raise LogicFault(f"robot action ticked for unallocated {self.action}")
        cand = team.candidate(candidate_id)

        if self._program is None:
            program = tuple(team.robot_programs.get(self.action, DEFAULT_PROGRAM))
            now = team.now()
            if not program:
                team.emit("executed", action=self.action, candidate=candidate_id,
                          start=now, end=now, outcome="completed")
                board.mark_dispatched(self.action)
                self._program = ()
                return SUCCESS
            duration = team.duration(candidate_id, self.action)
            for member in cand.members:
                team.agents[member].occupy(self.action, candidate_id, duration)
                team.agents[member].start_execution(now)
            board.mark_dispatched(self.action)
            self._program = program
            self._index = 0
            self._started = now
            self._duration = duration
            team.emit("exec_start", action=self.action, candidate=candidate_id,
                      start=now)
            self._submit_next(team)
            return RUNNING
        if not self._program:
            return SUCCESS

        state = team.robot_backend.poll(self._handle)
        if state == "fault":
            for member in cand.members:
                team.agents[member].release()
            team.emit("robot_fault", action=self.action,
                      primitive=self._program[self._index], index=self._index)
            return FAILURE
        if state == "done":
            self._index += 1
            if self._index >= len(self._program):
                for member in cand.members:
                    team.agents[member].release()
                team.emit("executed", action=self.action, candidate=candidate_id,
                          start=self._started, end=team.now(),
                          outcome="completed")
                return SUCCESS
            self._submit_next(team)
        return RUNNING

    def _submit_next(self, team: TeamContext) -> None:
        # schedule against the absolute target so per-step rounding never
        # drifts the action's total duration
        target_end = self._started + self._duration * (self._index + 1) / len(self._program)
        step = max(target_end - team.now(), 0.0)
        self._handle = team.robot_backend.submit(
            self.action, self._program[self._index], self._index, step)

    def reset(self) -> None:
        self._program = None
        self._handle = None
        self._index = 0
        self._started = 0.0
        self._duration = 0.0


class CollaborativeRobotActionNode(RobotActionNode):
    """Robot side of a collaborative execution.

    Drives only the robot members of the candidate (they were already
    reserved when the offer went out); the human side's completion node owns
    the trace entry and the final release.
    """

    kind = "collaborative-robot-action"

    def __init__(self, action: str, node_id: Optional[str] = None) -> None:
        super().__init__(action, node_id or f"collab-exec:{action}")

    def _tick(self, bb: Blackboard) -> NodeStatus:
        team = get_team(bb)
        candidate_id = team.board.candidate_for(self.action)
        if candidate_id is None:
            raise LogicFault(f"collab robot action ticked for unallocated "
                             f"{self.action}")
        cand = team.candidate(candidate_id)
        robots = [m for m in cand.members if team.agents[m].type == "robot"]
        if not robots:
            return SUCCESS

        if self._program is None:
            program = tuple(team.collab_programs.get(self.action,
                                                     DEFAULT_COLLAB_PROGRAM))
            now = team.now()
            if not program:
                self._program = ()
                return SUCCESS
            for member in robots:
                team.agents[member].start_execution(now)
            self._program = program
            self._index = 0
            self._started = now
            self._duration = team.duration(candidate_id, self.action)
            self._submit_next(team)
            return RUNNING
        if not self._program:
            return SUCCESS

        state = team.robot_backend.poll(self._handle)
        if state == "fault":
            team.emit("robot_fault", action=self.action,
                      primitive=self._program[self._index], index=self._index)
            return FAILURE
        if state == "done":
            self._index += 1
            if self._index >= len(self._program):
                return SUCCESS
            self._submit_next(team)
        return RUNNING


class RejectionPendingNode(BtNode):
    """Last resort of the helper fallback: Success only when the action was
    just rejected, so the manager can absorb the refusal."""

    kind = "rejection-pending"

    def __init__(self, action: str, node_id: Optional[str] = None) -> None:
        super().__init__(node_id or f"reject-pending:{action}")
        self.action = action

    def _tick(self, bb: Blackboard) -> NodeStatus:
        team = get_team(bb)
        return SUCCESS if self.action in team.board.rejected else FAILURE


def build_helper_subtree(action: str) -> BtNode:
    """Negotiation/execution routing for one action, one node of each custom
    kind; see the module docstring for the wiring."""
    human_branch = Sequence([
        HumanCommunicationNode(action),
        Parallel([
            Fallback([
                Inverter(CollaborativeHandlerNode(action),
                         node_id=f"not-collab:{action}"),
                CollaborativeRobotActionNode(action),
            ], node_id=f"collab-gate:{action}"),
            ActionCompletedNode(action),
        ], node_id=f"exec-parallel:{action}"),
    ], node_id=f"human-branch:{action}")
    robot_branch = Sequence([
        AgentHandlerNode(action),
        RobotActionNode(action),
    ], node_id=f"robot-branch:{action}")
    return Fallback([human_branch, robot_branch, RejectionPendingNode(action)],
                    node_id=f"helper:{action}")


class RootNode(Decorator):
    kind = "root"

    def __init__(self, child: BtNode) -> None:
        super().__init__(child, "root")


def compile_structure(structure, counters=None) -> BtNode:
    """Turn a plan structure (nested sequence/parallel groups over action
    ids) into tree nodes, one allocation manager per action."""
    if counters is None:
        counters = {"seq": 0, "par": 0}
    if isinstance(structure, str):
        return AllocatorManagerNode(structure, build_helper_subtree(structure))
    kind = structure.kind
    children = [compile_structure(item, counters) for item in structure.items]
    if not children:
        raise PlanError("empty group in plan structure")
    counters[kind[:3]] += 1
    if kind == "sequence":
        return Sequence(children, node_id=f"seq:{counters['seq']}")
    if kind == "parallel":
        return Parallel(children, node_id=f"par:{counters['par']}")
    raise PlanError(f"unknown group kind {kind!r}")


def compile_plan(structure, action_ids: Seq[str]) -> BtNode:
    """Build root -> role allocator -> task structure for a validated plan."""
    ids = list(action_ids)
    if not ids:
        raise PlanError("plan contains no actions")
    if len(set(ids)) != len(ids):
        raise PlanError("duplicate action names in plan")
    task = compile_structure(structure)
    managed = [n.action for n in task.iter_nodes()
               if isinstance(n, AllocatorManagerNode)]
    if sorted(managed) != sorted(ids):
        raise PlanError("plan structure does not cover the action set exactly")
    root = RootNode(RoleAllocatorNode(task, node_id="role-allocator"))
    validate_tree(root)
    return root
