"""Behavior-tree core: node taxonomy, tick propagation, and the blackboard.

Status semantics follow the usual control-flow table:

* Sequence  -- Success when all children have succeeded, Failure as soon as
  one child fails, Running while a child is Running.
* Fallback  -- Success as soon as one child succeeds, Failure when all fail.
* Parallel  -- with N children and threshold M: Success once >= M children
  have succeeded, Failure once > N - M children have failed, Running else.
* Decorator -- exactly one child, custom logic.
* Condition -- Success/Failure only, never Running.
* Action    -- Running while executing, Success on completion, Failure when
  the work is impossible.

Sequence and Parallel nodes keep *memory*: a child that already succeeded is
not re-ticked on later cycles.  Completed work here maps to physical actions
with irreversible side effects, so re-dispatching is never acceptable.
Fallback keeps memory of failed children for the same reason.  ``reset()``
clears that memory when a subtree must genuinely start over.
"""

from __future__ import annotations

import enum
import itertools
from typing import Callable, Iterator, Optional


class NodeStatus(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    RUNNING = "running"


SUCCESS = NodeStatus.SUCCESS
FAILURE = NodeStatus.FAILURE
RUNNING = NodeStatus.RUNNING


class TreeError(Exception):
    """Structural problem in a tree (raised before any tick)."""


class MissingKeyError(KeyError):
    """Read of a blackboard key that was never written."""


class Blackboard:
    """Typed key/value store shared by the nodes of one tree.

    Keys are namespaced ``(namespace, key)`` pairs; nodes use their own id as
    namespace for private state and a shared namespace for allocation data.
    A read of a never-written key raises :class:`MissingKeyError` -- there is
    deliberately no implicit default.
    """

    def __init__(self) -> None:
        self._entries: dict[tuple[str, str], object] = {}

    def set(self, namespace: str, key: str, value: object) -> None:
        self._entries[(namespace, key)] = value

    def get(self, namespace: str, key: str) -> object:
        try:
            return self._entries[(namespace, key)]
        except KeyError:
            raise MissingKeyError(f"{namespace}/{key} was never written") from None

    def contains(self, namespace: str, key: str) -> bool:
        return (namespace, key) in self._entries

    def peek(self, namespace: str, key: str, default: object = None) -> object:
        return self._entries.get((namespace, key), default)


_node_counter = itertools.count()


class BtNode:
    """Base node.  Subclasses implement :meth:`_tick`."""

    kind = "node"

    def __init__(self, node_id: Optional[str] = None,
                 children: Optional[list["BtNode"]] = None) -> None:
        self.id = node_id or f"{self.kind}:{next(_node_counter)}"
        self.children: list[BtNode] = list(children or [])

    def tick(self, board: Blackboard) -> NodeStatus:
        status = self._tick(board)
        if not isinstance(status, NodeStatus):
            raise TreeError(f"node {self.id} returned {status!r}, not a NodeStatus")
        return status

    def _tick(self, board: Blackboard) -> NodeStatus:
        raise NotImplementedError

    def reset(self) -> None:
        """Clear per-run memory, recursively."""
        for child in self.children:
            child.reset()

    def iter_nodes(self) -> Iterator["BtNode"]:
        yield self
        for child in self.children:
            yield from child.iter_nodes()


class Sequence(BtNode):
    """Ticks children left to right; remembers which ones already succeeded."""

    kind = "sequence"

    def __init__(self, children: list[BtNode], node_id: Optional[str] = None) -> None:
        super().__init__(node_id, children)
        self._next = 0

    def _tick(self, board: Blackboard) -> NodeStatus:
        while self._next < len(self.children):
            status = self.children[self._next].tick(board)
            if status is SUCCESS:
                self._next += 1
                continue
            return status
        return SUCCESS

    def reset(self) -> None:
        self._next = 0
        super().reset()


class Fallback(BtNode):
    """Ticks children left to right; remembers which ones already failed."""

    kind = "fallback"

    def __init__(self, children: list[BtNode], node_id: Optional[str] = None) -> None:
        super().__init__(node_id, children)
        self._next = 0

    def _tick(self, board: Blackboard) -> NodeStatus:
        while self._next < len(self.children):
            status = self.children[self._next].tick(board)
            if status is FAILURE:
                self._next += 1
                continue
            return status
        return FAILURE

    def reset(self) -> None:
        self._next = 0
        super().reset()


class Parallel(BtNode):
    """Ticks all unfinished children each cycle.

    ``success_threshold`` is the number of children (M) that must succeed.
    Defaults to all children: in a job plan every action is mandatory.
    """

    kind = "parallel"

    def __init__(self, children: list[BtNode],
                 success_threshold: Optional[int] = None,
                 node_id: Optional[str] = None) -> None:
        super().__init__(node_id, children)
        self.success_threshold = (len(children) if success_threshold is None
                                  else success_threshold)
        self._done: dict[int, NodeStatus] = {}

    def _tick(self, board: Blackboard) -> NodeStatus:
        for idx, child in enumerate(self.children):
            if idx in self._done:
                continue
            status = child.tick(board)
            if status is not RUNNING:
                self._done[idx] = status
        succeeded = sum(1 for s in self._done.values() if s is SUCCESS)
        failed = sum(1 for s in self._done.values() if s is FAILURE)
        if succeeded >= self.success_threshold:
            return SUCCESS
        if failed > len(self.children) - self.success_threshold:
            return FAILURE
        return RUNNING

    def reset(self) -> None:
        self._done = {}
        super().reset()


class Decorator(BtNode):
    """Single-child node; default behaviour forwards the child status."""

    kind = "decorator"

    def __init__(self, child: BtNode, node_id: Optional[str] = None) -> None:
        super().__init__(node_id, [child])

    @property
    def child(self) -> BtNode:
        return self.children[0]

    def _tick(self, board: Blackboard) -> NodeStatus:
        return self.child.tick(board)


class Inverter(Decorator):
    """Swaps Success and Failure; Running passes through."""

    kind = "inverter"

    def _tick(self, board: Blackboard) -> NodeStatus:
        status = self.child.tick(board)
        if status is SUCCESS:
            return FAILURE
        if status is FAILURE:
            return SUCCESS
        return RUNNING


class Condition(BtNode):
    """Leaf that evaluates a predicate; never returns Running."""

    kind = "condition"

    def __init__(self, predicate: Callable[[Blackboard], bool],
                 node_id: Optional[str] = None) -> None:
        super().__init__(node_id, [])
        self.predicate = predicate

    def _tick(self, board: Blackboard) -> NodeStatus:
        return SUCCESS if self.predicate(board) else FAILURE


class Action(BtNode):
    """Leaf that performs work; the callable returns a NodeStatus."""

    kind = "action"

    def __init__(self, func: Callable[[Blackboard], NodeStatus],
                 node_id: Optional[str] = None) -> None:
        super().__init__(node_id, [])
        self.func = func

    def _tick(self, board: Blackboard) -> NodeStatus:
        return self.func(board)


def validate_tree(root: BtNode) -> None:
    """Check structural invariants before the first tick.

    Raises :class:`TreeError` on: a decorator without exactly one child, a
    leaf (condition/action) with children, a parallel threshold outside
    [1, N], or a node reachable through two different parents (shared
    subtrees / cycles).
    """
    seen: set[int] = set()
    ids: set[str] = set()

    def visit(node: BtNode) -> None:
        if id(node) in seen:
            raise TreeError(f"node {node.id} has more than one parent")
        seen.add(id(node))
        if node.id in ids:
            raise TreeError(f"duplicate node id {node.id!r}")
        ids.add(node.id)
        if isinstance(node, Decorator) and len(node.children) != 1:
            raise TreeError(f"decorator {node.id} has {len(node.children)} children")
        if isinstance(node, (Condition, Action)) and node.children:
            raise TreeError(f"leaf {node.id} has children")
        if isinstance(node, Parallel):
            n = len(node.children)
            if not (1 <= node.success_threshold <= n):
                raise TreeError(
                    f"parallel {node.id}: threshold {node.success_threshold} "
                    f"outside [1, {n}]")
        for child in node.children:
            visit(child)

    visit(root)
