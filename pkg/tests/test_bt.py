import pytest

from teamalloc.bt import (FAILURE, RUNNING, SUCCESS, Action, Blackboard,
                          Condition, Decorator, Fallback, Inverter,
                          MissingKeyError, Parallel, Sequence, TreeError,
                          validate_tree)


def leaf(status):
    return Action(lambda board: status)


class Script(Action):
    """Action returning a scripted status per tick; records tick order."""

    def __init__(self, statuses, log=None, name=None):
        super().__init__(None, name)
        self.statuses = list(statuses)
        self.calls = 0
        self.log = log if log is not None else []

    def _tick(self, board):
        self.log.append(self.id)
        status = self.statuses[min(self.calls, len(self.statuses) - 1)]
        self.calls += 1
        return status

    def reset(self):
        self.calls = 0


def test_sequence_failure_on_one_child():
    node = Sequence([leaf(SUCCESS), leaf(FAILURE)])
    assert node.tick(Blackboard()) is FAILURE


def test_sequence_running_stops_later_children():
    log = []
    first = Script([RUNNING, SUCCESS], log, "first")
    second = Script([SUCCESS], log, "second")
    node = Sequence([first, second])
    bb = Blackboard()
    assert node.tick(bb) is RUNNING
    assert log == ["first"]
    assert node.tick(bb) is SUCCESS
    assert log == ["first", "first", "second"]


def test_sequence_empty_is_success():
    assert Sequence([]).tick(Blackboard()) is SUCCESS


def test_sequence_memory_never_reticks_succeeded_children():
    log = []
    done = Script([SUCCESS], log, "done")
    slow = Script([RUNNING, RUNNING, SUCCESS], log, "slow")
    node = Sequence([done, slow])
    bb = Blackboard()
    for _ in range(3):
        node.tick(bb)
    assert log.count("done") == 1


def test_fallback_success_on_first_success():
    node = Fallback([leaf(FAILURE), leaf(SUCCESS), leaf(FAILURE)])
    assert node.tick(Blackboard()) is SUCCESS


def test_fallback_failure_when_all_fail():
    node = Fallback([leaf(FAILURE), leaf(FAILURE)])
    assert node.tick(Blackboard()) is FAILURE


@pytest.mark.parametrize("statuses,threshold,expected", [
    ((SUCCESS, SUCCESS, RUNNING), 2, SUCCESS),
    ((SUCCESS, RUNNING, RUNNING), 2, RUNNING),
    ((FAILURE, FAILURE, SUCCESS), 2, FAILURE),
    ((SUCCESS, SUCCESS, SUCCESS), 3, SUCCESS),
    ((FAILURE, SUCCESS, SUCCESS), 3, FAILURE),
])
def test_parallel_thresholds(statuses, threshold, expected):
    node = Parallel([leaf(s) for s in statuses], success_threshold=threshold)
    assert node.tick(Blackboard()) is expected


def test_parallel_memory_keeps_finished_children():
    log = []
    fast = Script([SUCCESS], log, "fast")
    slow = Script([RUNNING, SUCCESS], log, "slow")
    node = Parallel([fast, slow])
    bb = Blackboard()
    assert node.tick(bb) is RUNNING
    assert node.tick(bb) is SUCCESS
    assert log.count("fast") == 1


def test_condition_never_running():
    yes = Condition(lambda board: True)
    no = Condition(lambda board: False)
    assert yes.tick(Blackboard()) is SUCCESS
    assert no.tick(Blackboard()) is FAILURE


def test_inverter():
    bb = Blackboard()
    assert Inverter(leaf(SUCCESS)).tick(bb) is FAILURE
    assert Inverter(leaf(FAILURE)).tick(bb) is SUCCESS
    assert Inverter(leaf(RUNNING)).tick(bb) is RUNNING


def test_tick_determinism_order_and_status():
    def build():
        log = []
        tree = Sequence([
            Script([SUCCESS], log, "a"),
            Fallback([Script([FAILURE], log, "b"), Script([RUNNING], log, "c")]),
        ])
        return tree, log

    t1, log1 = build()
    t2, log2 = build()
    assert t1.tick(Blackboard()) == t2.tick(Blackboard()) == RUNNING
    assert log1 == log2 == ["a", "b", "c"]


def test_validate_rejects_decorator_with_wrong_arity():
    bad = Decorator(leaf(SUCCESS))
    bad.children.append(leaf(SUCCESS))
    with pytest.raises(TreeError):
        validate_tree(bad)


def test_validate_rejects_shared_subtree():
    shared = leaf(SUCCESS)
    with pytest.raises(TreeError):
        validate_tree(Sequence([shared, shared]))


def test_validate_rejects_bad_parallel_threshold():
    node = Parallel([leaf(SUCCESS)], success_threshold=2)
    with pytest.raises(TreeError):
        validate_tree(node)


def test_blackboard_missing_key_is_detectable():
    bb = Blackboard()
    with pytest.raises(MissingKeyError):
        bb.get("ns", "never-written")
    assert not bb.contains("ns", "never-written")
    bb.set("ns", "k", 0)
    assert bb.get("ns", "k") == 0  # a falsy value is still a real value
