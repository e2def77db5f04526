from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from dynrealloc.geometry import Interval
from dynrealloc.harness.workloads import random_mp
from dynrealloc.multiproc import (
    LiftError,
    MpAllocation,
    MpSession,
    MultiprocConfig,
    mp_is_valid,
    mp_lift,
    mp_transform,
)
from dynrealloc.oracle import mp_feasible, oracle_feasible
from dynrealloc.ordering import Allocation, Instance, Task, is_valid, leftmost
from dynrealloc.outcome import InsertionFailed


def inst(*windows):
    return Instance.from_windows(windows)


class TestConfig:
    @pytest.mark.parametrize("p,k", [(1, 1), (2, 1), (3, 2), (4, 2), (5, 3)])
    def test_k(self, p, k):
        assert MultiprocConfig(p).k == k

    def test_needs_a_processor(self):
        with pytest.raises(ValueError):
            MultiprocConfig(0)


class TestTransform:
    def test_three_processors(self):
        (t,) = mp_transform(inst((0, 3)), MultiprocConfig(3)).tasks
        assert t.window == Interval(0, F(5, 2)) and t.length == F(1, 2)

    def test_one_processor_is_identity(self):
        i = inst((0, 3), (1, 2))
        assert mp_transform(i, MultiprocConfig(1)) == i

    def test_five_processors(self):
        (t,) = mp_transform(inst((0, 1)), MultiprocConfig(5)).tasks
        assert t.window == Interval(0, F(1, 3)) and t.length == F(1, 3)

    def test_unit_tasks_only(self):
        with pytest.raises(ValueError):
            mp_transform(Instance.from_windows([(0, 3)], [2]), MultiprocConfig(3))


class TestLift:
    def test_first_fit(self):
        cfg = MultiprocConfig(3)
        i = inst((0, 3), (0, 3), (0, 3))
        shrunk = Allocation.of([(0, F(1, 2)), (F(1, 2), 1), (1, F(3, 2))])
        out = mp_lift(i, cfg, shrunk)
        assert [out[t.id] for t in i.tasks] == [
            (0, Interval(0, 1)),
            (1, Interval(F(1, 2), F(3, 2))),
            (0, Interval(1, 2)),
        ]

    def test_single_processor_passthrough(self):
        i = inst((0, 3), (0, 3))
        out = mp_lift(i, MultiprocConfig(1), Allocation.of([(0, 1), (2, 3)]))
        assert dict(out.items()) == {"t0": (0, Interval(0, 1)), "t1": (0, Interval(2, 3))}

    def test_five_abutting(self):
        cfg = MultiprocConfig(3)
        i = inst(*([(0, 4)] * 5))
        shrunk = Allocation.of([(F(j, 2), F(j + 1, 2)) for j in range(5)])
        assert is_valid(mp_transform(i, cfg), shrunk, complete=True)
        out = mp_lift(i, cfg, shrunk)
        ok, msg = mp_is_valid(i, out, 3)
        assert ok, msg
        assert {proc for proc, _ in out.placement.values()} <= {0, 1, 2}

    def test_overlapping_shrunken_slots_trip_the_depth_check(self):
        cfg = MultiprocConfig(3)
        i = inst(*([(0, 4)] * 4))
        bad = Allocation.of([(0, F(1, 2))] * 4)
        with pytest.raises(LiftError):
            mp_lift(i, cfg, bad)


class TestValidity:
    def test_detects_overlap_and_range(self):
        i = inst((0, 2), (0, 2))
        same = MpAllocation({"t0": (0, Interval(0, 1)), "t1": (0, Interval(F(1, 2), F(3, 2)))})
        assert not mp_is_valid(i, same, 2)[0]
        far = MpAllocation({"t0": (0, Interval(0, 1)), "t1": (2, Interval(0, 1))})
        assert not mp_is_valid(i, far, 2)[0]
        good = MpAllocation({"t0": (0, Interval(0, 1)), "t1": (1, Interval(0, 1))})
        assert mp_is_valid(i, good, 2)[0]


windows = st.lists(st.integers(0, 30).map(lambda x: F(x, 2)), min_size=1, max_size=7)


@given(windows, st.sampled_from([3, 5]))
@settings(max_examples=80, deadline=None)
def test_enough_slack_survives_the_shrink(starts, p):
    # slack of at least (p-1)/k on one processor carries over to the shrunken instance
    cfg = MultiprocConfig(p)
    c = 4 * cfg.k
    i = inst(*sorted((s, s + c) for s in starts))
    gamma = 1 + F(p - 1, cfg.k)
    if not leftmost(i.ordered(), gamma).feasible:
        return
    shrunk = mp_transform(i, cfg)
    res = leftmost(shrunk.ordered())
    assert res.feasible
    out = mp_lift(shrunk.ordered(), cfg, res.allocation)
    assert mp_is_valid(i, out, p)[0]


class TestSession:
    def test_single_insert(self):
        s = MpSession(3, c=3)
        out = s.insert(Task("a", Interval(0, 3)))
        assert out.count == 0 and out.processor == 0 and Interval(0, 3).contains(out.slot)

    def test_identical_unit_windows_fail(self):
        p = 3
        assert mp_feasible(inst(*([(0, 1)] * p)), p)
        assert not oracle_feasible(mp_transform(inst(*([(0, 1)] * p)), MultiprocConfig(p)))
        s = MpSession(p, c=1)
        s.insert(Task("t0", Interval(0, 1)))
        with pytest.raises(InsertionFailed):
            s.insert(Task("t1", Interval(0, 1)))
        assert len(s) == 1

    def test_delete_moves_nothing(self):
        s = MpSession(3, c=3)
        for j in range(4):
            s.insert(Task(f"t{j}", Interval(j, j + 3)))
        before = s.allocation.placement
        s.delete("t1")
        after = s.allocation.placement
        assert after == {k: v for k, v in before.items() if k != "t1"}
        assert mp_is_valid(s.instance, s.allocation, 3)[0]

    @pytest.mark.parametrize("p", [2, 3, 5])
    def test_wrapped_stream_stays_valid(self, p):
        c = 4
        seq = random_mp(seed=p, ops=300, c=c, p=p, gamma=F(3, 1) if p == 5 else F(9, 4))
        s = MpSession(p, c=c)
        refused = set()
        for op in seq.ops:
            if op.kind == "insert":
                try:
                    s.insert(op.task)
                except InsertionFailed:
                    refused.add(op.id)
            elif op.id in refused:
                refused.discard(op.id)
            else:
                s.delete(op.id)
            ok, msg = mp_is_valid(s.instance, s.allocation, p)
            assert ok, msg
        assert len(s) > 0
