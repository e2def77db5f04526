import bisect
import random

import pytest
from hypothesis import given, settings, strategies as st

from dynrealloc.idsetrq import Aggregation, IdSetRq, TouchCounter, max_value

SUM = Aggregation(leaf=lambda k, v: v, combine=lambda a, b, _n: a + b, identity=0)

# (max(key - rank), min(key - rank)) with ranks local to the range
def _shift_combine(a, b, left):
    if a is None:
        return b
    if b is None:
        return a
    return (max(a[0], b[0] - left), min(a[1], b[1] - left))


SHIFT = Aggregation(leaf=lambda k, v: (k[0], k[1]), combine=_shift_combine, identity=None)


def build(keys, agg=max_value()):
    t = IdSetRq(agg)
    for k in keys:
        t = t.insert(k, k if not isinstance(k, tuple) else None)
    return t


class TestExamples:
    def test_insert_order(self):
        assert list(build([3, 1, 2]).keys()) == [1, 2, 3]

    def test_delete_is_persistent(self):
        t = build([1, 2, 3])
        u = t.remove(2)
        assert list(u.keys()) == [1, 3]
        assert list(t.keys()) == [1, 2, 3]

    def test_delete_missing_is_identity(self):
        t = build([1, 2, 3])
        assert list(t.remove(9).keys()) == [1, 2, 3]

    def test_update_with_missing_value_deletes(self):
        t = build([1, 2, 3]).update(2)
        assert list(t.keys()) == [1, 3]

    def test_rank_access(self):
        t = build([1, 2, 3])
        assert t.at(0)[:2] == (0, 1)
        assert t.find(3)[0] == 2
        assert t.find(4) is None
        with pytest.raises(IndexError):
            t.at(3)

    def test_range_max(self):
        t = IdSetRq(max_value())
        for k, v in enumerate([5, 1, 7]):
            t = t.insert(k, v)
        assert t.query(0, 2) == 7
        assert t.query(1, 1) == 1
        assert t.query(2, 1) is None
        with pytest.raises(IndexError):
            t.query(0, 3)

    def test_rank_shifted_window_aggregate(self):
        windows = [(0, 3), (1, 4), (2, 5)]
        t = IdSetRq(SHIFT)
        for w in windows:
            t = t.insert(w)
        got = t.query(1, 2)
        want = (max(w[0] - i for i, w in enumerate(windows[1:])), min(w[1] - i for i, w in enumerate(windows[1:])))
        assert got == want == (1, 4)

    def test_empty_is_falsy(self):
        assert not IdSetRq()
        assert len(IdSetRq()) == 0


def test_against_sorted_list_oracle():
    rng = random.Random(7)
    t = IdSetRq(SUM)
    ref: dict = {}
    for step in range(10_000):
        op = rng.random()
        k = rng.randrange(600)
        if op < 0.5:
            v = rng.randrange(-50, 50)
            t = t.insert(k, v)
            ref[k] = v
        elif op < 0.8:
            t = t.remove(k)
            ref.pop(k, None)
        else:
            keys = sorted(ref)
            if keys:
                lo = rng.randrange(len(keys))
                hi = rng.randrange(lo, len(keys))
                assert t.query(lo, hi) == sum(ref[x] for x in keys[lo : hi + 1])
                r = rng.randrange(len(keys))
                assert t.at(r)[1] == keys[r]
            f = t.find(k)
            if k in ref:
                assert f == (bisect.bisect_left(keys, k), k, ref[k])
            else:
                assert f is None
        if step % 1000 == 0:
            t.check()
            assert list(t) == sorted(ref.items())


def test_snapshots_survive_mutation():
    rng = random.Random(3)
    head = IdSetRq(SUM)
    ref: dict = {}
    snaps = []
    for _ in range(100):
        k = rng.randrange(1000)
        head = head.insert(k, k)
        ref[k] = k
        snaps.append((head, dict(ref)))
    for _ in range(1000):
        k = rng.randrange(1000)
        if rng.random() < 0.5:
            head = head.insert(k, -k)
        else:
            head = head.remove(k)
    for snap, expected in snaps:
        assert list(snap) == sorted(expected.items())
        snap.check()


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 60)), max_size=200))
@settings(max_examples=60, deadline=None)
def test_random_scripts_keep_balance(script):
    t = IdSetRq(SUM)
    ref = set()
    for ins, k in script:
        t = t.insert(k, 1) if ins else t.remove(k)
        (ref.add if ins else ref.discard)(k)
    t.check()
    assert list(t.keys()) == sorted(ref)
    if ref:
        assert t.query(0, len(ref) - 1) == len(ref)
        assert t.height() <= 3 * max(1, len(ref)).bit_length() + 2


def test_bisect_with_projection():
    t = build([(1, "a"), (1, "b"), (3, "c")], agg=SHIFT) if False else IdSetRq()
    for k in [(1, "a"), (1, "b"), (3, "c")]:
        t = t.insert(k)
    assert t.bisect_left(1, key=lambda k: k[0]) == 0
    assert t.bisect_right(1, key=lambda k: k[0]) == 2
    assert t.bisect_left(2, key=lambda k: k[0]) == 2


def test_from_sorted_matches_incremental():
    items = [(k, k * k) for k in range(0, 500, 3)]
    a = IdSetRq.from_sorted(items, SUM)
    b = IdSetRq(SUM)
    for k, v in items:
        b = b.insert(k, v)
    a.check()
    assert list(a) == list(b)
    assert a.query(10, 40) == b.query(10, 40)


def _touches_per_op(n: int, rng: random.Random, ops: int = 2000) -> float:
    counter = TouchCounter()
    t = IdSetRq.from_sorted([(2 * k, 1) for k in range(n)], SUM, touches=counter)
    counter.reset()
    for _ in range(ops):
        k = 2 * rng.randrange(n) + 1
        t = t.insert(k, 1)
        lo = rng.randrange(len(t) - 1)
        t.query(lo, min(len(t) - 1, lo + rng.randrange(1, 64)))
        t.find(k)
        t = t.remove(k)
    return counter.count / ops


def test_touch_counts_grow_logarithmically():
    small = _touches_per_op(2**12, random.Random(1))
    large = _touches_per_op(2**16, random.Random(1))
    assert large <= 1.6 * small, (small, large)
