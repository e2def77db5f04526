import heapq
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from dynrealloc.adversary import gen_lower_bound, gen_non_generic, lower_bound_certificate
from dynrealloc.geometry import Interval
from dynrealloc.oracle import (
    OracleLimitError,
    earliest_fit,
    mp_feasible,
    mp_solutions,
    oracle_feasible,
    oracle_max_slack,
    oracle_min_realloc,
    oracle_solution,
)
from dynrealloc.ordering import Allocation, Instance, Task, is_valid


def inst(*windows, lengths=None):
    return Instance.from_windows(windows, lengths)


def edf_feasible(windows) -> bool:
    """Unit tasks on integer windows: earliest deadline first over integer times."""
    jobs = sorted(windows)
    heap, i, t = [], 0, 0
    while i < len(jobs) or heap:
        if not heap:
            t = max(t, jobs[i][0])
        while i < len(jobs) and jobs[i][0] <= t:
            heapq.heappush(heap, jobs[i][1])
            i += 1
        deadline = heapq.heappop(heap)
        if t + 1 > deadline:
            return False
        t += 1
    return True


class TestFeasible:
    def test_one_unit_window_holds_one_task(self):
        assert oracle_feasible(inst((0, 1)))
        assert not oracle_feasible(inst((0, 1), (0, 1)))

    def test_nested_windows(self):
        # not a chain, so this goes through the exhaustive search
        i = inst((0, 4), (1, 2), (2, 3), (0, 1))
        assert oracle_feasible(i)
        assert not oracle_feasible(i.with_task(Task("x", Interval(1, 3))))

    def test_unaligned_nine_tasks_threshold(self):
        # the short window pins one slot; the best factor is 109/4, just under 28
        i = inst(*([(1, 255)] * 8 + [(82, 110)]))
        assert oracle_feasible(i, F(109, 4))
        assert not oracle_feasible(i, 28)
        assert oracle_max_slack(i).gamma_lower == F(109, 4)

    def test_fixed_obstacles(self):
        assert oracle_feasible(inst((0, 3)), fixed=[Interval(0, 1), Interval(2, 3)])
        assert not oracle_feasible(inst((0, 3)), fixed=[Interval(F(1, 2), F(3, 2)), Interval(2, 3)])

    def test_witness_is_valid(self):
        i = inst((0, 5), (1, 3), (0, 2), (3, 5), lengths=[1, 1, F(1, 2), 2])
        sol = oracle_solution(i)
        assert sol is not None and is_valid(i, sol, complete=True)

    def test_limit(self):
        i = inst(*([(0, 100)] * 5 + [(1, 2)] * 3))
        with pytest.raises(OracleLimitError):
            oracle_feasible(i, limit=4)


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(1, 4)).map(lambda p: (p[0], p[0] + p[1])), min_size=1, max_size=7))
@settings(max_examples=250, deadline=None)
def test_agrees_with_earliest_deadline_first(windows):
    assert oracle_feasible(inst(*windows)) == edf_feasible(windows)


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(1, 5)).map(lambda p: (p[0], p[0] + p[1])), min_size=1, max_size=5))
@settings(max_examples=80, deadline=None)
def test_feasibility_is_monotone_in_gamma(windows):
    i = inst(*windows)
    seen_false = False
    for g in (F(1), F(5, 4), F(3, 2), F(2), F(3)):
        ok = oracle_feasible(i, g)
        assert not (ok and seen_false)
        seen_false |= not ok


def test_earliest_fit_skips_obstacles():
    obstacles = [Interval(0, 1), Interval(F(3, 2), 2)]
    assert earliest_fit(None, Interval(0, 4), 1, obstacles) == 2
    assert earliest_fit(None, Interval(0, 4), F(1, 2), obstacles) == 1
    assert earliest_fit(3, Interval(0, 4), 2, obstacles) is None


class TestMaxSlack:
    def test_single_window(self):
        rep = oracle_max_slack(inst((0, 3)))
        assert rep.exact and rep.slack_lower == 2

    def test_tight(self):
        rep = oracle_max_slack(inst((0, 2), (0, 2)))
        assert rep.feasible and rep.slack_lower == rep.slack_upper == 0

    def test_lower_bound_state_has_the_advertised_slack(self):
        old, sol = lower_bound_certificate(gen_lower_bound(F(1, 2), 3), F(1, 2))
        assert is_valid(old.scaled(F(3, 2)), sol, complete=True)
        assert oracle_max_slack(old).slack_lower >= F(1, 2)

    def test_mixed_lengths_bracket(self):
        rep = oracle_max_slack(inst((0, 3), (0, 3), lengths=[1, 2]), tolerance=F(1, 64))
        assert rep.slack_lower <= 0 <= rep.slack_upper
        assert rep.slack_upper - rep.slack_lower <= F(1, 64)

    def test_infeasible_reports_negative_slack(self):
        rep = oracle_max_slack(inst((0, 1), (0, 1), (0, 1)))
        assert not rep.feasible and rep.slack_lower == F(-2, 3)


class TestMinRealloc:
    def test_free_gap_needs_nothing(self):
        i = inst((0, 4), (0, 4), (0, 4), (0, 4))
        res = oracle_min_realloc(i, Allocation.of([(0, 1), (1, 2), (2, 3), None]))
        assert res.count == 0 and res.witness[3] == Interval(3, 4)

    def test_lower_bound_state(self):
        state = gen_lower_bound(F(1, 2), 3)
        assert oracle_min_realloc(state.instance, state.allocation).count >= 1

    def test_non_generic_state(self):
        state = gen_non_generic(1, 2)
        assert len(state.instance) == 5
        assert oracle_min_realloc(state.instance, state.allocation).count >= 2

    def test_infeasible_state(self):
        with pytest.raises(ValueError):
            oracle_min_realloc(inst((0, 1), (0, 1)), Allocation.of([(0, 1), None]))

    def test_invalid_start_rejected(self):
        with pytest.raises(ValueError):
            oracle_min_realloc(inst((0, 2), (0, 2)), Allocation.of([(0, 1), (F(1, 2), F(3, 2))]))


@given(st.lists(st.integers(0, 5), min_size=2, max_size=6), st.data())
@settings(max_examples=60, deadline=None)
def test_min_realloc_witness_moves_exactly_count_tasks(starts, data):
    windows = sorted((s, s + 3) for s in starts)
    i = inst(*windows)
    sol = oracle_solution(i)
    if sol is None:
        return
    r = data.draw(st.integers(0, len(i) - 1))
    start = sol.replace(r, None)
    res = oracle_min_realloc(i, start)
    assert is_valid(i, res.witness, complete=True)
    moved = [t.id for t, a, b in zip(i.tasks, start.slots, res.witness.slots) if a is not None and a != b]
    assert len(moved) == res.count == len(res.moved)
    # the untouched solution proves zero was optimal exactly when the gap is free
    assert (res.count == 0) == oracle_feasible(Instance((i[r],)), fixed=[s for s in start if s is not None])


class TestMultiprocessor:
    def test_identical_windows(self):
        assert mp_feasible(inst(*([(0, 1)] * 3)), 3)
        assert not mp_feasible(inst(*([(0, 1)] * 4)), 3)

    def test_partitions_cover_each_task_once(self):
        i = inst((0, 2), (0, 2), (0, 2), (1, 3))
        parts = mp_solutions(i, 2)
        assert parts
        for part in parts:
            ids = [tid for group in part for tid in group]
            assert sorted(ids) == sorted(i.ids)
