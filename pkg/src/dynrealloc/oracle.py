"""Exhaustive ground truth for small instances.

Feasibility rests on one observation: in any solution, list the tasks by slot
start and slide each one left as far as its window, the previous task and the
fixed obstacles allow.  The result is still a solution, so it suffices to
search over execution orders with earliest-fit placement.  Orders are explored
as a dynamic program over the *multiset* of tasks already placed (identical
tasks are interchangeable), keeping only the smallest frontier per state.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .geometry import Interval, as_rational
from .ordering import Allocation, Instance, Task, is_valid, leftmost

__all__ = [
    "OracleLimitError",
    "SlackReport",
    "MinReallocResult",
    "feasibility_limit",
    "min_realloc_limit",
    "oracle_feasible",
    "oracle_solution",
    "oracle_max_slack",
    "oracle_min_realloc",
    "oracle_ordered_slots",
    "mp_feasible",
    "mp_solutions",
    "earliest_fit",
]

DEFAULT_FEASIBLE_LIMIT = 10
DEFAULT_MIN_REALLOC_LIMIT = 18
DEFAULT_TOLERANCE = Fraction(1, 2**20)


class OracleLimitError(ValueError):
    """The instance is larger than the configured exhaustive-search cap."""


def _env_limit(default: int) -> int:
    raw = os.environ.get("DYNREALLOC_ORACLE_LIMIT")
    if not raw:
        return default
    return max(int(raw), 0)


def feasibility_limit() -> int:
    return _env_limit(DEFAULT_FEASIBLE_LIMIT)


def min_realloc_limit() -> int:
    return max(_env_limit(DEFAULT_MIN_REALLOC_LIMIT), feasibility_limit())


def earliest_fit(frontier, window: Interval, length, obstacles: Sequence[Interval]) -> Fraction | None:
    """Earliest start ``x >= frontier`` placing ``[x, x+length]`` inside ``window`` clear of obstacles.

    ``obstacles`` must be sorted by start and pairwise disjoint.
    """
    x = window.start if frontier is None else max(frontier, window.start)
    for ob in obstacles:
        if ob.end <= x:
            continue
        if ob.start >= x + length:
            break
        x = ob.end
    if x + length > window.end:
        return None
    return x


def _is_chain(tasks: Sequence[Task]) -> bool:
    """Equal lengths and windows totally ordered by the interval order."""
    if not tasks:
        return True
    length = tasks[0].length
    if any(t.length != length for t in tasks):
        return False
    ws = sorted((t.window for t in tasks), key=lambda w: (w.start, w.end))
    return all(a.end <= b.end for a, b in zip(ws, ws[1:]))


def _search(tasks: Sequence[Task], obstacles: Sequence[Interval], gamma: Fraction, want_witness: bool):
    """Core order-DP.  Returns None if infeasible, else a mapping id -> start (or {} without witness)."""
    classes: dict = {}
    for t in tasks:
        classes.setdefault((t.window.start, t.window.end, t.length), []).append(t)
    keys = sorted(classes)
    caps = tuple(len(classes[k]) for k in keys)
    windows = [Interval(k[0], k[1]) for k in keys]
    lengths = [k[2] * gamma for k in keys]
    obstacles = sorted(obstacles, key=lambda s: (s.start, s.end))
    total = sum(caps)

    # frontier[state] = smallest end reachable; parent for witness reconstruction
    start_state = tuple(0 for _ in keys)
    layer = {start_state: None}
    parent: dict = {}
    for _ in range(total):
        nxt: dict = {}
        for state, frontier in layer.items():
            # a class whose window already closed before the frontier can never be placed
            for c, used in enumerate(state):
                if used == caps[c]:
                    continue
                x = earliest_fit(frontier, windows[c], lengths[c], obstacles)
                if x is None:
                    continue
                end = x + lengths[c]
                ns = state[:c] + (used + 1,) + state[c + 1 :]
                old = nxt.get(ns)
                if old is None or end < old:
                    nxt[ns] = end
                    if want_witness:
                        parent[ns] = (state, c, x)
        if not nxt:
            return None
        # prune: a state that strands some remaining class is dead
        layer = {}
        for state, frontier in nxt.items():
            if all(
                used == caps[c] or earliest_fit(frontier, windows[c], lengths[c], obstacles) is not None
                for c, used in enumerate(state)
            ):
                layer[state] = frontier
        if not layer:
            return None
    if not want_witness:
        return {}
    final = tuple(caps)
    placements = []
    state = final
    while state != start_state:
        prev, c, x = parent[state]
        placements.append((c, x))
        state = prev
    placements.reverse()
    next_member = [0] * len(keys)
    starts = {}
    for c, x in placements:
        task = classes[keys[c]][next_member[c]]
        next_member[c] += 1
        starts[task.id] = x
    return starts


def _check_limit(n: int, limit: int):
    if n > limit:
        raise OracleLimitError(f"{n} tasks exceed the exhaustive-search limit {limit}")


def oracle_solution(
    instance: Instance,
    gamma=1,
    fixed: Iterable[Interval] = (),
    limit: int | None = None,
) -> Allocation | None:
    """A ``gamma``-solution (slots of length ``gamma * length``) avoiding ``fixed``, or None."""
    gamma = as_rational(gamma)
    fixed = list(fixed)
    tasks = list(instance.tasks)
    if not fixed and _is_chain(tasks):
        ordered = instance.ordered()
        res = leftmost(ordered, gamma)
        if not res.feasible:
            return None
        by_id = {t.id: s for t, s in zip(ordered.tasks, res.allocation)}
        return Allocation(tuple(by_id[t.id] for t in tasks))
    _check_limit(len(tasks), feasibility_limit() if limit is None else limit)
    starts = _search(tasks, fixed, gamma, want_witness=True)
    if starts is None:
        return None
    return Allocation(tuple(Interval(starts[t.id], starts[t.id] + t.length * gamma) for t in tasks))


def oracle_feasible(instance: Instance, gamma=1, fixed: Iterable[Interval] = (), limit: int | None = None) -> bool:
    """Exact ``gamma``-feasibility."""
    gamma = as_rational(gamma)
    fixed = list(fixed)
    tasks = list(instance.tasks)
    if not fixed and _is_chain(tasks):
        return leftmost(instance.ordered(), gamma).feasible
    _check_limit(len(tasks), feasibility_limit() if limit is None else limit)
    return _search(tasks, fixed, gamma, want_witness=False) is not None


@dataclass(frozen=True)
class SlackReport:
    feasible: bool
    slack_lower: Fraction
    slack_upper: Fraction

    @property
    def exact(self) -> bool:
        return self.slack_lower == self.slack_upper

    @property
    def gamma_lower(self) -> Fraction:
        return 1 + self.slack_lower

    @property
    def gamma_upper(self) -> Fraction:
        return 1 + self.slack_upper


def oracle_max_slack(instance: Instance, tolerance=DEFAULT_TOLERANCE, limit: int | None = None) -> SlackReport:
    """Bracket the largest ``eps`` for which the instance is ``(1 + eps)``-feasible.

    With equal task lengths the answer is found exactly: the critical factor is
    always ``(end_b - start_a) / (k * length)`` for some window end, window start
    and task count ``k``, so a search over those candidates is complete.
    """
    tolerance = as_rational(tolerance)
    tasks = list(instance.tasks)
    if not tasks:
        raise ValueError("slack of an empty instance is unbounded")
    hi = min(t.window.span / t.length for t in tasks)

    def ok(g):
        return oracle_feasible(instance, g, limit=limit)

    feasible = ok(Fraction(1))
    lengths = {t.length for t in tasks}
    if len(lengths) == 1:
        (length,) = lengths
        starts = {t.window.start for t in tasks}
        ends = {t.window.end for t in tasks}
        cands = sorted(
            {
                (e - s) / (k * length)
                for s in starts
                for e in ends
                for k in range(1, len(tasks) + 1)
                if e > s and (e - s) / (k * length) <= hi
            }
        )
        lo_i, hi_i = 0, len(cands) - 1
        if not ok(cands[0]):
            raise AssertionError("candidate set incomplete")  # pragma: no cover
        while lo_i < hi_i:
            mid = (lo_i + hi_i + 1) // 2
            if ok(cands[mid]):
                lo_i = mid
            else:
                hi_i = mid - 1
        g = cands[lo_i]
        return SlackReport(feasible, g - 1, g - 1)
    if ok(hi):
        return SlackReport(feasible, hi - 1, hi - 1)
    lo = Fraction(0)
    while hi - lo > tolerance:
        mid = (lo + hi) / 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return SlackReport(feasible, lo - 1, hi - 1)


@dataclass(frozen=True)
class MinReallocResult:
    count: int
    witness: Allocation
    moved: tuple

    def __iter__(self):
        return iter((self.count, self.witness))


def oracle_min_realloc(
    instance: Instance,
    allocation: Allocation,
    limit: int | None = None,
    max_count: int | None = None,
) -> MinReallocResult:
    """Fewest allocated tasks that must move so every task (including unallocated ones) fits.

    Candidate move sets are tried in order of size; for each, the moving tasks
    and the unallocated ones are searched exhaustively around the slots that
    stay put.  ``max_count`` stops the search early (raising ValueError) when
    the caller only needs a lower bound.
    """
    n = len(instance)
    _check_limit(n, min_realloc_limit() if limit is None else limit)
    if len(allocation) != n:
        raise ValueError("allocation does not match instance")
    report = is_valid(instance, allocation)
    if not report:
        raise ValueError(f"starting allocation invalid: {report}")
    placed = [i for i in range(n) if allocation[i] is not None]
    pending = [i for i in range(n) if allocation[i] is None]
    inner_limit = n + 1
    if not oracle_feasible(instance, limit=inner_limit):
        raise ValueError("state is infeasible")
    top = len(placed) if max_count is None else min(max_count, len(placed))
    for j in range(top + 1):
        for moved in itertools.combinations(placed, j):
            moving = set(moved) | set(pending)
            fixed = [allocation[i] for i in placed if i not in moving]
            sub = Instance(tuple(instance[i] for i in sorted(moving)))
            if not _quick_room(sub, fixed):
                continue
            starts = _search(list(sub.tasks), fixed, Fraction(1), want_witness=True)
            if starts is None:
                continue
            slots = list(allocation.slots)
            for i in moving:
                t = instance[i]
                slots[i] = Interval(starts[t.id], starts[t.id] + t.length)
            return MinReallocResult(j, Allocation(tuple(slots)), tuple(instance[i].id for i in moved))
    raise ValueError(f"no solution moving at most {top} tasks")


def _quick_room(sub: Instance, fixed: Sequence[Interval]) -> bool:
    # every moving task needs a stretch of free space inside its own window
    fixed = sorted(fixed, key=lambda s: s.start)
    for t in sub.tasks:
        if earliest_fit(None, t.window, t.length, fixed) is None:
            return False
    return True


def oracle_ordered_slots(instance: Instance, rank: int, grid: Iterable) -> set:
    """Unit slot starts ``x`` on ``grid`` such that some ordered solution puts rank ``rank`` at ``[x, x+1]``.

    The instance must be ordered with unit tasks.  With the slot of ``rank``
    pinned, the prefix is packed leftmost and the suffix rightmost.
    """
    if not instance.is_ordered():
        raise ValueError("instance must be ordered")
    out = set()
    tasks = instance.tasks
    for x in grid:
        x = as_rational(x)
        slot = Interval(x, x + 1)
        if not tasks[rank].window.contains(slot):
            continue
        if _ordered_completion(tasks, rank, slot) is not None:
            out.add(x)
    return out


def _ordered_completion(tasks, rank, slot):
    """Exhaustively search ordered solutions with a pinned slot (tiny n; grid-free).

    Ordered means slots non-decreasing in window order, so the prefix may be
    packed greedily from the left and must end by ``slot.start``; the suffix
    packed greedily from the right must start no earlier than ``slot.end``.
    """
    prev_end = None
    prefix = []
    for t in tasks[:rank]:
        s = t.window.start if prev_end is None else max(t.window.start, prev_end)
        if s + 1 > t.window.end:
            return None
        prefix.append(Interval(s, s + 1))
        prev_end = s + 1
    if prev_end is not None and prev_end > slot.start:
        return None
    nxt = None
    suffix = []
    for t in reversed(tasks[rank + 1 :]):
        e = t.window.end if nxt is None else min(t.window.end, nxt)
        if e - 1 < t.window.start:
            return None
        suffix.append(Interval(e - 1, e))
        nxt = e - 1
    if nxt is not None and nxt < slot.end:
        return None
    return prefix + [slot] + suffix[::-1]


# --- several processors ------------------------------------------------------


def _group_feasible(tasks, gamma, cache):
    key = frozenset(t.id for t in tasks)
    hit = cache.get(key)
    if hit is None:
        hit = _search(list(tasks), [], gamma, want_witness=True)
        cache[key] = hit
    return hit


def mp_feasible(instance: Instance, p: int, gamma=1, limit: int | None = None) -> bool:
    """Whether the tasks split into ``p`` groups each feasible on one processor."""
    return next(_mp_partitions(instance, p, as_rational(gamma), limit), None) is not None


def mp_solutions(instance: Instance, p: int, gamma=1, limit: int | None = None) -> list[list[frozenset]]:
    """All partitions (up to processor relabelling) into ``p`` one-processor-feasible groups."""
    return [sorted(part, key=lambda g: sorted(map(str, g))) for part in _mp_partitions(instance, p, as_rational(gamma), limit)]


def _mp_partitions(instance, p, gamma, limit):
    tasks = list(instance.tasks)
    _check_limit(len(tasks), feasibility_limit() if limit is None else limit)
    cache: dict = {}

    def rec(remaining, groups_left):
        if not remaining:
            yield []
            return
        if groups_left == 0:
            return
        first, rest = remaining[0], remaining[1:]
        # the group holding the first remaining task; the others go to later groups
        for r in range(len(rest) + 1):
            for combo in itertools.combinations(rest, r):
                group = (first,) + combo
                if _group_feasible(group, gamma, cache) is None:
                    continue
                left = [t for t in rest if t not in combo]
                for tail in rec(left, groups_left - 1):
                    yield [frozenset(t.id for t in group)] + tail

    yield from rec(tasks, p)
