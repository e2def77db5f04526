"""Several identical processors via one single-processor allocator.

Every window keeps its start and loses ``1 - 1/k`` of its end, and every task
shrinks to length ``1/k``, where ``k = (p + 1) // 2``.  A single-processor
allocator solves that shrunken problem; each task then runs for one unit from
its shrunken slot's start, on the first processor where that unit is free.
Shrunken slots are disjoint, so at most ``2k - 1 <= p`` unit slots meet any
point, which is why a free processor always exists.

Processors are numbered from 0.  With even ``p`` one processor is never
needed by the argument above; it still takes overflow from the first-fit rule.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .geometry import Interval, as_rational
from .ordering import Allocation, Instance, Task
from .outcome import InsertOutcome

__all__ = [
    "MultiprocConfig",
    "MpAllocation",
    "LiftError",
    "mp_transform",
    "mp_lift",
    "mp_is_valid",
    "MpSession",
]


@dataclass(frozen=True)
class MultiprocConfig:
    p: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("need at least one processor")

    @property
    def k(self) -> int:
        return (self.p + 1) // 2

    @property
    def shrink(self) -> Fraction:
        return 1 - Fraction(1, self.k)


class LiftError(AssertionError):
    """A lifted slot found no free processor; the shrunken solution was not valid."""


@dataclass(frozen=True)
class MpAllocation:
    """Task id -> (processor, unit slot)."""

    placement: dict

    def __getitem__(self, task_id):
        return self.placement[task_id]

    def __len__(self):
        return len(self.placement)

    def items(self):
        return self.placement.items()

    def per_processor(self) -> dict:
        out: dict = {}
        for tid, (proc, slot) in self.placement.items():
            out.setdefault(proc, []).append((slot, tid))
        for v in out.values():
            v.sort(key=lambda e: (e[0].start, str(e[1])))
        return out


def mp_transform(instance: Instance, cfg: MultiprocConfig) -> Instance:
    """The shrunken single-processor instance."""
    k = cfg.k
    out = []
    for t in instance.tasks:
        if t.length != 1:
            raise ValueError("unit tasks only")
        end = t.window.end - cfg.shrink
        if end - t.window.start < Fraction(1, k):
            raise ValueError(f"task {t.id!r}: window too short to shrink")
        out.append(Task(t.id, Interval(t.window.start, end), Fraction(1, k)))
    return Instance(tuple(out))


class _Lanes:
    """Per-processor sorted slot starts (all slots have unit length)."""

    def __init__(self, p: int):
        self.p = p
        self.starts = [[] for _ in range(p)]

    def fits(self, proc: int, x: Fraction) -> bool:
        lane = self.starts[proc]
        i = bisect.bisect_left(lane, x)
        if i < len(lane) and lane[i] < x + 1:
            return False
        if i > 0 and lane[i - 1] + 1 > x:
            return False
        return True

    def add(self, proc: int, x: Fraction):
        bisect.insort(self.starts[proc], x)

    def remove(self, proc: int, x: Fraction):
        lane = self.starts[proc]
        i = bisect.bisect_left(lane, x)
        if i >= len(lane) or lane[i] != x:
            raise KeyError(x)
        lane.pop(i)

    def first_fit(self, x: Fraction, prefer: int | None = None) -> int:
        if prefer is not None and self.fits(prefer, x):
            return prefer
        for proc in range(self.p):
            if self.fits(proc, x):
                return proc
        raise LiftError(f"no processor free at {x}")

    def overlapping(self, x: Fraction) -> int:
        """Number of placed unit slots overlapping ``[x, x+1]``."""
        total = 0
        for lane in self.starts:
            lo = bisect.bisect_right(lane, x - 1)
            hi = bisect.bisect_left(lane, x + 1)
            total += hi - lo
        return total


def _check_depth(starts: list, x: Fraction, k: int):
    """Assert at most ``2k - 1`` unit slots (this one included) overlap ``[x, x+1]``."""
    lo = bisect.bisect_right(starts, x - 1)
    hi = bisect.bisect_left(starts, x + 1)
    if hi - lo > 2 * k - 1:
        raise LiftError(f"{hi - lo} unit slots overlap [{x}, {x + 1}], more than {2 * k - 1}")


def mp_lift(instance: Instance, cfg: MultiprocConfig, shrunk: Allocation) -> MpAllocation:
    """Unit slots at the shrunken starts, first-fit over processors in start order."""
    order = sorted(range(len(instance)), key=lambda i: (shrunk[i].start, str(instance[i].id)))
    all_starts = sorted(shrunk[i].start for i in range(len(instance)))
    lanes = _Lanes(cfg.p)
    placement = {}
    for i in order:
        x = shrunk[i].start
        _check_depth(all_starts, x, cfg.k)
        proc = lanes.first_fit(x)
        lanes.add(proc, x)
        placement[instance[i].id] = (proc, Interval(x, x + 1))
    return MpAllocation(placement)


def mp_is_valid(instance: Instance, alloc: MpAllocation, p: int) -> tuple[bool, str]:
    """Containment, processor range, and per-processor disjointness."""
    by_id = {t.id: t for t in instance.tasks}
    if set(by_id) != set(alloc.placement):
        return False, "allocated ids differ from instance ids"
    for tid, (proc, slot) in alloc.items():
        if not 0 <= proc < p:
            return False, f"{tid!r} on processor {proc} outside 0..{p - 1}"
        if slot.span != by_id[tid].length or not by_id[tid].window.contains(slot):
            return False, f"{tid!r} slot {slot} not in window {by_id[tid].window}"
    for proc, entries in alloc.per_processor().items():
        for (a, ta), (b, tb) in zip(entries, entries[1:]):
            if a.overlaps(b):
                return False, f"{ta!r} and {tb!r} overlap on processor {proc}"
    return True, ""


class MpSession:
    """A ``p``-processor allocator wrapping a unit-task single-processor session.

    The inner session sees everything scaled by ``k`` so its tasks have unit
    length: window ``[s, e]`` becomes ``[k s, k e - k + 1]``.
    """

    def __init__(self, p: int, c=None, inner_factory: Callable | None = None):
        self.cfg = MultiprocConfig(p)
        k = self.cfg.k
        if inner_factory is None:
            from .fa import FaSession

            if c is None:
                raise ValueError("window span c is required for the default inner allocator")
            c = as_rational(c)
            inner_factory = lambda: FaSession(k * c - k + 1)  # noqa: E731
        self.c = None if c is None else as_rational(c)
        self.inner = inner_factory()
        self._tasks: dict = {}
        self._placement: dict = {}
        self._lanes = _Lanes(p)
        self._starts: list = []  # every task's start, for the depth assertion
        self.realloc_log: list[list] = []
        self.lifts = 0

    @property
    def p(self) -> int:
        return self.cfg.p

    def __len__(self):
        return len(self._tasks)

    def __contains__(self, tid):
        return tid in self._tasks

    @property
    def instance(self) -> Instance:
        return Instance(tuple(self._tasks[t] for t in sorted(self._tasks, key=str)))

    @property
    def allocation(self) -> MpAllocation:
        return MpAllocation(dict(self._placement))

    @property
    def touches(self):
        return getattr(self.inner, "touches", None)

    def slots(self) -> dict:
        return {tid: slot for tid, (_proc, slot) in self._placement.items()}

    def _inner_task(self, task: Task) -> Task:
        k = self.cfg.k
        w = task.window
        return Task(task.id, Interval(k * w.start, k * w.end - k + 1), 1)

    def insert(self, task: Task) -> InsertOutcome:
        if task.length != 1:
            raise ValueError("unit tasks only")
        if task.id in self._tasks:
            raise ValueError(f"duplicate task id {task.id!r}")
        inner_out = self.inner.insert(self._inner_task(task))  # may raise InsertionFailed
        self._tasks[task.id] = task
        k = self.cfg.k
        movers = [(tid, new.start / k) for tid, _old, new in inner_out.reallocations]
        old_place = {tid: self._placement[tid] for tid, _ in movers}
        for tid, _ in movers:
            proc, slot = old_place[tid]
            self._lanes.remove(proc, slot.start)
            self._drop_start(slot.start)
        movers.append((task.id, inner_out.slot.start / k))
        for _, x in movers:
            bisect.insort(self._starts, x)
        moves = []
        for tid, x in sorted(movers, key=lambda e: e[1]):
            _check_depth(self._starts, x, k)
            prev = old_place.get(tid)
            proc = self._lanes.first_fit(x, prefer=prev[0] if prev else None)
            self._lanes.add(proc, x)
            slot = Interval(x, x + 1)
            self._placement[tid] = (proc, slot)
            self.lifts += 1
            if prev is not None and prev != (proc, slot):
                moves.append((tid, prev, (proc, slot)))
        self.realloc_log.append(moves)
        proc, slot = self._placement[task.id]
        return InsertOutcome(task.id, slot, moves, inner_out.m, inner_out.trials, inner_out.fallback, proc)

    def _drop_start(self, x):
        i = bisect.bisect_left(self._starts, x)
        self._starts.pop(i)

    def delete(self, task_id) -> None:
        task = self._tasks.pop(task_id)
        self.inner.delete(task.id)
        proc, slot = self._placement.pop(task_id)
        self._lanes.remove(proc, slot.start)
        self._drop_start(slot.start)
        self.realloc_log.append([])
