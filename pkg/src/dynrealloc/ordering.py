"""Instances, allocations, validity, and the greedy ordered-solution tools."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Sequence

from .geometry import Interval, as_rational

__all__ = [
    "Task",
    "Instance",
    "Allocation",
    "InsertState",
    "InsertionRange",
    "ValidityReport",
    "GreedyResult",
    "window_key",
    "is_valid",
    "sort_subsequence",
    "leftmost",
    "rightmost",
    "near",
    "insertion_range",
    "make_insert_state",
]


@dataclass(frozen=True)
class Task:
    id: Hashable
    window: Interval
    length: Fraction = Fraction(1)

    def __post_init__(self):
        length = as_rational(self.length)
        object.__setattr__(self, "length", length)
        if length <= 0:
            raise ValueError(f"task {self.id!r}: length must be positive")
        if self.window.span < length:
            raise ValueError(f"task {self.id!r}: window {self.window} shorter than length {length}")

    @property
    def key(self):
        return window_key(self)

    def with_window(self, window: Interval) -> Task:
        return Task(self.id, window, self.length)


def window_key(task: Task):
    """Total order on tasks extending the interval order: (start, end, id)."""
    return (task.window.start, task.window.end, task.id)


@dataclass(frozen=True)
class Instance:
    tasks: tuple[Task, ...] = ()

    def __post_init__(self):
        tasks = tuple(self.tasks)
        object.__setattr__(self, "tasks", tasks)
        seen = set()
        for t in tasks:
            if t.id in seen:
                raise ValueError(f"duplicate task id {t.id!r}")
            seen.add(t.id)

    def __len__(self):
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def __getitem__(self, i) -> Task:
        return self.tasks[i]

    @property
    def n(self) -> int:
        return len(self.tasks)

    @property
    def windows(self) -> tuple[Interval, ...]:
        return tuple(t.window for t in self.tasks)

    @property
    def ids(self) -> tuple:
        return tuple(t.id for t in self.tasks)

    def index_of(self, task_id) -> int:
        for i, t in enumerate(self.tasks):
            if t.id == task_id:
                return i
        raise KeyError(task_id)

    def is_ordered(self) -> bool:
        keys = [window_key(t) for t in self.tasks]
        return all(a < b for a, b in zip(keys, keys[1:]))

    def ordered(self) -> Instance:
        return Instance(tuple(sorted(self.tasks, key=window_key)))

    def permutation_to_ordered(self) -> list[int]:
        """Positions of ``self.tasks`` listed in window order."""
        return sorted(range(len(self.tasks)), key=lambda i: window_key(self.tasks[i]))

    def scaled(self, gamma) -> Instance:
        gamma = as_rational(gamma)
        return Instance(tuple(Task(t.id, t.window, t.length * gamma) for t in self.tasks))

    def with_task(self, task: Task) -> Instance:
        return Instance(self.tasks + (task,))

    def without(self, task_id) -> Instance:
        return Instance(tuple(t for t in self.tasks if t.id != task_id))

    @classmethod
    def from_windows(cls, windows: Iterable, lengths=None, prefix: str = "t") -> Instance:
        windows = [w if isinstance(w, Interval) else Interval(*w) for w in windows]
        width = max(len(str(len(windows))), 1)
        lengths = list(lengths) if lengths is not None else [1] * len(windows)
        return cls(tuple(Task(f"{prefix}{i:0{width}d}", w, ln) for i, (w, ln) in enumerate(zip(windows, lengths))))


@dataclass(frozen=True)
class Allocation:
    """Per-task optional slots, positionally aligned with an instance's tasks."""

    slots: tuple[Interval | None, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))

    def __len__(self):
        return len(self.slots)

    def __iter__(self):
        return iter(self.slots)

    def __getitem__(self, i):
        return self.slots[i]

    def replace(self, i: int, slot: Interval | None) -> Allocation:
        slots = list(self.slots)
        slots[i] = slot
        return Allocation(tuple(slots))

    def present(self) -> list[int]:
        return [i for i, s in enumerate(self.slots) if s is not None]

    @classmethod
    def of(cls, slots: Iterable) -> Allocation:
        out = []
        for s in slots:
            if s is None or isinstance(s, Interval):
                out.append(s)
            else:
                out.append(Interval(*s))
        return cls(tuple(out))


@dataclass(frozen=True)
class ValidityReport:
    ok: bool
    kind: str | None = None  # "containment", "length", "overlap", "missing", "shape"
    positions: tuple[int, ...] = ()
    ids: tuple = ()
    detail: str = ""

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "valid"
        return f"{self.kind} violation at {self.ids}: {self.detail}"


def is_valid(instance: Instance, allocation: Allocation, complete: bool = False) -> ValidityReport:
    """Check containment, lengths and pairwise disjointness of the present slots.

    With ``complete=True`` every task must also be allocated.
    """
    if len(allocation) != len(instance):
        return ValidityReport(False, "shape", (), (), f"{len(allocation)} slots for {len(instance)} tasks")
    for i, (task, slot) in enumerate(zip(instance.tasks, allocation.slots)):
        if slot is None:
            if complete:
                return ValidityReport(False, "missing", (i,), (task.id,), "task unallocated")
            continue
        if slot.span != task.length:
            return ValidityReport(False, "length", (i,), (task.id,), f"slot {slot} has span {slot.span}")
        if not task.window.contains(slot):
            return ValidityReport(False, "containment", (i,), (task.id,), f"slot {slot} outside window {task.window}")
    order = sorted(allocation.present(), key=lambda i: (allocation[i].start, allocation[i].end))
    for a, b in zip(order, order[1:]):
        if allocation[a].overlaps(allocation[b]):
            pair = tuple(sorted((a, b)))
            return ValidityReport(
                False,
                "overlap",
                pair,
                tuple(instance[i].id for i in pair),
                f"slots {allocation[pair[0]]} and {allocation[pair[1]]} overlap",
            )
    return ValidityReport(True)


def sort_subsequence(instance: Instance, allocation: Allocation, indices: Sequence[int]) -> Allocation:
    """Permute the present slots among ``indices`` into window order."""
    chosen = [i for i in indices if allocation[i] is not None]
    targets = sorted(chosen, key=lambda i: window_key(instance[i]))
    slots = sorted((allocation[i] for i in chosen), key=lambda s: (s.start, s.end))
    out = list(allocation.slots)
    for i, s in zip(targets, slots):
        out[i] = s
    return Allocation(tuple(out))


@dataclass(frozen=True)
class GreedyResult:
    allocation: Allocation
    feasible: bool
    first_violation: int | None = None

    def __iter__(self):
        # lets callers unpack ``alloc, ok, bad = leftmost(...)``
        return iter((self.allocation, self.feasible, self.first_violation))


def _require_ordered(instance: Instance):
    if not instance.is_ordered():
        raise ValueError("instance must be ordered by (start, end, id)")


def leftmost(instance: Instance, gamma=1) -> GreedyResult:
    """Greedy earliest placement in window order, each slot of length ``gamma * length``."""
    _require_ordered(instance)
    gamma = as_rational(gamma)
    slots = []
    prev_end = None
    bad = None
    for i, t in enumerate(instance.tasks):
        start = t.window.start if prev_end is None else max(t.window.start, prev_end)
        slot = Interval(start, start + t.length * gamma)
        if bad is None and slot.end > t.window.end:
            bad = i
        slots.append(slot)
        prev_end = slot.end
    return GreedyResult(Allocation(tuple(slots)), bad is None, bad)


def rightmost(instance: Instance, gamma=1) -> GreedyResult:
    """Mirror image of :func:`leftmost`: latest placement, scanning from the back."""
    _require_ordered(instance)
    gamma = as_rational(gamma)
    slots = [None] * len(instance)
    next_start = None
    bad = None
    for i in range(len(instance) - 1, -1, -1):
        t = instance[i]
        end = t.window.end if next_start is None else min(t.window.end, next_start)
        slot = Interval(end - t.length * gamma, end)
        if slot.start < t.window.start:
            bad = i
        slots[i] = slot
        next_start = slot.start
    return GreedyResult(Allocation(tuple(slots)), bad is None, bad)


@dataclass(frozen=True)
class InsertState:
    """An ordered instance with every task allocated except the one at ``rank``."""

    instance: Instance
    allocation: Allocation
    rank: int

    @property
    def task(self) -> Task:
        return self.instance[self.rank]


def make_insert_state(instance: Instance, allocation: Allocation, task: Task) -> InsertState:
    """Add ``task`` (unallocated) and reorder everything into window order."""
    tasks = list(instance.tasks) + [task]
    slots = list(allocation.slots) + [None]
    order = sorted(range(len(tasks)), key=lambda i: window_key(tasks[i]))
    ordered = Instance(tuple(tasks[i] for i in order))
    alloc = Allocation(tuple(slots[i] for i in order))
    return InsertState(ordered, alloc, order.index(len(tasks) - 1))


def near(state: InsertState) -> Allocation:
    """An ordered solution whose inserted slot sits between its neighbours' slots."""
    instance, s, r = state.instance, state.allocation, state.rank
    greedy = leftmost(instance)
    if not greedy.feasible:
        raise ValueError("insert state is infeasible")
    lft = greedy.allocation
    if r == 0 or s[r - 1].leq(lft[r]):
        return lft
    return Allocation(lft.slots[:r] + (s[r - 1],) + s.slots[r + 1 :])


@dataclass(frozen=True)
class InsertionRange:
    istart: Fraction
    iend: Fraction

    @property
    def feasible(self) -> bool:
        return self.iend - self.istart >= 1

    def as_interval(self) -> Interval | None:
        return Interval(self.istart, self.iend) if self.istart <= self.iend else None

    def __iter__(self):
        return iter((self.istart, self.iend))


def insertion_range(state: InsertState) -> InsertionRange:
    """Where the inserted unit slot can go in some ordered solution."""
    # istart = max_{i<=r}(start_i - i) + r,  iend = min_{i>=r}(end_i - (i - r))
    tasks = state.instance.tasks
    r = state.rank
    istart = tasks[0].window.start + r
    for i in range(1, r + 1):
        v = tasks[i].window.start + (r - i)
        if v > istart:
            istart = v
    iend = tasks[r].window.end
    for i in range(r + 1, len(tasks)):
        v = tasks[i].window.end - (i - r)
        if v < iend:
            iend = v
    return InsertionRange(istart, iend)
