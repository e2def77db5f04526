"""Reference allocators used to drive adversaries, plus a factory for the CLI."""

from __future__ import annotations

from ..geometry import Interval
from ..idsetrq import TouchCounter
from ..oracle import earliest_fit, oracle_feasible, oracle_min_realloc
from ..ordering import Allocation, Instance, Task, is_valid, window_key
from ..outcome import InsertionFailed, InsertOutcome

__all__ = ["NaiveLeftmost", "OracleAllocator", "make_allocator", "ALLOCATORS"]


class _Table:
    """Tasks and slots kept in plain dicts."""

    def __init__(self):
        self._tasks: dict = {}
        self._slots: dict = {}
        self.touches = TouchCounter()
        self.realloc_log: list[list] = []

    def __len__(self):
        return len(self._tasks)

    def __contains__(self, task_id):
        return task_id in self._tasks

    @property
    def instance(self) -> Instance:
        return Instance(tuple(sorted(self._tasks.values(), key=window_key)))

    @property
    def allocation(self) -> Allocation:
        return Allocation(tuple(self._slots[t.id] for t in self.instance.tasks))

    def slots(self) -> dict:
        return dict(self._slots)

    @classmethod
    def from_allocation(cls, instance: Instance, allocation: Allocation, **kwargs):
        report = is_valid(instance, allocation, complete=True)
        if not report:
            raise ValueError(f"not a solution: {report}")
        out = cls(**kwargs)
        for t, s in zip(instance.tasks, allocation.slots):
            out._tasks[t.id] = t
            out._slots[t.id] = s
        return out

    def slot_of(self, task_id) -> Interval:
        return self._slots[task_id]

    def delete(self, task_id) -> None:
        del self._tasks[task_id]
        del self._slots[task_id]
        self.realloc_log.append([])


class NaiveLeftmost(_Table):
    """Puts each task at the earliest free spot in its window and never moves anything."""

    def insert(self, task: Task) -> InsertOutcome:
        if task.id in self._tasks:
            raise ValueError(f"duplicate task id {task.id!r}")
        taken = sorted(self._slots.values(), key=lambda s: s.start)
        self.touches.count += len(taken)
        x = earliest_fit(None, task.window, task.length, taken)
        if x is None:
            raise InsertionFailed(f"no free room for {task.id!r} in {task.window} without moving others")
        self._tasks[task.id] = task
        self._slots[task.id] = Interval(x, x + task.length)
        self.realloc_log.append([])
        return InsertOutcome(task.id, self._slots[task.id])


class OracleAllocator(_Table):
    """Moves the fewest tasks possible on every insertion (exhaustive, small n only)."""

    def __init__(self, limit: int | None = None):
        super().__init__()
        self.limit = limit

    def insert(self, task: Task) -> InsertOutcome:
        if task.id in self._tasks:
            raise ValueError(f"duplicate task id {task.id!r}")
        tasks = list(self._tasks.values()) + [task]
        instance = Instance(tuple(tasks))
        if not oracle_feasible(instance, limit=None if self.limit is None else self.limit + 1):
            raise InsertionFailed(f"{task.id!r}: no solution exists")
        alloc = Allocation(tuple(self._slots.get(t.id) for t in tasks))
        best = oracle_min_realloc(instance, alloc, limit=self.limit)
        moves = []
        for t, slot in zip(tasks, best.witness):
            old = self._slots.get(t.id)
            if old is not None and old != slot:
                moves.append((t.id, old, slot))
            self._slots[t.id] = slot
        self._tasks[task.id] = task
        assert is_valid(self.instance, self.allocation, complete=True)
        self.realloc_log.append(moves)
        return InsertOutcome(task.id, self._slots[task.id], moves)


def make_allocator(name: str, c=None, p: int = 3, preset: tuple[Instance, Allocation] | None = None):
    """Build an allocator by CLI name: fa, va, mp, naive-leftmost or oracle.

    ``preset`` (instance, solution) seeds the allocator's state; only fa,
    naive-leftmost and oracle accept one.
    """
    if preset is not None:
        if name == "fa":
            from ..fa import FaSession

            return FaSession.from_allocation(c, *preset)
        if name == "naive-leftmost":
            return NaiveLeftmost.from_allocation(*preset)
        if name == "oracle":
            return OracleAllocator.from_allocation(*preset)
        raise ValueError(f"allocator {name!r} cannot start from a preset state")
    if name == "fa":
        from ..fa import FaSession

        if c is None:
            raise ValueError("fa needs the common window span c")
        return FaSession(c)
    if name == "va":
        from ..va import VaSession

        return VaSession()
    if name in ("mp", "mp-wrapped-fa"):
        from ..multiproc import MpSession

        if c is None:
            raise ValueError("mp needs the common window span c")
        return MpSession(p, c)
    if name == "naive-leftmost":
        return NaiveLeftmost()
    if name == "oracle":
        return OracleAllocator()
    raise ValueError(f"unknown allocator {name!r}")


ALLOCATORS = ("fa", "va", "mp", "naive-leftmost", "oracle")
