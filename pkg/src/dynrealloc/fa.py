"""Reallocating allocator for unit tasks whose windows all have the same span.

An insertion first checks the range of positions the new slot could take in
an ordered solution.  If that range is shorter than one unit the insertion is
refused and nothing changes.  Otherwise trials are run with a guessed slack
``e = 2/m`` for ``m = 1, 2, 4, ...``; every trial starts from a snapshot of the
indexes, and the first successful trial is kept.

Each trial either jumps outward from the new window (wide windows) or places
the new slot at one of two candidate positions and pushes neighbours aside,
falling back to a directional jump when more than ``m`` neighbours would move.
A jump walks from window to window until it has seen enough free space, opens
a unit gap by packing a small block of slots, and then moves one slot along
each window of the walk toward that gap.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .geometry import Interval, as_rational, floor_log, snap
from .idsetrq import Aggregation, IdSetRq, TouchCounter
from .ordering import Allocation, Instance, InsertionRange, Task, is_valid, leftmost, window_key
from .outcome import InsertionFailed, InsertOutcome

__all__ = [
    "InsertionFailed",
    "InsertOutcome",
    "FaSession",
    "PendingInsert",
    "reallocation_bound",
    "within_reallocation_bound",
    "large_window_jumps",
    "push_jumps",
]

LEFT, RIGHT, BOTH = "left", "right", "both"


def _wagg_combine(a, b, left_size):
    if a is None:
        return b
    if b is None:
        return a
    return (max(a[0], b[0] - left_size), min(a[1], b[1] - left_size))


# (max(start - rank), min(end - rank)) with rank local to the queried range
WINDOW_AGG = Aggregation(leaf=lambda k, v: (k[0], k[1]), combine=_wagg_combine, identity=None)


def _sagg_combine(a, b, _n):
    if a is None:
        return b
    if b is None:
        return a
    return (min(a[0], b[0]), max(a[1], b[1]))


# (earliest window, latest window) among slots in a range
SLOT_AGG = Aggregation(leaf=lambda k, v: (v, v), combine=_sagg_combine, identity=None)


def large_window_jumps(m: int) -> int:
    """Jump budget for the wide-window trial at ``e = 2/m``."""
    return floor_log(1 + Fraction(1, m), Fraction(14 * m)) + 1


def push_jumps(m: int) -> int:
    """Jump budget after a push chain at ``e = 2/m``."""
    return floor_log(1 + Fraction(1, m), Fraction(7 * m * m, 2)) + 1


def within_reallocation_bound(count: int, eps) -> bool:
    """``count <= max(2 log_{1+eps/2}(14/eps^2) + 34/eps + 6, 14)``, decided exactly."""
    eps = as_rational(eps)
    if eps <= 0:
        raise ValueError("slack must be positive")
    if count <= 14:
        return True
    k = count - 34 / eps - 6  # need k <= 2 log_b(t)  <=>  b^k <= t^2
    if k <= 0:
        return True
    base = 1 + eps / 2
    target = (14 / eps**2) ** 2
    # b^k <= t^2 with rational k = p/q  <=>  b^p <= t^(2q) ... exponentiate to integers
    k = Fraction(k)
    return base ** k.numerator <= target ** k.denominator


def reallocation_bound(eps) -> float:
    """Float value of the bound, for display only."""
    eps = as_rational(eps)
    val = 2 * math.log(float(14 / eps**2)) / math.log(float(1 + eps / 2)) + float(34 / eps) + 6
    return max(val, 14.0)


class _TrialFailed(Exception):
    pass


def _window(key) -> Interval:
    return Interval(key[0], key[1])


def _start_of(k):
    return k[0]


def _slot_by_index(stree: IdSetRq, i: int) -> Interval:
    """The ``i``-th unit slot in start order."""
    x = stree.at(i)[1][0]
    return Interval(x, x + 1)


class FaSession:
    """Maintains a solution for unit tasks whose windows all span ``c``."""

    def __init__(self, c, touches: TouchCounter | None = None):
        self.c = as_rational(c)
        if self.c < 1:
            raise ValueError("window span must be at least 1")
        self.touches = touches if touches is not None else TouchCounter()
        self._tasks: dict = {}
        self._wtree = IdSetRq(WINDOW_AGG, self.touches)
        self._stree = IdSetRq(SLOT_AGG, self.touches)
        self.realloc_log: list[list] = []
        self.fallbacks = 0
        # trials whose result failed local validation (treated as failed trials)
        self.rejected_trials = 0

    # --- construction / inspection ------------------------------------------

    @classmethod
    def from_allocation(cls, c, instance: Instance, allocation: Allocation) -> FaSession:
        """Session holding a given (complete, valid) solution."""
        report = is_valid(instance, allocation, complete=True)
        if not report:
            raise ValueError(f"not a solution: {report}")
        session = cls(c)
        for task, slot in zip(instance.tasks, allocation.slots):
            session._check_task(task)
            session._tasks[task.id] = task
            key = window_key(task)
            session._wtree = session._wtree.insert(key, slot)
            session._stree = session._stree.insert((slot.start, key), key)
        return session

    def _check_task(self, task: Task):
        if task.length != 1:
            raise ValueError(f"task {task.id!r}: only unit tasks are supported")
        if task.window.span != self.c:
            raise ValueError(f"task {task.id!r}: window span {task.window.span} differs from {self.c}")
        if task.id in self._tasks:
            raise ValueError(f"duplicate task id {task.id!r}")

    def __len__(self):
        return len(self._tasks)

    def __contains__(self, task_id):
        return task_id in self._tasks

    @property
    def instance(self) -> Instance:
        return Instance(tuple(self._tasks[k[2]] for k in self._wtree.keys()))

    @property
    def allocation(self) -> Allocation:
        """Slots in window order, aligned with :attr:`instance`."""
        return Allocation(tuple(self._wtree.values()))

    def slot_of(self, task_id) -> Interval:
        task = self._tasks[task_id]
        return self._wtree.get(window_key(task))

    def slots(self) -> dict:
        return {k[2]: v for k, v in self._wtree}

    def state_token(self):
        """Hashable summary of the full state, for rollback comparisons."""
        return (tuple(self._wtree), tuple(self._stree), tuple(sorted(map(str, self._tasks))))

    def check_indexes(self) -> None:
        """Rebuild both indexes from scratch and compare with the maintained ones."""
        self._wtree.check()
        self._stree.check()
        ws = sorted((window_key(t), self._wtree.get(window_key(t))) for t in self._tasks.values())
        assert list(self._wtree) == ws, "window index out of sync"
        ss = sorted(((s.start, k), k) for k, s in ws)
        assert list(self._stree) == ss, "slot index out of sync"
        rebuilt = IdSetRq.from_sorted(ws, WINDOW_AGG)
        if ws:
            assert rebuilt.query(0, len(ws) - 1) == self._wtree.query(0, len(ws) - 1), "window aggregate stale"

    # --- operations -------------------------------------------------------

    def delete(self, task_id) -> None:
        """Remove a task; raises KeyError if absent.  Never moves other tasks."""
        task = self._tasks.pop(task_id)
        key = window_key(task)
        slot = self._wtree.get(key)
        self._wtree = self._wtree.remove(key)
        self._stree = self._stree.remove((slot.start, key))
        self.realloc_log.append([])

    def prepare(self, task: Task) -> PendingInsert:
        """Stage ``task`` (unallocated) for a step-by-step insertion."""
        self._check_task(task)
        return PendingInsert(self, task)

    def insert(self, task: Task) -> InsertOutcome:
        """Allocate ``task``, reallocating others as needed.

        Raises :class:`InsertionFailed` (state untouched) when infeasible and
        ValueError for a malformed task.
        """
        pending = self.prepare(task)
        rng = pending.insertion_range()
        if not rng.feasible:
            pending.abort()
            raise InsertionFailed(f"no room for {task.id!r} in {task.window}")
        n = pending.n
        m = 1
        trials = 0
        while m <= 2 * n:
            pending.restore()
            trials += 1
            if self.c >= Fraction(7 * m, 2) + 4:
                ok = pending.large_window(m)
            else:
                ok = pending.small_window(m, rng)
            if ok:
                if pending.locally_valid():
                    return pending.commit(m=m, trials=trials)
                self.rejected_trials += 1
            m *= 2
        # unreachable by the analysis; keep the session correct regardless
        pending.restore()
        pending.apply_leftmost()
        self.fallbacks += 1
        return pending.commit(m=None, trials=trials, fallback=True)


class PendingInsert:
    """One insertion in progress: the new task is indexed but unallocated.

    Exposes the trial subroutines so they can be exercised individually.
    """

    def __init__(self, session: FaSession, task: Task):
        self.session = session
        self.task = task
        self.key = window_key(task)
        self._base_w = session._wtree
        self._base_s = session._stree
        session._tasks[task.id] = task
        session._wtree = session._wtree.insert(self.key, None)
        self._start_w = session._wtree
        self._start_s = session._stree
        self.touched: set = set()
        self.jump_log: list = []  # (U, dir, moved slots) for each successful jump

    # --- plumbing -------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.session._wtree)

    @property
    def rank(self) -> int:
        return self.session._wtree.find(self.key)[0]

    def restore(self):
        self.session._wtree = self._start_w
        self.session._stree = self._start_s
        self.touched = set()
        self.jump_log = []

    def abort(self):
        self.session._wtree = self._base_w
        self.session._stree = self._base_s
        del self.session._tasks[self.task.id]

    def slot(self, key) -> Interval | None:
        return self.session._wtree.get(key)

    def key_at(self, rank: int):
        return self.session._wtree.at(rank)[1]

    def rank_of(self, key) -> int:
        return self.session._wtree.find(key)[0]

    def set_slot(self, key, slot: Interval | None):
        s = self.session
        old = s._wtree.get(key)
        if old is not None:
            s._stree = s._stree.remove((old.start, key))
        if slot is not None:
            s._stree = s._stree.insert((slot.start, key), key)
        s._wtree = s._wtree.insert(key, slot)
        self.touched.add(key)

    def state(self):
        """Current (instance, allocation, rank) in window order."""
        return self.session.instance, self.session.allocation, self.rank

    # --- queries used by the subroutines ------------------------------------

    def within(self, w: Interval) -> tuple[int, int]:
        """Slot-index rank range ``[lo, hi)`` of the unit slots contained in ``w``."""
        st = self.session._stree
        lo = st.bisect_left(w.start, key=_start_of)
        hi = st.bisect_right(w.end - 1, key=_start_of)
        return lo, max(hi, lo)

    def count(self, w: Interval) -> int:
        lo, hi = self.within(w)
        return hi - lo

    def _bounds(self, w: Interval, lo: int, hi: int) -> tuple[Fraction, Fraction]:
        st = self.session._stree
        sstart = w.start
        if lo > 0:
            sstart = max(sstart, st.at(lo - 1)[1][0] + 1)
        send = w.end
        if hi < len(st):
            send = min(send, st.at(hi)[1][0])
        return sstart, send

    def space(self, w: Interval) -> Fraction:
        lo, hi = self.within(w)
        sstart, send = self._bounds(w, lo, hi)
        return (send - sstart) - (hi - lo)

    def insertion_range(self) -> InsertionRange:
        wt = self.session._wtree
        r = self.rank
        istart = wt.query(0, r)[0] + r
        iend = wt.query(r, len(wt) - 1)[1]
        return InsertionRange(istart, iend)

    # --- trial subroutines --------------------------------------------------

    def large_window(self, m: int) -> bool:
        """Jump both ways from the new window."""
        return self._guard(lambda: self.jump(m, _window(self.key), BOTH, large_window_jumps(m), self.key))

    def small_window(self, m: int, rng: InsertionRange | None = None) -> bool:
        """Try the two candidate positions next to the new slot's neighbours."""
        rng = rng or self.insertion_range()
        span = Interval(rng.istart, rng.iend)
        st = self.session._stree
        r = self.rank
        if r + 1 < self.n:
            a = snap(_slot_by_index(st, r).shift(-1), span)
        else:
            a = Interval(rng.iend - 1, rng.iend)
        if r >= 1:
            b = snap(_slot_by_index(st, r - 1).shift(1), span)
        else:
            b = Interval(rng.istart, rng.istart + 1)
        backup = (self.session._wtree, self.session._stree, set(self.touched), list(self.jump_log))
        if self._guard(lambda: self.push(m, a)):
            if self.locally_valid():
                return True
            self.session.rejected_trials += 1
        self.session._wtree, self.session._stree, self.touched, self.jump_log = backup
        backup = (self.session._wtree, self.session._stree, set(self.touched), list(self.jump_log))
        if self._guard(lambda: self.push(m, b)):
            return True
        self.session._wtree, self.session._stree, self.touched, self.jump_log = backup
        return False

    def _guard(self, fn) -> bool:
        try:
            return bool(fn())
        except _TrialFailed:
            return False

    def push(self, m: int, s: Interval) -> bool:
        """Place the new slot at ``s`` and push overlapping neighbours aside."""
        r = self.rank
        n = self.n
        st0 = self.session._stree  # slots before the push, in start order

        def x_at(i):
            return _slot_by_index(st0, i if i < r else i - 1)

        # sort the slots lying inside the new window
        lo, hi = self.within(_window(self.key))
        if hi > lo:
            entries = [self.session._stree.at(k) for k in range(lo, hi)]
            keys = sorted(e[2] for e in entries)
            starts = sorted(e[1][0] for e in entries)
            for key, x in zip(keys, starts):
                if self.slot(key).start != x:
                    self.set_slot(key, Interval(x, x + 1))
        self.set_slot(self.key, s)
        budget = push_jumps(m)

        i = r + 1
        while i < n and self._slot_at(i - 1).overlaps(x_at(i)):
            holder = self._holder(x_at(i), i, RIGHT)
            if i == r + m + 1:
                self.set_slot(holder, None)
                u_start = self._slot_at(r + m).end
                u_end = holder[1]
                if u_start > u_end:
                    raise _TrialFailed
                if not self.jump(m, Interval(u_start, u_end), RIGHT, budget, holder):
                    return False
                break
            self._swap(self.key_at(i), holder)
            self.set_slot(self.key_at(i), self._slot_at(i - 1).shift(1))
            i += 1

        i = r - 1
        while i >= 0 and self._slot_at(i + 1).overlaps(x_at(i)):
            holder = self._holder(x_at(i), i, LEFT)
            if i == r - m - 1:
                self.set_slot(holder, None)
                u_start = holder[0]
                u_end = self._slot_at(r - m).start
                if u_start > u_end:
                    raise _TrialFailed
                if not self.jump(m, Interval(u_start, u_end), LEFT, budget, holder):
                    return False
                break
            self._swap(self.key_at(i), holder)
            self.set_slot(self.key_at(i), self._slot_at(i + 1).shift(-1))
            i -= 1
        return True

    def _slot_at(self, rank: int) -> Interval:
        s = self.slot(self.key_at(rank))
        if s is None:
            raise _TrialFailed
        return s

    def _holder(self, x: Interval, i: int, side: str):
        """Key of the task currently holding slot ``x`` with rank >= i (right) or <= i (left)."""
        st = self.session._stree
        lo = st.bisect_left(x.start, key=_start_of)
        hi = st.bisect_right(x.start, key=_start_of)
        ki = self.key_at(i)
        cands = [st.at(k)[2] for k in range(lo, hi)]
        if side == RIGHT:
            cands = [k for k in cands if k >= ki]
            if cands:
                return min(cands)
        else:
            cands = [k for k in cands if k <= ki]
            if cands:
                return max(cands)
        raise _TrialFailed

    def _swap(self, a, b):
        if a == b:
            return
        sa, sb = self.slot(a), self.slot(b)
        self.set_slot(a, sb)
        self.set_slot(b, sa)

    def jump(self, m: int, u: Interval, direction: str, jumps: int, hole) -> bool:
        """Open a unit gap reachable from the unallocated task ``hole`` and cascade into it."""
        v = u
        for _ in range(jumps + 1):
            lo, hi = self.within(v)
            cnt = hi - lo
            blocks = -(-(cnt + 1) // (m + 1))
            sstart, send = self._bounds(v, lo, hi)
            if (send - sstart) - cnt >= blocks:
                region = self._find_region(v, m, lo, hi, sstart, send)
                gap = self._pack(region)
                if direction == BOTH:
                    direction = LEFT if gap.start < u.start else RIGHT
                moved = self._cascade(hole, gap, direction)
                self.jump_log.append((u, direction, moved))
                return True
            if cnt == 0:
                return False
            first, last = self.session._stree.query(lo, hi - 1)
            rstart, rend = first[0], last[1]
            if direction == BOTH:
                nv = Interval(min(rstart, v.start), max(rend, v.end))
            elif direction == LEFT:
                nv = Interval(rstart, v.end)
            else:
                nv = Interval(v.start, rend)
            if nv == v:
                # nothing changes in later iterations either
                return False
            v = nv
        return False

    def _find_region(self, v, m, lo, hi, sstart, send) -> Interval:
        """A block of at most ``m + 1`` consecutive gaps inside ``v`` with free space >= 1."""
        st = self.session._stree
        q = hi - lo
        nblocks = -(-(q + 1) // (m + 1))

        def slot_start(idx):  # idx counts slots inside v from 0
            return st.at(lo + idx)[1][0]

        def region(a, b):
            ga = a * (m + 1)
            gb = min((b + 1) * (m + 1) - 1, q)
            left = sstart if ga == 0 else slot_start(ga - 1) + 1
            right = send if gb == q else slot_start(gb)
            return left, right, gb - ga

        def free(a, b):
            left, right, cnt = region(a, b)
            return right - left - cnt

        a, b = 0, nblocks - 1
        while a < b:
            mid = (a + b) // 2
            fl, fr = free(a, mid), free(mid + 1, b)
            if fl * (b - mid) >= fr * (mid - a + 1):
                b = mid
            else:
                a = mid + 1
        left, right, _ = region(a, b)
        if right - left < 1:
            raise _TrialFailed
        return Interval(left, right)

    def _pack(self, region: Interval) -> Interval:
        """Sort the slots inside ``region`` and pack them aside, returning the unit gap."""
        st = self.session._stree
        lo, hi = self.within(region)
        entries = [st.at(k) for k in range(lo, hi)]
        keys = sorted(e[2] for e in entries)
        starts = sorted(e[1][0] for e in entries)
        for key, x in zip(keys, starts):
            if self.slot(key).start != x:
                self.set_slot(key, Interval(x, x + 1))
        q = len(keys)
        split = q
        gap = Interval(region.end - 1, region.end)
        for i in range(q):
            key = keys[i]
            x = max(region.start + i, self.slot(key).start - 1)
            if x < key[0]:
                split = i
                gap = Interval(x, x + 1)
                break
            self.set_slot(key, Interval(x, x + 1))
        for i in range(split, q):
            key = keys[i]
            x = min(region.end - (q - 1 - i), self.slot(key).end + 1)
            self.set_slot(key, Interval(x - 1, x))
        return gap

    def _cascade(self, hole, gap: Interval, direction: str) -> list:
        """Move slots along windows from ``hole`` to ``gap``; returns the keys moved."""
        j = hole
        moved = []
        for _ in range(self.n + 1):
            if _window(j).contains(gap):
                self.set_slot(j, gap)
                moved.append(j)
                return moved
            lo, hi = self.within(_window(j))
            if hi <= lo:
                raise _TrialFailed
            first, last = self.session._stree.query(lo, hi - 1)
            nxt = first if direction == LEFT else last
            if nxt == j:
                raise _TrialFailed
            self.set_slot(j, self.slot(nxt))
            moved.append(j)
            j = nxt
        raise _TrialFailed

    # --- finishing ----------------------------------------------------------

    def locally_valid(self) -> bool:
        """Check every slot changed by this trial against its window and slot neighbours."""
        s = self.session
        if len(s._stree) != len(s._wtree):
            return False
        for key in self.touched | {self.key}:
            slot = s._wtree.get(key)
            if slot is None or slot.span != 1 or not _window(key).contains(slot):
                return False
            rank = s._stree.find((slot.start, key))
            if rank is None:
                return False
            idx = rank[0]
            if idx > 0 and s._stree.at(idx - 1)[1][0] + 1 > slot.start:
                return False
            if idx + 1 < len(s._stree) and s._stree.at(idx + 1)[1][0] < slot.end:
                return False
        return True

    def apply_leftmost(self):
        inst = self.session.instance
        res = leftmost(inst)
        if not res.feasible:  # pragma: no cover - guarded by the insertion range
            raise InsertionFailed("inconsistent insertion range")
        for task, slot in zip(inst.tasks, res.allocation):
            key = window_key(task)
            if self.slot(key) != slot:
                self.set_slot(key, slot)

    def reallocations(self) -> list:
        out = []
        for key in sorted(self.touched):
            if key == self.key:
                continue
            old = self._start_w.get(key)
            new = self.session._wtree.get(key)
            if old != new:
                out.append((key[2], old, new))
        return out

    def commit(self, m=None, trials=0, fallback=False) -> InsertOutcome:
        moves = self.reallocations()
        self.session.realloc_log.append(moves)
        return InsertOutcome(self.task.id, self.slot(self.key), moves, m, trials, fallback)
