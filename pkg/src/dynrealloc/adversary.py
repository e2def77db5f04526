"""Hard inputs: fixed insert states, replayable operation streams, and adaptive streams.

Adaptive adversaries are Python generators.  Each ``yield`` hands out the next
operation and receives the allocator's public slot map (task id -> slot) as it
stands after that operation; nothing about the allocator's internals is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Generator, Hashable, Iterator

from .geometry import AlignedInterval, Interval, as_rational
from .ordering import Allocation, Instance, InsertState, Task, make_insert_state

__all__ = [
    "Op",
    "OpSequence",
    "AdaptiveAdversary",
    "density",
    "gen_lower_bound",
    "lower_bound_certificate",
    "gen_small_slack_osc",
    "gen_realloc_req",
    "gen_underalloc_req",
    "gen_non_generic",
    "non_generic_certificate",
    "gen_mp_small_slack",
    "gen_var_length_osc",
]


@dataclass(frozen=True)
class Op:
    kind: str  # "insert" | "delete"
    id: Hashable
    task: Task | None = None

    @classmethod
    def insert(cls, task: Task) -> Op:
        return cls("insert", task.id, task)

    @classmethod
    def delete(cls, task_id) -> Op:
        return cls("delete", task_id)


@dataclass
class OpSequence:
    """Operations plus per-op annotations (index -> dict of claims)."""

    ops: list = field(default_factory=list)
    annotations: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.ops)

    def __iter__(self) -> Iterator[Op]:
        return iter(self.ops)

    def insert(self, task: Task, **note):
        self.ops.append(Op.insert(task))
        if note:
            self.annotations[len(self.ops) - 1] = note

    def delete(self, task_id, **note):
        self.ops.append(Op.delete(task_id))
        if note:
            self.annotations[len(self.ops) - 1] = note

    def check(self) -> None:
        """Raise ValueError unless every delete names a live task and ids stay unique while live."""
        live = set()
        for i, op in enumerate(self.ops):
            if op.kind == "insert":
                if op.id in live:
                    raise ValueError(f"op {i}: {op.id!r} inserted twice")
                live.add(op.id)
            elif op.kind == "delete":
                if op.id not in live:
                    raise ValueError(f"op {i}: delete of absent {op.id!r}")
                live.remove(op.id)
            else:
                raise ValueError(f"op {i}: unknown kind {op.kind!r}")

    def live_after(self, index: int) -> dict:
        """Tasks present after op ``index`` (inclusive), in insertion order."""
        live: dict = {}
        for op in self.ops[: index + 1]:
            if op.kind == "insert":
                live[op.id] = op.task
            else:
                live.pop(op.id)
        return live


class AdaptiveAdversary:
    """Wraps a generator that yields ops and is sent slot maps back.

    ``witness`` collects whatever the generator records about forced reallocations.
    """

    def __init__(self, name: str, factory, **params):
        self.name = name
        self.params = params
        self.witness: list[dict] = []
        self.annotations: dict = {}
        self._gen: Generator = factory(self, **params)
        self._started = False
        self.steps = 0

    def first(self) -> Op | None:
        self._started = True
        return self._advance(None)

    def send(self, slots: dict) -> Op | None:
        """Report the slot map after the last op; get the next op (None when done)."""
        if not self._started:
            raise RuntimeError("call first() before send()")
        return self._advance(slots)

    def _advance(self, value):
        try:
            op = self._gen.send(value)
        except StopIteration:
            return None
        self.steps += 1
        return op

    def note(self, **claims):
        """Annotate the op about to be yielded."""
        self.annotations[self.steps] = claims


def density(slots, x: Interval) -> Fraction:
    """Covered fraction of ``x`` by the given slots."""
    total = sum((s.intersection_span(x) for s in slots), Fraction(0))
    return total / x.span


# --- fixed-window lower bound -------------------------------------------------


def gen_lower_bound(eps, c) -> InsertState:
    """An eps-slack fixed-window state whose insertion needs ``floor(log_{1+eps}(1/eps))`` moves."""
    eps, c = as_rational(eps), as_rational(c)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if c < 1 / eps + 1:
        raise ValueError("c must be at least 1/eps + 1")
    n = math.floor((c - 1) / eps)
    width = len(str(n))
    tasks, slots = [], []
    for i in range(1, n + 1):
        end = max(c, i * (1 + eps))
        tasks.append(Task(f"t{i:0{width}d}", Interval(end - c, end)))
        slots.append(Interval(i - 1, i))
    new = Task("new", Interval(0, c))
    return make_insert_state(Instance(tuple(tasks)), Allocation(tuple(slots)), new)


def lower_bound_certificate(state: InsertState, eps) -> tuple[Instance, Allocation]:
    """The pre-insertion tasks with their (1+eps)-solution ``[i-1, i](1+eps)``."""
    g = 1 + as_rational(eps)
    old = Instance(tuple(t for t in state.instance.tasks if t.id != "new"))
    return old, Allocation(tuple(Interval((i - 1) * g, i * g) for i in range(1, len(old) + 1)))


# --- small-slack oscillation with windows of bounded ratio -----------------------


def gen_small_slack_osc(eps, k: int, alternations: int = 3, m: int = 1) -> OpSequence:
    """Base of ``k`` groups, then a task flipping between the far-left and far-right gaps.

    Group ``i`` has one window of span ``(m+2)γ`` and ``m`` centred windows of
    span ``mγ``; large windows of adjacent groups overlap by ``γ``.  With
    ``m = 1`` this is windows ``[2i, 2i+3]γ`` and ``[2i+1, 2i+2]γ``.
    """
    eps = as_rational(eps)
    if m < 1 or k < 1:
        raise ValueError("k and m must be positive")
    if not 0 < eps < Fraction(1, 2 * m + 1):
        raise ValueError(f"eps must lie in (0, 1/{2 * m + 1})")
    g = 1 + eps
    seq = OpSequence(meta={"generator": "small-slack-osc", "eps": eps, "k": k, "m": m})
    pitch = m + 1
    for i in range(1, k + 1):
        base = pitch * i
        seq.insert(Task(f"g{i}L", Interval(base * g, (base + m + 2) * g)), slack_lower=eps)
        for j in range(m):
            seq.insert(Task(f"g{i}s{j}", Interval((base + 1) * g, (base + 1 + m) * g)), slack_lower=eps)
    left = Interval(pitch * g, (pitch + 1) * g)
    right = Interval((pitch * k + m + 1) * g, (pitch * k + m + 2) * g)
    for a in range(2 * alternations):
        w = left if a % 2 == 0 else right
        tid = f"osc{a}"
        note = {"slack_lower": eps}
        if a > 0:
            note["min_realloc"] = k
        seq.insert(Task(tid, w), **note)
        seq.delete(tid)
    return seq


# --- unaligned reallocation requirement ------------------------------------------


def _realloc_req(adv: AdaptiveAdversary, gamma: int):
    top = 2 * gamma - 1
    w = Interval(0, gamma * 2**top)
    prev: dict = {}
    serial = 0
    for step in range(1, top + 1):
        for _ in range(2 ** (2 * gamma - step - 1)):
            task = Task(f"r{serial}", w)
            serial += 1
            adv.note(window=w, step=step)
            slots = yield Op.insert(task)
            moved = [t for t in prev if t in slots and slots[t] != prev[t]]
            if moved:
                adv.witness.append({"kind": "reallocated", "step": step, "ids": moved})
                return
            prev = dict(slots)
        a, b = w.left_half(), w.right_half()
        da, db = density(prev.values(), a), density(prev.values(), b)
        w = a if da >= db else b  # ties go left
    d = density(prev.values(), w)
    free = w.span * (1 - d)
    if free < 1:
        adv.witness.append({"kind": "density", "window": w, "density": d, "free": free, "insertions": serial + 1})
    adv.note(window=w, step=top + 1, forced=free < 1)
    slots = yield Op.insert(Task(f"r{serial}", w))
    moved = [t for t in prev if t in slots and slots[t] != prev[t]]
    if moved:
        adv.witness.append({"kind": "reallocated", "step": top + 1, "ids": moved})


def gen_realloc_req(gamma: int = 1) -> AdaptiveAdversary:
    """``2^(2γ-1)`` γ-underallocated insertions that no never-moving allocator survives."""
    if not isinstance(gamma, int) or gamma < 1:
        raise ValueError("gamma must be a positive integer")
    return AdaptiveAdversary("realloc-req", _realloc_req, gamma=gamma)


# --- aligned underallocation requirement ------------------------------------------


def _aligned_id(a: AlignedInterval) -> str:
    return f"a{a.level}_{a.index}"


def _underalloc_req(adv: AdaptiveAdversary, k: int, rounds: int):
    root = AlignedInterval(k, 0)
    slots: dict = {}
    for level in range(k, 0, -1):
        for index in range(2 ** (k - level)):
            a = AlignedInterval(level, index)
            adv.note(setup=True)
            slots = yield Op.insert(Task(_aligned_id(a), a.as_interval()))
            if _aligned_id(a) not in slots:
                adv.witness.append({"kind": "refused", "id": _aligned_id(a)})
                return
    for r in range(rounds):
        c = root
        while c.level > 0:
            held = slots[_aligned_id(c)]
            lo, hi = c.left(), c.right()
            c = lo if held.intersection_span(lo.as_interval()) >= held.intersection_span(hi.as_interval()) else hi
        tid = f"probe{r}"
        adv.note(min_realloc=k, probe=c.as_interval())
        slots = yield Op.insert(Task(tid, c.as_interval()))
        slots = yield Op.delete(tid)


def gen_underalloc_req(k: int, rounds: int = 2) -> AdaptiveAdversary:
    """One task per aligned interval of span >= 2 in ``[0, 2^k]``, then probes that each force ``k`` moves."""
    if k < 1:
        raise ValueError("k must be positive")
    return AdaptiveAdversary("underalloc-req", _underalloc_req, k=k, rounds=rounds)


# --- non-generic aligned insert state ----------------------------------------------


def gen_non_generic(gamma=1, m: int = 2) -> InsertState:
    """Nested windows ``[0, (2γ)^j]`` packed solid from 0; the new task has window ``[0, 2γ]``."""
    gamma = as_rational(gamma)
    if gamma.denominator != 1 and gamma.numerator != 1:
        raise ValueError("gamma must be a power of two")
    from .va import is_power_of_two

    if not is_power_of_two(gamma) or m < 1:
        raise ValueError("gamma must be a power of two and m positive")
    base = 2 * gamma
    if base.denominator != 1:
        raise ValueError("2*gamma must be an integer")
    base = int(base)
    n = base**m + 1
    width = len(str(n))
    tasks, slots = [], []
    for i in range(1, n):
        j = 1
        while base**j < i:
            j += 1
        tasks.append(Task(f"t{i:0{width}d}", Interval(0, base ** (j + 1))))
        slots.append(Interval(i - 1, i))
    new = Task("new", Interval(0, base))
    return make_insert_state(Instance(tuple(tasks)), Allocation(tuple(slots)), new)


def non_generic_certificate(state: InsertState, gamma=1) -> Allocation:
    """γ-slots ``[2γi - γ, 2γi]`` for the old tasks and ``[0, γ]`` for the new one."""
    gamma = as_rational(gamma)
    out = []
    for t in state.instance.tasks:
        if t.id == "new":
            out.append(Interval(0, gamma))
        else:
            i = int(str(t.id)[1:])
            out.append(Interval(2 * gamma * i - gamma, 2 * gamma * i))
    return Allocation(tuple(out))


# --- several processors, small slack ------------------------------------------------


def gen_mp_small_slack(eps, p: int, k: int, alternations: int = 2) -> OpSequence:
    """Groups ``-k..k`` of ``p`` staggered windows; group 0 flips between two rigid layouts."""
    eps = as_rational(eps)
    if p < 2 or k < 1:
        raise ValueError("need p > 1 and k >= 1")
    if not 0 < eps < Fraction(1, 4 * p - 1):
        raise ValueError(f"eps must lie in (0, 1/{4 * p - 1})")
    g = 1 + eps
    seq = OpSequence(meta={"generator": "mp-small-slack", "eps": eps, "p": p, "k": k})

    def window(i, j, shift=Fraction(0)):
        s = i + Fraction(j, p) + shift
        return Interval(s * g, (s + 1) * g)

    for i in range(-k, k + 1):
        for j in range(1, p + 1):
            seq.insert(Task(f"g{i}_{j}", window(i, j)), slack_lower=eps)
    group0 = [f"g0_{j}" for j in range(1, p + 1)]
    for a in range(alternations):
        batch = {"batch": f"to-position-2/{a}", "batch_min_realloc": k * p}
        for tid in group0:
            seq.delete(tid, **batch)
        shifted = [f"h{a}_{j}" for j in range(1, p)]
        for j, tid in enumerate(shifted, start=1):
            seq.insert(Task(tid, window(0, j, Fraction(1, 2 * p))), slack_lower=eps, **batch)
        back = {"batch": f"to-position-1/{a}", "batch_min_realloc": k * p}
        for tid in shifted:
            seq.delete(tid, **back)
        group0 = [f"g0_{j}r{a}" for j in range(1, p + 1)]
        for j, tid in enumerate(group0, start=1):
            seq.insert(Task(tid, window(0, j)), slack_lower=eps, **back)
    return seq


# --- variable task lengths ----------------------------------------------------------


def gen_var_length_osc(gamma, k: int, mode: str = "pre-insert-slack", alternations: int = 3):
    """Oscillations with variable lengths.

    ``pre-insert-slack`` returns an OpSequence: ``k`` unit tasks in ``[1,3]kγ``
    and a pair of lengths ``k`` and ``2kγ - k`` flipping between ``[0,2]kγ`` and
    ``[2,4]kγ``.  ``always-slack`` returns an AdaptiveAdversary that drops a
    length ``rk`` task into the densest of ``m`` equal pieces of ``[0, kγ]``.
    """
    gamma = as_rational(gamma)
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    if mode == "pre-insert-slack":
        return _var_length_pre(gamma, k, alternations)
    if mode == "always-slack":
        if gamma >= 2:
            raise ValueError("always-slack mode needs gamma < 2")
        m = math.ceil(2 / (2 - gamma))
        if k % m:
            raise ValueError(f"k must be a multiple of {m}")
        return AdaptiveAdversary("var-length-always", _var_length_always, gamma=gamma, k=k, rounds=alternations)
    raise ValueError(f"unknown mode {mode!r}")


def _var_length_pre(gamma: Fraction, k: int, alternations: int) -> OpSequence:
    seq = OpSequence(meta={"generator": "var-length-osc", "mode": "pre-insert-slack", "gamma": gamma, "k": k})
    kg = k * gamma
    for i in range(k):
        seq.insert(Task(f"u{i}", Interval(kg, 3 * kg)))
    for a in range(2 * alternations):
        w = Interval(0, 2 * kg) if a % 2 == 0 else Interval(2 * kg, 4 * kg)
        short, long_ = f"p{a}a", f"p{a}b"
        seq.insert(Task(short, w, k), gamma_lower_before=gamma)
        note = {"gamma_lower_before": gamma}
        if a > 0:
            note["pair_min_realloc"] = k
        seq.insert(Task(long_, w, 2 * kg - k), **note)
        seq.delete(short)
        seq.delete(long_)
    return seq


def _var_length_always(adv: AdaptiveAdversary, gamma: Fraction, k: int, rounds: int):
    m = math.ceil(2 / (2 - gamma))
    r = Fraction(1, m)
    kg = k * gamma
    slots: dict = {}
    units = int((1 - r) * k)
    for i in range(units):
        adv.note(gamma_lower=gamma)
        slots = yield Op.insert(Task(f"u{i}", Interval(0, kg)))
    forced = math.ceil((2 - gamma - r) * r * k)
    for a in range(rounds):
        unit_slots = [slots[f"u{i}"] for i in range(units)]
        pieces = [Interval(j * r * kg, (j + 1) * r * kg) for j in range(m)]
        v = max(pieces, key=lambda x: (density(unit_slots, x), -x.start))
        tid = f"big{a}"
        adv.note(gamma_lower=gamma, min_realloc=forced, window=v)
        slots = yield Op.insert(Task(tid, v, r * k))
        slots = yield Op.delete(tid)
