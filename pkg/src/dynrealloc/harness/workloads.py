"""Named workloads: the adversary generators plus seeded random streams."""

from __future__ import annotations

import random
from fractions import Fraction

from .. import adversary as adv
from ..adversary import OpSequence
from ..geometry import AlignedInterval, Interval, as_rational
from ..ordering import Task
from .io import state_ops

__all__ = ["random_fixed", "random_mp", "random_aligned", "build_generator", "GENERATORS", "parse_param"]


def _chain_fits(starts: list, c, gamma) -> bool:
    """Whether unit tasks with windows ``[s, s + c]`` fit with lengths scaled by ``gamma``.

    Equal spans make start order the window order, so earliest placement decides it.
    """
    end = None
    for s in sorted(starts):
        x = s if end is None or end < s else end
        end = x + gamma
        if end > s + c:
            return False
    return True


def random_fixed(seed: int, ops: int, c, n_max: int = 200, grid: int = 4, gamma=1, insert_bias=0.6) -> OpSequence:
    """Inserts and deletes of unit tasks with windows of span ``c`` that keep the instance ``gamma``-feasible.

    Window starts are multiples of ``1/grid`` in a domain sized so ``n`` can
    reach ``n_max``.  Infeasible draws are redrawn a few times, then skipped.
    """
    rng = random.Random(seed)
    c, gamma = as_rational(c), as_rational(gamma)
    domain = n_max * gamma
    seq = OpSequence(meta={"generator": "random-fixed", "seed": seed, "c": c, "gamma": gamma})
    live: dict = {}
    serial = 0
    while len(seq) < ops:
        if live and (len(live) >= n_max or rng.random() > insert_bias):
            tid = rng.choice(sorted(live))
            del live[tid]
            seq.delete(tid)
            continue
        for _ in range(8):
            start = Fraction(rng.randrange(int(domain * grid)), grid)
            w = Interval(start, start + c)
            if _chain_fits([v.start for v in live.values()] + [start], c, gamma):
                tid = f"f{serial}"
                serial += 1
                live[tid] = w
                seq.insert(Task(tid, w))
                break
        else:
            if live:
                tid = rng.choice(sorted(live))
                del live[tid]
                seq.delete(tid)
    return seq


def random_mp(seed: int, ops: int, c, p: int, gamma=Fraction(9, 4), n_max: int = 150, grid: int = 4) -> OpSequence:
    """Unit tasks of window span ``c`` on ``p`` processors, certified ``gamma``-feasible.

    Each task is charged to one of ``p`` lanes whose tasks are ``gamma``-feasible
    on their own, which certifies the whole instance.
    """
    rng = random.Random(seed)
    c, gamma = as_rational(c), as_rational(gamma)
    if c < gamma:
        raise ValueError("window span must be at least gamma")
    domain = n_max * gamma / p
    seq = OpSequence(meta={"generator": "random-mp", "seed": seed, "c": c, "p": p, "gamma": gamma})
    lanes = [dict() for _ in range(p)]
    owner: dict = {}
    serial = 0
    while len(seq) < ops:
        if owner and (len(owner) >= n_max or rng.random() > 0.6):
            tid = rng.choice(sorted(owner))
            del lanes[owner.pop(tid)][tid]
            seq.delete(tid)
            continue
        start = Fraction(rng.randrange(int(domain * grid) + 1), grid)
        w = Interval(start, start + c)
        order = list(range(p))
        rng.shuffle(order)
        for lane in order:
            if _chain_fits([v.start for v in lanes[lane].values()] + [start], c, gamma):
                tid = f"q{serial}"
                serial += 1
                lanes[lane][tid] = w
                owner[tid] = lane
                seq.insert(Task(tid, w), gamma_lower=gamma)
                break
        else:
            if owner:
                tid = rng.choice(sorted(owner))
                del lanes[owner.pop(tid)][tid]
                seq.delete(tid)
    return seq


def random_aligned(seed: int, ops: int, scope_k: int = 10, max_level: int | None = None, insert_bias=0.7) -> OpSequence:
    """Aligned unit-task windows inside ``[0, 2^scope_k]`` kept 2-underallocated."""
    from ..va import HallCounter

    rng = random.Random(seed)
    max_level = scope_k if max_level is None else max_level
    seq = OpSequence(meta={"generator": "random-aligned", "seed": seed, "scope_k": scope_k})
    hall = HallCounter()
    live: dict = {}
    serial = 0
    while len(seq) < ops:
        if live and rng.random() >= insert_bias:
            tid = rng.choice(sorted(live))
            hall = hall.remove(live.pop(tid))
            seq.delete(tid)
            continue
        level = rng.randint(0, max_level)
        a = AlignedInterval(level, rng.randrange(2 ** (scope_k - level)))
        if not hall.admits(a, 2):
            continue
        task = Task(f"v{serial}", a.as_interval())
        serial += 1
        hall = hall.add(task)
        live[task.id] = task
        seq.insert(task)
    return seq


def parse_param(text: str):
    """``"3"`` -> 3, ``"1/4"`` -> Fraction(1, 4), anything else stays a string."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return as_rational(text)
    except (ValueError, ZeroDivisionError):
        return text


GENERATORS = {
    "lower-bound": lambda p, seed, ops: state_ops(adv.gen_lower_bound(p.get("eps", Fraction(1, 4)), p.get("c", 5))),
    "non-generic": lambda p, seed, ops: state_ops(adv.gen_non_generic(p.get("gamma", 1), p.get("m", 2))),
    "small-slack-osc": lambda p, seed, ops: (
        adv.gen_small_slack_osc(p.get("eps", Fraction(3, 10)), p.get("k", 3), p.get("alternations", 3), p.get("m", 1)),
        None,
    ),
    "mp-small-slack": lambda p, seed, ops: (
        adv.gen_mp_small_slack(p.get("eps", Fraction(1, 12)), p.get("p", 2), p.get("k", 2), p.get("alternations", 2)),
        None,
    ),
    "var-length-osc": lambda p, seed, ops: (
        adv.gen_var_length_osc(p.get("gamma", 1), p.get("k", 3), p.get("mode", "pre-insert-slack"), p.get("alternations", 3)),
        None,
    ),
    "realloc-req": lambda p, seed, ops: (adv.gen_realloc_req(p.get("gamma", 1)), None),
    "underalloc-req": lambda p, seed, ops: (adv.gen_underalloc_req(p.get("k", 2), p.get("rounds", 2)), None),
    "random-fixed": lambda p, seed, ops: (random_fixed(seed, ops, p.get("c", 5), p.get("n_max", 200)), None),
    "random-mp": lambda p, seed, ops: (random_mp(seed, ops, p.get("c", 5), p.get("p", 3)), None),
    "random-aligned": lambda p, seed, ops: (random_aligned(seed, ops, p.get("scope_k", 10)), None),
}


def build_generator(name: str, params: dict, seed: int = 0, ops: int = 1000):
    """Returns ``(source, preset)``: an OpSequence or AdaptiveAdversary, and an optional preset state."""
    try:
        factory = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown generator {name!r}; choose from {', '.join(sorted(GENERATORS))}") from None
    return factory(dict(params), seed, ops)
