"""The twelve acceptance criteria, each reporting one PASS/FAIL line."""

import itertools
import math
import random
import time
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from dynrealloc.adversary import (
    gen_lower_bound,
    gen_non_generic,
    gen_realloc_req,
    gen_small_slack_osc,
    gen_underalloc_req,
    gen_var_length_osc,
)
from dynrealloc.fa import FaSession, InsertionFailed, within_reallocation_bound
from dynrealloc.geometry import Interval
from dynrealloc.harness.allocators import NaiveLeftmost, OracleAllocator
from dynrealloc.harness.fuzz import fuzz_va
from dynrealloc.harness.runner import run_adaptive, run_ops
from dynrealloc.harness.workloads import random_fixed, random_mp
from dynrealloc.idsetrq import IdSetRq, TouchCounter, max_value
from dynrealloc.multiproc import MpSession, mp_is_valid
from dynrealloc.oracle import oracle_feasible, oracle_max_slack, oracle_min_realloc
from dynrealloc.ordering import Allocation, Instance, InsertState, Task, insertion_range, is_valid
from dynrealloc.va import align_instance, aligned_underallocated

pytestmark = pytest.mark.acceptance


def record(label: str, ok: bool, detail: str, started: float):
    line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail} ({time.perf_counter() - started:.1f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def fa_from_state(state, c) -> FaSession:
    keep = [k for k in range(len(state.instance)) if k != state.rank]
    return FaSession.from_allocation(
        c,
        Instance(tuple(state.instance[k] for k in keep)),
        Allocation(tuple(state.allocation[k] for k in keep)),
    )


def test_01_lower_bound_reproduction():
    t0 = time.perf_counter()
    state = gen_lower_bound(F(1, 2), 3)
    small = oracle_min_realloc(state.instance, state.allocation).count
    state = gen_lower_bound(F(1, 4), 5)
    out = fa_from_state(state, 5).insert(state.task)
    need = math.floor(math.log(4, 1.25))
    assert need == 6
    record("1", small >= 1 and out.count >= need, f"oracle min at (1/2,3) = {small} >= 1; FA at (1/4,5) moved {out.count} >= {need}", t0)


def test_02_fa_upper_bound():
    t0 = time.perf_counter()
    details, ok = [], True
    for eps in (F(1, 2), F(1, 4), F(1, 8)):
        worst = 0
        for c in (1 / eps + 1, 1 / eps + 2, 2 / eps):
            state = gen_lower_bound(eps, c)
            s = fa_from_state(state, c)
            out = s.insert(state.task)
            counts = [out.count]
            # every old task is deleted and put back once: more insert states of the same family
            for t in list(state.instance.tasks):
                if t.id == "new":
                    continue
                s.delete(t.id)
                counts.append(s.insert(t).count)
                ok &= bool(is_valid(s.instance, s.allocation, complete=True))
            worst = max(worst, *counts)
            ok &= all(within_reallocation_bound(k, eps) for k in counts)
        details.append(f"eps={eps}: max {worst}")
    record("2", ok, "; ".join(details) + " all within the bound, all valid", t0)


def test_03_fa_safety_fuzz():
    t0 = time.perf_counter()
    total, failures, problems = 0, 0, []
    rng = random.Random(99)
    for c, ops in ((3, 3334), (5, 3333), (8, 3333)):
        seq = random_fixed(seed=c, ops=ops, c=c, n_max=200)
        s = FaSession(c)
        for op in seq.ops:
            total += 1
            before = s.slots()
            if op.kind == "insert":
                s.insert(op.task)
            else:
                s.delete(op.id)
                after = s.slots()
                if any(after[k] != before[k] for k in after):
                    problems.append(f"delete of {op.id} moved tasks")
            if not is_valid(s.instance, s.allocation, complete=True):
                problems.append(f"invalid after op {total}")
            # probe with an extra insertion; a refusal must leave the state bit-exact
            if total % 10 == 0:
                token = s.state_token()
                start = F(rng.randrange(0, 4 * 120), 4)
                try:
                    s.insert(Task("probe", Interval(start, start + c)))
                except InsertionFailed:
                    failures += 1
                    if s.state_token() != token:
                        problems.append("refused insertion changed the state")
                else:
                    s.delete("probe")
        s.check_indexes()
    record("3", not problems, f"{total} ops, {failures} refused probes rolled back exactly, problems: {problems[:3]}", t0)
    assert failures > 0


def _ordered_slot_table(combos, n):
    """bool[N, n, 15]: rank r fits at [x/2, x/2 + 1] in some ordered solution, by direct greedy packing."""
    w = np.asarray(combos, dtype=np.int64) * 2
    a, b = w[:, :, 0], w[:, :, 1]
    count = len(w)
    xs = np.arange(15)
    out = np.zeros((count, n, len(xs)), dtype=bool)
    neg = -(10**6)
    pre_end = np.full((count, n + 1), neg)
    pre_ok = np.ones((count, n + 1), dtype=bool)
    e, ok = np.full(count, neg), np.ones(count, dtype=bool)
    for j in range(n):
        s = np.maximum(a[:, j], e)
        ok = ok & (s + 2 <= b[:, j])
        e = s + 2
        pre_end[:, j + 1], pre_ok[:, j + 1] = e, ok
    for r in range(n):
        for x in xs:
            good = pre_ok[:, r] & (pre_end[:, r] <= x) & (a[:, r] <= x) & (x + 2 <= b[:, r])
            e = np.full(count, x + 2)
            for j in range(r + 1, n):
                s = np.maximum(a[:, j], e)
                good &= s + 2 <= b[:, j]
                e = s + 2
            out[:, r, x] = good
    rest = np.zeros((count, n), dtype=bool)
    for r in range(n):
        e, ok = np.full(count, neg), np.ones(count, dtype=bool)
        for j in range(n):
            if j != r:
                s = np.maximum(a[:, j], e)
                ok &= s + 2 <= b[:, j]
                e = s + 2
        rest[:, r] = ok
    return out, rest


def test_04_insertion_range_matches_exhaustive_search():
    t0 = time.perf_counter()
    windows = [(a, b) for a in range(9) for b in range(a + 1, 9)]
    tasks = [[Task(f"t{p}", Interval(a, b)) for a, b in windows] for p in range(5)]
    states = mismatches = 0
    for n in range(1, 6):
        idx = list(itertools.combinations_with_replacement(range(len(windows)), n))
        table, rest = _ordered_slot_table([[windows[i] for i in c] for c in idx], n)
        # oracle side summarised as (first, last, count) of the reachable half-grid slots
        any_ = table.any(axis=2)
        first = np.where(any_, table.argmax(axis=2), 1)
        last = np.where(any_, 14 - table[:, :, ::-1].argmax(axis=2), 0)
        size = table.sum(axis=2)
        empty = Allocation((None,) * n)
        lo = np.zeros((len(idx), n), dtype=np.int64)
        hi = np.zeros((len(idx), n), dtype=np.int64)
        for ci, combo in enumerate(idx):
            row = rest[ci]
            if not row.any():
                continue
            inst = Instance(tuple(tasks[p][combo[p]] for p in range(n)))
            for r in range(n):
                if row[r]:
                    rng = insertion_range(InsertState(inst, empty, r))
                    lo[ci, r] = 2 * rng.istart
                    hi[ci, r] = 2 * rng.iend - 2
        lo, hi = np.maximum(lo, 0), np.minimum(hi, 14)
        width = np.maximum(hi - lo + 1, 0)
        agree = np.where(width > 0, (first == lo) & (last == hi) & (size == width), size == 0)
        states += int(rest.sum())
        mismatches += int((~agree & rest).sum())
    record("4", mismatches == 0, f"{states} insert states over windows in [0,8], {mismatches} disagreements", t0)


def _random_unaligned(rng, n):
    out = []
    for _ in range(n):
        start = F(rng.randrange(0, 512), rng.choice((1, 2, 3)))
        out.append((start, start + rng.randrange(4, 96) + F(rng.randrange(0, 3), 3)))
    return Instance.from_windows(out)


def test_05a_alignment_keeps_quarter_slack():
    t0 = time.perf_counter()
    rng = random.Random(5)
    checked, bad = {1: 0, 2: 0}, []
    while min(checked.values()) < 500:
        gamma = 1 if checked[1] < 500 else 2
        inst = _random_unaligned(rng, rng.randint(1, 8))
        if not oracle_feasible(inst, 4 * gamma):
            continue
        checked[gamma] += 1
        if not oracle_feasible(align_instance(inst), gamma):
            bad.append(inst)
    record("5a", not bad, f"{sum(checked.values())} instances 4g-underallocated, aligned ones g-underallocated except {len(bad)}", t0)


GAMMA7_UNALIGNED = Instance.from_windows([(1, 255)] * 8 + [(82, 110)])


def test_05b_unaligned_gamma7_example_feasible_at_28():
    t0 = time.perf_counter()
    ok = oracle_feasible(GAMMA7_UNALIGNED, 28)
    best = oracle_max_slack(GAMMA7_UNALIGNED).gamma_lower
    record("5b", ok, f"unaligned 9-task example feasible at 28: {ok}; exact largest factor is {best}", t0)


def test_05c_aligned_gamma7_example_infeasible():
    t0 = time.perf_counter()
    aligned = align_instance(GAMMA7_UNALIGNED)
    shape = [t.window for t in aligned.tasks] == [Interval(64, 128)] * 8 + [Interval(88, 96)]
    at7 = oracle_feasible(aligned, 7)
    hall7 = aligned_underallocated(aligned, 7)
    # a quarter of the true threshold already fails once aligned
    quarter = oracle_feasible(aligned, F(109, 16))
    ok = shape and not at7 and not hall7 and not quarter and oracle_feasible(GAMMA7_UNALIGNED, F(109, 4))
    record("5c", ok, f"aligned windows {'match' if shape else 'differ'}; feasible at 7: {at7}; at 109/16: {quarter}", t0)


def test_06_non_genericity():
    t0 = time.perf_counter()
    counts = {}
    for m in (2, 3):
        state = gen_non_generic(1, m)
        counts[m] = oracle_min_realloc(state.instance, state.allocation).count
    record("6", all(counts[m] >= m for m in counts), f"oracle minimum per m: {counts}", t0)


def test_07_underallocation_requirement():
    t0 = time.perf_counter()
    seen = {}
    for k in (2, 3):
        report = run_adaptive(OracleAllocator(), gen_underalloc_req(k))
        seen[k] = [c["oracle_min"] for c in report.oracle_checks]
        assert report.ok and seen[k]
    record("7", all(min(v) >= k for k, v in seen.items()), f"traced oracle minima per k: {seen}", t0)


def test_08_small_slack_oscillations():
    t0 = time.perf_counter()
    report = run_ops(OracleAllocator(), gen_small_slack_osc(F(3, 10), 3))
    osc = [c["oracle_min"] for c in report.oracle_checks]
    # two-task pairs: minimum over both pending insertions at once
    seq = gen_var_length_osc(1, 3, "pre-insert-slack")
    alloc, pair_min = OracleAllocator(), []
    for i, op in enumerate(seq.ops):
        if op.kind == "insert" and "pair_min_realloc" in seq.annotations.get(i + 1, {}):
            pair = [op.task, seq.ops[i + 1].task]
            instance = Instance(tuple(alloc.instance.tasks) + tuple(pair))
            start = Allocation(tuple(alloc.allocation.slots) + (None, None))
            pair_min.append(oracle_min_realloc(instance, start).count)
        alloc.insert(op.task) if op.kind == "insert" else alloc.delete(op.id)
    ok = report.ok and osc == [3] * 5 and pair_min == [3] * 5
    record("8", ok, f"oscillation minima {osc}; variable-length pair minima {pair_min}", t0)


def test_09_reallocation_requirement():
    t0 = time.perf_counter()
    report = run_adaptive(NaiveLeftmost(), gen_realloc_req(1))
    w = report.witness[0] if report.witness else {}
    ok = w.get("kind") == "density" and w.get("insertions", 99) <= 2 and time.perf_counter() - t0 < 1
    record("9", ok, f"witness {w}", t0)


@pytest.mark.slow
def test_10_va_conjecture_monitor(tmp_path):
    t0 = time.perf_counter()
    report = fuzz_va(20240601, 100_000, scope_k=10, out_dir=tmp_path)
    s = report.summary()
    line = (
        f"{s['inserts']} inserts, {s['deletes']} deletes, violations {len(s['violations'])}, "
        f"failures {len(s['failures'])}; monitored max reallocations {s['max_reallocs']} "
        f"(conjecture held: {s['conjecture_held']}, {len(s['counterexamples'])} counterexample files)"
    )
    record("10", report.ok, line, t0)


def test_11_multiprocessor_reduction():
    t0 = time.perf_counter()
    problems, lifts, ops = [], 0, 0
    for seed, c in ((1, 3), (2, 4), (3, 5)):
        seq = random_mp(seed=seed, ops=1000, c=c, p=3)
        s = MpSession(3, c=c)
        refused = set()
        for op in seq.ops:
            ops += 1
            if op.kind == "insert":
                try:
                    s.insert(op.task)
                except InsertionFailed:
                    refused.add(op.id)
            elif op.id in refused:
                refused.discard(op.id)
            else:
                s.delete(op.id)
            ok, msg = mp_is_valid(s.instance, s.allocation, 3)
            if not ok:
                problems.append(msg)
            starts = sorted(slot.start for slot in s.slots().values())
            # independent recount of the lift bound: at most 2k - 1 = 3 unit slots meet any unit slot
            for j, x in enumerate(starts):
                if sum(1 for y in starts[max(0, j - 4): j + 5] if abs(y - x) < 1) > 3:
                    problems.append(f"depth above 3 at {x}")
        lifts += s.lifts
        if refused:
            problems.append(f"refused {sorted(refused)[:3]}")
    record("11", not problems, f"{ops} ops, {lifts} lifts each depth-checked, problems: {problems[:3]}", t0)


def test_12_idsetrq_equivalence_and_scaling():
    t0 = time.perf_counter()
    rng = random.Random(12)
    t, ref, bad = IdSetRq(max_value()), {}, 0
    for _ in range(10_000):
        k = rng.randrange(2000)
        if rng.random() < 0.6:
            t = t.insert(k, k)
            ref[k] = k
        else:
            t = t.remove(k)
            ref.pop(k, None)
        keys = sorted(ref)
        if keys:
            r = rng.randrange(len(keys))
            lo, hi = sorted((rng.randrange(len(keys)), r))
            bad += t.at(r)[1] != keys[r] or t.query(lo, hi) != max(keys[lo : hi + 1])
        bad += (t.find(k) is not None) != (k in ref)
    t.check()

    def per_op(n):
        counter = TouchCounter()
        tree = IdSetRq.from_sorted([(2 * j, 2 * j) for j in range(n)], max_value(), touches=counter)
        draw = random.Random(n)
        counter.reset()
        for _ in range(2000):
            k = 2 * draw.randrange(n) + 1
            tree = tree.insert(k, k)
            tree.find(k)
            lo = draw.randrange(n)
            tree.query(lo, min(n, lo + 50))
            tree = tree.remove(k)
        return counter.count / 2000

    small, large = per_op(2**12), per_op(2**16)
    ok = bad == 0 and large <= 1.6 * small
    record("12", ok, f"{bad} mismatches in 10^4 ops; touches/op {small:.1f} at 2^12, {large:.1f} at 2^16 (ratio {large / small:.2f})", t0)
