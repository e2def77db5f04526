"""Random aligned workloads for the aligned-window allocator.

Inserts that would break 2-underallocation are skipped before they reach the
allocator, so every insert it sees must succeed.  Inserts that move more than
one task are written out as replay files; they are findings, not failures.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from ..adversary import Op, OpSequence
from ..geometry import AlignedInterval
from ..ordering import Task, is_valid
from ..outcome import InsertionFailed
from ..va import VaSession, aligned_underallocated
from .io import write_ops

__all__ = ["FuzzReport", "fuzz_va", "replay_va"]


@dataclass
class FuzzReport:
    seed: int
    ops: int
    scope_k: int
    inserts: int = 0
    deletes: int = 0
    skipped: int = 0
    max_reallocs: int = 0
    realloc_histogram: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    counterexamples: list = field(default_factory=list)
    repairs: int = 0
    max_n: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations and not self.failures

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "ops": self.ops,
            "scope": f"2^{self.scope_k}",
            "inserts": self.inserts,
            "deletes": self.deletes,
            "skipped_inserts": self.skipped,
            "max_n": self.max_n,
            "max_reallocs": self.max_reallocs,
            "realloc_histogram": {str(k): v for k, v in sorted(self.realloc_histogram.items())},
            "violations": self.violations,
            "failures": self.failures,
            "counterexamples": self.counterexamples,
            "repairs": self.repairs,
            "conjecture_held": self.max_reallocs <= 1,
        }


def fuzz_va(
    seed: int,
    ops: int,
    scope_k: int = 10,
    out_dir=None,
    insert_bias: float = 0.7,
    audit_every: int = 1000,
    session: VaSession | None = None,
) -> FuzzReport:
    """Run ``ops`` random aligned operations inside ``[0, 2^scope_k]``.

    Window levels are uniform in ``0..scope_k`` and positions uniform within
    the scope.  Every op is validated incrementally; every ``audit_every`` ops
    the full solution and the incremental capacity check are re-verified from
    scratch.  ``session`` lets a test hand in a deliberately broken allocator.
    """
    rng = random.Random(seed)
    va = session if session is not None else VaSession()
    report = FuzzReport(seed, ops, scope_k)
    history: list[Op] = []
    cells: dict = {}  # cell start -> id, as observed from outcomes
    where: dict = {}  # id -> cell start
    live: list = []
    serial = 0
    for step in range(ops):
        if live and rng.random() >= insert_bias:
            tid = live.pop(rng.randrange(len(live)))
            history.append(Op.delete(tid))
            va.delete(tid)  # a delete that moved anything shows up in the next audit
            report.deletes += 1
            del cells[where.pop(tid)]
        else:
            level = rng.randint(0, scope_k)
            a = AlignedInterval(level, rng.randrange(2 ** (scope_k - level)))
            task = Task(f"v{serial}", a.as_interval())
            if not va.admits(task):
                report.skipped += 1
                continue
            serial += 1
            history.append(Op.insert(task))
            try:
                out = va.insert(task)
            except InsertionFailed as exc:
                report.failures.append({"op_index": len(history) - 1, "id": task.id, "reason": str(exc)})
                break
            report.inserts += 1
            live.append(task.id)
            count = len(out.reallocations)
            report.realloc_histogram[count] = report.realloc_histogram.get(count, 0) + 1
            report.max_reallocs = max(report.max_reallocs, count)
            for tid, _old, _new in out.reallocations:
                del cells[where.pop(tid)]
            problem = None
            for tid, slot in [(t, new) for t, _o, new in out.reallocations] + [(task.id, out.slot)]:
                window = va.window_of(tid)
                if not window.contains(slot):
                    problem = f"{tid!r} placed at {slot} outside {window}"
                if slot.start in cells:
                    problem = f"{tid!r} and {cells[slot.start]!r} share cell {slot}"
                cells[slot.start] = tid
                where[tid] = slot.start
            if problem:
                _violation(report, step, problem, history, out_dir)
                break
            if count > 1:
                path = _dump(out_dir, f"va-counterexample-{seed}-{len(history) - 1:07d}.jsonl", history, {"reallocs": count})
                report.counterexamples.append({"op_index": len(history) - 1, "reallocs": count, "replay": path})
        report.max_n = max(report.max_n, len(va))
        if audit_every and (step + 1) % audit_every == 0:
            problem = _audit(va, where)
            if problem:
                _violation(report, step, problem, history, out_dir)
                break
    else:
        problem = _audit(va, where)
        if problem:
            _violation(report, ops - 1, problem, history, out_dir)
    report.repairs = getattr(va, "repairs", 0)
    return report


def _audit(va: VaSession, where: dict) -> str | None:
    report = is_valid(va.instance, va.allocation, complete=True)
    if not report:
        return str(report)
    slots = va.slots()
    for tid, x in where.items():
        if slots[tid].start != x:
            return f"reported moves disagree with the solution for {tid!r}"
    if len(va) <= 64 and not aligned_underallocated(va.instance, 2):
        return "capacity check let the instance stop being 2-underallocated"
    return None


def _dump(out_dir, name: str, history: list, meta: dict) -> str | None:
    if out_dir is None:
        return None
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    write_ops(path, OpSequence(list(history), meta=meta))
    return str(path)


def _violation(report: FuzzReport, step: int, message: str, history: list, out_dir) -> None:
    path = _dump(out_dir, f"va-violation-{report.seed}-{step:07d}.jsonl", history, {"violation": message})
    report.violations.append({"step": step, "message": message, "replay": path})


def replay_va(seq: OpSequence) -> list[int]:
    """Replay a stream on a fresh session; reallocation count of every insert."""
    va = VaSession()
    counts = []
    for op in seq.ops:
        if op.kind == "insert":
            counts.append(len(va.insert(op.task).reallocations))
        else:
            va.delete(op.id)
    return counts
