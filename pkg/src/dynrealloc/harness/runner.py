"""Drive an allocator through a stream, validating after every operation."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..adversary import AdaptiveAdversary, Op, OpSequence
from ..multiproc import MpSession, mp_is_valid
from ..oracle import OracleLimitError, min_realloc_limit, oracle_min_realloc
from ..ordering import Allocation, is_valid, make_insert_state
from ..outcome import InsertionFailed
from .io import encode, write_ops

__all__ = ["Row", "RunReport", "WorkloadConfig", "run_ops", "run_adaptive", "run_workload", "check_state"]

CSV_HEADER = ("op_index", "op", "n", "reallocs", "touches", "ns")


@dataclass(frozen=True)
class Row:
    op_index: int
    op: str  # insert | delete | insert-failed | delete-skipped
    n: int
    reallocs: int
    touches: int
    ns: int


@dataclass
class RunReport:
    rows: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    oracle_checks: list = field(default_factory=list)
    witness: list = field(default_factory=list)
    replay_path: str | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> dict:
        inserts = [r for r in self.rows if r.op == "insert"]
        realloc = [r.reallocs for r in inserts]
        return {
            "ops": len(self.rows),
            "inserts": len(inserts),
            "deletes": sum(r.op == "delete" for r in self.rows),
            "failed_inserts": len(self.failures),
            "max_reallocs": max(realloc, default=0),
            "total_reallocs": sum(r.reallocs for r in self.rows),
            "total_touches": sum(r.touches for r in self.rows),
            "violations": encode(self.violations),
            "oracle_checks": encode(self.oracle_checks),
            "witness": encode(self.witness),
            "replay": self.replay_path,
        }

    def csv_text(self, wall_time: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow((r.op_index, r.op, r.n, r.reallocs, r.touches, r.ns if wall_time else 0))
        return buf.getvalue()

    def write(self, csv_path, summary_path=None) -> None:
        Path(csv_path).write_text(self.csv_text())
        if summary_path is None:
            summary_path = Path(str(csv_path) + ".summary.json")
        Path(summary_path).write_text(json.dumps(self.summary(), indent=1, sort_keys=True) + "\n")


def _snapshot(allocator) -> dict:
    """Public placement: id -> slot, or id -> (processor, slot) with several processors."""
    if isinstance(allocator, MpSession):
        return dict(allocator.allocation.placement)
    return allocator.slots()


def check_state(allocator) -> str | None:
    """Describe the first validity violation of the allocator's solution, or None."""
    if isinstance(allocator, MpSession):
        ok, msg = mp_is_valid(allocator.instance, allocator.allocation, allocator.p)
        return None if ok else msg
    report = is_valid(allocator.instance, allocator.allocation, complete=True)
    return None if report else str(report)


def _touches(allocator) -> int:
    counter = getattr(allocator, "touches", None)
    return counter.count if counter is not None else 0


class _Driver:
    def __init__(self, allocator, annotations=None, oracle_cadence: int = 0, replay_dir=None, validate=True):
        self.allocator = allocator
        self.annotations = annotations if annotations is not None else {}
        self.cadence = oracle_cadence
        self.replay_dir = replay_dir
        self.validate = validate
        self.report = RunReport()
        self.history: list[Op] = []
        self.preset = None
        self._inserts = 0
        self._refused: set = set()

    def apply(self, index: int, op: Op) -> bool:
        """Run one op; False once a violation has been recorded."""
        alloc = self.allocator
        before = _snapshot(alloc)
        t0 = _touches(alloc)
        self.history.append(op)
        kind = op.kind
        expected = None
        if kind == "insert":
            self._inserts += 1
            if self._wants_oracle(index):
                expected = self._oracle_min(op)
        clock = time.perf_counter_ns()
        try:
            if kind == "insert":
                alloc.insert(op.task)
            elif op.id in self._refused:
                kind = "delete-skipped"  # its insertion was refused earlier
                self._refused.discard(op.id)
            else:
                alloc.delete(op.id)
        except InsertionFailed as exc:
            kind = "insert-failed"
            self._refused.add(op.id)
            self.report.failures.append({"op_index": index, "id": op.id, "reason": str(exc)})
        ns = time.perf_counter_ns() - clock
        after = _snapshot(alloc)
        moved = [tid for tid in before if tid in after and after[tid] != before[tid]]
        self.report.rows.append(Row(index, kind, len(alloc), len(moved), _touches(alloc) - t0, ns))
        if expected is not None and kind == "insert":
            entry = {"op_index": index, "oracle_min": expected, "observed": len(moved)}
            claim = self.annotations.get(index, {}).get("min_realloc")
            if claim is not None:
                entry["claimed"] = claim
            self.report.oracle_checks.append(entry)
            if len(moved) < expected:
                return self._violation(index, f"{len(moved)} reallocations, fewer than the proven minimum {expected}")
        if kind == "delete" and moved:
            return self._violation(index, f"delete moved {moved}")
        if kind == "insert-failed" and moved:
            return self._violation(index, f"failed insert changed {moved}")
        if self.validate:
            problem = check_state(alloc)
            if problem is not None:
                return self._violation(index, problem)
        return True

    def _wants_oracle(self, index: int) -> bool:
        if isinstance(self.allocator, MpSession):
            return False  # the oracle's minimum is for one processor
        if "min_realloc" in self.annotations.get(index, {}):
            return len(self.allocator) + 1 <= min_realloc_limit()
        return self.cadence > 0 and self._inserts % self.cadence == 0 and len(self.allocator) + 1 <= min_realloc_limit()

    def _oracle_min(self, op: Op):
        alloc = self.allocator
        state = make_insert_state(alloc.instance, _single_allocation(alloc), op.task)
        try:
            return oracle_min_realloc(state.instance, state.allocation).count
        except OracleLimitError:
            return None
        except ValueError:
            return None  # infeasible insertion; the allocator must fail it

    def _violation(self, index: int, message: str) -> bool:
        self.report.violations.append({"op_index": index, "message": message})
        if self.replay_dir is not None:
            path = Path(self.replay_dir) / f"replay-{index:06d}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            write_ops(path, OpSequence(list(self.history), meta={"violation": message}), preset=self.preset)
            self.report.replay_path = str(path)
        return False


def _single_allocation(alloc) -> Allocation:
    if isinstance(alloc, MpSession):
        placement = alloc.allocation
        return Allocation(tuple(placement[t.id][1] for t in alloc.instance.tasks))
    return alloc.allocation


def run_ops(allocator, seq: OpSequence, oracle_cadence: int = 0, replay_dir=None, preset=None, validate=True) -> RunReport:
    """Replay ``seq``; stops at the first violation."""
    driver = _Driver(allocator, seq.annotations, oracle_cadence, replay_dir, validate)
    driver.preset = preset
    for i, op in enumerate(seq.ops):
        if not driver.apply(i, op):
            break
    return driver.report


def run_adaptive(allocator, adversary: AdaptiveAdversary, oracle_cadence: int = 0, replay_dir=None, max_ops=None) -> RunReport:
    """Let ``adversary`` pick each op from the observed slots."""
    driver = _Driver(allocator, adversary.annotations, oracle_cadence, replay_dir)
    op = adversary.first()
    index = 0
    while op is not None and (max_ops is None or index < max_ops):
        if not driver.apply(index, op):
            break
        index += 1
        op = adversary.send(allocator.slots())
    driver.report.witness = list(adversary.witness)
    return driver.report


@dataclass
class WorkloadConfig:
    """Everything a run depends on; the seed pins down the random parts."""

    allocator: str = "fa"
    generator: str | None = None
    params: dict = field(default_factory=dict)
    ops_path: str | None = None
    seed: int = 0
    ops: int = 1000
    oracle_cadence: int = 0
    c: object = None
    p: int = 3
    replay_dir: str | None = None


def run_workload(cfg: WorkloadConfig) -> RunReport:
    """Build the allocator and the stream named by ``cfg`` and run them."""
    from .allocators import make_allocator
    from .workloads import build_generator
    from .io import read_ops

    preset = None
    if cfg.ops_path is not None:
        seq, preset = read_ops(cfg.ops_path)
        source = seq
    else:
        source, preset = build_generator(cfg.generator, cfg.params, cfg.seed, cfg.ops)
    c = cfg.c
    if c is None and cfg.allocator in ("fa", "mp", "mp-wrapped-fa"):
        c = _infer_span(source, preset)
    allocator = make_allocator(cfg.allocator, c=c, p=cfg.p, preset=preset)
    if isinstance(source, AdaptiveAdversary):
        return run_adaptive(allocator, source, cfg.oracle_cadence, cfg.replay_dir, max_ops=cfg.ops)
    return run_ops(allocator, source, cfg.oracle_cadence, cfg.replay_dir, preset=preset)


def _infer_span(source, preset):
    if preset is not None and len(preset[0]):
        return preset[0][0].window.span
    if isinstance(source, OpSequence):
        for op in source.ops:
            if op.kind == "insert":
                return op.task.window.span
    raise ValueError("cannot infer the window span; pass c explicitly")
