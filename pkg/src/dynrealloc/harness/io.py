"""JSON Lines wire format for operation streams and insert states.

One object per line.  Rationals travel as ``"p/q"`` strings so nothing is
rounded on the way through a file::

    {"op": "insert", "id": "t7", "window": ["3/2", "9/2"], "length": "1"}
    {"op": "delete", "id": "t7"}
    {"op": "preset", "id": "t3", "window": ["0", "3"], "length": "1", "slot": ["1", "2"]}

``preset`` lines describe tasks already allocated before the stream starts.
Annotations and generator metadata go to a sidecar ``<file>.notes.json``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from ..adversary import Op, OpSequence
from ..geometry import AlignedInterval, Interval, as_rational, format_rational
from ..ordering import Allocation, Instance, InsertState, Task

__all__ = [
    "encode",
    "task_to_json",
    "task_from_json",
    "op_to_json",
    "write_ops",
    "read_ops",
    "write_state",
    "read_state",
    "state_ops",
    "notes_path",
]


def encode(value):
    """JSON-ready copy of a value built from Fractions, Intervals, dicts and lists."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, Interval):
        return value.to_json()
    if isinstance(value, AlignedInterval):
        return value.as_interval().to_json()
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    return str(value)


def task_to_json(task: Task) -> dict:
    return {"id": task.id, "window": task.window.to_json(), "length": format_rational(task.length)}


def task_from_json(obj: dict) -> Task:
    return Task(obj["id"], Interval.from_json(obj["window"]), as_rational(obj.get("length", "1")))


def op_to_json(op: Op) -> dict:
    if op.kind == "insert":
        return {"op": "insert", **task_to_json(op.task)}
    return {"op": "delete", "id": op.id}


def notes_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".notes.json")


def _write_lines(path, objs):
    with open(path, "w") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def write_ops(path, seq: OpSequence, preset: tuple[Instance, Allocation] | None = None) -> None:
    """Write ``seq`` (after optional preset lines) and its annotation sidecar."""
    lines = []
    if preset is not None:
        instance, alloc = preset
        for t, s in zip(instance.tasks, alloc.slots):
            lines.append({"op": "preset", **task_to_json(t), "slot": s.to_json()})
    lines.extend(op_to_json(op) for op in seq.ops)
    _write_lines(path, lines)
    notes = {"meta": encode(seq.meta), "annotations": {str(i): encode(v) for i, v in sorted(seq.annotations.items())}}
    notes_path(path).write_text(json.dumps(notes, indent=1, sort_keys=True) + "\n")


def read_ops(path) -> tuple[OpSequence, tuple[Instance, Allocation] | None]:
    """Read a stream; returns the sequence and the preset state (or None)."""
    seq = OpSequence()
    preset_tasks, preset_slots = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = obj.get("op")
            if kind == "preset":
                if seq.ops:
                    raise ValueError(f"{path}:{lineno}: preset after the first operation")
                preset_tasks.append(task_from_json(obj))
                preset_slots.append(Interval.from_json(obj["slot"]))
            elif kind == "insert":
                seq.ops.append(Op.insert(task_from_json(obj)))
            elif kind == "delete":
                seq.ops.append(Op.delete(obj["id"]))
            else:
                raise ValueError(f"{path}:{lineno}: unknown op {kind!r}")
    side = notes_path(path)
    if side.exists():
        notes = json.loads(side.read_text())
        seq.meta = notes.get("meta", {})
        seq.annotations = {int(k): v for k, v in notes.get("annotations", {}).items()}
    preset = (Instance(tuple(preset_tasks)), Allocation(tuple(preset_slots))) if preset_tasks else None
    return seq, preset


def write_state(path, instance: Instance, allocation: Allocation) -> None:
    """One line per task with its slot, ``null`` for the task being inserted."""
    _write_lines(
        path,
        (
            {**task_to_json(t), "slot": None if s is None else s.to_json()}
            for t, s in zip(instance.tasks, allocation.slots)
        ),
    )


def read_state(path) -> tuple[Instance, Allocation]:
    """Accepts state files and op streams (preset and insert lines; an insert is unallocated)."""
    tasks, slots = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("op") == "delete":
                raise ValueError("state files cannot contain deletes")
            tasks.append(task_from_json(obj))
            slot = obj.get("slot")
            slots.append(None if slot is None else Interval.from_json(slot))
    return Instance(tuple(tasks)), Allocation(tuple(slots))


def state_ops(state: InsertState) -> tuple[OpSequence, tuple[Instance, Allocation]]:
    """Split an insert state into preset tasks and a one-insert stream."""
    keep = [i for i in range(len(state.instance)) if i != state.rank]
    preset = (
        Instance(tuple(state.instance[i] for i in keep)),
        Allocation(tuple(state.allocation[i] for i in keep)),
    )
    seq = OpSequence()
    seq.insert(state.task)
    return seq, preset
