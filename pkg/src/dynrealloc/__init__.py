"""Exact allocators for unit tasks that must stay inside their windows, with adversaries and an oracle."""

from .geometry import AlignedInterval, Interval, align, as_rational, format_rational
from .idsetrq import Aggregation, IdSetRq, TouchCounter
from .ordering import Allocation, Instance, InsertState, Task, insertion_range, is_valid, leftmost, make_insert_state
from .outcome import InsertionFailed, InsertOutcome
from .fa import FaSession
from .va import VaSession, align_instance, aligned_underallocated
from .multiproc import MpSession, MultiprocConfig, mp_lift, mp_transform
from .oracle import oracle_feasible, oracle_max_slack, oracle_min_realloc

__all__ = [
    "AlignedInterval",
    "Interval",
    "align",
    "as_rational",
    "format_rational",
    "Aggregation",
    "IdSetRq",
    "TouchCounter",
    "Allocation",
    "Instance",
    "InsertState",
    "Task",
    "insertion_range",
    "is_valid",
    "leftmost",
    "make_insert_state",
    "InsertionFailed",
    "InsertOutcome",
    "FaSession",
    "VaSession",
    "align_instance",
    "aligned_underallocated",
    "MpSession",
    "MultiprocConfig",
    "mp_lift",
    "mp_transform",
    "oracle_feasible",
    "oracle_max_slack",
    "oracle_min_realloc",
]
