"""Result and error types shared by the allocators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

from .geometry import Interval

__all__ = ["InsertionFailed", "InsertOutcome"]


class InsertionFailed(Exception):
    """The insertion was refused; the session was left unchanged."""


@dataclass
class InsertOutcome:
    task_id: Hashable
    slot: Interval
    reallocations: list = field(default_factory=list)  # (id, old slot, new slot)
    m: int | None = None
    trials: int = 0
    fallback: bool = False
    processor: int | None = None

    @property
    def count(self) -> int:
        return len(self.reallocations)
