"""Exact interval geometry.

Every coordinate is a :class:`fractions.Fraction`; no decision anywhere in the
package is taken on a float.  Intervals are closed, and two intervals that only
share an endpoint do not overlap.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational as _RationalABC

Rational = Fraction

__all__ = [
    "Rational",
    "as_rational",
    "format_rational",
    "Interval",
    "AlignedInterval",
    "Order",
    "interval_compare",
    "snap",
    "align",
    "aligned_nav",
    "floor_log",
]


def as_rational(x) -> Fraction:
    """Coerce ``x`` to an exact Fraction.

    Accepts ints, Fractions (or any ``numbers.Rational``) and strings such as
    ``"3/2"``.  Floats are refused: they would silently bring rounding into the
    allocators' comparisons.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not coordinates")
    if isinstance(x, (int, _RationalABC)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot use {type(x).__name__} {x!r} as an exact rational")


def format_rational(x) -> str:
    """Serialize as ``"p/q"``, dropping ``/1`` for integers."""
    x = as_rational(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True, order=True)
class Interval:
    start: Fraction
    end: Fraction

    def __post_init__(self):
        start = as_rational(self.start)
        end = as_rational(self.end)
        if start > end:
            raise ValueError(f"interval start {start} exceeds end {end}")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    @classmethod
    def unit(cls, start, length=1) -> Interval:
        start = as_rational(start)
        return cls(start, start + as_rational(length))

    @property
    def span(self) -> Fraction:
        return self.end - self.start

    def contains(self, other: Interval) -> bool:
        """``other`` lies within ``self``."""
        return self.start <= other.start and other.end <= self.end

    def contains_point(self, x) -> bool:
        return self.start <= x <= self.end

    def overlaps(self, other: Interval) -> bool:
        return self.start < other.end and other.start < self.end

    def shift(self, c) -> Interval:
        c = as_rational(c)
        return Interval(self.start + c, self.end + c)

    def scale(self, c) -> Interval:
        c = as_rational(c)
        if c < 0:
            raise ValueError("negative scale factor")
        return Interval(self.start * c, self.end * c)

    def intersection_span(self, other: Interval) -> Fraction:
        lo = max(self.start, other.start)
        hi = min(self.end, other.end)
        return max(hi - lo, Fraction(0))

    def left_half(self) -> Interval:
        mid = (self.start + self.end) / 2
        return Interval(self.start, mid)

    def right_half(self) -> Interval:
        mid = (self.start + self.end) / 2
        return Interval(mid, self.end)

    def leq(self, other: Interval) -> bool:
        """The interval partial order: both endpoints no later."""
        return self.start <= other.start and self.end <= other.end

    def to_json(self) -> list[str]:
        return [format_rational(self.start), format_rational(self.end)]

    @classmethod
    def from_json(cls, pair) -> Interval:
        start, end = pair
        return cls(as_rational(start), as_rational(end))

    def __repr__(self):
        return f"[{format_rational(self.start)},{format_rational(self.end)}]"


class Order(enum.Enum):
    LESS_OR_EQUAL = "less-or-equal"
    GREATER_OR_EQUAL = "greater-or-equal"
    BOTH = "both"
    INCOMPARABLE = "incomparable"


def interval_compare(x: Interval, y: Interval) -> Order:
    le = x.leq(y)
    ge = y.leq(x)
    if le and ge:
        return Order.BOTH
    if le:
        return Order.LESS_OR_EQUAL
    if ge:
        return Order.GREATER_OR_EQUAL
    return Order.INCOMPARABLE


def snap(s: Interval, w: Interval) -> Interval:
    """The slot of the same length as ``s`` inside ``w`` closest to ``s``."""
    length = s.span
    if w.span < length:
        raise ValueError(f"window {w} is shorter than slot {s}")
    if s.start < w.start:
        return Interval(w.start, w.start + length)
    if s.end > w.end:
        return Interval(w.end - length, w.end)
    return s


def floor_log(base: Fraction, target: Fraction) -> int:
    """Largest integer ``j >= 0`` with ``base**j <= target``, or 0 if ``target < 1``.

    This is ``floor(max(log_base(target), 0))`` evaluated without floats.
    """
    base = as_rational(base)
    target = as_rational(target)
    if base <= 1:
        raise ValueError("logarithm base must exceed 1")
    if target < 1:
        return 0
    # float estimate, then exact correction
    j = max(int(math.log(target) / math.log(base)) - 1, 0)
    power = base**j
    while power * base <= target:
        power *= base
        j += 1
    while j > 0 and power > target:
        power /= base
        j -= 1
    return j


def _floor_log2(x: Fraction) -> int:
    """Largest ``k`` with ``2**k <= x`` for positive rational ``x``."""
    k = x.numerator.bit_length() - x.denominator.bit_length()
    while _pow2(k) > x:
        k -= 1
    while _pow2(k + 1) <= x:
        k += 1
    return k


def _pow2(k: int) -> Fraction:
    return Fraction(1 << k) if k >= 0 else Fraction(1, 1 << -k)


@dataclass(frozen=True, order=True)
class AlignedInterval:
    """The interval ``[index * 2**level, (index + 1) * 2**level]``."""

    level: int
    index: int

    @property
    def size(self) -> Fraction:
        return _pow2(self.level)

    @property
    def start(self) -> Fraction:
        return self.index * self.size

    @property
    def end(self) -> Fraction:
        return (self.index + 1) * self.size

    @property
    def span(self) -> Fraction:
        return self.size

    def as_interval(self) -> Interval:
        return Interval(self.start, self.end)

    def parent(self) -> AlignedInterval:
        return AlignedInterval(self.level + 1, self.index // 2)

    def sibling(self) -> AlignedInterval:
        return AlignedInterval(self.level, self.index ^ 1)

    def left(self) -> AlignedInterval:
        return AlignedInterval(self.level - 1, 2 * self.index)

    def right(self) -> AlignedInterval:
        return AlignedInterval(self.level - 1, 2 * self.index + 1)

    def contains(self, other) -> bool:
        return self.start <= other.start and other.end <= self.end

    @classmethod
    def from_interval(cls, x: Interval) -> AlignedInterval:
        """Inverse of :meth:`as_interval`; rejects intervals that are not aligned."""
        if x.span <= 0:
            raise ValueError(f"{x} is not aligned")
        level = _floor_log2(x.span)
        size = _pow2(level)
        if size != x.span:
            raise ValueError(f"{x} is not aligned")
        index = x.start / size
        if index.denominator != 1:
            raise ValueError(f"{x} is not aligned")
        return cls(level, int(index))

    @classmethod
    def hull(cls, start, end) -> AlignedInterval | None:
        """Smallest aligned interval covering ``[start, end]`` (None if none exists)."""
        start, end = as_rational(start), as_rational(end)
        span = end - start
        level = _floor_log2(span) if span > 0 else 0
        # an aligned interval covering both endpoints cannot straddle zero
        if start < 0 < end:
            return None
        for k in range(level, level + 2 + max(start.numerator.bit_length(), end.numerator.bit_length())):
            size = _pow2(k)
            a = math.floor(start / size)
            if (a + 1) * size >= end:
                return cls(k, a)
        return None

    def __repr__(self):
        return f"A{self.level}:{self.index}{self.as_interval()!r}"


def align(x: Interval) -> AlignedInterval:
    """Leftmost among the largest aligned intervals inside ``x`` (levels >= 0)."""
    if x.span < 1:
        raise ValueError(f"{x} contains no aligned interval of span >= 1")
    for k in range(_floor_log2(x.span), -1, -1):
        size = _pow2(k)
        a = math.ceil(x.start / size)
        if (a + 1) * size <= x.end:
            return AlignedInterval(k, a)
    raise ValueError(f"{x} contains no aligned interval of span >= 1")


def aligned_nav(x: AlignedInterval, which: str) -> AlignedInterval:
    moves = {
        "parent": x.parent,
        "sibling": x.sibling,
        "left-half": x.left,
        "right-half": x.right,
    }
    try:
        return moves[which]()
    except KeyError:
        raise ValueError(f"unknown aligned navigation {which!r}") from None
