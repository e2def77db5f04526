"""Persistent ordered map with rank access and range aggregation.

Entries live at the leaves of a weight-balanced binary tree; internal nodes
cache the leaf count, the key range, and an aggregate of their leaves.  Every
update copies only the root-to-leaf path, so a reference to an old version is
a free, immutable snapshot.

Aggregates may depend on an entry's rank inside the queried range: ``combine``
receives the number of leaves on its left so it can shift the right operand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Generic, Iterator, TypeVar

__all__ = ["Aggregation", "TouchCounter", "IdSetRq", "MISSING", "max_value", "count_only"]

K = TypeVar("K")
V = TypeVar("V")


class _Missing:
    def __repr__(self):
        return "MISSING"


MISSING: Any = _Missing()

# weight-balance parameters (leaf counts play the role of size + 1)
_DELTA = 3
_RATIO = 2


@dataclass(frozen=True)
class Aggregation:
    """How to summarise a run of entries.

    ``leaf(key, value)`` gives the summary of one entry at local rank 0;
    ``combine(a, b, left_size)`` merges two adjacent summaries, where ``b``
    starts ``left_size`` ranks after ``a``.  ``identity`` summarises nothing.
    """

    leaf: Callable[[Any, Any], Any]
    combine: Callable[[Any, Any, int], Any]
    identity: Any = None


def _plain(op):
    return lambda a, b, _n: op(a, b)


count_only = Aggregation(leaf=lambda k, v: None, combine=lambda a, b, n: None, identity=None)


def max_value(identity=None) -> Aggregation:
    def combine(a, b, _n):
        if a is identity:
            return b
        if b is identity:
            return a
        return a if a >= b else b

    return Aggregation(leaf=lambda k, v: v, combine=combine, identity=identity)


class TouchCounter:
    """Logical work counter shared by all versions descended from one tree."""

    __slots__ = ("count",)

    def __init__(self):
        self.count = 0

    def reset(self) -> int:
        n, self.count = self.count, 0
        return n


class _Node:
    __slots__ = ("left", "right", "size", "agg", "lo", "hi", "value")

    def __init__(self, left, right, size, agg, lo, hi, value):
        self.left = left
        self.right = right
        self.size = size
        self.agg = agg
        self.lo = lo  # smallest key below
        self.hi = hi  # largest key below
        self.value = value

    @property
    def is_leaf(self):
        return self.left is None


@dataclass(frozen=True)
class _Ctx:
    agg: Aggregation
    touches: TouchCounter


def _leaf(ctx: _Ctx, key, value) -> _Node:
    ctx.touches.count += 1
    return _Node(None, None, 1, ctx.agg.leaf(key, value), key, key, value)


def _join(ctx: _Ctx, left: _Node, right: _Node) -> _Node:
    ctx.touches.count += 1
    return _Node(
        left,
        right,
        left.size + right.size,
        ctx.agg.combine(left.agg, right.agg, left.size),
        left.lo,
        right.hi,
        None,
    )


def _balanced(a: int, b: int) -> bool:
    return _DELTA * a >= b


def _rebalance(ctx: _Ctx, left: _Node, right: _Node) -> _Node:
    wl, wr = left.size, right.size
    if _balanced(wl, wr) and _balanced(wr, wl):
        return _join(ctx, left, right)
    if wr > wl:
        rl, rr = right.left, right.right
        if rl.size < _RATIO * rr.size:
            return _join(ctx, _join(ctx, left, rl), rr)
        return _join(ctx, _join(ctx, left, rl.left), _join(ctx, rl.right, rr))
    ll, lr = left.left, left.right
    if lr.size < _RATIO * ll.size:
        return _join(ctx, ll, _join(ctx, lr, right))
    return _join(ctx, _join(ctx, ll, lr.left), _join(ctx, lr.right, right))


def _insert(ctx: _Ctx, node: _Node, key, value) -> _Node:
    ctx.touches.count += 1
    if node.is_leaf:
        if key == node.lo:
            return _leaf(ctx, key, value)
        new = _leaf(ctx, key, value)
        return _join(ctx, new, node) if key < node.lo else _join(ctx, node, new)
    if key <= node.left.hi:
        return _rebalance(ctx, _insert(ctx, node.left, key, value), node.right)
    return _rebalance(ctx, node.left, _insert(ctx, node.right, key, value))


def _remove(ctx: _Ctx, node: _Node, key):
    """Return the subtree without ``key`` (None if it empties)."""
    ctx.touches.count += 1
    if node.is_leaf:
        return None
    if key <= node.left.hi:
        sub = _remove(ctx, node.left, key)
        if sub is None:
            return node.right
        return _rebalance(ctx, sub, node.right)
    sub = _remove(ctx, node.right, key)
    if sub is None:
        return node.left
    return _rebalance(ctx, node.left, sub)


class IdSetRq(Generic[K, V]):
    """An immutable sorted map; mutators return a new version.

    >>> s = IdSetRq().insert(3, "c").insert(1, "a").insert(2, "b")
    >>> list(s.keys())
    [1, 2, 3]
    >>> s.find(3)
    (2, 3, 'c')
    """

    __slots__ = ("_root", "_ctx")

    def __init__(self, aggregation: Aggregation = count_only, touches: TouchCounter | None = None, _root=None):
        self._ctx = _Ctx(aggregation, touches if touches is not None else TouchCounter())
        self._root = _root

    def _make(self, root) -> IdSetRq:
        out = object.__new__(IdSetRq)
        out._ctx = self._ctx
        out._root = root
        return out

    # --- basic properties -------------------------------------------------

    @property
    def touches(self) -> TouchCounter:
        return self._ctx.touches

    @property
    def aggregation(self) -> Aggregation:
        return self._ctx.agg

    def __len__(self) -> int:
        return 0 if self._root is None else self._root.size

    def __bool__(self) -> bool:
        return self._root is not None

    def __iter__(self) -> Iterator[tuple[K, V]]:
        stack = []
        node = self._root
        while stack or node is not None:
            while node is not None and not node.is_leaf:
                stack.append(node.right)
                node = node.left
            if node is not None:
                yield node.lo, node.value
            node = stack.pop() if stack else None

    def keys(self) -> Iterator[K]:
        return (k for k, _ in self)

    def values(self) -> Iterator[V]:
        return (v for _, v in self)

    def __contains__(self, key) -> bool:
        return self.find(key) is not None

    def height(self) -> int:
        def h(node):
            if node is None:
                return 0
            if node.is_leaf:
                return 1
            return 1 + max(h(node.left), h(node.right))

        return h(self._root)

    # --- updates ----------------------------------------------------------

    def insert(self, key: K, value: V = None) -> IdSetRq:
        """Insert or replace ``key``."""
        if self._root is None:
            return self._make(_leaf(self._ctx, key, value))
        return self._make(_insert(self._ctx, self._root, key, value))

    def remove(self, key: K) -> IdSetRq:
        """Delete ``key``; a missing key leaves the version unchanged."""
        if self.find(key) is None:
            return self
        return self._make(_remove(self._ctx, self._root, key))

    def update(self, key: K, value: V = MISSING) -> IdSetRq:
        """Insert/replace when ``value`` is given, delete otherwise."""
        if value is MISSING:
            return self.remove(key)
        return self.insert(key, value)

    # --- access -----------------------------------------------------------

    def find(self, key: K) -> tuple[int, K, V] | None:
        """``(rank, key, value)`` for ``key``, or None when absent."""
        node = self._root
        rank = 0
        touches = self._ctx.touches
        while node is not None:
            touches.count += 1
            if node.is_leaf:
                return (rank, node.lo, node.value) if node.lo == key else None
            if key <= node.left.hi:
                node = node.left
            else:
                rank += node.left.size
                node = node.right
        return None

    def at(self, rank: int) -> tuple[int, K, V]:
        """The entry of the given rank (negative ranks count from the end)."""
        n = len(self)
        if rank < 0:
            rank += n
        if not 0 <= rank < n:
            raise IndexError(f"rank {rank} out of range for size {n}")
        node = self._root
        base = rank
        touches = self._ctx.touches
        while not node.is_leaf:
            touches.count += 1
            if rank < node.left.size:
                node = node.left
            else:
                rank -= node.left.size
                node = node.right
        touches.count += 1
        return base, node.lo, node.value

    def get(self, key: K, default=None):
        hit = self.find(key)
        return default if hit is None else hit[2]

    def bisect_left(self, probe, key: Callable[[K], Any] | None = None) -> int:
        """Number of entries whose (projected) key is ``< probe``."""
        return self._bisect(probe, key, strict=True)

    def bisect_right(self, probe, key: Callable[[K], Any] | None = None) -> int:
        """Number of entries whose (projected) key is ``<= probe``."""
        return self._bisect(probe, key, strict=False)

    def _bisect(self, probe, key, strict: bool) -> int:
        proj = key if key is not None else (lambda k: k)
        below = (lambda k: proj(k) < probe) if strict else (lambda k: proj(k) <= probe)
        node = self._root
        rank = 0
        touches = self._ctx.touches
        while node is not None:
            touches.count += 1
            if node.is_leaf:
                return rank + (1 if below(node.lo) else 0)
            if below(node.left.hi):
                rank += node.left.size
                node = node.right
            else:
                node = node.left
        return rank

    def query(self, lo: int, hi: int):
        """Aggregate over ranks ``lo..hi`` inclusive; identity when ``lo > hi``."""
        n = len(self)
        agg = self._ctx.agg
        if lo > hi:
            if lo < 0 or hi < -1 or lo > n:
                raise IndexError(f"invalid rank range [{lo}, {hi}]")
            return agg.identity
        if lo < 0 or hi >= n:
            raise IndexError(f"invalid rank range [{lo}, {hi}] for size {n}")
        acc = agg.identity
        acc_size = 0
        touches = self._ctx.touches
        # iterative decomposition into maximal subtrees, left to right
        stack = [(self._root, 0)]
        while stack:
            node, offset = stack.pop()
            touches.count += 1
            end = offset + node.size - 1
            if end < lo or offset > hi:
                continue
            if lo <= offset and end <= hi:
                acc = node.agg if acc_size == 0 else agg.combine(acc, node.agg, acc_size)
                acc_size += node.size
                continue
            stack.append((node.right, offset + node.left.size))
            stack.append((node.left, offset))
        return acc

    def check(self) -> None:
        """Verify ordering, cached sizes, key ranges and balance; raise AssertionError."""

        def walk(node):
            if node.is_leaf:
                assert node.size == 1
                assert node.lo == node.hi
                return
            walk(node.left)
            walk(node.right)
            assert node.size == node.left.size + node.right.size, "size cache"
            assert node.lo == node.left.lo and node.hi == node.right.hi, "key range cache"
            assert node.left.hi < node.right.lo, "key order"
            assert _balanced(node.left.size, node.right.size), "balance"
            assert _balanced(node.right.size, node.left.size), "balance"

        if self._root is not None:
            walk(self._root)

    @classmethod
    def from_sorted(cls, items, aggregation: Aggregation = count_only, touches: TouchCounter | None = None) -> IdSetRq:
        """Build a perfectly balanced version from strictly increasing ``(key, value)`` pairs."""
        out = cls(aggregation, touches)
        items = list(items)
        for a, b in zip(items, items[1:]):
            if not a[0] < b[0]:
                raise ValueError("keys must be strictly increasing")
        ctx = out._ctx

        def build(lo, hi):
            if hi - lo == 1:
                return _leaf(ctx, *items[lo])
            mid = (lo + hi) // 2
            return _join(ctx, build(lo, mid), build(mid, hi))

        out._root = build(0, len(items)) if items else None
        return out

    def __repr__(self):
        return f"IdSetRq({list(self)!r})"
