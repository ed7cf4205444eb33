"""Axis-aligned boxes and uniform grid partitions."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Box:
    """Closed interval ``[lo, hi]`` of R^m, compared componentwise."""

    lo: np.ndarray
    hi: np.ndarray

    def __init__(self, lo, hi):
        lo = _frozen(lo)
        hi = _frozen(hi)
        if lo.shape != hi.shape:
            raise ValueError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if lo.size == 0:
            raise ValueError("a box needs at least one dimension")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("NaN bound")
        if np.any(lo > hi):
            raise ValueError(f"empty box: lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, z) -> "Box":
        return cls(z, z)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return bool(np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi))

    def __hash__(self) -> int:
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self) -> str:
        parts = ", ".join(f"[{a:g}, {b:g}]" for a, b in zip(self.lo, self.hi))
        return f"Box({parts})"

    def contains(self, z) -> bool:
        return contains(self, z)

    def intersects(self, other: "Box") -> bool:
        return intersects(self, other)

    def issubset(self, other: "Box") -> bool:
        _check_dims(self.dim, other.dim)
        return bool(np.all(other.lo <= self.lo) and np.all(self.hi <= other.hi))

    def project(self, dims: Sequence[int]) -> "Box":
        dims = list(dims)
        return Box(self.lo[dims], self.hi[dims])

    def product(self, other: "Box") -> "Box":
        return Box(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]))

    def inflate(self, eps) -> "Box":
        return Box(self.lo - eps, self.hi + eps)

    def hull(self, other: "Box") -> "Box":
        _check_dims(self.dim, other.dim)
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise ValueError(f"dimension mismatch: {a} vs {b}")


def contains(b: Box, z) -> bool:
    z = np.asarray(z, dtype=float).reshape(-1)
    _check_dims(b.dim, z.size)
    return bool(np.all(b.lo <= z) and np.all(z <= b.hi))


def intersects(b1: Box, b2: Box) -> bool:
    """True iff the two closed boxes share at least one point."""
    _check_dims(b1.dim, b2.dim)
    return bool(np.all(b1.lo <= b2.hi) and np.all(b2.lo <= b1.hi))


def split(b: Box, parts: Sequence[int]) -> list[Box]:
    """Uniformly tile ``b`` into ``prod(parts)`` boxes, lexicographic in the per-dimension index."""
    parts = [int(p) for p in np.atleast_1d(parts)]
    _check_dims(b.dim, len(parts))
    if any(p < 1 for p in parts):
        raise ValueError(f"split counts must be >= 1, got {parts}")
    edges = [_edges(lo, hi, p) for lo, hi, p in zip(b.lo, b.hi, parts)]
    out = []
    for idx in itertools.product(*(range(p) for p in parts)):
        lo = [e[i] for e, i in zip(edges, idx)]
        hi = [e[i + 1] for e, i in zip(edges, idx)]
        out.append(Box(lo, hi))
    return out


def _edges(lo: float, hi: float, n: int) -> np.ndarray:
    # end points are exact so that children tile the parent without gaps
    e = lo + (hi - lo) * (np.arange(n + 1) / n)
    e[0], e[-1] = lo, hi
    return e


class GridPartition:
    """Uniform partition of a box into ``counts[i]`` cells along dimension ``i``.

    Cells are addressed by integer index tuples. Membership of points uses a
    half-open convention (lower bound closed, upper bound open, except on the
    upper face of the workspace) so that every point maps to a single cell.
    """

    def __init__(self, workspace: Box, counts: Sequence[int]):
        counts = tuple(int(c) for c in counts)
        _check_dims(workspace.dim, len(counts))
        if any(c < 1 for c in counts):
            raise ValueError(f"cell counts must be >= 1, got {counts}")
        self.workspace = workspace
        self.counts = counts
        self.edges = [_edges(lo, hi, c) for lo, hi, c in zip(workspace.lo, workspace.hi, counts)]
        for e in self.edges:
            e.flags.writeable = False

    def __repr__(self) -> str:
        return f"GridPartition({self.workspace!r}, counts={self.counts})"

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def cell_size(self) -> np.ndarray:
        return self.workspace.width / np.array(self.counts, dtype=float)

    def __len__(self) -> int:
        return int(np.prod(self.counts))

    def cells(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(c) for c in self.counts))

    def is_valid(self, cell) -> bool:
        cell = tuple(cell)
        return len(cell) == self.dim and all(
            isinstance(i, (int, np.integer)) and 0 <= i < c for i, c in zip(cell, self.counts)
        )

    def check(self, cell) -> tuple[int, ...]:
        if not self.is_valid(cell):
            raise IndexError(f"invalid cell index {cell!r} for counts {self.counts}")
        return tuple(int(i) for i in cell)

    def cell_box(self, cell) -> Box:
        cell = self.check(cell)
        lo = [e[i] for e, i in zip(self.edges, cell)]
        hi = [e[i + 1] for e, i in zip(self.edges, cell)]
        return Box(lo, hi)

    def locate(self, z) -> tuple[int, ...] | None:
        """Cell holding point ``z`` (half-open convention), or None outside the workspace."""
        z = np.asarray(z, dtype=float).reshape(-1)
        _check_dims(self.dim, z.size)
        if not contains(self.workspace, z):
            return None
        idx = []
        for e, x, c in zip(self.edges, z, self.counts):
            i = int(np.searchsorted(e, x, side="right")) - 1
            idx.append(min(i, c - 1))
        return tuple(idx)

    def index_range(self, box: Box) -> list[tuple[int, int]] | None:
        """Inclusive per-dimension ranges of cells whose closed box meets ``box``.

        Returns None when ``box`` is not contained in the workspace.
        """
        _check_dims(self.dim, box.dim)
        if not box.issubset(self.workspace):
            return None
        out = []
        for e, lo, hi in zip(self.edges, box.lo, box.hi):
            first = int(np.searchsorted(e[1:], lo, side="left"))
            last = int(np.searchsorted(e[:-1], hi, side="right")) - 1
            out.append((first, last))
        return out

    def cells_meeting(self, box: Box) -> list[tuple[int, ...]] | None:
        ranges = self.index_range(box)
        if ranges is None:
            return None
        return list(itertools.product(*(range(a, b + 1) for a, b in ranges)))
