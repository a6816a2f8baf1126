from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, EmptyBox


@dataclass(frozen=True, eq=False)
class Hyperbox:
    """Axis-aligned box ``[lower, upper]`` in input space."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch("lower and upper bounds differ in dimension")
        if lo.size == 0:
            raise DimensionMismatch("hyperbox needs at least one dimension")
        if not np.all(hi > lo):
            raise EmptyBox(f"degenerate box {lo} .. {hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_bounds(cls, bounds) -> "Hyperbox":
        """Build from a sequence of ``(low, high)`` pairs."""
        b = np.asarray(bounds, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2:
            raise DimensionMismatch("bounds must be a sequence of (low, high) pairs")
        return cls(b[:, 0], b[:, 1])

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def extents(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def contains(self, points, atol: float = 0.0) -> np.ndarray:
        """Componentwise closed-bounds membership test, one bool per row."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if p.shape[1] != self.dim:
            raise DimensionMismatch(f"expected {self.dim}-d points, got {p.shape[1]}")
        return np.all((p >= self.lower - atol) & (p <= self.upper + atol), axis=1)

    def uniform(self, count: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random((count, self.dim))
        return self.lower + u * self.extents

    def to_unit(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.lower) / self.extents

    def from_unit(self, points) -> np.ndarray:
        return self.lower + np.asarray(points, dtype=float) * self.extents

    def split(self, dim: int, pieces: int) -> list["Hyperbox"]:
        """Cut along ``dim`` into ``pieces`` boxes of equal volume."""
        edges = np.linspace(self.lower[dim], self.upper[dim], pieces + 1)
        edges[0], edges[-1] = self.lower[dim], self.upper[dim]
        out = []
        for a, b in zip(edges[:-1], edges[1:]):
            lo, hi = self.lower.copy(), self.upper.copy()
            lo[dim], hi[dim] = a, b
            out.append(Hyperbox(lo, hi))
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hyperbox):
            return NotImplemented
        return bool(np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    def __hash__(self) -> int:
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self) -> str:
        pairs = ", ".join(f"[{a:g}, {b:g}]" for a, b in zip(self.lower, self.upper))
        return f"Hyperbox({pairs})"
