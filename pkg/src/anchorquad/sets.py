"""Finite coordinate sets and sparsely stored sample points.

A point of the infinite-dimensional domain is stored as (active set,
values); every coordinate outside the active set is implicitly pinned to
the kernel's anchor.  This is exact in both sampling-cost models, where
admissible sample points have finitely many non-anchor coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True, order=True)
class VariableSet:
    """A finite set of active coordinate indices, stored strictly increasing."""

    indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        idx = self.indices
        if any(not isinstance(j, int) or j < 1 for j in idx):
            raise ShapeError(f"coordinate indices must be positive integers: {idx}")
        if any(idx[i] >= idx[i + 1] for i in range(len(idx) - 1)):
            raise ShapeError(f"indices must be strictly increasing: {idx}")

    @classmethod
    def of(cls, indices: Iterable[int]) -> "VariableSet":
        """Canonicalize an arbitrary iterable of indices (deduplicating)."""
        return cls(tuple(sorted(set(int(j) for j in indices))))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __contains__(self, j: int) -> bool:
        return j in self.indices

    def issubset(self, other: "VariableSet") -> bool:
        return set(self.indices) <= set(other.indices)

    def union(self, other: "VariableSet") -> "VariableSet":
        return VariableSet.of(self.indices + other.indices)

    def intersection(self, other: "VariableSet") -> "VariableSet":
        return VariableSet.of(set(self.indices) & set(other.indices))

    def difference(self, other: "VariableSet") -> "VariableSet":
        return VariableSet.of(set(self.indices) - set(other.indices))

    def subsets(self) -> Iterator["VariableSet"]:
        """All 2^|u| subsets, in increasing-cardinality, lexicographic order."""
        from itertools import combinations

        for size in range(len(self.indices) + 1):
            for combo in combinations(self.indices, size):
                yield VariableSet(combo)

    def __str__(self) -> str:
        return "{" + ",".join(str(j) for j in self.indices) + "}"


EMPTY_SET = VariableSet()


def parse_variable_set(text: str) -> VariableSet:
    """Parse ``"1,3,4"`` (or ``"{1,3,4}"`` or ``""``) into a VariableSet."""
    body = text.strip().strip("{}")
    if not body:
        return EMPTY_SET
    return VariableSet.of(int(tok) for tok in body.split(","))


@dataclass(frozen=True)
class SparseBatch:
    """``n`` points sharing one structural active set.

    ``values`` has shape (n, |active|); column ``i`` holds the coordinate
    ``active.indices[i]``.  Coordinates outside ``active`` are the anchor.
    """

    active: VariableSet
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != len(self.active):
            raise ShapeError(
                f"values shape {v.shape} does not match active set {self.active}"
            )
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def column(self, j: int) -> np.ndarray:
        try:
            pos = self.active.indices.index(j)
        except ValueError:
            raise ShapeError(f"coordinate {j} not in active set {self.active}")
        return self.values[:, pos]

    def restrict(self, v: VariableSet) -> "SparseBatch":
        """Keep coordinates in ``v``; everything else reverts to the anchor."""
        keep = [i for i, j in enumerate(self.active.indices) if j in v]
        sub = VariableSet(tuple(self.active.indices[i] for i in keep))
        return SparseBatch(sub, self.values[:, keep])

    @classmethod
    def single(cls, active: VariableSet, values: Iterable[float]) -> "SparseBatch":
        return cls(active, np.asarray(list(values), dtype=float).reshape(1, -1))


def point(active: Iterable[int] | VariableSet, values: Iterable[float]) -> SparseBatch:
    """Convenience constructor for a single sparse point."""
    u = active if isinstance(active, VariableSet) else VariableSet.of(active)
    return SparseBatch.single(u, values)
