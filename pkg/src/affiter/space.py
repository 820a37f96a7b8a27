"""Finite-dimensional real inner-product space primitives.

Points are plain 1-D float64 numpy arrays.  The only nontrivial structure
here is the sparse affine-combination row: a finite map ``j -> weight`` over
orbit indices whose weights sum to one, used to form the averaged point
``xbar_n = sum_j mu_{n,j} x_j`` from the iteration history.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, NumericalDivergence

Vector = np.ndarray

#: absolute tolerance on the unit row-sum condition
ROW_SUM_TOL = 1e-12


def as_vector(x, dim: int | None = None) -> Vector:
    """Coerce ``x`` to a finite float64 1-D array; scalars become length 1."""
    v = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if v.ndim != 1 or v.size < 1:
        raise ConfigurationError(f"expected a 1-D point, got shape {np.shape(x)}")
    if not np.all(np.isfinite(v)):
        raise ConfigurationError("point has non-finite coordinates")
    if dim is not None and v.size != dim:
        raise ConfigurationError(f"expected dimension {dim}, got {v.size}")
    return v


def check_same_dim(p: Vector, q: Vector) -> None:
    if np.shape(p) != np.shape(q):
        raise ConfigurationError(
            f"dimension mismatch: {np.shape(p)} vs {np.shape(q)}"
        )


def norm_dist(p: Vector, q: Vector) -> float:
    """Euclidean distance ``||p - q||``; zero iff the points are equal."""
    check_same_dim(p, q)
    return float(np.linalg.norm(np.asarray(p, dtype=np.float64) - q))


def row_sum(entries: Mapping[int, float]) -> float:
    """Exactly-rounded sum of the stored weights (fsum, order independent)."""
    return math.fsum(entries.values())


@dataclass(frozen=True)
class SparseRow:
    """One affine-combination row ``mu_{n, .}`` over orbit indices ``0..index``.

    Invariants enforced at construction: every index lies in ``[0, index]``
    and the weights sum to 1 within ``ROW_SUM_TOL``.
    """

    index: int
    entries: Mapping[int, float]

    def __post_init__(self):
        if self.index < 0:
            raise ConfigurationError(f"row index must be >= 0, got {self.index}")
        for j in self.entries:
            if not 0 <= j <= self.index:
                raise ConfigurationError(
                    f"row {self.index} touches orbit index {j} outside [0, {self.index}]"
                )
        s = row_sum(self.entries)
        if abs(s - 1.0) > ROW_SUM_TOL:
            raise ConfigurationError(
                f"row {self.index} weights sum to {s!r}, expected 1 within {ROW_SUM_TOL}"
            )

    def abs_sum(self) -> float:
        return math.fsum(abs(w) for w in self.entries.values())

    def support(self) -> list[int]:
        return sorted(self.entries)


def _orbit_get(orbit, j: int) -> Vector:
    try:
        return orbit[j]
    except (KeyError, IndexError) as exc:
        raise ConfigurationError(f"orbit index {j} is not available") from exc


def affine_combine(row: SparseRow, orbit) -> Vector:
    """Weighted sum ``sum_j mu_j x_j`` of orbit points.

    ``orbit`` is anything indexable by the row's support (dict, list, or the
    engine's ring buffer).  A Kronecker row ``{n: 1.0}`` returns a bit-exact
    copy of ``orbit[n]``; general rows accumulate terms in increasing index
    order so results are reproducible.
    """
    items = sorted(row.entries.items())
    if len(items) == 1 and items[0][1] == 1.0:
        return _orbit_get(orbit, items[0][0]).copy()
    acc = None
    for j, w in items:
        x = _orbit_get(orbit, j)
        term = w * x
        acc = term if acc is None else acc + term
    if acc is None:
        raise ConfigurationError(f"row {row.index} has no entries")
    if not np.all(np.isfinite(acc)):
        raise NumericalDivergence(
            f"affine combination at row {row.index} is non-finite", iteration=row.index
        )
    return acc
