"""Point-set data model and the diameter / variance statistics used by the trees.

All statistics subtract the subset's own mean, so callers never need to
pre-center their data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "PointSubset",
    "DiameterStats",
    "subset_mean",
    "avg_diameter_sq",
    "avg_diameter_sq_pair",
    "heuristic_diameter_sq",
    "directional_variance",
    "diameter_stats",
]

# Above this many rows the column mean gets a second, corrective pass.
COMPENSATE_ABOVE = 10_000
UNIT_NORM_TOL = 1e-6


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable ``n x D`` matrix of finite float64 points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, order="C", copy=True)
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"dataset needs n >= 1 and D >= 1, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("dataset contains NaN or infinite entries")
        object.__setattr__(self, "points", _readonly(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def all(self) -> "PointSubset":
        return PointSubset._trusted(self, np.arange(self.n, dtype=np.intp))

    def subset(self, indices) -> "PointSubset":
        return PointSubset(self, indices)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Dataset(n={self.n}, dim={self.dim})"


@dataclass(frozen=True, eq=False)
class PointSubset:
    """A non-empty set of rows of a :class:`Dataset`, held as indices only."""

    dataset: Dataset
    indices: np.ndarray

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.intp, copy=True).reshape(-1)
        if idx.size == 0:
            raise ValueError("point subset must be non-empty")
        if idx.min() < 0 or idx.max() >= self.dataset.n:
            raise IndexError(f"subset index out of range [0, {self.dataset.n})")
        if np.unique(idx).size != idx.size:
            raise ValueError("subset indices must be unique")
        object.__setattr__(self, "indices", _readonly(idx))

    @classmethod
    def _trusted(cls, dataset, indices):
        # Skips validation; used by the tree builder whose splits are exact
        # partitions of an already-valid subset.
        obj = object.__new__(cls)
        idx = np.asarray(indices, dtype=np.intp)
        if idx.flags.writeable:
            idx = _readonly(idx)
        object.__setattr__(obj, "dataset", dataset)
        object.__setattr__(obj, "indices", idx)
        return obj

    @property
    def points(self) -> np.ndarray:
        """The selected rows, gathered into a fresh array."""
        return self.dataset.points[self.indices]

    def __len__(self):
        return self.indices.size

    def __repr__(self):
        return f"PointSubset(size={len(self)}, dim={self.dataset.dim})"


@dataclass(frozen=True)
class DiameterStats:
    avg_diameter_sq: float
    heuristic_diameter_sq: float
    mean: np.ndarray
    size: int


# -- row-level kernels (shared with the tree builder) ------------------------

def mean_rows(X):
    n = X.shape[0]
    m = X.sum(axis=0) / n
    if n > COMPENSATE_ABOVE:
        # Column reductions accumulate row by row; one residual pass
        # recovers most of the rounding lost over long columns.
        m += (X - m).sum(axis=0) / n
    return m


def sq_norms(X):
    """Row-wise squared norms, summed the same way for any batch size."""
    return (X * X).sum(axis=1)


def centered_sq_sum(Xc):
    return float(np.sum(sq_norms(Xc)))


def avg_diameter_sq_rows(X, mean=None):
    if mean is None:
        mean = mean_rows(X)
    return 2.0 * centered_sq_sum(X - mean) / X.shape[0]


def heuristic_diameter_sq_rows(X, anchor=0):
    diff = X - X[anchor]
    return float(sq_norms(diff).max())


# -- public operations --------------------------------------------------------

def subset_mean(s: PointSubset) -> np.ndarray:
    return mean_rows(s.points)


def avg_diameter_sq(s: PointSubset) -> float:
    """Squared average diameter, ``(2/|S|) * sum ||x - mean(S)||^2``.

    Equals the mean of ``||x - y||^2`` over all ordered pairs of the subset,
    including the zero ``x == y`` terms.
    """
    return avg_diameter_sq_rows(s.points)


def avg_diameter_sq_pair(s1: PointSubset, s2: PointSubset) -> float:
    """Size-weighted mean of the two parts' squared average diameters."""
    n1, n2 = len(s1), len(s2)
    return (avg_diameter_sq(s1) * n1 + avg_diameter_sq(s2) * n2) / (n1 + n2)


def heuristic_diameter_sq(s: PointSubset) -> float:
    """Largest squared distance from the subset's lowest-index point to any point.

    Cheap stand-in for the exact squared diameter; always lies within
    ``[diam^2 / 4, diam^2]``.
    """
    return heuristic_diameter_sq_rows(s.points, int(np.argmin(s.indices)))


def directional_variance(s: PointSubset, p) -> float:
    """Mean squared projection of the mean-centered subset onto unit ``p``."""
    p = np.asarray(p, dtype=np.float64)
    norm = np.linalg.norm(p)
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"direction must be a unit vector, |p| = {norm!r}")
    X = s.points
    proj = (X - mean_rows(X)) @ p
    return float(np.dot(proj, proj)) / X.shape[0]


def diameter_stats(s: PointSubset) -> DiameterStats:
    X = s.points
    m = mean_rows(X)
    return DiameterStats(
        avg_diameter_sq=avg_diameter_sq_rows(X, m),
        heuristic_diameter_sq=heuristic_diameter_sq_rows(X, int(np.argmin(s.indices))),
        mean=_readonly(m),
        size=X.shape[0],
    )
