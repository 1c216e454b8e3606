"""Splitting rules: random projection, approximate principal direction, PCA.

Every rule returns a unit normal for the splitting hyperplane of one node.
Randomness comes from an :class:`RngStream` keyed by ``(master_seed, node_id)``
so a node's draw does not depend on the order in which nodes are built.

Normal deviates are produced with the Box-Muller transform from uniform
doubles of a Philox-4x64 counter-based generator; both algorithms are fixed,
which keeps trees reproducible across platforms and numpy versions that
preserve the Philox stream.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .geometry import PointSubset, mean_rows

__all__ = [
    "RuleKind",
    "SplitRule",
    "RngStream",
    "Direction",
    "box_muller",
    "random_unit_vector",
    "apd_direction",
    "pca_direction",
    "choose_direction",
]

ZERO_NORM = 1e-300
DENSE_EIG_MAX_DIM = 16
_SEED_MASK = (1 << 64) - 1


class RuleKind(str, enum.Enum):
    RP = "rp"
    APD = "apd"
    PCA = "pca"


@dataclass(frozen=True)
class SplitRule:
    kind: RuleKind
    iterations: int = 0
    pca_tolerance: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.pca_tolerance <= 0:
            raise ValueError("pca_tolerance must be positive")
        if self.kind is RuleKind.RP and self.iterations != 0:
            raise ValueError("the RP rule takes no power iterations")

    @classmethod
    def rp(cls):
        return cls(RuleKind.RP)

    @classmethod
    def apd(cls, t):
        return cls(RuleKind.APD, int(t))

    @classmethod
    def pca(cls, tol=1e-10):
        return cls(RuleKind.PCA, 0, tol)

    @property
    def label(self):
        if self.kind is RuleKind.APD:
            return f"apd(t={self.iterations})"
        return self.kind.value


@dataclass(frozen=True)
class RngStream:
    """Seed material for one tree node."""

    master_seed: int
    node_id: int

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.master_seed) & _SEED_MASK,
            spawn_key=(int(self.node_id),),
        )
        return np.random.Generator(np.random.Philox(ss))


class Direction(NamedTuple):
    vector: np.ndarray
    start: np.ndarray
    degenerate: bool = False


def box_muller(gen: np.random.Generator, size: int) -> np.ndarray:
    """``size`` standard normal deviates from ``gen``'s uniform doubles."""
    pairs = (size + 1) // 2
    u = gen.random(2 * pairs)
    u1 = 1.0 - u[0::2]  # in (0, 1], keeps the log finite
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:size]


def random_unit_vector(rng: RngStream, dim: int) -> np.ndarray:
    """Uniformly distributed direction on the unit sphere in ``dim`` dimensions."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    gen = rng.generator()
    while True:
        z = box_muller(gen, dim)
        norm = np.linalg.norm(z)
        if norm > 0.0:
            return z / norm


def _power_steps(Xc, p, t):
    for _ in range(t):
        q = Xc.T @ (Xc @ p)
        norm = np.linalg.norm(q)
        if norm < ZERO_NORM:
            return p, True
        p = q / norm
    return p, False


def apd_direction_rows(Xc, t, start):
    p, degenerate = _power_steps(Xc, start, t)
    return Direction(p, start, degenerate)


def apd_direction(s: PointSubset, t: int, rng: RngStream) -> Direction:
    """Run ``t`` power iterations on the subset covariance from a random start.

    The covariance is applied implicitly as ``X^T (X p)`` on mean-centered rows,
    so each iteration costs two passes over the data. ``t = 0`` returns the
    random start unchanged, which is exactly the RP rule.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    X = s.points
    Xc = X - mean_rows(X)
    return apd_direction_rows(Xc, t, random_unit_vector(rng, X.shape[1]))


def pca_direction_rows(Xc, tol, start):
    n, dim = Xc.shape
    if not np.any(Xc != Xc[0]):
        return Direction(start, start, True)
    if dim <= DENSE_EIG_MAX_DIM:
        w, V = np.linalg.eigh(Xc.T @ Xc)
        p = V[:, -1]
        top = w[-1]
    else:
        cov = LinearOperator(
            (dim, dim), matvec=lambda v: Xc.T @ (Xc @ v.ravel()), dtype=np.float64
        )
        w, V = eigsh(cov, k=1, which="LA", tol=tol, v0=start)
        p = V[:, 0]
        top = w[0]
    if not top > 0.0:
        return Direction(start, start, True)
    return Direction(p / np.linalg.norm(p), start, False)


def pca_direction(s: PointSubset, tol: float, rng: RngStream) -> Direction:
    """Top eigenvector of the subset covariance.

    Small dimensions use a dense symmetric eigensolver; larger ones use
    matrix-free Lanczos (ARPACK) so the ``D x D`` covariance is never formed.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    X = s.points
    Xc = X - mean_rows(X)
    return pca_direction_rows(Xc, tol, random_unit_vector(rng, X.shape[1]))


def choose_direction(rule: SplitRule, Xc, rng: RngStream) -> Direction:
    start = random_unit_vector(rng, Xc.shape[1])
    if rule.kind is RuleKind.PCA:
        return pca_direction_rows(Xc, rule.pca_tolerance, start)
    return apd_direction_rows(Xc, rule.iterations, start)
