"""Slow reference computations for tests.

Nothing in the library or the command line imports this module. Costs are
quadratic in the point count or cubic in the dimension, so keep inputs small
(about n <= 2000, D <= 64).
"""
from __future__ import annotations

import numpy as np

from .geometry import PointSubset

__all__ = [
    "naive_mean",
    "pairwise_avg_diameter_sq",
    "oracle_covariance_power_apply",
    "oracle_max_diameter_sq",
    "oracle_exact_outlier",
    "oracle_eigendecomposition",
    "OracleDegenerate",
]


class OracleDegenerate(ArithmeticError):
    pass


def _rows(s):
    return np.asarray(s.points if isinstance(s, PointSubset) else s, dtype=np.float64)


def _covariance(X):
    # Explicit mean and explicit outer-product sum, no shortcuts.
    n, dim = X.shape
    mean = np.zeros(dim)
    for x in X:
        mean += x
    mean /= n
    C = np.zeros((dim, dim))
    for x in X:
        d = x - mean
        C += np.outer(d, d)
    return C


def naive_mean(s):
    X = _rows(s)
    out = np.zeros(X.shape[1])
    for x in X:
        out += x
    return out / X.shape[0]


def pairwise_avg_diameter_sq(s):
    """``(1/|S|^2) * sum over ordered pairs of ||x - y||^2``."""
    X = _rows(s)
    n = X.shape[0]
    total = 0.0
    for i in range(n):
        diff = X - X[i]
        total += float(np.einsum("ij,ij->", diff, diff))
    return total / (n * n)


def oracle_covariance_power_apply(s, v, t):
    """Normalized ``C^t v`` with ``C`` materialized from the centered rows."""
    C = _covariance(_rows(s))
    w = np.asarray(v, dtype=np.float64).copy()
    for _ in range(t):
        w = C @ w
    norm = np.linalg.norm(w)
    if norm == 0.0:
        raise OracleDegenerate("C^t v vanished")
    return w / norm


def oracle_max_diameter_sq(s):
    X = _rows(s)
    best = 0.0
    for i in range(X.shape[0]):
        diff = X[i + 1:] - X[i]
        if diff.size:
            best = max(best, float(np.einsum("ij,ij->i", diff, diff).max()))
    return best


def oracle_exact_outlier(s, c):
    """Exact outlier test: squared max diameter above ``c`` times the squared
    average diameter."""
    return oracle_max_diameter_sq(s) > c * pairwise_avg_diameter_sq(s)


def oracle_eigendecomposition(s):
    """Eigenvalues (descending) and matching orthonormal eigenvector columns of
    the centered ``C = Xc^T Xc``."""
    C = _covariance(_rows(s))
    w, V = np.linalg.eigh(C)
    order = np.argsort(w)[::-1]
    return w[order], V[:, order]
