"""Quality measurements for partition trees.

Covers vector-quantization error, per-split diameter reduction, covariance
spectra with the local covariance dimension, and the multi-run experiment
driver whose report is written as CSV.

Spectrum convention: eigenvalues are those of ``C = Xc^T Xc`` with ``Xc`` the
mean-centered rows and no ``1/n`` factor. Directional variance carries the
``1/n``, so ``directional_variance == p^T C p / n``.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .geometry import Dataset, PointSubset, avg_diameter_sq_rows, mean_rows, sq_norms
from .rules import RuleKind, SplitRule
from .tree import PartitionTree, TreeConfig, build_tree, default_workers

__all__ = [
    "SpectrumSummary",
    "covariance_spectrum",
    "local_cov_dim",
    "k_statistic",
    "spectral_power_ratio",
    "vq_error",
    "vq_error_by_diameter",
    "SplitRatio",
    "DepthReduction",
    "split_ratios",
    "diameter_reduction_profile",
    "ReportRow",
    "EvalReport",
    "run_seed",
    "run_experiment",
    "CSV_HEADER",
]

CLAMP_REL = 1e-12


@dataclass(frozen=True)
class SpectrumSummary:
    """Covariance eigenvalues, sorted non-increasing."""

    eigenvalues: np.ndarray
    eps: Optional[float] = None
    local_dim: Optional[int] = None
    k: Optional[float] = None

    @property
    def degenerate(self):
        return not self.eigenvalues[0] > 0.0

    @property
    def top(self):
        return float(self.eigenvalues[0])


def _sorted_eigs(M):
    w = np.linalg.eigvalsh(M)[::-1].copy()
    top = w[0] if w.size else 0.0
    small = np.abs(w) <= CLAMP_REL * max(top, 0.0)
    if np.any((w < 0) & ~small):
        raise ArithmeticError(f"covariance has a clearly negative eigenvalue {w.min()!r}")
    w[small & (w < 0)] = 0.0
    return w


def covariance_spectrum(s: PointSubset, eps: Optional[float] = None) -> SpectrumSummary:
    """Eigenvalues of the subset's centered covariance ``Xc^T Xc``.

    With fewer points than dimensions the nonzero spectrum is taken from the
    ``n x n`` inner-product matrix and padded with zeros. Passing ``eps`` also
    fills in the local covariance dimension and the k statistic.
    """
    X = s.points
    n, dim = X.shape
    if n < 2:
        raise ValueError("spectrum needs at least two points")
    Xc = X - mean_rows(X)
    if n < dim:
        w = np.zeros(dim)
        w[:n] = _sorted_eigs(Xc @ Xc.T)
    else:
        w = _sorted_eigs(Xc.T @ Xc)
    w.setflags(write=False)
    spec = SpectrumSummary(w)
    if eps is None:
        return spec
    d = local_cov_dim(spec, eps)
    return SpectrumSummary(w, eps, d, k_statistic(spec, d))


def local_cov_dim(spec: SpectrumSummary, eps: float) -> int:
    """Smallest ``d`` whose top-``d`` eigenvalues hold a ``1 - eps`` share of
    the total variance. An all-zero spectrum gives 1."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    lam = np.asarray(spec.eigenvalues, dtype=np.float64)
    if spec.degenerate:
        return 1
    cum = np.cumsum(lam)
    need = (1.0 - eps) * cum[-1]
    return int(np.searchsorted(cum, need, side="left")) + 1


def k_statistic(spec: SpectrumSummary, d: int) -> float:
    """``sum(lambda_1..lambda_d) / lambda_1``, between 1 and ``d``."""
    lam = spec.eigenvalues
    if spec.degenerate:
        return 1.0
    return float(np.sum(lam[:d]) / lam[0])


def spectral_power_ratio(eigenvalues, t: int, d: Optional[int] = None) -> float:
    """``sum(lambda^(2t+1)) / sum(lambda^(2t))`` over the top ``d`` eigenvalues.

    This is the directional variance (``C`` convention) reached by ``t`` power
    iterations from a start vector with equal weight on every eigendirection.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if d is not None:
        lam = lam[:d]
    top = lam[0]
    if not top > 0.0:
        return 0.0
    mu = lam / top
    return float(top * np.sum(mu ** (2 * t + 1)) / np.sum(mu ** (2 * t)))


# -- vector quantization ---------------------------------------------------------

def _check_depth(tree, depth):
    if depth < 0 or depth > tree.depth:
        raise ValueError(f"depth {depth} outside [0, {tree.depth}]")


def vq_error(tree: PartitionTree, data: Dataset, depth: int) -> float:
    """Mean squared distance from each point to the mean of its cell, with the
    tree cut at ``depth``."""
    _check_depth(tree, depth)
    total = 0.0
    for node in tree.truncated(depth):
        X = data.points[node.indices]
        total += float(np.sum(sq_norms(X - mean_rows(X))))
    return total / data.n


def vq_error_by_diameter(tree: PartitionTree, data: Dataset, depth: int) -> float:
    """Same quantity written as ``sum |S_i| * avgdiam^2(S_i) / (2 |S|)``."""
    _check_depth(tree, depth)
    acc = 0.0
    for node in tree.truncated(depth):
        acc += node.size * avg_diameter_sq_rows(data.points[node.indices])
    return acc / (2.0 * data.n)


# -- diameter reduction -------------------------------------------------------

@dataclass(frozen=True)
class SplitRatio:
    node_id: int
    depth: int
    kind: str
    ratio: float


@dataclass(frozen=True)
class DepthReduction:
    depth: int
    mean_ratio: float
    max_ratio: float
    nodes: int


def split_ratios(tree: PartitionTree, data: Dataset) -> List[SplitRatio]:
    """``avgdiam^2(S1, S2) / avgdiam^2(S)`` for every internal node with
    nonzero spread."""
    out = []
    P = data.points
    for node in tree.internal_nodes():
        parent = avg_diameter_sq_rows(P[node.indices])
        if parent == 0.0:
            continue
        l, r = node.left, node.right
        pair = (avg_diameter_sq_rows(P[l.indices]) * l.size
                + avg_diameter_sq_rows(P[r.indices]) * r.size) / node.size
        out.append(SplitRatio(node.node_id, node.depth, node.kind.name.lower(), pair / parent))
    return out


def diameter_reduction_profile(tree: PartitionTree, data: Dataset) -> List[DepthReduction]:
    by_depth = {}
    for sr in split_ratios(tree, data):
        by_depth.setdefault(sr.depth, []).append(sr.ratio)
    return [
        DepthReduction(d, float(np.mean(v)), float(np.max(v)), len(v))
        for d, v in sorted(by_depth.items())
    ]


# -- experiments -----------------------------------------------------------------

CSV_HEADER = ("rule", "t", "depth", "vq_mean", "vq_std", "runs", "build_ms_mean")


@dataclass(frozen=True)
class ReportRow:
    rule: str
    t: int
    depth: int
    vq_mean: float
    vq_std: float
    runs: int
    build_ms_mean: float


@dataclass
class EvalReport:
    rows: List[ReportRow]

    def get(self, rule, t, depth):
        for row in self.rows:
            if row.rule == rule and row.t == t and row.depth == depth:
                return row
        raise KeyError((rule, t, depth))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.rule, r.t, r.depth, repr(r.vq_mean), repr(r.vq_std),
                        r.runs, repr(r.build_ms_mean)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EvalReport":
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header[:len(CSV_HEADER)] != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {header!r}")
        rows = [
            ReportRow(r[0], int(r[1]), int(r[2]), float(r[3]), float(r[4]),
                      int(r[5]), float(r[6]))
            for r in reader if r
        ]
        return cls(rows)


def run_seed(seed: int, run: int) -> int:
    """Master seed of run ``run`` of an experiment seeded with ``seed``."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(run)])
    return int(ss.generate_state(1, np.uint64)[0])


def _build_ms(tree, depth):
    if depth == 0 or not tree.level_ms:
        return 0.0
    return tree.level_ms[min(depth, len(tree.level_ms)) - 1]


def run_experiment(
    data: Dataset,
    rules: Sequence[SplitRule],
    depths: Iterable[int],
    runs: int,
    seed: int,
    *,
    min_leaf_size: int = 1,
    outlier_c: float = 10.0,
    workers: Optional[int] = None,
    warmup: bool = True,
) -> EvalReport:
    """Build ``runs`` trees per randomized rule (one for PCA) and tabulate
    VQ error per depth.

    Each tree is built once to the deepest requested depth; shallower depths
    reuse it, which is exact because node ids and random streams do not depend
    on the final depth. Run ``r`` uses master seed ``run_seed(seed, r)`` for
    every rule, so rules are compared on common random numbers.
    """
    depths = sorted(set(int(d) for d in depths))
    if not depths or depths[0] < 0:
        raise ValueError("depths must be a non-empty list of non-negative integers")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    rules = list(dict.fromkeys(rules))
    max_depth = depths[-1]
    workers = default_workers() if workers is None else max(1, int(workers))

    def config(rule, run):
        return TreeConfig(rule, max_depth, min_leaf_size, outlier_c, run_seed(seed, run))

    if warmup and rules:
        build_tree(data, config(rules[0], 0), workers=1)

    jobs = []
    for rule in rules:
        n_runs = 1 if rule.kind is RuleKind.PCA else runs
        jobs.extend((rule, r) for r in range(n_runs))

    def one(job):
        rule, r = job
        tree = build_tree(data, config(rule, r), workers=1)
        return job, [(d, vq_error(tree, data, min(d, tree.depth)), _build_ms(tree, d))
                     for d in depths]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = dict(pool.map(one, jobs))
    else:
        results = dict(one(j) for j in jobs)

    rows = []
    for rule in rules:
        n_runs = 1 if rule.kind is RuleKind.PCA else runs
        per_run = [results[(rule, r)] for r in range(n_runs)]
        for i, d in enumerate(depths):
            vq = np.array([pr[i][1] for pr in per_run])
            ms = np.array([pr[i][2] for pr in per_run])
            std = float(vq.std(ddof=1)) if n_runs > 1 else 0.0
            rows.append(ReportRow(rule.kind.value, rule.iterations, d,
                                  float(vq.mean()), std, n_runs, float(ms.mean())))
    rows.sort(key=lambda r: (r.rule, r.t, r.depth))
    return EvalReport(rows)
