"""Fitted segment models, per-sample log-likelihoods and cross-validation."""

from __future__ import annotations

import bisect
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConfigError, DimensionError, IndexBoundsError
from .segment import ggs
from .stats import (
    LOG_2PI,
    RegularizedCov,
    _check_lambda,
    as_series,
    batch_stats,
    check_breakpoints,
    log_likelihood_constant,
    regularize,
    segment_bounds,
)


@dataclass(frozen=True)
class SegmentModel:
    start: int
    end: int
    mu: np.ndarray
    sigma: RegularizedCov

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class Segmentation:
    breakpoints: tuple
    segments: list
    lam: float
    objective: float

    def segment_index(self, t: int) -> int:
        lo, hi = self.segments[0].start, self.segments[-1].end
        if not lo <= t < hi:
            raise IndexBoundsError(f"time {t} outside model span [{lo}, {hi})")
        return bisect.bisect_right(self.breakpoints, t)

    def model_at(self, t: int) -> SegmentModel:
        return self.segments[self.segment_index(t)]


def fit_models(ts, b: Sequence[int], lam: float) -> Segmentation:
    """Empirical mean and shrunk covariance for every segment of ``b``."""
    x = as_series(ts)
    T, n = x.shape
    b = check_breakpoints(b, T)
    _check_lambda(lam)
    segments = []
    total = log_likelihood_constant(T, n)
    for p, q in segment_bounds(b, T):
        s = batch_stats(x, p, q)
        rc = regularize(s, lam)
        segments.append(SegmentModel(p, q, s.mean, rc))
        total += -0.5 * (s.m * rc.logdet - lam * rc.trace_inv)
    return Segmentation(b, segments, lam, total)


def loglik_point(x, model: SegmentModel) -> float:
    """Gaussian log-density of ``x`` under one segment's (mean, covariance)."""
    return float(_loglik_rows(np.asarray(x, dtype=np.float64).reshape(1, -1), model)[0])


def _loglik_rows(X: np.ndarray, model: SegmentModel) -> np.ndarray:
    n = model.mu.shape[0]
    if X.shape[1] != n:
        raise DimensionError(f"point has dimension {X.shape[1]}, expected {n}")
    z = solve_triangular(model.sigma.chol, (X - model.mu).T, lower=True)
    return -0.5 * np.einsum("ij,ij->j", z, z) - model.sigma.chol_diag_logsum - 0.5 * n * LOG_2PI


def heldout_loglik(model: Segmentation, test) -> float:
    """Mean per-sample log-likelihood of ``(t, x)`` pairs under the covering segments."""
    test = list(test)
    if not test:
        raise ConfigError("test set is empty")
    groups: dict[int, list] = {}
    for t, x in test:
        groups.setdefault(model.segment_index(int(t)), []).append(x)
    total = 0.0
    for i, xs in groups.items():
        total += _loglik_rows(np.atleast_2d(np.asarray(xs, dtype=np.float64)),
                              model.segments[i]).sum()
    return total / len(test)


def train_loglik(ts, model: Segmentation) -> float:
    """Mean per-sample log-likelihood of the series the model was fitted on."""
    x = as_series(ts)
    total = sum(_loglik_rows(x[s.start - 1 : s.end - 1], s).sum() for s in model.segments)
    return total / x.shape[0]


def remap(model: Segmentation, positions: np.ndarray, T: int) -> Segmentation:
    """Re-express a model fitted on a row subset in the original time axis.

    ``positions[i]`` is the original 1-based index of training row ``i + 1``.
    A breakpoint at training row ``b`` lands on ``positions[b - 1]``, the first
    surviving original index at or after the cut.
    """
    b = tuple(int(positions[v - 1]) for v in model.breakpoints)
    chain = (1,) + b + (T + 1,)
    segs = [SegmentModel(p, q, s.mu, s.sigma)
            for (p, q), s in zip(zip(chain[:-1], chain[1:]), model.segments)]
    return Segmentation(b, segs, model.lam, model.objective)


@dataclass
class CvReport:
    lambdas: list
    k_max: int
    folds: int
    seed: int
    fold_sets: list  # sorted 1-based test indices per fold
    records: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    chosen: tuple = None  # (lam, K)

    def aggregate(self, lam: float, k: int) -> dict:
        for a in self.aggregates:
            if a["lambda"] == lam and a["K"] == k:
                return a
        raise KeyError((lam, k))

    def to_dict(self) -> dict:
        return {
            "lambdas": list(self.lambdas),
            "k_max": self.k_max,
            "folds": self.folds,
            "seed": self.seed,
            "fold_sizes": [len(f) for f in self.fold_sets],
            "records": self.records,
            "aggregates": self.aggregates,
            "chosen": {"lambda": self.chosen[0], "K": self.chosen[1]},
        }


def make_folds(T: int, folds: int, seed: int) -> list:
    """Random partition of 1..T into ``folds`` near-equal sorted parts."""
    if folds < 2:
        raise ConfigError(f"need at least 2 folds, got {folds}")
    if T < 2 * folds:
        raise ConfigError(f"T={T} too short for {folds} folds (need T >= {2 * folds})")
    perm = np.random.default_rng(seed).permutation(T) + 1
    return [np.sort(part) for part in np.array_split(perm, folds)]


def _run_fold(x, test_idx, k_max, lam):
    T = x.shape[0]
    mask = np.ones(T, dtype=bool)
    mask[test_idx - 1] = False
    positions = np.flatnonzero(mask) + 1
    train = x[mask]
    test = [(int(t), x[t - 1]) for t in test_idx]
    trace = ggs(train, k_max, lam)
    out = []
    for b, _ in trace.solutions:
        fitted = fit_models(train, b, lam)
        mapped = remap(fitted, positions, T)
        out.append({
            "K": len(b),
            "train_ll": train_loglik(train, fitted),
            "test_ll": heldout_loglik(mapped, test),
            "breakpoints": list(mapped.breakpoints),
        })
    return out


def cross_validate(ts, k_max: int, lambdas: Sequence[float], folds: int = 10,
                   seed: int = 0, threads: int = 1, rel_tol: float = 0.01) -> CvReport:
    """k-fold cross-validation of GGS over a lambda grid and K = 0..k_max.

    Selection: among (lambda, K) pairs present in every fold, take those whose
    mean test log-likelihood is within ``rel_tol`` (relative) of the best;
    prefer the smallest K, then the largest lambda.
    """
    x = as_series(ts)
    lambdas = [float(v) for v in lambdas]
    if not lambdas:
        raise ConfigError("lambda grid is empty")
    for lam in lambdas:
        _check_lambda(lam)
    if k_max < 0:
        raise ConfigError("k_max must be >= 0")
    fold_sets = make_folds(x.shape[0], folds, seed)
    jobs = [(f, lam) for f in range(folds) for lam in lambdas]

    def work(job):
        f, lam = job
        return _run_fold(x, fold_sets[f], k_max, lam)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    report = CvReport(lambdas, k_max, folds, seed, [f.tolist() for f in fold_sets])
    for (f, lam), rows in zip(jobs, results):
        for r in rows:
            report.records.append({"lambda": lam, "K": r["K"], "fold": f,
                                   "train_ll": r["train_ll"], "test_ll": r["test_ll"],
                                   "breakpoints": r["breakpoints"]})

    for lam in lambdas:
        for k in range(k_max + 1):
            rows = [r for r in report.records if r["lambda"] == lam and r["K"] == k]
            if not rows:
                continue
            tr = np.array([r["train_ll"] for r in rows])
            te = np.array([r["test_ll"] for r in rows])
            report.aggregates.append({
                "lambda": lam, "K": k, "n_folds": len(rows),
                "train_mean": float(tr.mean()), "train_std": float(tr.std()),
                "test_mean": float(te.mean()), "test_std": float(te.std()),
            })

    complete = [a for a in report.aggregates if a["n_folds"] == folds]
    best = max(a["test_mean"] for a in complete)
    near = [a for a in complete if a["test_mean"] >= best - rel_tol * abs(best)]
    pick = min(near, key=lambda a: (a["K"], -a["lambda"]))
    report.chosen = (pick["lambda"], pick["K"])
    return report

