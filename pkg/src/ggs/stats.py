"""Segment statistics and the regularized Gaussian segment score.

Time indices in the public functions are 1-based and segments are half-open,
so ``[start, end)`` covers observations ``start, ..., end - 1``.  Internally
the data is a ``(T, n)`` float64 array indexed from 0.

For a segment of length ``m`` with empirical covariance ``S`` the fitted
covariance is ``S + (lam / m) I`` and the segment score is::

    psi = -0.5 * (m * logdet(S + lam/m I) - lam * tr((S + lam/m I)^-1))

The log-determinant and trace come from one Cholesky factor ``L``:
``logdet = 2 sum(log diag L)`` and ``tr(Sigma^-1) = ||L^-1||_F^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionError,
    EmptySegmentError,
    IndexBoundsError,
    NumericError,
    StructuralError,
)

LOG_2PI = math.log(2.0 * math.pi)


def as_series(data, min_length: int = 2) -> np.ndarray:
    """Validate ``data`` as a ``(T, n)`` float64 array; 1-D input becomes one column."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise StructuralError(f"time series must be 1-D or 2-D, got shape {x.shape}")
    if x.shape[0] < min_length or x.shape[1] < 1:
        raise StructuralError(
            f"time series needs T >= {min_length} and n >= 1, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise StructuralError("time series contains non-finite values")
    return x


def log_likelihood_constant(T: int, n: int) -> float:
    """The breakpoint-independent part of the objective, ``-(Tn/2)(log 2pi + 1)``."""
    return -(T * n / 2.0) * (LOG_2PI + 1.0)


def check_breakpoints(b: Sequence[int], T: int) -> tuple[int, ...]:
    """Return interior breakpoints as a tuple of ints, or raise if the chain is broken.

    Valid means ``1 < b_1 < ... < b_K < T + 1``.
    """
    out = tuple(int(v) for v in b)
    for v, raw in zip(out, b):
        if v != raw:
            raise StructuralError(f"breakpoint {raw!r} is not an integer")
    chain = (1,) + out + (T + 1,)
    for lo, hi in zip(chain[:-1], chain[1:]):
        if not lo < hi:
            raise StructuralError(
                f"breakpoints must satisfy 1 < b_1 < ... < b_K < {T + 1}, got {list(out)}"
            )
    return out


def segment_bounds(b: Sequence[int], T: int) -> list[tuple[int, int]]:
    chain = (1,) + tuple(b) + (T + 1,)
    return list(zip(chain[:-1], chain[1:]))


@dataclass(frozen=True)
class SegmentStats:
    """Running sums ``(m, sum d, sum d d^T)`` of ``d = x - shift`` for one segment.

    ``shift`` is a fixed reference point near the data, which keeps
    ``outer/m - mean mean^T`` free of cancellation.  If none is given, the
    first point added becomes the shift.  Adding or removing a point costs
    O(n^2) and returns a new object.
    """

    m: int
    total: np.ndarray
    outer: np.ndarray
    shift: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, n: int, shift=None) -> "SegmentStats":
        return cls(0, np.zeros(n), np.zeros((n, n)), shift)

    @property
    def n(self) -> int:
        return self.total.shape[0]

    @property
    def sum(self) -> np.ndarray:
        """Sum of the raw points."""
        if self.shift is None:
            return self.total
        return self.total + self.m * self.shift

    @property
    def outer_sum(self) -> np.ndarray:
        """Sum of raw outer products ``x x^T``."""
        if self.shift is None:
            return self.outer
        c, t = self.shift, self.total
        return self.outer + np.outer(t, c) + np.outer(c, t) + self.m * np.outer(c, c)

    @property
    def mean(self) -> np.ndarray:
        if self.m < 1:
            raise EmptySegmentError("mean of an empty segment")
        mu = self.total / self.m
        return mu if self.shift is None else mu + self.shift

    @property
    def cov(self) -> np.ndarray:
        """Biased empirical covariance (divides by m)."""
        if self.m < 1:
            raise EmptySegmentError("covariance of an empty segment")
        d = self.total / self.m
        return _guard_cov(self.outer / self.m - np.outer(d, d))

    def add(self, x) -> "SegmentStats":
        if self.shift is None and self.m == 0:
            shift = np.array(x, dtype=np.float64).reshape(-1)
            if shift.shape[0] != self.n:
                raise DimensionError(f"point has dimension {shift.shape[0]}, expected {self.n}")
            return SegmentStats(1, np.zeros(self.n), np.zeros((self.n, self.n)), shift)
        d = self._delta(x)
        return SegmentStats(self.m + 1, self.total + d, self.outer + np.outer(d, d), self.shift)

    def remove(self, x) -> "SegmentStats":
        if self.m < 1:
            raise EmptySegmentError("cannot remove a point from an empty segment")
        d = self._delta(x)
        if self.m == 1:
            return SegmentStats.empty(self.n, self.shift)
        return SegmentStats(self.m - 1, self.total - d, self.outer - np.outer(d, d), self.shift)

    def _delta(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.n:
            raise DimensionError(f"point has dimension {x.shape[0]}, expected {self.n}")
        return x if self.shift is None else x - self.shift


def stats_add_point(s: SegmentStats, x) -> SegmentStats:
    return s.add(x)


def stats_remove_point(s: SegmentStats, x) -> SegmentStats:
    return s.remove(x)


def batch_stats(ts, start: int, end: int) -> SegmentStats:
    """Statistics of observations ``start .. end-1`` (1-based)."""
    x = as_series(ts, min_length=1)
    T = x.shape[0]
    if start >= end:
        raise EmptySegmentError(f"empty segment [{start}, {end})")
    if start < 1 or end > T + 1:
        raise IndexBoundsError(f"segment [{start}, {end}) outside [1, {T + 1})")
    rows = x[start - 1 : end - 1]
    shift = rows[0].copy()
    d = rows - shift
    return SegmentStats(rows.shape[0], d.sum(axis=0), d.T @ d, shift)


@dataclass(frozen=True)
class RegularizedCov:
    """Shrunk covariance ``S + (lam/m) I`` with its Cholesky factor and cached terms."""

    sigma: np.ndarray
    chol: np.ndarray
    chol_diag_logsum: float
    trace_inv: float

    @property
    def logdet(self) -> float:
        return 2.0 * self.chol_diag_logsum


def regularize(s: SegmentStats, lam: float) -> RegularizedCov:
    if s.m < 1:
        raise EmptySegmentError("cannot regularize an empty segment")
    _check_lambda(lam)
    sigma = s.cov + (lam / s.m) * np.eye(s.n)
    L = _cholesky(sigma[None])[0]
    logsum = float(np.log(np.diag(L)).sum())
    trace_inv = float(_inv_lower_sq_norm(L[None])[0])
    return RegularizedCov(sigma, L, logsum, trace_inv)


def psi(s: SegmentStats, lam: float) -> float:
    """Segment contribution to the objective, excluding the global constant."""
    rc = regularize(s, lam)
    return -0.5 * (s.m * rc.logdet - lam * rc.trace_inv)


def objective(ts, b: Sequence[int], lam: float) -> float:
    """Regularized log-likelihood ``C + sum_i psi_i`` of breakpoints ``b``."""
    x = as_series(ts)
    T, n = x.shape
    b = check_breakpoints(b, T)
    _check_lambda(lam)
    total = log_likelihood_constant(T, n)
    for p, q in segment_bounds(b, T):
        total += segment_psi(x, p, q, lam)
    return total


# Vectorized internals shared by the segmentation and DP code.


def segment_psi(x: np.ndarray, p: int, q: int, lam: float) -> float:
    """psi over rows ``[p, q)`` of an already validated array (1-based)."""
    rows = x[p - 1 : q - 1]
    m = rows.shape[0]
    c = rows - rows.mean(axis=0)
    S = (c.T @ c) / m
    return float(psi_from_moments(np.array([m]), S[None], lam)[0])


def psi_from_moments(m: np.ndarray, S: np.ndarray, lam: float) -> np.ndarray:
    """psi for a batch of segments given lengths ``m`` (B,) and covariances ``S`` (B, n, n)."""
    m = np.asarray(m, dtype=np.float64)
    n = S.shape[-1]
    sigma = _guard_cov(S) + (lam / m)[:, None, None] * np.eye(n)
    L = _cholesky(sigma)
    logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)
    trace_inv = _inv_lower_sq_norm(L)
    return -0.5 * (m * logdet - lam * trace_inv)


def covariances_from_sums(m: np.ndarray, total: np.ndarray, outer: np.ndarray) -> np.ndarray:
    """Batched ``outer/m - mean mean^T`` for prefix-style sums."""
    m = np.asarray(m, dtype=np.float64)
    mu = total / m[:, None]
    return outer / m[:, None, None] - mu[:, :, None] * mu[:, None, :]


def _guard_cov(S: np.ndarray) -> np.ndarray:
    # Sum-form downdates can leave tiny negative variances; clamp and symmetrize.
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    diag = np.diagonal(S, axis1=-2, axis2=-1)
    if np.any(diag < 0):
        S = S.copy()
        idx = np.arange(S.shape[-1])
        S[..., idx, idx] = np.maximum(diag, 0.0)
    return S


def _cholesky(sigma: np.ndarray) -> np.ndarray:
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericError("Cholesky factorization failed; data may be non-finite") from exc
    if not np.all(np.isfinite(L)):
        raise NumericError("Cholesky factor is non-finite")
    return L


def _inv_lower_sq_norm(L: np.ndarray) -> np.ndarray:
    """``||L^-1||_F^2`` for a batch of lower-triangular factors, by forward substitution."""
    B, n, _ = L.shape
    X = np.zeros_like(L)
    for i in range(n):
        # Row i of L^-1 is supported on columns 0..i.
        r = -np.einsum("bk,bkj->bj", L[:, i, :i], X[:, :i, : i + 1])
        r[:, i] += 1.0
        X[:, i, : i + 1] = r / L[:, i, i, None]
    return np.einsum("bij,bij->b", X, X)


def _check_lambda(lam: float) -> None:
    if not (lam > 0 and math.isfinite(lam)):
        raise StructuralError(f"lambda must be positive and finite, got {lam!r}")
