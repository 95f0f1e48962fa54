"""Greedy Gaussian segmentation.

``split`` finds the best single breakpoint inside a segment, ``ggs`` grows a
set of breakpoints one at a time and re-adjusts all of them to a 1-OPT point
after every addition.  Warm-start, backtracking (``combine``), bottom-up
merging and a cyclic variant are built from the same two primitives.

All breakpoints are 1-based; ``b = (b_1, ..., b_K)`` with implicit
``b_0 = 1`` and ``b_{K+1} = T + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    EmptySegmentError,
    IndexBoundsError,
    NonConvergenceError,
    NothingToRemoveError,
    StructuralError,
    UnsplittableSegmentError,
)
from .stats import (
    _check_lambda,
    as_series,
    check_breakpoints,
    covariances_from_sums,
    log_likelihood_constant,
    psi_from_moments,
    segment_bounds,
)

TIE_TOL = 1e-12
MAX_ADJUST_PASSES = 100


class SplitResult(NamedTuple):
    t: int
    psi_increase: float


class CombineResult(NamedTuple):
    index: int  # position in the breakpoint tuple (0-based)
    breakpoint: int
    delta: float  # objective(without) - objective(with)


@dataclass
class GgsTrace:
    """Every solution visited by one GGS run, indexed by K."""

    lam: float
    solutions: list = field(default_factory=list)  # (breakpoints, objective)
    adjust_passes: list = field(default_factory=list)
    increases: list = field(default_factory=list)  # psi_increase of the added breakpoint
    terminated_early: bool = False
    cyclic: bool = False

    @property
    def ks(self) -> list[int]:
        return [len(b) for b, _ in self.solutions]

    @property
    def k_stop(self) -> int:
        return len(self.solutions[-1][0])

    def breakpoints(self, k: int) -> tuple[int, ...]:
        return self._get(k)[0]

    def objective(self, k: int) -> float:
        return self._get(k)[1]

    def _get(self, k):
        for b, phi in self.solutions:
            if len(b) == k:
                return b, phi
        raise KeyError(f"no solution with K={k} (run stopped at K={self.k_stop})")


class _Scorer:
    """Memoizes segment scores and split sweeps for one array and lambda.

    ``x`` may be longer than the series (the cyclic variant passes the series
    stacked twice), so segment bounds are only checked against ``len(x)``.
    """

    def __init__(self, x: np.ndarray, lam: float):
        self.x = x
        self.lam = lam
        self._psi: dict[tuple[int, int], float] = {}
        self._sweep: dict[tuple[int, int], np.ndarray] = {}

    def psi(self, p: int, q: int) -> float:
        key = (p, q)
        if key not in self._psi:
            rows = self.x[p - 1 : q - 1]
            c = rows - rows.mean(axis=0)
            m = rows.shape[0]
            S = (c.T @ c) / m
            self._psi[key] = float(psi_from_moments(np.array([m]), S[None], self.lam)[0])
        return self._psi[key]

    def sweep(self, p: int, q: int) -> np.ndarray:
        """``psi(p, t) + psi(t, q)`` for ``t = p+1 .. q-1``.

        Equivalent to moving one row at a time from the right statistics to
        the left; done here as a prefix sum over the centred rows.
        """
        key = (p, q)
        vals = self._sweep.get(key)
        if vals is None:
            vals = self._compute_sweep(p, q)
            self._sweep[key] = vals
        return vals

    def _compute_sweep(self, p, q):
        rows = self.x[p - 1 : q - 1]
        m = rows.shape[0]
        c = rows - rows.mean(axis=0)
        s1 = np.cumsum(c, axis=0)[:-1]
        s2 = np.cumsum(c[:, :, None] * c[:, None, :], axis=0)[:-1]
        left_m = np.arange(1, m)
        right_m = m - left_m
        tot1 = s1[-1] + c[-1]
        tot2 = s2[-1] + np.outer(c[-1], c[-1])
        S_left = covariances_from_sums(left_m, s1, s2)
        S_right = covariances_from_sums(right_m, tot1 - s1, tot2 - s2)
        return psi_from_moments(left_m, S_left, self.lam) + psi_from_moments(
            right_m, S_right, self.lam
        )

    def phi(self, bounds) -> float:
        return sum(self.psi(p, q) for p, q in bounds)


def _argmax_first(vals: np.ndarray) -> int:
    """Smallest index whose value is within TIE_TOL of the maximum."""
    top = vals.max()
    return int(np.flatnonzero(vals >= top - TIE_TOL)[0])


def _validated(ts, lam):
    x = as_series(ts)
    _check_lambda(lam)
    return x


def split(ts, left: int, right: int, lam: float) -> SplitResult:
    """Best place to cut ``[left, right)`` in two, and the objective gain of cutting there."""
    x = _validated(ts, lam)
    T = x.shape[0]
    if left >= right:
        raise EmptySegmentError(f"empty segment [{left}, {right})")
    if left < 1 or right > T + 1:
        raise IndexBoundsError(f"segment [{left}, {right}) outside [1, {T + 1})")
    if right - left < 2:
        raise UnsplittableSegmentError(f"segment [{left}, {right}) has fewer than 2 points")
    sc = _Scorer(x, lam)
    return _split(sc, left, right)


def _split(sc: _Scorer, p: int, q: int) -> SplitResult:
    vals = sc.sweep(p, q)
    k = _argmax_first(vals)
    return SplitResult(p + 1 + k, float(vals[k] - sc.psi(p, q)))


# Linear segmentation


def _phi(sc: _Scorer, b, T) -> float:
    n = sc.x.shape[1]
    return log_likelihood_constant(T, n) + sc.phi(segment_bounds(b, T))


def _adjust(sc: _Scorer, b, T, history=None):
    b = list(b)
    if not b:
        return b, 0
    passes = 0
    while True:
        passes += 1
        if passes > MAX_ADJUST_PASSES:
            raise NonConvergenceError(
                f"breakpoint adjustment did not settle after {MAX_ADJUST_PASSES} passes"
            )
        moved = False
        for i in range(len(b)):
            lo = b[i - 1] if i > 0 else 1
            hi = b[i + 1] if i + 1 < len(b) else T + 1
            vals = sc.sweep(lo, hi)
            k = _argmax_first(vals)
            cur = b[i] - lo - 1
            if k != cur and vals[k] > vals[cur] + TIE_TOL:
                b[i] = lo + 1 + k
                moved = True
        if history is not None:
            history.append(_phi(sc, b, T))
        if not moved:
            return b, passes


def _best_split(sc: _Scorer, bounds):
    """(segment index, t, psi_increase) of the best split over all segments, or None."""
    best = None
    for i, (p, q) in enumerate(bounds):
        if q - p < 2:
            continue
        t, inc = _split(sc, p, q)
        if best is None or inc > best[2]:
            best = (i, t, inc)
    return best


def adjust_breakpoints(ts, b: Sequence[int], lam: float, history: list | None = None):
    """Move breakpoints one at a time until no single move improves the objective.

    Returns ``(breakpoints, passes)``.  If ``history`` is a list, the objective
    after each pass is appended to it.
    """
    x = _validated(ts, lam)
    T = x.shape[0]
    b = check_breakpoints(b, T)
    out, passes = _adjust(_Scorer(x, lam), b, T, history)
    return tuple(out), passes


def ggs(ts, k_max: int, lam: float) -> GgsTrace:
    """Greedy Gaussian segmentation for K = 0 .. k_max.

    Stops early when every candidate split would lower the objective.
    """
    x = _validated(ts, lam)
    if k_max < 0:
        raise ConfigError(f"k_max must be >= 0, got {k_max}")
    T = x.shape[0]
    sc = _Scorer(x, lam)
    return _ggs_from(sc, T, [], k_max, lam)


def _ggs_from(sc, T, b, k_max, lam) -> GgsTrace:
    trace = GgsTrace(lam)
    trace.solutions.append((tuple(b), _phi(sc, b, T)))
    trace.adjust_passes.append(0)
    trace.increases.append(0.0)
    while len(b) < k_max:
        best = _best_split(sc, segment_bounds(b, T))
        if best is None or best[2] <= 0:
            trace.terminated_early = True
            break
        b = sorted(b + [best[1]])
        b, passes = _adjust(sc, b, T)
        trace.solutions.append((tuple(b), _phi(sc, b, T)))
        trace.adjust_passes.append(passes)
        trace.increases.append(best[2])
    return trace


def ggs_warm_start(ts, b0: Sequence[int], lam: float):
    """Adjust a given breakpoint set to 1-OPT; returns ``(breakpoints, objective)``."""
    x = _validated(ts, lam)
    T = x.shape[0]
    b0 = check_breakpoints(b0, T)
    sc = _Scorer(x, lam)
    b, _ = _adjust(sc, b0, T)
    return tuple(b), _phi(sc, b, T)


def _combine(sc, b, T) -> CombineResult:
    chain = [1] + list(b) + [T + 1]
    best = None
    for i in range(1, len(chain) - 1):
        lo, mid, hi = chain[i - 1], chain[i], chain[i + 1]
        delta = sc.psi(lo, hi) - sc.psi(lo, mid) - sc.psi(mid, hi)
        if best is None or delta > best.delta:
            best = CombineResult(i - 1, mid, delta)
    return best


def combine(ts, b: Sequence[int], lam: float) -> CombineResult:
    """Score removal of each breakpoint; return the one whose removal hurts least."""
    x = _validated(ts, lam)
    T = x.shape[0]
    b = check_breakpoints(b, T)
    if not b:
        raise NothingToRemoveError("no breakpoints to remove")
    return _combine(_Scorer(x, lam), b, T)


def bottom_up(ts, k: int, lam: float, adjust: bool = False):
    """Start from all T-1 breakpoints and merge greedily down to ``k``.

    Returns ``(breakpoints, objective)``.  With ``adjust`` the survivors are
    re-adjusted to 1-OPT after every merge.
    """
    x = _validated(ts, lam)
    T = x.shape[0]
    if not 0 <= k <= T - 1:
        raise ConfigError(f"k must be in [0, {T - 1}], got {k}")
    sc = _Scorer(x, lam)
    b = list(range(2, T + 1))
    while len(b) > k:
        r = _combine(sc, b, T)
        del b[r.index]
        if adjust:
            b, _ = _adjust(sc, b, T)
    return tuple(b), _phi(sc, b, T)


def ggs_backtrack(ts, b0: Sequence[int], lam: float, max_rounds: int = 10):
    """Improve a K-breakpoint solution by remove-one / add-one rounds.

    Each round drops the breakpoint whose removal costs least, re-adjusts,
    adds the best new breakpoint and re-adjusts again.  A round is kept only
    if it raises the objective.  Returns ``(breakpoints, objective)``.
    """
    x = _validated(ts, lam)
    T = x.shape[0]
    b = list(check_breakpoints(b0, T))
    sc = _Scorer(x, lam)
    b, _ = _adjust(sc, b, T)
    phi = _phi(sc, b, T)
    for _ in range(max_rounds):
        if not b:
            break
        cand = list(b)
        del cand[_combine(sc, cand, T).index]
        cand, _ = _adjust(sc, cand, T)
        best = _best_split(sc, segment_bounds(cand, T))
        if best is None:
            break
        cand, _ = _adjust(sc, sorted(cand + [best[1]]), T)
        new_phi = _phi(sc, cand, T)
        if new_phi <= phi + TIE_TOL:
            break
        b, phi = cand, new_phi
    return tuple(b), phi


# Cyclic segmentation: positions live in 1..T and x_T is adjacent to x_1.
# Segments are scored on the series stacked twice so wrap-around segments
# are contiguous.


def _cyclic_bounds(c, T):
    if not c:
        return [(1, T + 1)]
    ext = list(c) + [c[0] + T]
    return list(zip(ext[:-1], ext[1:]))


def _cyclic_phi(sc, c, T):
    return log_likelihood_constant(T, sc.x.shape[1]) + sc.phi(_cyclic_bounds(c, T))


def _cyclic_adjust(sc, c, T):
    c = sorted(c)
    passes = 0
    while True:
        passes += 1
        if passes > MAX_ADJUST_PASSES:
            raise NonConvergenceError(
                f"cyclic adjustment did not settle after {MAX_ADJUST_PASSES} passes"
            )
        moved = False
        K = len(c)
        for j in range(K):
            if j == 0:
                lo, pos, hi = c[-1], c[0] + T, c[1] + T
            else:
                lo, pos = c[j - 1], c[j]
                hi = c[j + 1] if j + 1 < K else c[0] + T
            vals = sc.sweep(lo, hi)
            k = _argmax_first(vals)
            cur = pos - lo - 1
            if k != cur and vals[k] > vals[cur] + TIE_TOL:
                c[j] = (lo + k) % T + 1
                moved = True
            c.sort()
        if not moved:
            return c, passes


def ggs_cyclic(ts, k_max: int, lam: float) -> GgsTrace:
    """GGS where time wraps around, so the first cut needs two breakpoints.

    A first breakpoint is pinned at t=1, the best second one is added, and
    from then on both are free to move.  ``k_max`` counts all breakpoints.
    """
    x = _validated(ts, lam)
    if k_max < 2:
        raise ConfigError(f"cyclic segmentation needs k_max >= 2, got {k_max}")
    T = x.shape[0]
    sc = _Scorer(np.vstack([x, x]), lam)
    trace = GgsTrace(lam, cyclic=True)
    trace.solutions.append(((), _cyclic_phi(sc, [], T)))
    trace.adjust_passes.append(0)
    trace.increases.append(0.0)

    c: list[int] = []
    while len(c) < k_max:
        bounds = _cyclic_bounds(c if c else [1], T)
        best = _best_split(sc, bounds)
        if best is None or best[2] <= 0:
            trace.terminated_early = True
            break
        new = (best[1] - 1) % T + 1
        c = sorted((c if c else [1]) + [new])
        c, passes = _cyclic_adjust(sc, c, T)
        trace.solutions.append((tuple(c), _cyclic_phi(sc, c, T)))
        trace.adjust_passes.append(passes)
        trace.increases.append(best[2])
    return trace


def cyclic_objective(ts, c: Sequence[int], lam: float) -> float:
    """Objective of a cyclic breakpoint set (positions in 1..T, any count != 1)."""
    x = _validated(ts, lam)
    T = x.shape[0]
    c = sorted(int(v) for v in c)
    if len(c) == 1 or len(set(c)) != len(c) or any(not 1 <= v <= T for v in c):
        raise StructuralError(f"invalid cyclic breakpoints {c}")
    sc = _Scorer(np.vstack([x, x]), lam)
    return _cyclic_phi(sc, c, T)
