"""Globally optimal segmentation, for checking GGS on small problems.

``dp_exact`` costs O(K T^2) segment scores (each an n x n Cholesky), so it is
meant for T up to a few thousand at small n.  ``brute_force`` enumerates all
placements and exists only as an oracle for the DP and for GGS.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ConfigError, InfeasibleError, TooLargeError
from .stats import (
    _check_lambda,
    as_series,
    batch_stats,
    covariances_from_sums,
    log_likelihood_constant,
    psi,
    psi_from_moments,
)

BRUTE_FORCE_LIMIT = 10**6


def psi_row(x: np.ndarray, q: int, lam: float) -> np.ndarray:
    """``psi(p, q)`` for ``p = 1 .. q-1``, from suffix sums of rows ``[1, q)``."""
    rows = x[: q - 1]
    c = rows - rows.mean(axis=0)
    s1 = np.cumsum(c[::-1], axis=0)[::-1]
    s2 = np.cumsum((c[:, :, None] * c[:, None, :])[::-1], axis=0)[::-1]
    m = np.arange(q - 1, 0, -1)
    return psi_from_moments(m, covariances_from_sums(m, s1, s2), lam)


def psi_table(ts, lam: float) -> np.ndarray:
    """Full ``(T+2, T+2)`` table with ``psi(p, q)`` at ``[p, q]`` for ``p < q``; NaN elsewhere."""
    x = as_series(ts)
    _check_lambda(lam)
    T = x.shape[0]
    tab = np.full((T + 2, T + 2), np.nan)
    for q in range(2, T + 2):
        tab[1:q, q] = psi_row(x, q, lam)
    return tab


def dp_exact(ts, k: int, lam: float):
    """Best ``k`` breakpoints by dynamic programming; returns ``(breakpoints, objective)``.

    ``best[j, q]`` is the best score of ``[1, q)`` cut into ``j + 1`` segments:
    ``best[0, q] = psi(1, q)`` and ``best[j, q] = max_s best[j-1, s] + psi(s, q)``.
    Ties go to the smallest ``s``.
    """
    x = as_series(ts)
    _check_lambda(lam)
    T, n = x.shape
    if k < 0:
        raise ConfigError(f"k must be >= 0, got {k}")
    if k >= T:
        raise InfeasibleError(f"cannot place {k} breakpoints in a series of length {T}")

    best = np.full((k + 1, T + 2), -np.inf)
    arg = np.zeros((k + 1, T + 2), dtype=np.int64)
    for q in range(2, T + 2):
        row = psi_row(x, q, lam)  # row[p - 1] = psi(p, q)
        best[0, q] = row[0]
        for j in range(1, min(k, q - 2) + 1):
            s = np.arange(j + 1, q)
            cand = best[j - 1, s] + row[s - 1]
            i = int(np.argmax(cand))
            best[j, q] = cand[i]
            arg[j, q] = s[i]

    b = []
    q = T + 1
    for j in range(k, 0, -1):
        q = int(arg[j, q])
        b.append(q)
    return tuple(reversed(b)), float(best[k, T + 1] + log_likelihood_constant(T, n))


def brute_force(ts, k: int, lam: float, limit: int = BRUTE_FORCE_LIMIT):
    """Exhaustive maximizer over all placements; ties go to the lexicographically smallest."""
    x = as_series(ts)
    _check_lambda(lam)
    T, n = x.shape
    if not 0 <= k <= T - 1:
        raise InfeasibleError(f"cannot place {k} breakpoints in a series of length {T}")
    count = math.comb(T - 1, k)
    if count > limit:
        raise TooLargeError(f"{count} placements exceeds the enumeration limit {limit}")

    cache: dict[tuple[int, int], float] = {}

    def seg(p, q):
        if (p, q) not in cache:
            cache[(p, q)] = psi(batch_stats(x, p, q), lam)
        return cache[(p, q)]

    best_b, best_val = None, -np.inf
    for b in itertools.combinations(range(2, T + 1), k):
        chain = (1,) + b + (T + 1,)
        val = sum(seg(p, q) for p, q in zip(chain[:-1], chain[1:]))
        if val > best_val:
            best_b, best_val = b, val
    return best_b, float(best_val + log_likelihood_constant(T, n))
