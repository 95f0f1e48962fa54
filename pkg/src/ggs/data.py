"""CSV input/output, the synthetic benchmark generator, and the streaming driver."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, NumericError, ParseError
from .segment import _Scorer, _adjust, _best_split
from .stats import (
    _check_lambda,
    as_series,
    batch_stats,
    regularize,
    segment_bounds,
)


@dataclass
class Dataset:
    ts: np.ndarray
    timestamps: Optional[list] = None
    columns: Optional[list] = None

    def __post_init__(self):
        self.ts = as_series(self.ts, min_length=1)
        if self.timestamps is not None and len(self.timestamps) != self.ts.shape[0]:
            raise ConfigError(
                f"{len(self.timestamps)} timestamps for {self.ts.shape[0]} rows"
            )
        if self.columns is not None and len(self.columns) != self.ts.shape[1]:
            raise ConfigError(f"{len(self.columns)} column names for {self.ts.shape[1]} columns")

    @property
    def T(self) -> int:
        return self.ts.shape[0]

    @property
    def n(self) -> int:
        return self.ts.shape[1]


def load_csv(path, header: bool = False, timestamp_col: Optional[int] = None,
             delimiter: str = ",") -> Dataset:
    """Read a numeric CSV; rows in file order become t = 1..T.

    ``timestamp_col`` (0-based) names a label column that is kept as text and
    excluded from the numeric payload.  Blank lines are skipped.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh, delimiter=delimiter), start=1)
                if r and any(cell.strip() for cell in r)]
    if header:
        if not rows:
            raise ParseError(f"{path}: empty file")
        names = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    else:
        names = None
    if not rows:
        raise ParseError(f"{path}: no data rows")

    width = len(rows[0][1])
    if timestamp_col is not None and not 0 <= timestamp_col < width:
        raise ParseError(f"{path}: timestamp column {timestamp_col} out of range", row=rows[0][0])
    values, stamps = [], []
    for lineno, r in rows:
        if len(r) != width:
            raise ParseError(f"{path}: expected {width} fields, got {len(r)}", row=lineno)
        out = []
        for j, cell in enumerate(r):
            if j == timestamp_col:
                stamps.append(cell.strip())
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: non-numeric value {cell!r}", row=lineno,
                                 column=j + 1) from None
            if not np.isfinite(v):
                raise ParseError(f"{path}: non-finite value {cell!r}", row=lineno, column=j + 1)
            out.append(v)
        values.append(out)
    if not values[0]:
        raise ParseError(f"{path}: no numeric columns")
    if names is not None and timestamp_col is not None:
        names = [c for j, c in enumerate(names) if j != timestamp_col]
    return Dataset(np.array(values), stamps if timestamp_col is not None else None, names)


def save_csv(path, dataset: Dataset) -> None:
    """Write with 17 significant digits, which round-trips float64 exactly."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        if dataset.columns is not None:
            head = list(dataset.columns)
            if dataset.timestamps is not None:
                head = ["timestamp"] + head
            w.writerow(head)
        for i, row in enumerate(dataset.ts):
            cells = [f"{v:.17g}" for v in row]
            if dataset.timestamps is not None:
                cells = [dataset.timestamps[i]] + cells
            w.writerow(cells)


@dataclass(frozen=True)
class SyntheticSpec:
    """Piecewise zero-mean Gaussian series with random covariances ``A A^T``."""

    n: int = 25
    segments: int = 10
    seg_len: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("n", "segments", "seg_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def T(self) -> int:
        return self.segments * self.seg_len


def generate_synthetic(spec: SyntheticSpec):
    """Return ``(dataset, true_breakpoints, covariances)``.

    Random streams: ``SeedSequence(seed)`` spawns one child per segment and
    each child spawns two PCG64 streams, the first for the matrix ``A`` and
    the second for that segment's samples.
    """
    children = np.random.SeedSequence(spec.seed).spawn(spec.segments)
    blocks, covs = [], []
    for child in children:
        cov_ss, sample_ss = child.spawn(2)
        A = np.random.default_rng(cov_ss).standard_normal((spec.n, spec.n))
        sigma = A @ A.T
        try:
            L = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise NumericError("generated covariance is not positive definite") from exc
        z = np.random.default_rng(sample_ss).standard_normal((spec.seg_len, spec.n))
        blocks.append(z @ L.T)
        covs.append(sigma)
    truth = tuple(i * spec.seg_len + 1 for i in range(1, spec.segments))
    return Dataset(np.vstack(blocks)), truth, covs


def save_synthetic(path, dataset: Dataset, spec: SyntheticSpec, truth: Sequence[int]) -> Path:
    """Write the CSV plus a ``<name>.meta.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    save_csv(path, dataset)
    meta = path.with_name(path.name + ".meta.json")
    meta.write_text(json.dumps({"spec": asdict(spec), "T": dataset.T,
                                "true_breakpoints": list(truth)}, indent=2) + "\n")
    return meta


# Streaming


@dataclass(frozen=True)
class StreamState:
    """Sliding window of the last ``window_size`` samples and its breakpoints.

    ``breakpoints`` are relative to the window (1 = oldest row kept);
    ``offset`` is the absolute index of the oldest row minus one.
    """

    window_size: int
    k: int
    lam: float
    window: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    breakpoints: tuple = ()
    offset: int = 0

    @property
    def absolute_breakpoints(self) -> tuple:
        return tuple(b + self.offset for b in self.breakpoints)

    def forecast(self):
        """``(mean, covariance)`` of the most recent segment."""
        w = self.window.shape[0]
        if w == 0:
            raise ConfigError("no data in the window yet")
        start = self.breakpoints[-1] if self.breakpoints else 1
        s = batch_stats(self.window, start, w + 1)
        return s.mean, regularize(s, self.lam).sigma


def stream_init(window_size: int, k: int, lam: float) -> StreamState:
    if window_size < 2:
        raise ConfigError("window must hold at least 2 samples")
    if k < 0:
        raise ConfigError("k must be >= 0")
    _check_lambda(lam)
    return StreamState(window_size, k, lam)


def stream_step(state: StreamState, x) -> StreamState:
    """Absorb one sample: slide the window, re-add a lost breakpoint if it pays, re-adjust."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if not np.all(np.isfinite(x)):
        raise DimensionError("sample contains non-finite values")
    win = state.window
    if win.size and win.shape[1] != x.shape[1]:
        raise DimensionError(f"sample has dimension {x.shape[1]}, expected {win.shape[1]}")
    win = x if not win.size else np.vstack([win, x])
    b = list(state.breakpoints)
    offset = state.offset
    if win.shape[0] > state.window_size:
        drop = win.shape[0] - state.window_size
        win = win[drop:]
        offset += drop
        b = [v - drop for v in b if v - drop > 1]
    T = win.shape[0]
    if T >= 2:
        sc = _Scorer(win, state.lam)
        if len(b) < state.k:
            best = _best_split(sc, segment_bounds(b, T))
            if best is not None and best[2] > 0:
                b = sorted(b + [best[1]])
        b, _ = _adjust(sc, b, T)
    return replace(state, window=win, breakpoints=tuple(b), offset=offset)


def run_stream(ts, window_size: int, k: int, lam: float):
    """Feed every row of ``ts`` through the stream; returns the list of states."""
    x = as_series(ts, min_length=1)
    state = stream_init(window_size, k, lam)
    states = []
    for row in x:
        state = stream_step(state, row)
        states.append(state)
    return states
