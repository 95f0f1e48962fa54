"""Greedy Gaussian segmentation of multivariate time series."""

__version__ = "0.1.0"

from .data import (
    Dataset,
    StreamState,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    run_stream,
    save_csv,
    stream_init,
    stream_step,
)
from .dp import brute_force, dp_exact
from .evaluate import (
    CvReport,
    Segmentation,
    SegmentModel,
    cross_validate,
    fit_models,
    heldout_loglik,
    loglik_point,
)
from .segment import (
    GgsTrace,
    adjust_breakpoints,
    bottom_up,
    combine,
    ggs,
    ggs_backtrack,
    ggs_cyclic,
    ggs_warm_start,
    split,
)
from .stats import SegmentStats, batch_stats, objective, psi, regularize
