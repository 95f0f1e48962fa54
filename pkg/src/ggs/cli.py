"""Command-line interface: ``ggs {fit,cv,dp,synth,stream,verify}``.

Breakpoints in every output are 1-based and mark the first index of a new
segment, so a series whose regimes change after observations 100, 200, ...
reports ``[101, 201, ...]``.

Exit codes: 0 success, 1 data error, 2 usage error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import SyntheticSpec, generate_synthetic, load_csv, run_stream, save_synthetic
from .dp import dp_exact
from .errors import ConfigError, GGSError, NumericError, ParseError
from .evaluate import cross_validate, fit_models
from .segment import cyclic_objective, ggs, ggs_cyclic
from .stats import objective

log = logging.getLogger("ggs")

EXIT_DATA, EXIT_USAGE, EXIT_NUMERIC = 1, 2, 3
VERIFY_TOL = 1e-9


class UsageError(Exception):
    pass


def parse_lambdas(text: str) -> list[float]:
    """``"1e-3,1,10"`` or a log-range ``"start:stop:count"``."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            count = int(count)
            if count < 1:
                raise ValueError
            return [float(v) for v in np.logspace(math.log10(float(start)),
                                                  math.log10(float(stop)), count)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse lambda grid {text!r}") from None


def _positive_lambda(value: float) -> float:
    if not (value > 0 and math.isfinite(value)):
        raise UsageError(f"lambda must be positive, got {value}")
    return value


def _load(args):
    if args.input is None:
        raise UsageError("--input is required")
    ds = load_csv(args.input, header=args.header, timestamp_col=args.timestamp_col)
    log.info("loaded %s: T=%d n=%d", args.input, ds.T, ds.n)
    return ds


def _segments_json(x, b, lam):
    model = fit_models(x, b, lam)
    return [{"start": s.start, "end": s.end, "mean": s.mu.tolist(),
             "cov": s.sigma.sigma.tolist()} for s in model.segments]


def _solution_json(x, b, phi, lam, passes=None):
    out = {"K": len(b), "breakpoints": [int(v) for v in b], "objective": float(phi)}
    if passes is not None:
        out["adjust_passes"] = int(passes)
    out["segments"] = _segments_json(x, b, lam)
    return out


def _write_json(obj, path):
    text = json.dumps(obj, indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
        log.info("wrote %s", path)


def cmd_fit(args):
    x = _load(args).ts
    lam = _positive_lambda(args.lam)
    if args.kmax < 0:
        raise UsageError("--kmax must be >= 0")
    if args.cyclic:
        trace = ggs_cyclic(x, args.kmax, lam)
        sols = [{"K": len(b), "breakpoints": list(b), "objective": phi, "adjust_passes": p}
                for (b, phi), p in zip(trace.solutions, trace.adjust_passes)]
    else:
        trace = ggs(x, args.kmax, lam)
        sols = [_solution_json(x, b, phi, lam, p)
                for (b, phi), p in zip(trace.solutions, trace.adjust_passes)]
    report = {"method": "ggs-cyclic" if args.cyclic else "ggs", "lambda": lam,
              "T": int(x.shape[0]), "n": int(x.shape[1]), "solutions": sols,
              "terminated_early": trace.terminated_early}
    _write_json(report, args.output)
    return 0


def cmd_dp(args):
    x = _load(args).ts
    lam = _positive_lambda(args.lam)
    if args.kmax < 0:
        raise UsageError("--kmax must be >= 0")
    b, phi = dp_exact(x, args.kmax, lam)
    report = {"method": "dp", "lambda": lam, "T": int(x.shape[0]), "n": int(x.shape[1]),
              "solutions": [_solution_json(x, b, phi, lam)], "terminated_early": False}
    _write_json(report, args.output)
    return 0


def cmd_cv(args):
    x = _load(args).ts
    lambdas = parse_lambdas(args.lambdas) if args.lambdas else [args.lam]
    for lam in lambdas:
        _positive_lambda(lam)
    if args.kmax < 0:
        raise UsageError("--kmax must be >= 0")
    threads = args.threads or os.cpu_count() or 1
    rep = cross_validate(x, args.kmax, lambdas, folds=args.folds, seed=args.seed,
                         threads=threads)
    _write_json(rep.to_dict(), args.output)
    curves = args.curves
    if curves is None and args.output not in (None, "-"):
        curves = str(Path(args.output).with_suffix("")) + ".curves.csv"
    if curves is not None:
        write_curves(curves, rep)
        log.info("wrote %s", curves)
    lam, k = rep.chosen
    print(f"chosen K={k} lambda={lam:.17g}")
    return 0


def write_curves(path, rep) -> None:
    """One row per (lambda, K, fold), then one ``fold=mean`` row per (lambda, K)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "K", "fold", "train_ll", "test_ll", "train_std", "test_std"])
        for r in rep.records:
            w.writerow([f"{r['lambda']:.17g}", r["K"], r["fold"],
                        f"{r['train_ll']:.17g}", f"{r['test_ll']:.17g}", "", ""])
        for a in rep.aggregates:
            w.writerow([f"{a['lambda']:.17g}", a["K"], "mean",
                        f"{a['train_mean']:.17g}", f"{a['test_mean']:.17g}",
                        f"{a['train_std']:.17g}", f"{a['test_std']:.17g}"])


def cmd_synth(args):
    if args.output is None:
        raise UsageError("--output is required")
    try:
        spec = SyntheticSpec(n=args.n, segments=args.segments, seg_len=args.seg_len,
                             seed=args.seed)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    ds, truth, _ = generate_synthetic(spec)
    meta = save_synthetic(args.output, ds, spec, truth)
    log.info("wrote %s and %s", args.output, meta)
    return 0


def cmd_stream(args):
    x = _load(args).ts
    lam = _positive_lambda(args.lam)
    window = args.window or x.shape[0]
    if window < 2:
        raise UsageError("--window must be >= 2")
    if args.kmax < 0:
        raise UsageError("--kmax must be >= 0")
    states = run_stream(x, window, args.kmax, lam)
    last = states[-1]
    mean, cov = last.forecast()
    report = {
        "method": "stream", "lambda": lam, "window": window, "K": args.kmax,
        "T": int(x.shape[0]), "n": int(x.shape[1]),
        "steps": [{"t": i + 1, "breakpoints": list(s.absolute_breakpoints)}
                  for i, s in enumerate(states)],
        "final": {"breakpoints": list(last.absolute_breakpoints),
                  "window_breakpoints": list(last.breakpoints),
                  "window_start": last.offset + 1,
                  "forecast": {"mean": mean.tolist(), "cov": cov.tolist()}},
    }
    _write_json(report, args.output)
    return 0


def cmd_verify(args):
    """Recompute every objective in a fit/dp report against the data."""
    x = _load(args).ts
    if args.report is None:
        raise UsageError("--report is required")
    try:
        report = json.loads(Path(args.report).read_text())
        lam = float(report["lambda"])
        sols = report["solutions"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"{args.report}: not a fit report ({exc})") from None
    cyclic = report.get("method") == "ggs-cyclic"
    worst = 0.0
    for s in sols:
        b = s["breakpoints"]
        phi = cyclic_objective(x, b, lam) if cyclic else objective(x, b, lam)
        err = abs(phi - s["objective"])
        worst = max(worst, err)
        log.info("K=%d |objective error|=%.3g", s["K"], err)
    ok = worst <= VERIFY_TOL
    print(f"verify {'ok' if ok else 'FAILED'}: {len(sols)} solutions, max error {worst:.3g}")
    return 0 if ok else EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ggs", description="Greedy Gaussian segmentation")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        if data:
            sp.add_argument("--input", help="input CSV")
            sp.add_argument("--header", action="store_true", help="first row is a header")
            sp.add_argument("--timestamp-col", type=int, default=None,
                            help="0-based column holding timestamps (excluded from data)")
        sp.add_argument("--output", help="output path ('-' or omitted: stdout)")

    fit = sub.add_parser("fit", help="run GGS for K = 0..kmax")
    common(fit)
    fit.add_argument("--kmax", type=int, default=10)
    fit.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    fit.add_argument("--cyclic", action="store_true", help="treat time as periodic")
    fit.set_defaults(func=cmd_fit)

    cv = sub.add_parser("cv", help="cross-validate over a lambda grid and K")
    common(cv)
    cv.add_argument("--kmax", type=int, default=10)
    cv.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    cv.add_argument("--lambdas", help="comma list, or log range start:stop:count")
    cv.add_argument("--folds", type=int, default=10)
    cv.add_argument("--seed", type=int, default=0)
    cv.add_argument("--threads", type=int, default=None)
    cv.add_argument("--curves", help="train/test curve CSV (default: <output>.curves.csv)")
    cv.set_defaults(func=cmd_cv)

    dp = sub.add_parser("dp", help="exact optimum with K = kmax breakpoints")
    common(dp)
    dp.add_argument("--kmax", type=int, default=1)
    dp.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    dp.set_defaults(func=cmd_dp)

    synth = sub.add_parser("synth", help="write a synthetic benchmark series")
    common(synth, data=False)
    synth.add_argument("--n", type=int, default=25)
    synth.add_argument("--segments", type=int, default=10)
    synth.add_argument("--seg-len", type=int, default=100)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)

    stream = sub.add_parser("stream", help="replay a file through the streaming segmenter")
    common(stream)
    stream.add_argument("--window", type=int, default=None, help="memory M (default: T)")
    stream.add_argument("--kmax", type=int, default=1)
    stream.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    stream.set_defaults(func=cmd_stream)

    verify = sub.add_parser("verify", help="recompute objectives in a fit report")
    common(verify)
    verify.add_argument("--report", help="JSON written by fit or dp")
    verify.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ggs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"ggs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"ggs: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GGSError, OSError) as exc:
        print(f"ggs: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
