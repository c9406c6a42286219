"""Command-line interface: ``tvarch <command> [options]``.

Commands: simulate, fit, bootstrap, backtest, diagnose, compare-qml.  Any
option can also come from a JSON file given with ``--config`` (keys are the
long option names with dashes replaced by underscores); flags on the command
line win.  ``TVARCH_THREADS`` sets the worker count for bootstrap and
backtest.

Exit codes: 0 success, 1 numerical failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bandwidth import default_grid, select_bandwidth
from .bootstrap import BootstrapConfig, bootstrap_bands
from .diagnostics import autocov_report, residual_summary
from .errors import NotApplicableError, NumericalError, TvarchError
from .estimator import DEFAULT_DELTA, fit_residuals, nls_fit_curve, oracle_refit
from .forecast import (
    DEFAULT_HORIZON,
    DEFAULT_SPANS,
    DEFAULT_START,
    amse,
    default_origins,
    forward_validate_span,
    record_coverage,
    score_external,
)
from .io import read_external_forecasts, read_series, write_csv, write_json, write_series
from .kernels import Kernel
from .parallel import worker_count
from .process import (
    InnovationDist,
    ParamCurves,
    load_model,
    save_model,
    simulate_stationary,
    simulate_tvarch,
)
from .qml import compare_nls_qml

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}") from None


def _mu_mode(text: str):
    if text in ("local", "global"):
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("mu mode is 'local', 'global' or a positive number") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("a supplied local mean must be positive")
    return v


def _common(sp, seed=False):
    sp.add_argument("--config", help="JSON file of option defaults")
    if seed:
        sp.add_argument("--seed", type=int, default=0)


def _model_opts(sp):
    sp.add_argument("--p", type=int, default=1, help="ARCH order")
    sp.add_argument("--kernel", choices=[k.value for k in Kernel], default="parzen")
    sp.add_argument("--mu-mode", type=_mu_mode, default="local",
                    help="first-stage mean: local, global, or a fixed positive value")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tvarch", description="Time-varying ARCH estimation and forecasting.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate a tvARCH path")
    _common(sp, seed=True)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--model", help="JSON model file")
    src.add_argument("--preset", choices=["constant-variance"], default=None,
                     help="built-in tvARCH(1) model with constant local mean")
    sp.add_argument("--n", type=int, default=1024)
    sp.add_argument("--burn-in", type=int, default=500)
    sp.add_argument("--stationary-at", type=float, default=None, metavar="U0",
                    help="freeze the coefficients at U0 instead")
    sp.add_argument("--out", required=True, help="output CSV")
    sp.add_argument("--model-out", default=None, help="where to write the model used (default OUT.model.json)")

    sp = sub.add_parser("fit", help="two-stage kernel-NLS curve")
    _common(sp)
    _model_opts(sp)
    sp.add_argument("--input", required=True)
    bw = sp.add_mutually_exclusive_group()
    bw.add_argument("--b", type=float, default=None, help="bandwidth in (0, 1]")
    bw.add_argument("--cv", action="store_true", help="select the bandwidth by cross-validation")
    sp.add_argument("--grid", type=_floats, default=None, help="CV bandwidth grid")
    sp.add_argument("--h", type=int, default=None, help="CV subsampling stride")
    sp.add_argument("--every", type=int, default=1, help="fit every k-th time point")
    sp.add_argument("--oracle-refit", action="store_true")
    sp.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    sp.add_argument("--out", required=True, help="curve CSV")
    sp.add_argument("--json", default=None, help="curve and bandwidth as JSON")
    sp.add_argument("--cv-out", default=None, help="CV scores CSV")
    sp.add_argument("--residuals-out", default=None, help="standardized residuals CSV")

    sp = sub.add_parser("bootstrap", help="pointwise bootstrap confidence bands")
    _common(sp, seed=True)
    _model_opts(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--b", type=float, required=True)
    sp.add_argument("--B", type=int, default=100, dest="B")
    sp.add_argument("--level", type=float, default=0.8)
    sp.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    sp.add_argument("--method", choices=["symmetric", "percentile"], default="symmetric")
    sp.add_argument("--points", type=_ints, default=None, help="time points (default every --every)")
    sp.add_argument("--every", type=int, default=10)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("backtest", help="span forward-validation and AMSE")
    _common(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--orders", type=_ints, default=[1], help="ARCH orders to compare")
    sp.add_argument("--spans", type=_ints, default=list(DEFAULT_SPANS))
    sp.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)
    sp.add_argument("--start", type=int, default=DEFAULT_START, help="first origin")
    sp.add_argument("--stride", type=int, default=1, help="use every k-th origin")
    sp.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--scale", type=float, default=1.0, help="presentation divisor for AMSE")
    sp.add_argument("--external", action="append", default=[], metavar="NAME=CSV",
                    help="external (t, forecast) CSV scored alongside")
    sp.add_argument("--out", required=True, help="per-origin CSV")
    sp.add_argument("--summary", default=None, help="summary CSV (default OUT.summary.csv)")

    sp = sub.add_parser("diagnose", help="autocovariance and residual tests")
    _common(sp)
    sp.add_argument("--input", required=True, help="residual (or return) CSV")
    sp.add_argument("--lags", type=int, default=20, help="Ljung-Box lags")
    sp.add_argument("--max-lag", type=int, default=40, help="autocovariance lags")
    sp.add_argument("--label", default=None)
    sp.add_argument("--out", required=True, help="summary CSV")
    sp.add_argument("--acf-out", default=None)

    sp = sub.add_parser("compare-qml", help="Monte Carlo NLS vs QML comparison")
    _common(sp, seed=True)
    sp.add_argument("--model", default=None, help="JSON model file with constant curves")
    sp.add_argument("--coefs", type=_floats, default=[1.0, 0.6, 0.3])
    sp.add_argument("--sizes", type=_ints, default=[15, 30, 60, 100, 150, 250])
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--out", required=True)
    ap.set_defaults(_commands=sub.choices)
    return ap


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(ap: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse ``argv``, using values from the ``--config`` JSON file as defaults."""
    argv = list(sys.argv[1:] if argv is None else argv)
    path = _config_path(argv)
    commands = ap.get_default("_commands")
    command = next((tok for tok in argv if tok in commands), None)
    if path is None or command is None:
        return ap.parse_args(argv)
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        ap.error(f"cannot read config {path}: {exc.strerror or exc}")
    except json.JSONDecodeError as exc:
        ap.error(f"config {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        ap.error("config file must hold a JSON object")
    cfg.pop("command", None)
    sub = commands[command]
    dests = {a.dest: a for a in sub._actions}
    unknown = sorted(set(cfg) - set(dests))
    if unknown:
        ap.error(f"unknown config keys for {command}: {', '.join(unknown)}")
    for key, value in cfg.items():
        action = dests[key]
        if isinstance(value, str) and action.type is not None:
            try:
                cfg[key] = action.type(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                ap.error(f"config key {key}: {exc}")
        action.required = False
    sub.set_defaults(**cfg)
    return ap.parse_args(argv)


def _with_suffix(path: str, suffix: str) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


def cmd_simulate(args) -> int:
    if args.model:
        model, dist = load_model(args.model)
    else:
        model, dist = ParamCurves.constant_variance(), InnovationDist()
    if args.stationary_at is not None:
        series = simulate_stationary(model, args.stationary_at, dist, args.n, args.seed, args.burn_in)
    else:
        series = simulate_tvarch(model, dist, args.n, args.seed, args.burn_in)
    write_series(args.out, series)
    out_model = args.model_out or _with_suffix(args.out, ".model.json")
    save_model(out_model, model, dist)
    return EXIT_OK


def cmd_fit(args) -> int:
    series = read_series(args.input)
    report = None
    if args.b is None:
        report = select_bandwidth(series, args.grid or default_grid(), args.h, args.p, args.kernel, args.mu_mode)
        b = report.b_opt
    else:
        b = args.b
    grid = range(args.p + 1, series.n + 1, max(1, args.every))
    curve = nls_fit_curve(series, b, args.p, args.kernel, grid, args.mu_mode)
    header = curve.columns()
    rows = [[pt.t0, pt.u0, pt.mu_hat, *pt.a_hat.tolist()] for pt in curve.points]
    refit = {}
    if args.oracle_refit:
        header = header + [f"refit_a_{j}" for j in range(args.p + 1)]
        for row, pt in zip(rows, curve.points):
            try:
                a = oracle_refit(series, pt.t0, b, args.kernel, pt)
            except NotApplicableError:
                a = np.full(args.p + 1, math.nan)
            except NumericalError as exc:
                refit[pt.t0] = str(exc)
                a = np.full(args.p + 1, math.nan)
            row.extend(a.tolist())
    write_csv(args.out, header, rows)
    if report is not None and args.cv_out:
        write_csv(args.cv_out, ["b", "score", "skipped"], report.rows())
    if args.json:
        data = curve.to_dict()
        data["b_selected"] = b
        data["mu_mode"] = args.mu_mode
        if report is not None:
            data["cv"] = {"h": report.h, "b_opt": report.b_opt,
                          "grid": report.grid, "scores": [None if math.isnan(s) else s for s in report.scores]}
        if refit:
            data["refit_failures"] = {str(k): v for k, v in refit.items()}
        write_json(args.json, data)
    if args.residuals_out:
        t, z = fit_residuals(series, curve, args.delta)
        write_csv(args.residuals_out, ["t", "z"], zip(t.tolist(), z.tolist()))
    print(f"b = {b:g}; fitted {len(curve.points)} points, {len(curve.failures)} failures")
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    series = read_series(args.input)
    cfg = BootstrapConfig(args.B, args.level, args.delta, args.seed, args.method)
    points = args.points or list(range(args.p + 1, series.n + 1, max(1, args.every)))
    bands = bootstrap_bands(series, args.b, args.p, args.kernel, points, cfg, args.mu_mode, worker_count())
    write_csv(args.out, ["t0", "j", "center", "lower", "upper", "level", "B", "failures"], bands.rows())
    for t0, msg in bands.failures.items():
        print(f"t0={t0}: {msg}", file=sys.stderr)
    if not bands.entries:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_backtest(args) -> int:
    series = read_series(args.input)
    origins = default_origins(series.n, args.horizon, args.start)[:: max(1, args.stride)]
    per_origin, summary = [], []
    workers = worker_count()
    for p in args.orders:
        chosen, report = forward_validate_span(series, args.spans, p, origins, args.horizon, args.delta, workers)
        for m, recs in report.records.items():
            cov = record_coverage(recs, args.alpha)
            summary.append([f"tvarch_p{p}", p, m, report.amse[m], report.amse[m] / args.scale, cov, len(recs),
                            int(m == chosen)])
            per_origin.extend([f"tvarch_p{p}", r.t, m, r.forecast, r.realized, r.y] for r in recs)
    for item in args.external:
        name, _, path = item.partition("=")
        if not path:
            raise ValueError(f"--external expects NAME=CSV, got {item!r}")
        recs = score_external(series, read_external_forecasts(path), args.horizon)
        a = amse([r.forecast for r in recs], [r.realized for r in recs])
        summary.append([name, "", "", a, a / args.scale, record_coverage(recs, args.alpha), len(recs), 0])
        per_origin.extend([name, r.t, "", r.forecast, r.realized, r.y] for r in recs)
    write_csv(args.out, ["model", "t", "span", "forecast", "realized", "y"], per_origin)
    write_csv(args.summary or _with_suffix(args.out, ".summary.csv"),
              ["model", "p", "span", "amse", "amse_scaled", "coverage", "origins", "chosen"], summary)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    series = read_series(args.input)
    summary = residual_summary(series.values, args.lags)
    label = args.label or Path(args.input).stem
    keys = ["lb_z", "lb_abs_z", "lb_z2", "ks", "skewness", "excess_kurtosis", "n", "lags"]
    write_csv(args.out, ["series"] + keys, [[label] + [summary[k] for k in keys]])
    if args.acf_out:
        rep = autocov_report(series, args.max_lag)
        write_csv(args.acf_out, ["lag", "autocov_sq", "autocorr_sq"], rep.rows())
    return EXIT_OK


def cmd_compare_qml(args) -> int:
    if args.model:
        model, dist = load_model(args.model)
    else:
        model, dist = ParamCurves.constant(args.coefs), InnovationDist()
    table = compare_nls_qml(model, dist, args.sizes, args.reps, args.seed)
    write_csv(args.out, None, table.to_rows())
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "bootstrap": cmd_bootstrap,
    "backtest": cmd_backtest,
    "diagnose": cmd_diagnose,
    "compare-qml": cmd_compare_qml,
}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"tvarch {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TvarchError, ValueError, OSError) as exc:
        print(f"tvarch {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
