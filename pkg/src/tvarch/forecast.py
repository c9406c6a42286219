"""Long-horizon volatility forecasting from span-based local fits.

At an origin ``t`` the last ``m`` observations are treated as a stationary
ARCH(p) stretch, fitted by two-stage NLS, and the fitted model is iterated
forward.  Aggregated ``H``-step forecasts are scored against realized sums
of squared returns.

Functions here read the series only through ``len()`` and slicing, so an
instrumented sequence can be passed in to audit which observations each step
touches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.stats import norm

from .errors import NumericalError, RangeError, StabilityError
from .estimator import A0_FLOOR_REL, DEFAULT_DELTA, clip_coefficients, nls_fit_stationary
from .parallel import pmap
from .process import ReturnSeries

__all__ = [
    "ForecastPath",
    "BacktestRecord",
    "BacktestReport",
    "span_fit",
    "h_step_forecast",
    "aggregate_forecast",
    "realized_volatility",
    "amse",
    "backtest_span",
    "forward_validate_span",
    "gaussian_coverage",
    "record_coverage",
    "default_origins",
    "score_external",
]

DEFAULT_HORIZON = 250
DEFAULT_START = 1000
DEFAULT_SPANS = tuple(range(50, 501, 50))


def _view(series, start: int, stop: int) -> np.ndarray:
    """Observations ``X_{start+1} .. X_stop`` (0-based slice ``[start, stop)``)."""
    if isinstance(series, ReturnSeries):
        return series.values[start:stop]
    return np.asarray(series[start:stop], dtype=float)


@dataclass(frozen=True)
class ForecastPath:
    """Forecasts ``sigma2_{t|t+h}`` for ``h = 1..H``."""

    variances: np.ndarray
    origin: int | None = None
    span: int | None = None
    model: str = "tvarch"

    @property
    def horizon(self) -> int:
        return self.variances.size


def span_fit(series, t: int, m: int, p: int = 1, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Clipped two-stage NLS on ``X_{t-m+1} .. X_t`` treated as stationary."""
    if m < 2 * (p + 1):
        raise RangeError(f"span {m} too short for ARCH({p})")
    if t < m:
        raise RangeError(f"origin {t} precedes a full span of {m}")
    x = _view(series, t - m, t)
    a, mu = nls_fit_stationary(x, p)
    return clip_coefficients(a, delta, A0_FLOOR_REL * mu)


def h_step_forecast(a, last_squares, horizon: int, origin: int | None = None, span: int | None = None,
                    model: str = "tvarch") -> ForecastPath:
    """Iterate the ARCH(p) conditional-variance recursion ``horizon`` steps ahead.

    ``last_squares`` holds the ``p`` most recent squared returns, most recent
    first.  Unknown future squares are replaced by their forecasts.
    """
    a = np.asarray(a, dtype=float)
    p = a.size - 1
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if a[1:].sum() >= 1:
        raise StabilityError(f"lag coefficients sum to {a[1:].sum():g} >= 1")
    hist = [float(v) for v in np.asarray(last_squares, dtype=float).ravel()[:p]]
    if len(hist) < p:
        raise ValueError(f"need {p} lagged squares, got {len(hist)}")
    coefs = a.tolist()
    out = np.empty(horizon)
    for h in range(horizon):
        v = coefs[0]
        for j in range(p):
            v += coefs[j + 1] * hist[j]
        out[h] = v
        if p:
            hist.insert(0, v)
            hist.pop()
    return ForecastPath(out, origin, span, model)


def aggregate_forecast(path: ForecastPath) -> float:
    return float(path.variances.sum())


def realized_volatility(series, t: int, horizon: int) -> float:
    """``X_{t+1}^2 + ... + X_{t+H}^2``."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if t < 0 or t + horizon > len(series):
        raise RangeError(f"horizon {horizon} from origin {t} runs past N = {len(series)}")
    x = _view(series, t, t + horizon)
    return float(np.dot(x, x))


def amse(forecasts, realized, scale: float = 1.0) -> float:
    """Mean squared difference between aggregated forecasts and realized volatility, times ``scale``."""
    f = np.asarray(forecasts, dtype=float)
    r = np.asarray(realized, dtype=float)
    if f.shape != r.shape:
        raise ValueError(f"length mismatch: {f.size} forecasts vs {r.size} realized values")
    if f.size < 1:
        raise ValueError("need at least one forecast")
    return float(np.mean((f - r) ** 2) * scale)


@dataclass(frozen=True)
class BacktestRecord:
    t: int
    span: int | None
    forecast: float
    realized: float
    y: float


@dataclass
class BacktestReport:
    """Per-origin records and AMSE for each span (or external model label)."""

    records: dict = field(default_factory=dict)
    amse: dict = field(default_factory=dict)
    chosen: int | None = None
    p: int | None = None
    horizon: int = DEFAULT_HORIZON


def default_origins(n: int, horizon: int = DEFAULT_HORIZON, start: int = DEFAULT_START) -> list[int]:
    return list(range(start, n - horizon + 1))


def backtest_span(series, m: int, p: int, origins, horizon: int = DEFAULT_HORIZON,
                  delta: float = DEFAULT_DELTA) -> list[BacktestRecord]:
    """Forecast from every origin with span ``m``; origins whose fit fails are skipped."""
    out = []
    for t in origins:
        try:
            a = span_fit(series, t, m, p, delta)
        except NumericalError:
            continue
        last = _view(series, t - p, t)[::-1] ** 2 if p else np.empty(0)
        fc = aggregate_forecast(h_step_forecast(a, last, horizon, t, m))
        fut = _view(series, t, t + horizon)
        if fut.size < horizon:
            raise RangeError(f"horizon {horizon} from origin {t} runs past N = {len(series)}")
        out.append(BacktestRecord(t, m, fc, float(np.dot(fut, fut)), float(fut.sum() / math.sqrt(fc))))
    return out


def forward_validate_span(series, spans=DEFAULT_SPANS, p: int = 1, origins=None, horizon: int = DEFAULT_HORIZON,
                          delta: float = DEFAULT_DELTA, workers: int = 1) -> tuple[int, BacktestReport]:
    """Choose the span with the smallest out-of-sample AMSE (ties to the smaller span)."""
    n = len(series)
    origins = default_origins(n, horizon) if origins is None else list(origins)
    spans = sorted(int(m) for m in spans)
    valid = [t for t in origins if t >= spans[-1] and t + horizon <= n]
    if not valid:
        raise RangeError("no origin leaves room for the largest span and the horizon")
    report = BacktestReport(p=p, horizon=horizon)
    per_span = pmap(partial(backtest_span, series, p=p, origins=valid, horizon=horizon, delta=delta), spans, workers)
    for m, recs in zip(spans, per_span):
        if not recs:
            continue
        report.records[m] = recs
        report.amse[m] = amse([r.forecast for r in recs], [r.realized for r in recs])
    if not report.amse:
        raise NumericalError("every span failed at every origin")
    report.chosen = min(report.amse, key=lambda m: (report.amse[m], m))
    return report.chosen, report


def _z_crit(alpha: float) -> float:
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return float(norm.ppf(1 - alpha / 2))


def record_coverage(records, alpha: float = 0.05) -> float:
    """Fraction of backtest records with ``|y|`` inside the Gaussian ``1 - alpha`` interval."""
    if not records:
        raise ValueError("no records")
    z = _z_crit(alpha)
    return sum(abs(r.y) <= z for r in records) / len(records)


def gaussian_coverage(series, origins, aggregated, horizon: int = DEFAULT_HORIZON, alpha: float = 0.05) -> float:
    """Fraction of origins with ``|sum_h X_{t+h}| / sqrt(forecast)`` inside the Gaussian ``1 - alpha`` interval.

    ``alpha = 1`` gives a zero-width interval and hence coverage 0.
    """
    origins = list(origins)
    agg = np.asarray(aggregated, dtype=float)
    if agg.size != len(origins):
        raise ValueError("one aggregated forecast per origin is required")
    if np.any(agg <= 0):
        raise NumericalError("aggregated forecasts must be positive")
    z = _z_crit(alpha)
    hits = 0
    for t, f in zip(origins, agg):
        if t + horizon > len(series):
            raise RangeError(f"horizon {horizon} from origin {t} runs past N = {len(series)}")
        y = _view(series, t, t + horizon).sum() / math.sqrt(f)
        hits += bool(abs(y) < z) if alpha == 1 else bool(abs(y) <= z)
    return hits / len(origins)


def score_external(series, forecasts: dict, horizon: int = DEFAULT_HORIZON) -> list[BacktestRecord]:
    """Records for externally produced aggregated forecasts ``{t: sigma_bar2}``."""
    out = []
    for t in sorted(forecasts):
        fc = float(forecasts[t])
        fut = _view(series, t, t + horizon)
        if fut.size < horizon:
            raise RangeError(f"horizon {horizon} from origin {t} runs past N = {len(series)}")
        if fc <= 0:
            raise NumericalError(f"external forecast at t={t} is not positive")
        out.append(BacktestRecord(t, None, fc, float(np.dot(fut, fut)), float(fut.sum() / math.sqrt(fc))))
    return out
