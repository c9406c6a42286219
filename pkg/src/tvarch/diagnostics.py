"""Sample statistics for return series and standardized residuals.

Autocovariance of squares, Ljung-Box portmanteau test, one-sample KS test
against the standard normal, and moment summaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DiagnosticError, RangeError
from .process import ReturnSeries

__all__ = [
    "AcfReport",
    "sample_autocov_squares",
    "autocov_report",
    "ljung_box",
    "ks_gaussian",
    "moment_summary",
    "residual_summary",
]


def _values(x) -> np.ndarray:
    if isinstance(x, ReturnSeries):
        return x.values
    return np.asarray(x, dtype=float).ravel()


def sample_autocov_squares(series, h: int) -> float:
    """Autocovariance of the squares at lag ``h``.

    Both the cross moment and the mean run over the first ``N - h``
    observations::

        S_N(h) = 1/(N-h) sum_{t<=N-h} X_t^2 X_{t+h}^2 - Xbar^2,
        Xbar   = 1/(N-h) sum_{t<=N-h} X_t^2
    """
    x2 = _values(series) ** 2
    n = x2.size
    if not 0 <= h <= n - 2:
        raise RangeError(f"lag {h} outside 0..{n - 2}")
    head = x2[: n - h]
    mean = head.mean()
    return float(np.dot(head, x2[h:]) / (n - h) - mean * mean)


@dataclass(frozen=True)
class AcfReport:
    lags: np.ndarray
    autocov: np.ndarray

    @property
    def autocorr(self) -> np.ndarray:
        s0 = self.autocov[0] if self.lags[0] == 0 else np.nan
        if not s0 > 0:
            return np.full_like(self.autocov, np.nan)
        return self.autocov / s0

    def rows(self) -> list[tuple[int, float, float]]:
        return list(zip(self.lags.tolist(), self.autocov.tolist(), self.autocorr.tolist()))


def autocov_report(series, max_lag: int = 40) -> AcfReport:
    """:func:`sample_autocov_squares` at lags ``0..max_lag``."""
    n = len(_values(series))
    max_lag = min(max_lag, n - 2)
    if max_lag < 0:
        raise RangeError("series too short for an autocovariance")
    lags = np.arange(max_lag + 1)
    return AcfReport(lags, np.array([sample_autocov_squares(series, int(h)) for h in lags]))


def _centered(x: np.ndarray) -> np.ndarray:
    if x.size == 0 or np.all(x == x[0]):
        raise DiagnosticError("series has zero variance")
    return x - x.mean()


def ljung_box(x, lags: int = 20) -> tuple[float, float]:
    """Ljung-Box statistic ``n(n+2) sum_k rho_k^2 / (n-k)`` and its chi-square(L) p-value."""
    v = _values(x)
    n = v.size
    if not 1 <= lags < n:
        raise RangeError(f"need 1 <= L < N, got L={lags}, N={n}")
    d = _centered(v)
    denom = float(np.dot(d, d))
    k = np.arange(1, lags + 1)
    rho = np.array([np.dot(d[:-j], d[j:]) for j in k]) / denom
    q = float(n * (n + 2) * np.sum(rho**2 / (n - k)))
    return q, float(special.gammaincc(lags / 2.0, q / 2.0))


def ks_gaussian(x, standardize: bool = True) -> tuple[float, float]:
    """KS distance to the standard normal with the asymptotic Kolmogorov p-value.

    With ``standardize`` the sample is first centred and scaled by its
    standard deviation (the p-value is then conservative, since location and
    scale are estimated).
    """
    v = _values(x)
    n = v.size
    if n < 10:
        raise DiagnosticError(f"KS test needs at least 10 observations, got {n}")
    d = _centered(v)
    if standardize:
        v = d / math.sqrt(float(np.dot(d, d)) / n)
    u = special.ndtr(np.sort(v))
    i = np.arange(1, n + 1)
    stat = float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))
    p = float(special.kolmogorov(math.sqrt(n) * stat))
    return stat, min(max(p, 0.0), 1.0)


def moment_summary(x) -> tuple[float, float, float, float]:
    """``(mean, variance, skewness, excess kurtosis)`` from biased sample moments."""
    v = _values(x)
    if v.size < 4:
        raise DiagnosticError(f"need at least 4 observations, got {v.size}")
    d = v - v.mean()
    m2 = float(np.mean(d**2))
    if np.all(v == v[0]) or not m2 > 0:
        raise DiagnosticError("moments undefined for a zero-variance series")
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    return float(v.mean()), m2, m3 / m2**1.5, m4 / m2**2 - 3.0


def residual_summary(z, lags: int = 20) -> dict:
    """Ljung-Box p-values for ``z``, ``|z|`` and ``z^2``, KS p-value, skewness and excess kurtosis."""
    z = _values(z)
    _, _, skew, kurt = moment_summary(z)
    return {
        "lb_z": ljung_box(z, lags)[1],
        "lb_abs_z": ljung_box(np.abs(z), lags)[1],
        "lb_z2": ljung_box(z**2, lags)[1],
        "ks": ks_gaussian(z)[1],
        "skewness": skew,
        "excess_kurtosis": kurt,
        "n": int(z.size),
        "lags": int(lags),
    }
