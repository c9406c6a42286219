"""Prediction-based cross-validation for the kernel-NLS bandwidth.

For each candidate bandwidth the squared return at every ``h``-th time point
is predicted from a fit that leaves that point (and the ``p`` regressions it
enters as a lag) out of the estimation; the normalized squared prediction
errors are averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CVError, GridError, NumericalError, TvarchError
from .estimator import as_squares, two_stage
from .kernels import Kernel, get_kernel

__all__ = ["CvReport", "leave_out_fit", "cv_criterion", "select_bandwidth", "default_grid", "default_stride"]


def default_grid(size: int = 20, upper: float = 0.5) -> list[float]:
    """``size`` evenly spaced bandwidths in ``(0, upper]``."""
    return [upper * (i + 1) / size for i in range(size)]


def default_stride(n: int) -> int:
    if 1000 <= n <= 4000:
        return 10
    return max(1, round(n / 100))


def _leave_out(x2, t, b, p, kernel, mu_mode):
    return two_stage(x2, t, b, p, kernel, mu_mode, exclude=range(t, t + p + 1), exclude_mu=(t,))


def leave_out_fit(series, t: int, b: float, p: int = 1, kernel: Kernel | str = Kernel.PARZEN,
                  mu_mode="local") -> np.ndarray:
    """Two-stage NLS at ``t`` with ``X_t^2`` removed from the estimation.

    The regression terms with targets ``k = t, ..., t + p`` (those in which
    ``X_t^2`` appears) are dropped, and ``t`` is dropped from the local mean.
    """
    a, _ = _leave_out(as_squares(series), t, b, p, get_kernel(kernel), mu_mode)
    return a


def cv_terms(x2: np.ndarray, b: float, h: int, p: int, kernel, mu_mode="local") -> dict[int, float]:
    """Normalized squared prediction error at each subsampled point ``kh``; failed points are omitted."""
    n = x2.size
    out = {}
    for t in range(h, n + 1, h):
        if t <= p:
            continue
        try:
            a, mu = _leave_out(x2, t, b, p, kernel, mu_mode)
        except NumericalError:
            continue
        lags = x2[t - 1 - np.arange(1, p + 1)]
        pred = a[0] + float(np.dot(a[1:], lags))
        out[t] = (x2[t - 1] - pred) ** 2 / (mu + lags.sum()) ** 2
    return out


def cv_criterion(series, b: float, h: int = 10, p: int = 1, kernel: Kernel | str = Kernel.PARZEN,
                 mu_mode="local") -> float:
    """Cross-validation score ``(h/N) sum_k e_{kh}^2 / (mu_{kh} + S_{kh-1})^2``."""
    if h < 1:
        raise ValueError("stride h must be at least 1")
    return _score(as_squares(series), b, h, p, get_kernel(kernel), mu_mode)


def _score(x2, b, h, p, kernel, mu_mode) -> float:
    terms = cv_terms(x2, b, h, p, kernel, mu_mode)
    if not terms:
        raise CVError(f"cross-validation failed at every subsampled point for b={b}")
    return h / x2.size * math.fsum(terms.values())


@dataclass
class CvReport:
    grid: list[float]
    scores: list[float]
    b_opt: float
    h: int
    skipped: list[float] = field(default_factory=list)

    def rows(self) -> list[tuple[float, float, bool]]:
        return [(b, s, b in self.skipped) for b, s in zip(self.grid, self.scores)]


def select_bandwidth(series, grid=None, h: int | None = None, p: int = 1, kernel: Kernel | str = Kernel.PARZEN,
                     mu_mode="local") -> CvReport:
    """Minimize :func:`cv_criterion` over ``grid``; ties go to the smaller bandwidth.

    Bandwidths whose window holds fewer than ``10 (p + 1)`` observations, or
    whose criterion cannot be evaluated, are skipped (score ``nan``).
    """
    x2 = as_squares(series)
    n = x2.size
    grid = default_grid() if grid is None else [float(b) for b in grid]
    if not grid:
        raise GridError("bandwidth grid is empty")
    h = default_stride(n) if h is None else int(h)
    kernel = get_kernel(kernel)
    scores, skipped = [], []
    for b in grid:
        if b * n < 10 * (p + 1):
            scores.append(math.nan)
            skipped.append(b)
            continue
        try:
            scores.append(_score(x2, b, h, p, kernel, mu_mode))
        except TvarchError:
            scores.append(math.nan)
            skipped.append(b)
    valid = [(s, b) for s, b in zip(scores, grid) if not math.isnan(s)]
    if not valid:
        raise GridError("every bandwidth in the grid was skipped")
    best = min(valid, key=lambda sb: (sb[0], sb[1]))
    return CvReport(grid=grid, scores=scores, b_opt=best[1], h=h, skipped=skipped)
