"""Kernel normalized-least-squares (kernel-NLS) estimation of tvARCH(p) curves.

The squared returns follow the autoregression
``X_k^2 = a_0 + sum_j a_j X_{k-j}^2 + noise``; at each time point ``t0`` the
coefficients are found by kernel-weighted least squares with every term
divided by ``kappa(k)^2``.  The two-stage estimator uses
``kappa(k) = mu_hat + X_{k-1}^2 + ... + X_{k-p}^2``, where ``mu_hat`` is a
kernel estimate of the local mean of the squares.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from .errors import (
    InsufficientWindowError,
    NotApplicableError,
    NumericalError,
    SingularDesignError,
)
from .kernels import Kernel, get_kernel, weights_at
from .process import ReturnSeries

__all__ = [
    "FitPoint",
    "FitCurve",
    "ResidualSet",
    "local_mean",
    "weighted_ls",
    "nls_fit_at",
    "nls_fit_curve",
    "nls_fit_stationary",
    "oracle_refit",
    "clip_coefficients",
    "residuals",
    "fit_residuals",
]

COND_LIMIT = 1e12
MU_FLOOR = 1e-300
A0_FLOOR_REL = 1e-8
DEFAULT_DELTA = 0.01


def as_squares(series) -> np.ndarray:
    """Squared values of a :class:`ReturnSeries` or any 1-d array of returns."""
    if isinstance(series, ReturnSeries):
        return series.squares
    x = np.asarray(series, dtype=float).ravel()
    return x * x


def lagged_design(x2: np.ndarray, k: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Targets ``X_k^2`` and regressor rows ``(1, X_{k-1}^2, ..., X_{k-p}^2)`` for 1-based ``k > p``."""
    design = np.ones((k.size, p + 1))
    for j in range(1, p + 1):
        design[:, j] = x2[k - 1 - j]
    return x2[k - 1], design


def solve_normal(design: np.ndarray, y: np.ndarray, w: np.ndarray, t0=None) -> np.ndarray:
    """Weighted least squares ``argmin sum w (y - design a)^2`` via the normal equations.

    The Gram matrix is diagonally equilibrated before the condition check and
    the Cholesky solve, so the guard does not depend on the scale of the data.
    """
    gram = design.T @ (design * w[:, None])
    rhs = design.T @ (w * y)
    diag = np.diag(gram)
    if np.any(~np.isfinite(gram)) or np.any(diag <= 0):
        raise SingularDesignError(f"degenerate design in window at t0={t0}", t0)
    d = 1.0 / np.sqrt(diag)
    scaled = gram * d[:, None] * d[None, :]
    cond = np.linalg.cond(scaled)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularDesignError(f"design matrix condition {cond:.3g} exceeds {COND_LIMIT:.0e} at t0={t0}", t0)
    try:
        factor = linalg.cho_factor(scaled)
    except linalg.LinAlgError as exc:
        raise SingularDesignError(f"design matrix not positive definite at t0={t0}", t0) from exc
    return d * linalg.cho_solve(factor, d * rhs)


def _check_count(k: np.ndarray, p: int, t0) -> None:
    if k.size < 2 * (p + 1):
        raise InsufficientWindowError(
            f"only {k.size} usable observations in window at t0={t0}; need {2 * (p + 1)}")


def _window(x2: np.ndarray, t0: int, b: float, kernel, p: int, n: int | None = None,
            exclude: Iterable[int] = ()) -> tuple[np.ndarray, np.ndarray]:
    """Indices ``k > p`` and kernel weights of the estimation window at ``t0``."""
    n = x2.size if n is None else n
    wv = weights_at(kernel, t0, b, n, limit=x2.size)
    keep = wv.index > p
    excl = np.asarray(sorted(exclude), dtype=int)
    if excl.size:
        keep &= ~np.isin(wv.index, excl)
    return wv.index[keep], wv.weights[keep]


def _lag_sum(x2: np.ndarray, k: np.ndarray, p: int) -> np.ndarray:
    s = np.zeros(k.size)
    for j in range(1, p + 1):
        s += x2[k - 1 - j]
    return s


def local_mean(series, t0: int, b: float, kernel: Kernel | str = Kernel.PARZEN, *, raw: bool = False,
               floor: float = MU_FLOOR, exclude: Iterable[int] = ()) -> float:
    """Kernel-weighted mean of ``X_k^2`` around ``t0``.

    Weights are renormalized to sum to one over the (possibly truncated)
    support; ``raw=True`` keeps the plain ``1/(bN)`` weights instead.
    Indices in ``exclude`` are dropped before normalization.  A window of
    zeros gives ``floor`` and a :class:`RuntimeWarning`.
    """
    return _local_mean_sq(as_squares(series), t0, b, kernel, raw, exclude, floor)


def _global_mean(x2: np.ndarray, exclude: Iterable[int] = ()) -> float:
    excl = np.asarray(sorted(exclude), dtype=int)
    if excl.size:
        mask = np.ones(x2.size, bool)
        mask[excl - 1] = False
        return float(x2[mask].mean())
    return float(x2.mean())


def weighted_ls(series, t0: int, b: float, kernel: Kernel | str = Kernel.PARZEN, weight_fn=None,
                p: int = 1) -> np.ndarray:
    """Closed-form minimizer of the kappa-normalized kernel least-squares criterion.

    ``weight_fn`` gives ``kappa(k)`` for 1-based indices ``k``: a callable on an
    integer array, an array holding ``kappa`` for ``k = 1..N``, a positive
    scalar, or ``None`` for ``kappa = 1``.
    """
    return _wls_kappa(as_squares(series), t0, b, kernel, weight_fn, p)


def _eval_kappa(weight_fn, k: np.ndarray) -> np.ndarray:
    if weight_fn is None:
        kappa = np.ones(k.size)
    elif callable(weight_fn):
        kappa = np.asarray(weight_fn(k), dtype=float) * np.ones(k.size)
    elif np.ndim(weight_fn) == 0:
        kappa = np.full(k.size, float(weight_fn))
    else:
        kappa = np.asarray(weight_fn, dtype=float)[k - 1]
    if np.any(~(kappa > 0)):
        raise ValueError("weight function must be strictly positive on the window")
    return kappa


@dataclass(frozen=True)
class FitPoint:
    """Two-stage estimate at one time point."""

    t0: int
    u0: float
    a_hat: np.ndarray
    mu_hat: float
    b: float

    @property
    def order(self) -> int:
        return self.a_hat.size - 1


@dataclass
class FitCurve:
    """Estimates over a grid of time points sharing order, kernel and bandwidth.

    ``failures`` maps each grid point that could not be fitted to the error
    message; those points are absent from ``points``.
    """

    points: list[FitPoint]
    p: int
    kernel: str
    b: float
    n: int
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def t0(self) -> np.ndarray:
        return np.array([pt.t0 for pt in self.points], dtype=int)

    @property
    def u0(self) -> np.ndarray:
        return self.t0 / self.n

    @property
    def mu_hat(self) -> np.ndarray:
        return np.array([pt.mu_hat for pt in self.points])

    @property
    def a_hat(self) -> np.ndarray:
        """Estimates as an array of shape ``(len(points), p + 1)``."""
        if not self.points:
            return np.empty((0, self.p + 1))
        return np.vstack([pt.a_hat for pt in self.points])

    def columns(self) -> list[str]:
        return ["t0", "u0", "mu_hat"] + [f"a_{j}" for j in range(self.p + 1)]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "kernel": self.kernel,
            "b": self.b,
            "n": self.n,
            "columns": self.columns(),
            "rows": [[pt.t0, pt.u0, pt.mu_hat, *pt.a_hat.tolist()] for pt in self.points],
            "failures": {str(k): v for k, v in self.failures.items()},
        }


def _stage_one(x2, t0, b, kernel, mu_mode, mu_raw, exclude=()) -> float:
    if mu_mode == "local":
        return _local_mean_sq(x2, t0, b, kernel, mu_raw, exclude)
    if mu_mode == "global":
        mu = _global_mean(x2, exclude)
        return mu if mu > 0 else MU_FLOOR
    mu = float(mu_mode)
    if not mu > 0:
        raise ValueError(f"supplied local mean must be positive, got {mu}")
    return mu


def _local_mean_sq(x2, t0, b, kernel, raw, exclude, floor=MU_FLOOR) -> float:
    wv = weights_at(kernel, t0, b, x2.size)
    idx, w = wv.index, wv.weights
    excl = np.asarray(sorted(exclude), dtype=int)
    if excl.size:
        keep = ~np.isin(idx, excl)
        idx, w = idx[keep], w[keep]
    total = float(np.dot(w, x2[idx - 1]))
    mu = total if raw else total / w.sum()
    if not mu > 0:
        warnings.warn(f"all-zero window at t0={t0}; local mean floored at {floor:g}", RuntimeWarning,
                      stacklevel=3)
        return floor
    return mu


def two_stage(x2: np.ndarray, t0: int, b: float, p: int, kernel, mu_mode="local", mu_raw: bool = False,
              exclude: Iterable[int] = (), exclude_mu: Iterable[int] = ()) -> tuple[np.ndarray, float]:
    """Two-stage NLS on squared data; returns ``(a_hat, mu_hat)``.

    ``exclude`` drops regression terms (by target index ``k``) and
    ``exclude_mu`` drops observations from the first-stage mean.
    """
    mu = _stage_one(x2, t0, b, kernel, mu_mode, mu_raw, exclude_mu)
    k, w = _window(x2, t0, b, kernel, p, exclude=exclude)
    _check_count(k, p, t0)
    kappa = mu + _lag_sum(x2, k, p)
    y, design = lagged_design(x2, k, p)
    return solve_normal(design, y, w / kappa**2, t0), mu


def nls_fit_at(series, t0: int, b: float, p: int = 1, kernel: Kernel | str = Kernel.PARZEN,
               mu_mode="local", mu_raw: bool = False) -> FitPoint:
    """Two-stage kernel-NLS estimate of ``a(t0/N)``.

    Parameters
    ----------
    series : ReturnSeries or array_like
        Returns ``X_1..X_N``.
    t0 : int
        1-based time index.
    b : float
        Bandwidth in (0, 1]; the kernel spans ``bN`` observations.
    p : int
        ARCH order.
    kernel : Kernel or str
    mu_mode : {"local", "global"} or float
        First-stage local mean: kernel-smoothed (same ``b`` and kernel),
        the full-sample mean of squares, or a supplied positive value.
    mu_raw : bool
        Use unnormalized ``1/(bN)`` weights in the first stage.
    """
    x2 = as_squares(series)
    kernel = get_kernel(kernel)
    a, mu = two_stage(x2, t0, b, p, kernel, mu_mode, mu_raw)
    return FitPoint(t0=t0, u0=t0 / x2.size, a_hat=a, mu_hat=mu, b=b)


def nls_fit_curve(series, b: float, p: int = 1, kernel: Kernel | str = Kernel.PARZEN,
                  grid: Sequence[int] | None = None, mu_mode="local", mu_raw: bool = False) -> FitCurve:
    """Apply :func:`nls_fit_at` over ``grid`` (default ``p+1..N``); failures are collected."""
    x2 = as_squares(series)
    n = x2.size
    kernel = get_kernel(kernel)
    grid = range(p + 1, n + 1) if grid is None else grid
    points, failures = [], {}
    for t0 in grid:
        t0 = int(t0)
        try:
            a, mu = two_stage(x2, t0, b, p, kernel, mu_mode, mu_raw)
        except NumericalError as exc:
            failures[t0] = str(exc)
            continue
        points.append(FitPoint(t0=t0, u0=t0 / n, a_hat=a, mu_hat=mu, b=b))
    if points and np.any(np.diff([pt.t0 for pt in points]) <= 0):
        raise ValueError("grid must be strictly increasing")
    return FitCurve(points=points, p=p, kernel=kernel.value, b=b, n=n, failures=failures)


def nls_fit_stationary(series, p: int = 1, mu: float | None = None) -> tuple[np.ndarray, float]:
    """Two-stage NLS treating the whole segment as stationary (flat weights).

    Returns ``(a_hat, mu_hat)`` with ``mu_hat`` the sample mean of squares
    unless ``mu`` is supplied.
    """
    x2 = as_squares(series)
    mu = float(x2.mean()) if mu is None else float(mu)
    if not mu > 0:
        mu = MU_FLOOR
    k = np.arange(p + 1, x2.size + 1)
    _check_count(k, p, None)
    kappa = mu + _lag_sum(x2, k, p)
    y, design = lagged_design(x2, k, p)
    return solve_normal(design, y, 1.0 / kappa**2), mu


def oracle_refit(series, t0: int, b: float, kernel: Kernel | str, first_stage: FitPoint) -> np.ndarray:
    """Third-stage refit with the estimated conditional variance as the weight.

    Uses ``kappa(k) = a_0 + sum_j a_j X_{k-j}^2`` with the first-stage
    coefficients, which therefore must all be strictly positive.
    """
    a = np.asarray(first_stage.a_hat, dtype=float)
    if np.any(a <= 0):
        raise NotApplicableError(f"oracle refit needs all first-stage coefficients > 0, got {a}")
    x2 = as_squares(series)
    p = a.size - 1

    def sigma2(k):
        _, design = lagged_design(x2, k, p)
        return design @ a

    return _wls_kappa(x2, t0, b, kernel, sigma2, p)


def _wls_kappa(x2, t0, b, kernel, kappa_fn, p):
    k, w = _window(x2, t0, b, kernel, p)
    _check_count(k, p, t0)
    kappa = _eval_kappa(kappa_fn, k)
    y, design = lagged_design(x2, k, p)
    return solve_normal(design, y, w / kappa**2, t0)


def clip_coefficients(a_hat, delta: float = DEFAULT_DELTA, a0_floor: float = 1e-12) -> np.ndarray:
    """Make an estimate usable as a stable ARCH recursion.

    Negative lag coefficients are set to zero and ``a_0`` is floored at
    ``a0_floor``; if the lag coefficients then sum to more than ``1 - delta``
    they are rescaled proportionally to sum to exactly ``1 - delta``.
    """
    a = np.array(a_hat, dtype=float)
    a[0] = max(a[0], a0_floor)
    a[1:] = np.maximum(a[1:], 0.0)
    total = a[1:].sum()
    if total > 1 - delta:
        a[1:] *= (1 - delta) / total
    return a


@dataclass(frozen=True)
class ResidualSet:
    """Residuals on the window around ``t0``.

    ``z2_tilde`` are the raw squared residuals, ``z2`` the recentred values
    with mean exactly one (small values may turn slightly negative), and
    ``z = X_k / sigma_k`` the signed residuals used for diagnostics.
    """

    t0: int
    index: np.ndarray
    z2_tilde: np.ndarray
    z2: np.ndarray
    z: np.ndarray


def residuals(series, t0: int, b: float, clipped, min_window: int = 10) -> ResidualSet:
    """Squared residuals ``X_k^2 / sigma2_k`` over ``k in [t0 - bN, t0 + bN - 1]``.

    The window is intersected with ``p < k <= N``.
    """
    x = np.asarray(series.values if isinstance(series, ReturnSeries) else series, dtype=float)
    x2 = x * x
    a = np.asarray(clipped, dtype=float)
    p = a.size - 1
    n = x.size
    m = int(np.floor(b * n))
    k = np.arange(max(p + 1, t0 - m), min(n, t0 + m - 1) + 1)
    if k.size < min_window:
        raise InsufficientWindowError(f"residual window at t0={t0} has {k.size} points; need {min_window}")
    y, design = lagged_design(x2, k, p)
    sigma2 = design @ a
    if np.any(sigma2 <= 0):
        raise NumericalError(f"nonpositive fitted variance in residual window at t0={t0}")
    z2_tilde = y / sigma2
    z2 = z2_tilde - z2_tilde.mean() + 1.0
    z = x[k - 1] / np.sqrt(sigma2)
    return ResidualSet(t0=t0, index=k, z2_tilde=z2_tilde, z2=z2, z=z)


def fit_residuals(series, curve: FitCurve, delta: float = DEFAULT_DELTA) -> tuple[np.ndarray, np.ndarray]:
    """Standardized residuals ``X_t / sigma_t`` along a fitted curve.

    Each point's estimate is clipped first so the fitted variance is positive.
    Returns ``(t, z)`` for grid points with ``t > p``.
    """
    x = np.asarray(series.values if isinstance(series, ReturnSeries) else series, dtype=float)
    x2 = x * x
    p = curve.p
    ts, zs = [], []
    for pt in curve.points:
        if pt.t0 <= p:
            continue
        a = clip_coefficients(pt.a_hat, delta, A0_FLOOR_REL * pt.mu_hat)
        s2 = a[0] + sum(a[j] * x2[pt.t0 - 1 - j] for j in range(1, p + 1))
        ts.append(pt.t0)
        zs.append(x[pt.t0 - 1] / np.sqrt(s2))
    return np.array(ts, dtype=int), np.array(zs)
