"""Residual bootstrap of the tvARCH(p) process and pointwise confidence bands.

At a time point ``t0`` the clipped two-stage estimate is used to form squared
residuals on ``[t0 - bN, t0 + bN - 1]``; these are recentred to mean one and
resampled to drive a stationary ARCH(p) recursion with the estimated
coefficients.  Refitting each bootstrap path (with the original local mean in
the weights) gives the replicate distribution of the estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import CIUnreliableError, NumericalError
from .estimator import (
    A0_FLOOR_REL,
    DEFAULT_DELTA,
    ResidualSet,
    _check_count,
    _lag_sum,
    _window,
    as_squares,
    clip_coefficients,
    lagged_design,
    residuals,
    solve_normal,
    two_stage,
)
from .kernels import Kernel, get_kernel
from .parallel import pmap

__all__ = [
    "BootstrapConfig",
    "ResidualEdf",
    "BandEntry",
    "BootstrapBands",
    "residual_edf",
    "bootstrap_path",
    "bootstrap_fit",
    "pointwise_ci",
    "bootstrap_bands",
]

MAX_FAILURE_RATE = 0.2


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 100
    level: float = 0.8
    delta: float = DEFAULT_DELTA
    seed: int = 0
    method: str = "symmetric"

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if self.method not in ("symmetric", "percentile"):
            raise ValueError(f"unknown band method {self.method!r}")


@dataclass(frozen=True)
class ResidualEdf:
    """Uniform distribution over the recentred squared residuals of a window."""

    residuals: ResidualSet

    @property
    def values(self) -> np.ndarray:
        return self.residuals.z2

    def mean(self) -> float:
        return float(self.values.mean())

    def moment(self, order: int) -> float:
        return float(np.mean(self.values ** (order / 2)))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.values[rng.integers(0, self.values.size, size)]


def residual_edf(series, t0: int, b: float, clipped) -> ResidualEdf:
    return ResidualEdf(residuals(series, t0, b, clipped))


def default_length(t0: int, b: float, n: int) -> int:
    return int(t0 + np.ceil(b * n / 2))


def _recursion(z2: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Squared ARCH paths from squared innovations, zero pre-sample; rows are replicates."""
    z2 = np.atleast_2d(z2)
    p = a.size - 1
    reps, length = z2.shape
    out = np.zeros((reps, length + p))
    for t in range(length):
        s2 = np.full(reps, a[0])
        for j in range(1, p + 1):
            s2 += a[j] * out[:, p + t - j]
        out[:, p + t] = s2 * z2[:, t]
    return out[:, p:]


def bootstrap_path(edf: ResidualEdf, clipped, length: int, seed=0) -> np.ndarray:
    """One bootstrap path of squares ``X+_1^2 .. X+_L^2``.

    ``seed`` may be an int, a :class:`numpy.random.SeedSequence` or a
    :class:`numpy.random.Generator`.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _recursion(edf.sample(rng, length)[None, :], np.asarray(clipped, float))[0]


def bootstrap_fit(x2_plus, mu_hat: float, t0: int, b: float, n: int, p: int = 1,
                  kernel: Kernel | str = Kernel.PARZEN) -> np.ndarray:
    """Refit on a bootstrap path with ``kappa = mu_hat + sum_j X+_{k-j}^2``.

    ``mu_hat`` is the local mean of the original series and ``n`` its length,
    which fixes the kernel scale ``bN``; the path may be shorter than ``n``.
    """
    x2 = np.asarray(x2_plus, dtype=float)
    k, w = _window(x2, t0, b, get_kernel(kernel), p, n=n)
    _check_count(k, p, t0)
    kappa = mu_hat + _lag_sum(x2, k, p)
    y, design = lagged_design(x2, k, p)
    return solve_normal(design, y, w / kappa**2, t0)


@dataclass(frozen=True)
class BandEntry:
    t0: int
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    B: int
    failures: int
    replicates: np.ndarray = field(repr=False, default=None)


@dataclass
class BootstrapBands:
    entries: list[BandEntry]
    method: str
    p: int
    failures: dict[int, str] = field(default_factory=dict)

    def rows(self) -> list[tuple]:
        """``(t0, j, center, lower, upper, level, B, failures)`` per time point and coefficient."""
        out = []
        for e in self.entries:
            for j in range(e.center.size):
                out.append((e.t0, j, e.center[j], e.lower[j], e.upper[j], e.level, e.B, e.failures))
        return out


def _replicate_seed(seed: int, t0: int, r: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, t0, r])


def pointwise_ci(series, t0: int, b: float, p: int = 1, kernel: Kernel | str = Kernel.PARZEN,
                 cfg: BootstrapConfig | None = None, mu_mode="local") -> BandEntry:
    """Bootstrap confidence interval for every coefficient at ``t0``.

    The symmetric band is ``center +- q`` with ``q`` the ``level`` quantile of
    ``|a+ - center|`` across successful replicates; ``method="percentile"``
    uses equal-tailed quantiles of the replicates instead (widened to contain
    the centre).
    """
    cfg = BootstrapConfig() if cfg is None else cfg
    kernel = get_kernel(kernel)
    x2 = as_squares(series)
    n = x2.size
    a_tilde, mu = two_stage(x2, t0, b, p, kernel, mu_mode)
    center = clip_coefficients(a_tilde, cfg.delta, A0_FLOOR_REL * mu)
    edf = residual_edf(series, t0, b, center)
    length = default_length(t0, b, n)

    z2 = np.vstack([edf.sample(np.random.default_rng(_replicate_seed(cfg.seed, t0, r)), length)
                    for r in range(cfg.B)])
    paths = _recursion(z2, center)
    k, w = _window(paths[0], t0, b, kernel, p, n=n)
    _check_count(k, p, t0)
    reps, failures = [], 0
    for path in paths:
        try:
            kappa = mu + _lag_sum(path, k, p)
            y, design = lagged_design(path, k, p)
            reps.append(solve_normal(design, y, w / kappa**2, t0))
        except NumericalError:
            failures += 1
    if failures > MAX_FAILURE_RATE * cfg.B:
        raise CIUnreliableError(f"{failures} of {cfg.B} bootstrap replicates failed at t0={t0}")
    reps = np.array(reps)
    if cfg.method == "symmetric":
        q = np.quantile(np.abs(reps - center), cfg.level, axis=0)
        lower, upper = center - q, center + q
    else:
        tail = (1 - cfg.level) / 2
        lower = np.minimum(np.quantile(reps, tail, axis=0), center)
        upper = np.maximum(np.quantile(reps, 1 - tail, axis=0), center)
    return BandEntry(t0=t0, center=center, lower=lower, upper=upper, level=cfg.level, B=cfg.B,
                     failures=failures, replicates=reps)


def _ci_or_error(t0, series, b, p, kernel, cfg, mu_mode):
    try:
        return pointwise_ci(series, t0, b, p, kernel, cfg, mu_mode)
    except NumericalError as exc:
        return str(exc)


def bootstrap_bands(series, b: float, p: int = 1, kernel: Kernel | str = Kernel.PARZEN, grid=None,
                    cfg: BootstrapConfig | None = None, mu_mode="local", workers: int = 1) -> BootstrapBands:
    """:func:`pointwise_ci` over a grid of time points (default ``p+1..N``).

    Each time point has its own replicate seeds, so ``workers`` changes
    only the wall time.
    """
    cfg = BootstrapConfig() if cfg is None else cfg
    n = len(as_squares(series))
    grid = [int(t) for t in (range(p + 1, n + 1) if grid is None else grid)]
    results = pmap(partial(_ci_or_error, series=series, b=b, p=p, kernel=get_kernel(kernel), cfg=cfg,
                           mu_mode=mu_mode), grid, workers)
    entries, failures = [], {}
    for t0, res in zip(grid, results):
        if isinstance(res, str):
            failures[t0] = res
        else:
            entries.append(res)
    return BootstrapBands(entries=entries, method=cfg.method, p=p, failures=failures)
