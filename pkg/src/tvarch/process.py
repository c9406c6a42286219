"""tvARCH(p) model objects and path simulation.

A tvARCH(p) process evolves as::

    sigma2_t = a_0(t/N) + sum_j a_j(t/N) X_{t-j}^2,    X_t = sigma_t Z_t

with coefficient curves ``a_j`` defined on rescaled time ``u in (0, 1]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DistributionError, DivergenceError, ModelError

__all__ = [
    "InnovationDist",
    "ParamCurves",
    "ReturnSeries",
    "simulate_tvarch",
    "simulate_stationary",
    "unconditional_mean",
    "load_model",
    "save_model",
]

DEFAULT_BURN_IN = 500


@dataclass(frozen=True)
class InnovationDist:
    """Unit-variance, zero-mean innovation law.

    ``kind`` is ``"gaussian"``, ``"laplace"`` or ``"student_t"`` (the last
    needs ``df > 4`` and is rescaled by ``sqrt((df - 2) / df)``).
    """

    kind: str = "gaussian"
    df: float | None = None

    def __post_init__(self):
        kind = self.kind.lower().replace("-", "_")
        if kind in ("normal", "gauss"):
            kind = "gaussian"
        if kind in ("t", "studentt", "student"):
            kind = "student_t"
        if kind not in ("gaussian", "laplace", "student_t"):
            raise DistributionError(f"unknown innovation distribution {self.kind!r}")
        if kind == "student_t":
            if self.df is None or not self.df > 4:
                raise DistributionError(f"Student-t innovations need df > 4, got {self.df}")
        object.__setattr__(self, "kind", kind)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "laplace":
            return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size)
        df = float(self.df)
        return rng.standard_t(df, size) * np.sqrt((df - 2.0) / df)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.df is not None:
            out["df"] = self.df
        return out


@dataclass(frozen=True)
class ParamCurves:
    """Coefficient curves ``a_0..a_p`` sampled on a knot grid in (0, 1].

    Values between knots are linearly interpolated; outside the knot range
    the nearest knot value is used.

    Parameters
    ----------
    knots : array_like
        Strictly increasing knot locations.
    values : array_like
        Shape ``(p + 1, len(knots))``; row ``j`` samples ``a_j``.
    delta : float
        Stability margin: lag coefficients must sum to at most ``1 - delta``.
    """

    knots: np.ndarray
    values: np.ndarray
    delta: float = 0.01

    def __post_init__(self):
        knots = np.atleast_1d(np.asarray(self.knots, dtype=float))
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[1] != knots.size:
            raise ModelError(f"values have {values.shape[1]} columns but there are {knots.size} knots")
        if knots.size > 1 and np.any(np.diff(knots) <= 0):
            raise ModelError("knots must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ModelError("curve values must be finite")
        if np.any(values[0] <= 0):
            raise ModelError("a_0(u) must be strictly positive")
        if np.any(values[1:] < 0):
            raise ModelError("lag coefficients a_j(u) must be nonnegative")
        lag_sum = values[1:].sum(axis=0)
        if np.any(lag_sum > 1 - self.delta + 1e-12):
            raise ModelError(f"lag coefficients sum to {lag_sum.max():.4g} > 1 - delta = {1 - self.delta:.4g}")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    @property
    def order(self) -> int:
        return self.values.shape[0] - 1

    def __call__(self, u) -> np.ndarray:
        """Coefficients at ``u``: shape ``(p + 1,)`` for scalar ``u``, else ``(p + 1, len(u))``."""
        ua = np.asarray(u, dtype=float)
        if self.knots.size == 1:
            out = np.repeat(self.values, ua.size, axis=1)
        else:
            out = np.vstack([np.interp(ua.ravel(), self.knots, row) for row in self.values])
        return out[:, 0] if ua.ndim == 0 else out

    @classmethod
    def constant(cls, coefs: Sequence[float], delta: float = 0.01) -> "ParamCurves":
        return cls(np.array([1.0]), np.asarray(coefs, dtype=float)[:, None], delta)

    @classmethod
    def linear(cls, start: Sequence[float], end: Sequence[float], delta: float = 0.01) -> "ParamCurves":
        """Each ``a_j`` moves linearly from ``start[j]`` at u=0 to ``end[j]`` at u=1."""
        values = np.column_stack([start, end]).astype(float)
        return cls(np.array([0.0, 1.0]), values, delta)

    @classmethod
    def sinusoidal(cls, level: Sequence[float], amplitude: Sequence[float], cycles: float = 1.0,
                   n_knots: int = 201, delta: float = 0.01) -> "ParamCurves":
        """``a_j(u) = level[j] + amplitude[j] * sin(2 pi cycles u)``."""
        u = np.linspace(0.0, 1.0, n_knots)
        s = np.sin(2 * np.pi * cycles * u)
        values = np.asarray(level, float)[:, None] + np.asarray(amplitude, float)[:, None] * s
        return cls(u, values, delta)

    @classmethod
    def constant_variance(cls, mu_star: float = 1.0, a1=None, n_knots: int = 401,
                          delta: float = 0.01) -> "ParamCurves":
        """tvARCH(1) with ``a_0(u) = mu_star (1 - a_1(u))``, so the local mean is constant.

        ``a1`` is a callable on [0, 1]; the default oscillates smoothly between
        0.01 and 0.89 over four cycles, ``0.45 - 0.44 cos(8 pi u)``.
        """
        if a1 is None:
            a1 = _default_a1
        u = np.linspace(0.0, 1.0, n_knots)
        a1v = np.asarray(a1(u), dtype=float)
        return cls(u, np.vstack([mu_star * (1.0 - a1v), a1v]), delta)

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "knots": self.knots.tolist(),
            "curves": self.values.tolist(),
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParamCurves":
        try:
            curves = cls(np.asarray(data["knots"], float), np.asarray(data["curves"], float),
                         float(data.get("delta", 0.01)))
        except (KeyError, TypeError) as exc:
            raise ModelError(f"invalid model description: {exc}") from exc
        if "order" in data and int(data["order"]) != curves.order:
            raise ModelError(f"declared order {data['order']} but {curves.order + 1} curves given")
        return curves


def _default_a1(u):
    return 0.45 - 0.44 * np.cos(8 * np.pi * np.asarray(u))


@dataclass
class ReturnSeries:
    """Ordered log-returns ``X_1..X_N`` with optional timestamps."""

    values: np.ndarray
    timestamps: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(self.values)):
            raise ValueError("return series contains non-finite values")
        if self.timestamps is not None and len(self.timestamps) != self.values.size:
            raise ValueError("timestamps and values differ in length")

    def __len__(self) -> int:
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def squares(self) -> np.ndarray:
        return self.values**2


def unconditional_mean(model: ParamCurves, u: float) -> float:
    """Local mean of the squares, ``a_0(u) / (1 - sum_j a_j(u))``."""
    a = model(u)
    alpha = float(a[1:].sum())
    if alpha >= 1:
        raise DivergenceError(f"lag coefficients sum to {alpha:g} >= 1 at u = {u}")
    return float(a[0] / (1.0 - alpha))


def _recurse(coefs: np.ndarray, z: np.ndarray, burn_coefs: np.ndarray, burn_in: int):
    """Run the ARCH recursion.

    ``coefs`` is ``(p + 1, N)``; the first ``burn_in`` innovations are used with
    ``burn_coefs`` and then dropped.  Pre-sample squares start at the
    unconditional mean implied by ``burn_coefs``.
    """
    p = coefs.shape[0] - 1
    n = coefs.shape[1]
    mu0 = burn_coefs[0] / (1.0 - burn_coefs[1:].sum())
    hist = [float(mu0)] * p  # most recent first
    out = np.empty(n)
    zl = z.tolist()
    bc = burn_coefs.tolist()
    for t in range(burn_in):
        s2 = bc[0]
        for j in range(p):
            s2 += bc[j + 1] * hist[j]
        x = (s2**0.5) * zl[t]
        if p:
            hist.insert(0, x * x)
            hist.pop()
    cl = coefs.T.tolist()
    for t in range(n):
        c = cl[t]
        s2 = c[0]
        for j in range(p):
            s2 += c[j + 1] * hist[j]
        x = (s2**0.5) * zl[burn_in + t]
        out[t] = x
        if p:
            hist.insert(0, x * x)
            hist.pop()
    return out


def simulate_tvarch(model: ParamCurves, dist: InnovationDist | None = None, n: int = 1024, seed: int = 0,
                    burn_in: int = DEFAULT_BURN_IN, return_innovations: bool = False):
    """Simulate ``X_1..X_N`` from the tvARCH recursion with ``u = t/N``.

    The burn-in stretch runs with coefficients frozen at ``u = 1/N``.
    Returns a :class:`ReturnSeries`, or ``(series, z)`` with the ``N``
    innovations actually used when ``return_innovations`` is set.
    """
    if n < 1:
        raise ValueError("N must be at least 1")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    dist = InnovationDist() if dist is None else dist
    rng = np.random.default_rng(seed)
    z = dist.sample(rng, burn_in + n)
    coefs = model(np.arange(1, n + 1) / n)
    x = _recurse(coefs, z, model(1.0 / n), burn_in)
    series = ReturnSeries(x, meta={"seed": seed, "model": "tvarch"})
    if return_innovations:
        return series, z[burn_in:]
    return series


def simulate_stationary(model: ParamCurves, u0: float, dist: InnovationDist | None = None, n: int = 1024,
                        seed: int = 0, burn_in: int = DEFAULT_BURN_IN, return_innovations: bool = False):
    """Simulate the frozen-coefficient approximation with all ``a_j`` fixed at ``u0``."""
    if not 0 < u0 <= 1:
        raise ValueError(f"u0 must lie in (0, 1], got {u0}")
    if n < 1:
        raise ValueError("N must be at least 1")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    dist = InnovationDist() if dist is None else dist
    rng = np.random.default_rng(seed)
    z = dist.sample(rng, burn_in + n)
    a = model(u0)
    x = _recurse(np.repeat(a[:, None], n, axis=1), z, a, burn_in)
    series = ReturnSeries(x, meta={"seed": seed, "model": "stationary", "u0": u0})
    if return_innovations:
        return series, z[burn_in:]
    return series


def save_model(path, model: ParamCurves, dist: InnovationDist | None = None) -> None:
    data = model.to_dict()
    data["innovation"] = (dist or InnovationDist()).to_dict()
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_model(path) -> tuple[ParamCurves, InnovationDist]:
    """Read a JSON model file; returns the curves and the innovation law."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not valid JSON ({exc})") from exc
    inn = data.get("innovation", {"kind": "gaussian"})
    return ParamCurves.from_dict(data), InnovationDist(inn.get("kind", "gaussian"), inn.get("df"))
