"""Kernels on [-1/2, 1/2] and localized weight vectors.

All kernels integrate to one over their support and vanish outside it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BandwidthError

__all__ = ["Kernel", "WeightVector", "eval_kernel", "weights_at", "kernel_l2", "get_kernel"]

# treat |x| = 1/2 as inside the support despite rounding in (t0 - k) / (bN)
_EDGE_TOL = 1e-12


class Kernel(str, Enum):
    PARZEN = "parzen"
    RECTANGULAR = "rectangular"
    TRIANGULAR = "triangular"


def get_kernel(kernel: Kernel | str) -> Kernel:
    """Resolve a kernel from its name (case-insensitive) or pass through."""
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return Kernel(str(kernel).lower())
    except ValueError:
        names = ", ".join(k.value for k in Kernel)
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {names}") from None


def _parzen_window(u: np.ndarray) -> np.ndarray:
    # standard Parzen window on [-1, 1], peak 1
    a = np.abs(u)
    inner = 1.0 - 6.0 * a**2 + 6.0 * a**3
    outer = 2.0 * (1.0 - a) ** 3
    return np.where(a <= 0.5, inner, np.where(a <= 1.0, outer, 0.0))


def eval_kernel(kernel: Kernel | str, x):
    """Evaluate ``W(x)``; scalar in, scalar out, array in, array out.

    Parzen is the standard window rescaled to [-1/2, 1/2], ``W(x) = (8/3) K(2x)``.
    Triangular is ``2 (1 - 2|x|)`` and rectangular the unit indicator.
    """
    kernel = get_kernel(kernel)
    xa = np.asarray(x, dtype=float)
    inside = np.abs(xa) <= 0.5 + _EDGE_TOL
    if kernel is Kernel.RECTANGULAR:
        out = np.where(inside, 1.0, 0.0)
    elif kernel is Kernel.TRIANGULAR:
        out = np.where(inside, 2.0 * np.clip(1.0 - 2.0 * np.abs(xa), 0.0, None), 0.0)
    else:
        out = (8.0 / 3.0) * _parzen_window(np.clip(2.0 * xa, -1.0, 1.0)) * inside
    if out.ndim == 0:
        return float(out)
    return out


def kernel_l2(kernel: Kernel | str) -> float:
    """``w_2 = int W(x)^2 dx`` over [-1/2, 1/2]."""
    from scipy.integrate import quad

    kernel = get_kernel(kernel)
    val, _ = quad(lambda x: eval_kernel(kernel, x) ** 2, -0.5, 0.5, points=[-0.25, 0.0, 0.25],
                  epsabs=1e-13, epsrel=1e-13)
    return float(val)


@dataclass(frozen=True)
class WeightVector:
    """Nonzero kernel weights ``(1/bN) W((t0 - k)/bN)`` around ``t0``.

    ``index`` holds 1-based time indices, truncated to ``1..N``.  ``raw_sum``
    is the total weight left after truncation (about 1 in the interior,
    about 1/2 at either end of the sample).
    """

    t0: int
    b: float
    n: int
    index: np.ndarray
    weights: np.ndarray

    @property
    def raw_sum(self) -> float:
        return float(self.weights.sum())

    @property
    def lo(self) -> int:
        return int(self.index[0])

    @property
    def hi(self) -> int:
        return int(self.index[-1])

    def as_dense(self, length: int | None = None) -> np.ndarray:
        """Weights laid out on ``1..length`` (0-based array position ``k - 1``)."""
        length = self.n if length is None else length
        out = np.zeros(length)
        keep = self.index <= length
        out[self.index[keep] - 1] = self.weights[keep]
        return out


def weights_at(kernel: Kernel | str, t0: int, b: float, n: int, limit: int | None = None) -> WeightVector:
    """Localized weights centred on ``t0`` for bandwidth ``b`` and sample size ``n``.

    ``limit`` truncates the support at a different upper index than ``n``;
    the bootstrap uses this when the generated path is shorter than the sample.
    """
    if not 0 < b <= 1:
        raise BandwidthError(f"bandwidth must lie in (0, 1], got {b}")
    bn = b * n
    if bn < 2:
        raise BandwidthError(f"bN = {bn:g} < 2: bandwidth too small for N = {n}")
    if not 1 <= t0 <= n:
        raise BandwidthError(f"centre t0 = {t0} outside 1..{n}")
    upper = n if limit is None else limit
    half = int(np.floor(bn / 2 + _EDGE_TOL * bn))
    k = np.arange(max(1, t0 - half), min(upper, t0 + half) + 1)
    w = eval_kernel(kernel, (t0 - k) / bn) / bn
    nz = w > 0
    return WeightVector(t0=t0, b=b, n=n, index=k[nz], weights=w[nz])
