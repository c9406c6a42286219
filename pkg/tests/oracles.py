"""Independent reference computations shared by unit and acceptance tests.

These are written with plain Python loops and generic solvers on purpose,
so they share no code path with the package.
"""

import math

import numpy as np
from scipy.optimize import least_squares

from tvarch.kernels import eval_kernel, weights_at


def oracle_leave_out(x, t, b, p, kernel="parzen"):
    """Leave-out two-stage fit built from explicit loops and row deletion."""
    n = len(x)
    x2 = [v * v for v in x]
    bn = b * n
    half = math.floor(bn / 2 + 1e-12 * bn)
    ks = [k for k in range(max(1, t - half), min(n, t + half) + 1)]
    w = {k: eval_kernel(kernel, (t - k) / bn) / bn for k in ks}
    num = sum(w[k] * x2[k - 1] for k in ks if k != t)
    den = sum(w[k] for k in ks if k != t and w[k] > 0)
    mu = num / den
    rows, ys, ws = [], [], []
    for k in ks:
        if k <= p or w[k] == 0 or t <= k <= t + p:
            continue
        lags = [x2[k - 1 - j] for j in range(1, p + 1)]
        rows.append([1.0] + lags)
        ys.append(x2[k - 1])
        ws.append(w[k] / (mu + sum(lags)) ** 2)
    sw = np.sqrt(ws)
    a = np.linalg.lstsq(np.array(rows) * sw[:, None], np.array(ys) * sw, rcond=None)[0]
    return a, mu


def oracle_cv(x, b, h, p, kernel="parzen"):
    n = len(x)
    total = []
    for t in range(h, n + 1, h):
        if t <= p:
            continue
        a, mu = oracle_leave_out(x, t, b, p, kernel)
        lags = [x[t - 1 - j] ** 2 for j in range(1, p + 1)]
        pred = a[0] + sum(a[j] * lags[j - 1] for j in range(1, p + 1))
        total.append((x[t - 1] ** 2 - pred) ** 2 / (mu + sum(lags)) ** 2)
    return h / n * math.fsum(total)


def brute_force_wls(x2, t0, b, kernel, kappa, p):
    """Minimize the kappa-normalized kernel LS criterion numerically (finite-difference LM)."""
    wv = weights_at(kernel, t0, b, x2.size)
    keep = wv.index > p
    k, w = wv.index[keep], wv.weights[keep]
    sw = np.sqrt(w) / kappa[k - 1]

    def resid(a):
        pred = a[0] + sum(a[j] * x2[k - 1 - j] for j in range(1, p + 1))
        return sw * (x2[k - 1] - pred)

    start = np.r_[x2.mean(), np.zeros(p)]
    res = least_squares(resid, start, jac="2-point", method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return res.x
