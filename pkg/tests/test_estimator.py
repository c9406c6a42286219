import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tvarch.errors import InsufficientWindowError, NotApplicableError, SingularDesignError
from tvarch.estimator import (
    FitPoint,
    clip_coefficients,
    fit_residuals,
    local_mean,
    nls_fit_at,
    nls_fit_curve,
    nls_fit_stationary,
    oracle_refit,
    residuals,
    weighted_ls,
)
from tvarch.kernels import weights_at
from tvarch.process import ParamCurves, simulate_stationary, simulate_tvarch

from oracles import brute_force_wls


def criterion(a, x2, t0, b, kernel, kappa, n=None):
    """Kernel LS criterion evaluated term by term in plain Python."""
    n = x2.size if n is None else n
    p = len(a) - 1
    wv = weights_at(kernel, t0, b, n)
    total = 0.0
    for k, w in zip(wv.index.tolist(), wv.weights.tolist()):
        if k <= p:
            continue
        pred = a[0] + sum(a[j] * x2[k - 1 - j] for j in range(1, p + 1))
        total += w * (x2[k - 1] - pred) ** 2 / kappa[k - 1] ** 2
    return total


@pytest.mark.parametrize("seed", range(4))
def test_closed_form_matches_minimizer(seed):
    rng = np.random.default_rng(seed)
    p = 1 + seed % 2
    m = ParamCurves.constant([1.0, 0.3, 0.2][: p + 1])
    x2 = simulate_stationary(m, 0.5, n=150, seed=seed).squares
    kappa = 1.0 + rng.random(x2.size)
    kernel = ["parzen", "triangular", "rectangular", "parzen"][seed]
    a = weighted_ls(x2**0.5, 75, 0.6, kernel, kappa, p)
    np.testing.assert_allclose(a, brute_force_wls(x2, 75, 0.6, kernel, kappa, p), atol=1e-7, rtol=1e-7)


def test_perturbation_does_not_improve(rng):
    m = ParamCurves.constant([1.0, 0.4, 0.2])
    x = simulate_stationary(m, 0.5, n=200, seed=5).values
    x2 = x**2
    kappa = 1.0 + x2
    a = weighted_ls(x, 100, 0.5, "parzen", kappa, 2)
    base = criterion(a, x2, 100, 0.5, "parzen", kappa)
    for _ in range(100):
        d = rng.standard_normal(3)
        d *= 1e-3 / np.linalg.norm(d)
        assert criterion(a + d, x2, 100, 0.5, "parzen", kappa) >= base


@pytest.mark.parametrize("lam", [1e-6, 1.0, 1e6])
def test_kappa_scale_invariance(lam):
    x = simulate_stationary(ParamCurves.constant([1.0, 0.5]), 0.5, n=300, seed=2).values
    kappa = 0.5 + x**2
    ref = weighted_ls(x, 150, 0.3, "parzen", kappa, 1)
    np.testing.assert_allclose(weighted_ls(x, 150, 0.3, "parzen", lam * kappa, 1), ref, rtol=1e-8)


@pytest.mark.parametrize("c", [1e-3, 0.5, 7.0])
def test_data_scale_equivariance(c):
    x = simulate_tvarch(ParamCurves.linear([1.0, 0.2, 0.1], [2.0, 0.4, 0.2]), n=400, seed=9).values
    p1 = nls_fit_at(x, 200, 0.3, p=2)
    p2 = nls_fit_at(c * x, 200, 0.3, p=2)
    assert p2.mu_hat == pytest.approx(c**2 * p1.mu_hat, rel=1e-10)
    assert p2.a_hat[0] == pytest.approx(c**2 * p1.a_hat[0], rel=1e-8)
    np.testing.assert_allclose(p2.a_hat[1:], p1.a_hat[1:], rtol=1e-8)


def test_exact_recovery_without_noise():
    # squares that follow the variance recursion exactly are fitted exactly
    x2 = np.empty(20)
    x2[0] = 50.0
    for t in range(1, 20):
        x2[t] = 0.7 + 0.6 * x2[t - 1]
    a = weighted_ls(np.sqrt(x2), 10, 1.0, "rectangular", None, 1)
    np.testing.assert_allclose(a, [0.7, 0.6], rtol=1e-8)


def test_weight_fn_forms_agree():
    x = simulate_stationary(ParamCurves.constant([1.0, 0.5]), 0.5, n=200, seed=1).values
    kap = 1 + x**2
    a1 = weighted_ls(x, 100, 0.4, "parzen", kap, 1)
    a2 = weighted_ls(x, 100, 0.4, "parzen", lambda k: kap[k - 1], 1)
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_allclose(weighted_ls(x, 100, 0.4, "parzen", 3.0, 1), weighted_ls(x, 100, 0.4, "parzen", None, 1))
    with pytest.raises(ValueError):
        weighted_ls(x, 100, 0.4, "parzen", -kap, 1)


def test_local_mean_rectangular_is_window_mean():
    x = np.arange(1.0, 101.0)
    assert local_mean(x, 50, 0.1, "rectangular") == pytest.approx(np.mean(x[44:55] ** 2))
    assert local_mean(x, 50, 0.1, "rectangular", raw=True) == pytest.approx(np.sum(x[44:55] ** 2) / 10)
    excl = local_mean(x, 50, 0.1, "rectangular", exclude=[50])
    assert excl == pytest.approx(np.mean(np.delete(x[44:55] ** 2, 5)))


def test_local_mean_zero_window_floor():
    x = np.zeros(100)
    with pytest.warns(RuntimeWarning, match="all-zero"):
        assert local_mean(x, 50, 0.2, floor=1e-9) == 1e-9


def test_insufficient_window():
    x = np.random.default_rng(0).standard_normal(100)
    with pytest.raises(InsufficientWindowError):
        nls_fit_at(x, 3, 0.05, p=2)


def test_singular_design():
    with pytest.raises(SingularDesignError) as info:
        nls_fit_at(np.ones(100), 50, 0.3, p=1)
    assert info.value.t0 == 50


def test_stationary_fit_large_sample():
    x = simulate_stationary(ParamCurves.constant([1.0, 0.6, 0.3]), 0.5, n=100_000, seed=0).values
    a, mu = nls_fit_stationary(x, 2)
    np.testing.assert_allclose(a, [1.0, 0.6, 0.3], atol=0.05)
    assert mu == pytest.approx(np.mean(x**2))


def test_fit_curve_contents():
    s = simulate_tvarch(ParamCurves.constant_variance(), n=300, seed=4)
    curve = nls_fit_curve(s, 0.2)
    assert curve.a_hat.shape == (299, 2)
    np.testing.assert_array_equal(curve.t0, np.arange(2, 301))
    np.testing.assert_allclose(curve.u0, curve.t0 / 300)
    d = curve.to_dict()
    assert d["columns"] == ["t0", "u0", "mu_hat", "a_0", "a_1"] and len(d["rows"]) == 299
    pt = nls_fit_at(s, 150, 0.2)
    np.testing.assert_array_equal(curve.points[148].a_hat, pt.a_hat)


def test_fit_curve_collects_failures():
    x = np.ones(200)
    x[:100] = np.random.default_rng(3).standard_normal(100)
    curve = nls_fit_curve(x, 0.1, grid=[20, 50, 180])
    assert list(curve.failures) == [180]
    assert [pt.t0 for pt in curve.points] == [20, 50]


def test_global_mu_mode():
    x = simulate_tvarch(ParamCurves.constant_variance(), n=300, seed=4).values
    pt = nls_fit_at(x, 100, 0.2, mu_mode="global")
    assert pt.mu_hat == pytest.approx(np.mean(x**2))
    fixed = nls_fit_at(x, 100, 0.2, mu_mode=2.5)
    assert fixed.mu_hat == 2.5
    np.testing.assert_allclose(fixed.a_hat, weighted_ls(x, 100, 0.2, "parzen", 2.5 + np.r_[0, x[:-1] ** 2], 1))


def test_oracle_refit():
    x = simulate_stationary(ParamCurves.constant([1.0, 0.5]), 0.5, n=2000, seed=6).values
    first = nls_fit_at(x, 1000, 0.3)
    refit = oracle_refit(x, 1000, 0.3, "parzen", first)
    kappa = first.a_hat[0] + first.a_hat[1] * np.r_[0.0, x[:-1] ** 2]
    np.testing.assert_allclose(refit, weighted_ls(x, 1000, 0.3, "parzen", kappa, 1), rtol=1e-12)
    bad = FitPoint(1000, 0.5, np.array([1.0, -0.1]), 1.0, 0.3)
    with pytest.raises(NotApplicableError):
        oracle_refit(x, 1000, 0.3, "parzen", bad)


def test_clip_examples():
    np.testing.assert_allclose(clip_coefficients([0.5, 0.2, 0.3]), [0.5, 0.2, 0.3])
    np.testing.assert_allclose(clip_coefficients([0.5, 0.8, 0.4]), [0.5, 0.66, 0.33])
    np.testing.assert_allclose(clip_coefficients([0.5, -0.1, 0.4]), [0.5, 0.0, 0.4])
    assert clip_coefficients([-1.0, 0.2], a0_floor=1e-3)[0] == 1e-3


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=5), st.floats(0.001, 0.5))
def test_clip_properties(a, delta):
    c = clip_coefficients(a, delta)
    assert c[0] > 0
    assert np.all(c[1:] >= 0)
    assert c[1:].sum() <= 1 - delta + 1e-12
    np.testing.assert_allclose(clip_coefficients(c, delta), c, rtol=1e-12)


def test_residuals_invert_recursion():
    a = np.array([0.8, 0.3, 0.2])
    s, z = simulate_stationary(ParamCurves.constant(a), 0.5, n=500, seed=3, return_innovations=True)
    res = residuals(s, 250, 0.2, a)
    np.testing.assert_array_equal(res.index, np.arange(150, 350))
    np.testing.assert_allclose(res.z2_tilde, z[res.index - 1] ** 2, rtol=1e-12)
    assert res.z2.mean() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(res.z, z[res.index - 1], rtol=1e-12)


def test_residual_window_at_boundary():
    s = simulate_stationary(ParamCurves.constant([1.0, 0.3]), 0.5, n=200, seed=1)
    res = residuals(s, 5, 0.1, [1.0, 0.3])
    assert res.index[0] == 2 and res.index[-1] == 24
    with pytest.raises(InsufficientWindowError):
        residuals(s, 5, 0.02, [1.0, 0.3])


@given(seed=st.integers(0, 10_000))
def test_residual_mean_is_one(seed):
    x = np.random.default_rng(seed).standard_normal(120) * 3
    res = residuals(x, 60, 0.3, [0.5, 0.2, 0.1])
    assert abs(res.z2.mean() - 1.0) < 1e-12


def test_fit_residuals_close_to_innovations():
    s, z = simulate_stationary(ParamCurves.constant([1.0, 0.4]), 0.5, n=3000, seed=8, return_innovations=True)
    curve = nls_fit_curve(s, 0.5, grid=range(200, 2801, 10))
    t, zhat = fit_residuals(s, curve)
    assert t.size == len(curve.points)
    assert np.corrcoef(zhat, z[t - 1])[0, 1] > 0.98


def test_signed_residuals_look_gaussian():
    from tvarch.diagnostics import ks_gaussian

    m = ParamCurves.constant([1.0, 0.5])
    passed = 0
    for r in range(100):
        s = simulate_stationary(m, 0.5, n=2000, seed=r)
        pt = nls_fit_at(s, 1000, 0.5)
        res = residuals(s, 1000, 0.5, clip_coefficients(pt.a_hat, 0.01, 1e-8 * pt.mu_hat))
        passed += ks_gaussian(res.z)[1] >= 0.01
    assert passed >= 95


def test_local_mean_tracks_tvarch0_level():
    model = ParamCurves([0.0, 1.0], [[1.0, 2.0]])
    n = 50_000
    err = [local_mean(simulate_tvarch(model, n=n, seed=s, burn_in=0), n // 2, 0.05) - 1.5 for s in range(100)]
    assert np.mean(np.abs(err)) < 0.05


def test_full_window_mae_comparable_to_qml():
    from tvarch.qml import qml_fit_segment

    model = ParamCurves.constant([1.0, 0.6, 0.3])
    truth = np.array([1.0, 0.6, 0.3])
    e_nls, e_qml = [], []
    for s in range(100):
        x = simulate_stationary(model, 0.5, n=250, seed=s).values
        e_nls.append(np.abs(nls_fit_at(x, 125, 1.0, 2, "rectangular").a_hat - truth))
        e_qml.append(np.abs(qml_fit_segment(x, 2).a_hat - truth))
    assert np.all(np.mean(e_nls, axis=0) < 2 * np.mean(e_qml, axis=0))


def test_curves_follow_true_shape():
    model = ParamCurves.constant_variance()
    n = 1024
    corr = []
    for s in range(20):
        curve = nls_fit_curve(simulate_tvarch(model, n=n, seed=s), 0.132)
        keep = (curve.t0 > 0.1 * n) & (curve.t0 <= 0.9 * n)
        truth = model(curve.t0[keep] / n)
        corr.append([np.corrcoef(curve.a_hat[keep, j], truth[j])[0, 1] for j in (0, 1)])
    assert np.all(np.mean(corr, axis=0) > 0.7)


def test_constant_curve_mean_near_truth():
    x = simulate_stationary(ParamCurves.constant([1.0, 0.4]), 0.5, n=3000, seed=8)
    curve = nls_fit_curve(x, 0.2, grid=range(300, 2701, 10))
    np.testing.assert_allclose(curve.a_hat.mean(axis=0), [1.0, 0.4], atol=0.08)


def _true_first_stage(t0):
    return FitPoint(t0, 0.5, np.array([1.0, 0.5]), 2.0, 0.5)


def test_oracle_refit_error_rate():
    model = ParamCurves.constant([1.0, 0.5])
    scaled = []
    for n in (1000, 4000, 16000):
        err = [np.mean(np.abs(oracle_refit(simulate_stationary(model, 0.5, n=n, seed=s).values, n // 2, 0.5,
                                           "parzen", _true_first_stage(n // 2)) - [1.0, 0.5]))
               for s in range(100)]
        scaled.append(np.mean(err) * np.sqrt(0.5 * n))
    # error times sqrt(bN) stays roughly flat
    assert max(scaled) / min(scaled) < 1.4


def test_oracle_refit_variance_not_larger():
    model = ParamCurves.constant([1.0, 0.5])
    tilde, check = [], []
    for s in range(200):
        x = simulate_stationary(model, 0.5, n=4000, seed=s).values
        tilde.append(nls_fit_at(x, 2000, 0.5).a_hat)
        check.append(oracle_refit(x, 2000, 0.5, "parzen", _true_first_stage(2000)))
    # sampling variance of a variance ratio over 200 reps is roughly 10%
    assert np.all(np.var(check, axis=0) <= 1.1 * np.var(tilde, axis=0))
