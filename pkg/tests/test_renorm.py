import math

import numpy as np
import pytest
from scipy import integrate

from fracwave.errors import LevelMismatch, TimeGridMismatch
from fracwave.field import GridSpec, psi_at_points, sample_psi_n
from fracwave.lattice import HurstVector, Regime
from fracwave.renorm import (GrowthRegime, SigmaInterpolant, angular_constant, default_mc_lattice, sigma_asymptotic_fit,
                             sigma_curve, sigma_quadrature, square_variance_check, wick_covariance_check, wick_square)

H1 = HurstVector((0.35, 0.45))
H2 = HurstVector((0.45, 0.5, 0.5))


def test_angular_constant():
    assert angular_constant(H1) == pytest.approx(2.0)
    h = HurstVector((0.5, 0.3, 0.6))
    ref, _ = integrate.quad(lambda th: abs(math.cos(th)) ** 0.4 * abs(math.sin(th)) ** -0.2, 0, 2 * math.pi,
                            points=[math.pi / 2, math.pi, 3 * math.pi / 2], limit=200)
    assert angular_constant(h) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("h", [H1, H2, HurstVector((0.8, 0.8, 0.8))])
def test_sigma_monotone_in_level_and_time(h):
    ts = np.linspace(0.05, 1.0, 8)
    curve = sigma_curve(h, range(1, 8), ts)
    assert np.all(np.diff(curve.sigma, axis=0) > 0)
    assert np.all(np.diff(curve.sigma, axis=1) > 0)
    assert np.all(sigma_curve(h, [2, 3], [0.0]).sigma == 0)


def test_sigma_matches_independent_double_integral():
    # d = 1: sigma_n(t) = 2 * 2 int_0^N int_0^N |gamma_t(xi, r)|^2 xi^(1-2H0) r^(1-2H1) dxi dr
    from fracwave.gamma import gamma_abs2

    h, n, t = H1, 2, 0.7
    N = 2.0 ** n
    f = lambda r, xi: gamma_abs2(t, xi, r) * xi ** (1 - 2 * h.h[0]) * r ** (1 - 2 * h.h[1])  # noqa: E731
    ref, _ = integrate.dblquad(f, 0, N, 0, N, epsabs=1e-11, epsrel=1e-10)
    assert sigma_quadrature(h, n, t, 1e-9) == pytest.approx(4 * ref, rel=1e-6)


@pytest.mark.parametrize("h", [HurstVector((0.3, 0.35)), HurstVector((0.55, 0.55, 0.55)),
                               HurstVector((0.4, 0.55, 0.6)), HurstVector((0.2, 0.25)),
                               HurstVector((0.15, 0.2)), HurstVector((0.45, 0.45, 0.45))])
def test_fitted_rate_reproduces_exponent(h):
    assert h.regime in (Regime.REGULAR, Regime.WICK)
    fit = sigma_asymptotic_fit(sigma_curve(h, range(2, 9), [0.5, 0.75, 1.0]))
    assert fit.regime is GrowthRegime.GEOMETRIC
    assert abs(fit.fitted_rate - h.kappa) <= 0.1


def test_border_case_is_linear():
    fit = sigma_asymptotic_fit(sigma_curve(HurstVector((0.5, 0.5, 0.5)), range(2, 8), [0.5, 0.75, 1.0]))
    assert fit.regime is GrowthRegime.LINEAR
    assert fit.linear_in_t_residual < 0.05


def _mc_variance_z(h, levels, times, R, seed):
    lat = default_mc_lattice(max(levels), h.d)
    f = psi_at_points(h, lat, levels, times, np.zeros((1, h.d)), seed, range(R))
    zs = []
    for n in levels:
        for j, t in enumerate(times):
            x2 = f[n][:, j, 0] ** 2
            zs.append((x2.mean() - sigma_quadrature(h, n, t)) / (x2.std(ddof=1) / math.sqrt(R)))
    return zs


def test_monte_carlo_variance_matches_quadrature_d1():
    zs = _mc_variance_z(H1, [2, 3, 4, 5], [0.25, 0.5, 1.0], 2000, 21)
    assert max(map(abs, zs)) < 3, zs


@pytest.mark.parametrize("h", [H1, H2])
def test_variance_does_not_depend_on_position(h):
    lat = default_mc_lattice(3, h.d)
    pts = np.array([[0.0] * h.d, [0.7] + [-0.4] * (h.d - 1)])
    f = psi_at_points(h, lat, [3], [0.8], pts, 41, range(1500 if h.d == 1 else 400))[3][:, 0, :]
    diff = f[:, 0] ** 2 - f[:, 1] ** 2
    assert abs(diff.mean()) < 3 * diff.std(ddof=1) / math.sqrt(diff.size)
    for j in range(2):
        x2 = f[:, j] ** 2
        assert abs(x2.mean() - sigma_quadrature(h, 3, 0.8)) < 3 * x2.std(ddof=1) / math.sqrt(x2.size)


@pytest.mark.slow
def test_monte_carlo_variance_matches_quadrature_d2():
    zs = _mc_variance_z(H2, [2, 3], [0.5, 1.0], 1000, 22)
    assert max(map(abs, zs)) < 3, zs


@pytest.mark.slow
def test_gaussian_fourth_moment():
    rep = square_variance_check(H1, 3, 1.0, 10000, seed=31)
    assert abs(rep["fourth_ratio"] - 1) <= 0.05
    assert rep["passed"]


def test_wick_identity_small_sample():
    rep = wick_covariance_check(H1, 2, 3, [(1.0, [0.0], 1.0, [0.0]), (0.6, [0.2], 0.9, [-0.3])], 1500, seed=5)
    assert rep.passed, [r.z for r in rep.rows]
    for row in rep.rows:
        assert row.rhs_mc == pytest.approx(row.rhs_oracle, rel=0.25)


def test_wick_square_subtracts_sigma_per_time():
    lat = default_mc_lattice(3, 1)
    g = GridSpec(1, 32, 2.0)
    times = [0.5, 1.0]
    psi = sample_psi_n(H1, 3, lat, g, times, seed=1)
    curve = sigma_curve(H1, [3], times)
    w = wick_square(psi, curve)
    assert np.allclose(w.values, psi.values ** 2 - curve.sigma[0][:, None])
    with pytest.raises(LevelMismatch):
        wick_square(psi, curve.sigma[0], n_level=2)
    with pytest.raises(TimeGridMismatch):
        wick_square(psi, sigma_curve(H1, [3], [0.5, 0.9]))
    with pytest.raises(ValueError):
        wick_square(w, curve)


def test_sigma_interpolant():
    interp = SigmaInterpolant(H1, 3, 1.0)
    for t in (0.0013, 0.13, 0.52, 0.97):
        assert interp(t) == pytest.approx(sigma_quadrature(H1, 3, t, 1e-8), rel=1e-3)
    assert interp(0.0) == 0.0
