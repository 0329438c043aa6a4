import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fracwave.errors import EmptySampleSet, InvalidTimeOrder, NonPositiveRadius
from fracwave.gamma import (RESONANCE_WINDOW, Bound, Branch, bound_witness_gamma, gamma_abs2, gamma_closed, gamma_dt,
                            gamma_eval, gamma_increment, gamma_quadrature_oracle, phase_quotient,
                            weighted_xi_integral)

times = st.floats(1e-3, 2.0)
freqs = st.floats(-100.0, 100.0)
radii = st.floats(1e-3, 100.0)


@given(t=times, xi=freqs, r=radii)
def test_conjugation(t, xi, r):
    assert abs(gamma_closed(t, -xi, r) - np.conj(gamma_closed(t, xi, r))) <= 1e-12 * max(1.0, abs(gamma_closed(t, xi, r)))


def test_oracle_agreement_on_random_sample():
    rng = np.random.default_rng(7)
    worst = 0.0
    for k in range(1000):
        t = rng.uniform(1e-6, 2.0)
        r = rng.uniform(1e-6, 100.0)
        xi = rng.uniform(-100.0, 100.0)
        if k % 3 == 0:
            xi = rng.choice([-1, 1]) * r + rng.uniform(-1e-6, 1e-6)
        worst = max(worst, abs(gamma_closed(t, xi, r) - gamma_quadrature_oracle(t, xi, r)))
    assert worst < 1e-9


@pytest.mark.parametrize("t,r", [(1.0, 3.0), (0.01, 50.0), (2.0, 0.2)])
@pytest.mark.parametrize("side", [1, -1])
def test_branch_continuity(t, r, side):
    edge = RESONANCE_WINDOW / t
    inside = gamma_eval(t, side * r - edge * (1 - 1e-9), r)
    outside = gamma_eval(t, side * r - edge * (1 + 1e-9), r)
    assert inside.branch is Branch.SERIES_NEAR_RESONANCE
    assert outside.branch is Branch.CLOSED_FORM
    assert abs(inside.value - outside.value) <= 1e-10 * abs(inside.value)


@given(t=times, xi=freqs, r=radii, a=st.floats(0.1, 10.0))
def test_scaling_identity(t, xi, r, a):
    lhs = gamma_closed(a * t, xi / a, r / a)
    rhs = a * a * gamma_closed(t, xi, r)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(rhs), 1e-300) + 1e-14 * a * a * t * t


@given(t=times, xi=freqs, r=radii)
def test_abs2_matches_closed_form(t, xi, r):
    assert gamma_abs2(t, xi, r) == pytest.approx(abs(gamma_closed(t, xi, r)) ** 2, rel=1e-9, abs=1e-20)


@given(t=times, xi=freqs, r=radii)
def test_exact_resonance_and_small_argument(t, xi, r):
    val = gamma_closed(t, r, r)
    ref = gamma_quadrature_oracle(t, r, r)
    assert abs(val - ref) < 1e-10
    assert gamma_closed(0.0, xi, r) == 0


def test_phase_quotient_limits():
    assert phase_quotient(0.0) == 1j
    z = np.array([1e-8, 0.3, 5.0])
    ref = (np.exp(1j * z) - 1) / z
    assert np.allclose(phase_quotient(z), ref, rtol=1e-7)


@given(h=st.floats(1e-3, 1.0), xi=freqs, r=radii)
def test_time_derivative_by_difference(h, xi, r):
    eps = 1e-6 * h
    fd = (gamma_closed(h + eps, xi, r) - gamma_closed(h - eps, xi, r)) / (2 * eps)
    assert abs(gamma_dt(h, xi, r) - fd) <= 1e-5 * max(1.0, abs(fd))


def test_increment_and_errors():
    assert gamma_increment(0.3, 0.7, 2.0, 1.5) == pytest.approx(gamma_closed(0.7, 2.0, 1.5) - gamma_closed(0.3, 2.0, 1.5))
    with pytest.raises(InvalidTimeOrder):
        gamma_increment(0.7, 0.3, 2.0, 1.5)
    with pytest.raises(NonPositiveRadius):
        gamma_closed(1.0, 1.0, 0.0)
    with pytest.raises(EmptySampleSet):
        bound_witness_gamma([], Bound.POINTWISE)


def test_weighted_xi_integral_against_brute_force():
    s, t, r, h = 0.2, 0.6, 3.0, 0.4
    beta = 1 - 2 * h
    head, _ = integrate.quad(lambda x: abs(gamma_increment(s, t, x, r)) ** 2, 0.0, 0.5, weight="alg",
                             wvar=(beta, 0.0), epsabs=1e-14)
    x, w = np.polynomial.legendre.leggauss(20)
    edges = np.arange(0.5, 4000.5, 0.5)
    mid, half = 0.5 * (edges[:-1] + edges[1:]), 0.25
    nodes = (mid[:, None] + half * x[None, :]).ravel()
    body = np.sum(np.tile(half * w, mid.size) * nodes ** beta * np.abs(gamma_increment(s, t, nodes, r)) ** 2)
    amp = (math.sin(t * r) - math.sin(s * r)) ** 2 / r ** 2
    tail = amp * edges[-1] ** (beta - 1) / (1 - beta)
    assert weighted_xi_integral(s, t, r, h) == pytest.approx(2 * (head + body + tail), rel=1e-4)


def test_pointwise_witness_is_stable_under_refinement():
    rng = np.random.default_rng(3)

    def draw(n):
        out = []
        for _ in range(n):
            t = rng.uniform(0.01, 1.0)
            s = t * (1 - 10 ** rng.uniform(-3, 0))
            out.append((s, t, rng.choice([-1, 1]) * 10 ** rng.uniform(-2, 3), 10 ** rng.uniform(-2, 3), 0.3, 0.5))
        return out

    rep = bound_witness_gamma(draw(200), Bound.POINTWISE, refined_samples=draw(800))
    assert rep.status == "PASS"
    assert 0 < rep.constant < math.inf
