import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fracwave.errors import ExponentNotIntegrable, StraddlesZero
from fracwave.lattice import HurstVector, Regime, build_lattice, cell_power_measure, power_measure

exponents = st.floats(min_value=-0.95, max_value=1.5)


def test_regime_classification():
    assert HurstVector((0.8, 0.8, 0.8)).regime is Regime.REGULAR
    assert HurstVector((0.45, 0.45, 0.45)).regime is Regime.WICK
    assert HurstVector((0.5, 0.5, 0.5)).regime is Regime.WICK  # border belongs to the Wick side
    assert HurstVector((0.3, 0.3, 0.3)).regime is Regime.UNSUPPORTED
    assert HurstVector((0.2, 0.25)).regime is Regime.WICK
    assert HurstVector((0.3, 0.35)).regime is Regime.REGULAR


def test_kappa_sign_matches_regime():
    assert HurstVector((0.45, 0.5, 0.5)).kappa == pytest.approx(0.1)
    assert HurstVector((0.5, 0.5, 0.5)).kappa == pytest.approx(0.0, abs=1e-15)
    assert HurstVector((0.8, 0.8, 0.8)).kappa < 0


@pytest.mark.parametrize("h", [(0.0, 0.5), (0.5, 1.0), (0.5,)])
def test_hurst_rejects_bad_input(h):
    with pytest.raises(ValueError):
        HurstVector(h)


@given(a=st.floats(0.01, 50), w=st.floats(1e-6, 50), p=exponents)
def test_power_measure_matches_quadrature(a, w, p):
    exact = cell_power_measure((a, a + w), p)
    ref, _ = integrate.quad(lambda x: x ** p, a, a + w, epsabs=0, epsrel=1e-12)
    assert exact == pytest.approx(ref, rel=1e-9)


@given(a=st.floats(0.0, 10), w1=st.floats(1e-3, 10), w2=st.floats(1e-3, 10), p=exponents)
def test_power_measure_additive_and_even(a, w1, w2, p):
    b, c = a + w1, a + w1 + w2
    whole = cell_power_measure((a, c), p)
    assert whole == pytest.approx(cell_power_measure((a, b), p) + cell_power_measure((b, c), p), rel=1e-12)
    assert cell_power_measure((-c, -a), p) == pytest.approx(whole, rel=1e-14)


def test_power_measure_errors():
    with pytest.raises(StraddlesZero):
        cell_power_measure((-1.0, 1.0), 0.2)
    with pytest.raises(ExponentNotIntegrable):
        cell_power_measure((0.0, 1.0), -1.0)
    with pytest.raises(ValueError):
        cell_power_measure((1.0, 1.0), 0.0)


def test_thin_cell_accuracy():
    a, w = 3.0, 1e-12
    assert cell_power_measure((a, a + w), 0.4) == pytest.approx(w * a ** 0.4, rel=1e-9)


@pytest.mark.parametrize("n,cpo,dim,low", [(3, 4, 2, 0), (5, 4, 3, 4), (6, 8, 2, 4), (2, 1, 4, 2)])
def test_zero_exponent_measure_covers_box(n, cpo, dim, low):
    lat = build_lattice(n, cpo, dim, low_octaves=low, max_width=(0.5,) + (None,) * (dim - 1))
    for ax in range(dim):
        total = math.fsum(lat.power_measures(ax, 0.0))
        assert total == pytest.approx(2 * 2.0 ** n, rel=1e-12)


@given(n=st.integers(1, 7), cpo=st.sampled_from([1, 2, 4]), p=exponents)
def test_refinement_preserves_total_measure(n, cpo, p):
    coarse = build_lattice(n, cpo, 2, low_octaves=3)
    fine = build_lattice(n, 2 * cpo, 2, low_octaves=3)
    exact = 2 * 2.0 ** (n * (p + 1)) / (p + 1)
    for lat in (coarse, fine):
        assert math.fsum(lat.power_measures(1, p)) == pytest.approx(exact, rel=1e-12)


@given(n=st.integers(0, 5), cpo=st.sampled_from([1, 2, 4]), dim=st.integers(2, 4), data=st.data())
def test_pairing_is_an_involution_onto_the_reflected_cell(n, cpo, dim, data):
    lat = build_lattice(n, cpo, dim, low_octaves=2, max_width=0.5)
    idx = tuple(data.draw(st.integers(0, s - 1)) for s in lat.shape)
    back = lat.pairing(lat.pairing(idx))
    assert back == idx
    mirror = lat.pairing(idx)
    for ax in range(dim):
        assert lat.lower(ax)[mirror[ax]] == -lat.upper(ax)[idx[ax]]


def test_cells_symmetric_and_contiguous():
    lat = build_lattice(4, 4, 3, low_octaves=4, max_width=(0.5, None, None))
    for ax in range(3):
        lo, hi = lat.lower(ax), lat.upper(ax)
        assert np.all(lo < hi)
        assert np.array_equal(lo[1:], hi[:-1])
        assert np.array_equal(lo, -hi[::-1])
        assert hi[-1] == lat.bound == 16.0
        assert not np.any((lo < 0) & (hi > 0))
    assert max(np.max(lat.widths(0)), 0) <= 0.5 + 1e-12


@pytest.mark.parametrize("n,m", [(2, 5), (3, 4), (0, 3)])
def test_lower_level_is_a_centered_sub_box(n, m):
    big = build_lattice(m, 4, 3, low_octaves=4, max_width=(0.5, None, None))
    small = big.restrict(n)
    for ax in range(3):
        sl = big.axis_slice(ax, n)
        assert np.array_equal(big.lower(ax)[sl], small.lower(ax))
        assert np.array_equal(big.upper(ax)[sl], small.upper(ax))
        assert np.all(big.cell_levels(ax)[sl] <= n)
    assert np.array_equal(big.shell[tuple(big.axis_slice(ax, n) for ax in range(3))], small.shell)


def test_power_measure_subnormal_endpoint():
    assert cell_power_measure((5e-324, 1.0), 1.0) == pytest.approx(0.5, rel=1e-15)
    assert cell_power_measure((-2.0, -1e-310), -0.5) == pytest.approx(2 * 2 ** 0.5, rel=1e-15)
