import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracwave.errors import EmptyMask, NotAdmissible
from fracwave.field import GridSpec, SpaceTimeField
from fracwave.norms import NormSpec, TimeNorm, bessel_potential, bochner_norm, sobolev_norm, x_s_norm

orders = st.floats(-2.0, 2.0)


def _mode(grid, ks):
    x = grid.mesh()
    step = math.pi / grid.half_width
    return np.cos(sum(k * step * c for k, c in zip(ks, x))), math.hypot(*[k * step for k in ks])


@given(s=orders, k1=st.integers(0, 15), k2=st.integers(0, 15))
def test_exact_on_pure_modes(s, k1, k2):
    g = GridSpec(2, 32, 1.5)
    f, kabs = _mode(g, (k1, k2))
    l2 = math.sqrt(np.sum(f * f) * g.cell_volume)
    mult = (1 + kabs ** 2) ** (s / 2)
    assert sobolev_norm(f, g, s) == pytest.approx(mult * l2, rel=1e-12)
    assert np.max(np.abs(bessel_potential(f, g, s) - mult * f)) <= 1e-12 * mult


@given(seed=st.integers(0, 2 ** 31), s=orders, c=st.floats(-1e3, 1e3), p=st.sampled_from([1.0, 2.0, 3.5, math.inf]))
def test_triangle_and_homogeneity(seed, s, c, p):
    rng = np.random.default_rng(seed)
    g = GridSpec(2, 16, 1.0)
    f, h = rng.standard_normal((2,) + g.shape)
    nf, nh = sobolev_norm(f, g, s, p), sobolev_norm(h, g, s, p)
    assert sobolev_norm(f + h, g, s, p) <= (nf + nh) * (1 + 1e-12)
    assert sobolev_norm(c * f, g, s, p) == pytest.approx(abs(c) * nf, rel=1e-12, abs=1e-300)


@given(seed=st.integers(0, 2 ** 31), n=st.sampled_from([15, 16, 33]), d=st.integers(1, 3))
def test_parseval(seed, n, d):
    rng = np.random.default_rng(seed)
    g = GridSpec(d, n if d < 3 else 8, 2.0)
    f = rng.standard_normal(g.shape)
    assert sobolev_norm(f, g, 0.0) == pytest.approx(math.sqrt(np.sum(f * f) * g.cell_volume), rel=1e-12)
    spec = np.fft.fftn(f)
    assert sobolev_norm(f, g, 0.0) ** 2 == pytest.approx(np.sum(np.abs(spec) ** 2) / f.size * g.cell_volume,
                                                          rel=1e-12)


@given(seed=st.integers(0, 2 ** 31), s1=orders, ds=st.floats(0.0, 2.0))
def test_monotone_in_order(seed, s1, ds):
    rng = np.random.default_rng(seed)
    g = GridSpec(2, 16, 1.0)
    f = rng.standard_normal(g.shape)
    assert sobolev_norm(f, g, s1) <= sobolev_norm(f, g, s1 + ds) * (1 + 1e-12)


def test_real_and_complex_paths_agree():
    rng = np.random.default_rng(0)
    for n in (15, 16):
        g = GridSpec(2, n, 1.0)
        f = rng.standard_normal(g.shape)
        assert np.allclose(bessel_potential(f, g, -0.7), bessel_potential(f.astype(complex), g, -0.7).real,
                           atol=1e-14)


def test_mask_restricts_after_multiplier():
    g = GridSpec(1, 64, 2.0)
    f = np.exp(-8 * g.coords() ** 2)
    mask = g.box_mask(0.5)
    full = bessel_potential(f, g, -1.0)
    assert sobolev_norm(f, g, -1.0, mask=mask) == pytest.approx(math.sqrt(np.sum(full[mask] ** 2) * g.spacing))
    with pytest.raises(EmptyMask):
        sobolev_norm(f, g, 0.0, mask=np.zeros(g.shape, bool))


def test_time_norms():
    g = GridSpec(1, 8, 1.0)
    times = np.linspace(0, 1, 101)
    vals = np.ones((times.size,) + g.shape) * times[:, None]
    fld = SpaceTimeField(times, g, vals, {})
    l2 = math.sqrt(2.0)
    assert bochner_norm(fld, NormSpec()) == pytest.approx(l2)
    q2 = bochner_norm(fld, NormSpec(0.0, 2.0, None, TimeNorm.L_Q, 2.0))
    assert q2 == pytest.approx(l2 / math.sqrt(3), rel=1e-4)
    assert x_s_norm(fld, 0.0, 2, 2) == pytest.approx(l2)


def test_strict_x_s_norm_checks_admissibility():
    g = GridSpec(2, 8, 1.0)
    fld = SpaceTimeField(np.linspace(0, 1, 3), g, np.zeros((3,) + g.shape), {})
    with pytest.raises(NotAdmissible):
        x_s_norm(fld, 0.5, 2, 2, strict=True)
    assert x_s_norm(fld, 0.5, 6, 6, strict=True) == 0.0
