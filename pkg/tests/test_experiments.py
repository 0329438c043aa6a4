import numpy as np
import pytest

from fracwave.experiments import cauchy_decay_monte_carlo, cauchy_decay_quadrature, default_alpha
from fracwave.field import GridSpec
from fracwave.lattice import HurstVector

H = HurstVector((0.2, 0.25))


def test_default_alpha():
    assert default_alpha(H) == pytest.approx(0.1)
    assert default_alpha(HurstVector((0.45, 0.5, 0.5))) == pytest.approx(0.1)


def test_quadrature_shell_norms_decrease():
    rep = cauchy_decay_quadrature(H, range(2, 9), 1.0, order=1)
    assert rep.passed and rep.inversions == 0
    assert max(e / v for e, v in zip(rep.errors, rep.values)) < 1e-6
    assert len(list(rep.rows())) == 6


def test_quadrature_is_node_converged_for_squares():
    rep = cauchy_decay_quadrature(H, range(4, 9), 1.0, order=2)
    assert max(e / v for e, v in zip(rep.errors, rep.values)) < 1e-6
    assert rep.passed


def test_monte_carlo_matches_quadrature_d1():
    levels = [2, 3, 4]
    mc = cauchy_decay_monte_carlo(H, levels, 1.0, GridSpec(1, 512, 4.0), 1500, 3)
    for order in (1, 2):
        q = cauchy_decay_quadrature(H, levels, 1.0, order=order)
        for a, b, se in zip(mc[order].values, q.values, mc[order].errors):
            assert abs(a - b) < 3 * se, (order, a, b, se)


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        cauchy_decay_quadrature(HurstVector((0.45, 0.5, 0.5)), [2, 3])
    with pytest.raises(ValueError):
        cauchy_decay_quadrature(H, [2, 3], order=3)
    with pytest.raises(ValueError):
        cauchy_decay_monte_carlo(H, [2, 3], 1.0, GridSpec(1, 64, 2.0), 2, 0, orders=(3,))
