import ast
import inspect
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracwave import admiss
from fracwave.admiss import (INF, Kind, check_admissible, construct_pairs, exact, optimality_scan, rational_grid,
                             strichartz_witness)
from fracwave.errors import HypothesisViolated
from fracwave.field import GridSpec

s_in_range = st.fractions(min_value=Fraction(1, 4), max_value=Fraction(1, 2), max_denominator=1000).filter(
    lambda s: s > Fraction(1, 4))


@given(d=st.integers(2, 4), s=s_in_range)
def test_constructed_pairs_are_admissible(d, s):
    c = construct_pairs(d, s)
    assert check_admissible(c.admissible.q, c.admissible.r, d, s, Kind.ADMISSIBLE).ok
    assert check_admissible(c.dual.q, c.dual.r, d, s, Kind.DUAL).ok
    assert c.ok


@pytest.mark.parametrize("d", [2, 3, 4])
def test_constructed_pairs_on_rational_grid(d):
    for s in rational_grid(Fraction(1, 4), Fraction(1, 2), 20):
        assert construct_pairs(d, s).ok, (d, s)


def test_scaling_holds_exactly_where_floats_round():
    d, s = 3, Fraction(1, 3)
    c = construct_pairs(d, s)
    q, r = c.admissible.q, c.admissible.r
    assert 1 / q + d / r == Fraction(d, 2) - s
    assert isinstance(q, Fraction) and isinstance(r, Fraction)
    assert check_admissible(str(q), str(r), d, "1/3").ok


def test_d5_equality_case():
    c = construct_pairs(5, Fraction(1, 2))
    assert (c.admissible.q, c.dual.q) == (3, Fraction(3, 2))
    assert c.admissible.q == 2 * c.dual.q
    assert not c.strict_ratio_checks["q_gt_2qt"]
    row = optimality_scan([5], [Fraction(1, 2)])[0]
    assert row.ratio == 2 and row.ratio_feasible and not row.q_strict


@given(d=st.integers(2, 12), s=st.fractions(min_value=Fraction(1, 100), max_value=Fraction(1), max_denominator=200))
def test_scaling_boundary(d, s):
    row = optimality_scan([d], [s])[0]
    assert row.scaling_feasible == (4 * s >= d - 3)


def test_high_dimensions_infeasible_below_one():
    rows = optimality_scan(range(7, 13), rational_grid(0, 1, 40)[:-1])
    assert rows and all(not r.scaling_feasible and not r.construct_ok for r in rows)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_low_dimensions_feasible(d):
    rows = optimality_scan([d], rational_grid(Fraction(1, 4), Fraction(1, 2), 20))
    assert all(r.scaling_feasible and r.construct_ok and r.ratio_feasible for r in rows)


def test_violations_are_reported_not_raised():
    res = check_admissible(1, 3, 3, Fraction(1, 2))
    assert not res.ok
    assert "q_range" in res.violations
    endpoint = check_admissible(2, 6, 4, Fraction(5, 6))
    assert endpoint.violations == ["endpoint_excluded"]
    assert check_admissible(INF, 2, 3, 0).ok  # energy pair


def test_exact_conversion():
    assert exact(0.1) == Fraction(1, 10)
    assert exact("2/3") == Fraction(2, 3)
    assert exact(float("inf")) == INF


def test_decision_paths_use_no_floats():
    for fn in (check_admissible, construct_pairs, admiss._scan_row, rational_grid):
        tree = ast.parse(inspect.getsource(fn))
        calls = [n.func.id for n in ast.walk(tree) if isinstance(n, ast.Call) and isinstance(n.func, ast.Name)]
        floats = [n for n in ast.walk(tree) if isinstance(n, ast.Constant) and isinstance(n.value, float)]
        assert "float" not in calls and not floats, fn.__name__


def test_witness_rejects_bad_hypotheses():
    g = GridSpec(2, 16, 2.0)
    with pytest.raises(HypothesisViolated):
        strichartz_witness(2, {"q": 4, "r": 4, "mu": Fraction(1, 2)}, g, 1.0, 2)
    with pytest.raises(HypothesisViolated):
        strichartz_witness(3, {"q": 6, "r": 6, "mu": Fraction(1, 2)}, g, 1.0, 2)


def test_homogeneous_witness_bounded():
    g = GridSpec(2, 32, 4.0)
    rep = strichartz_witness(2, {"q": 6, "r": 6, "mu": Fraction(1, 2), "k_max": 4.0}, g, 1.0, 3, steps=16)
    assert rep.status == "PASS" and rep.constant > 0
