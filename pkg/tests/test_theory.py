import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from atomize.theory import (NoBalancePoint, PairPotentialSpec, balance_bisection, balance_closed_form,
                            balance_numeric, energy_curve, is_strictly_decreasing, monotonicity_scan,
                            potential)


def spec(c1, c2, r):
    return PairPotentialSpec(c1, c2, r)


def test_potential_examples():
    assert potential(spec(1, 1, 0), 3.7) == 0.0
    assert potential(spec(1, 2, 1), 1.0) == 0.0
    s = spec(2, 1, 1)
    assert 0 < potential(s, 1e8) < 1e-7  # approaches 0 from above when c1 > c2
    assert -1e-7 < potential(spec(1, 2, 1), 1e8) < 0
    with pytest.raises(ValueError):
        potential(s, 0.0)


@pytest.mark.parametrize("c1, c2, r, d", [(1, 4, 1, 1.0), (2, 8, 2, 2.0), (1, 9, 1, 0.5)])
def test_closed_form_examples_against_numeric(c1, c2, r, d):
    s = spec(c1, c2, r)
    assert abs(balance_closed_form(s) - d) < 1e-12
    assert abs(balance_numeric(s, d_max=100, tol=1e-8) - d) < 1e-6


def test_no_balance_point():
    with pytest.raises(NoBalancePoint):
        balance_closed_form(spec(2, 1, 1))
    with pytest.raises(NoBalancePoint):
        balance_closed_form(spec(1, 1, 1))
    with pytest.raises(NoBalancePoint):
        balance_closed_form(spec(1, 4, 0))
    with pytest.raises(NoBalancePoint):
        balance_numeric(spec(2, 1, 1))


def test_near_degenerate_k():
    s = spec(1, 1.0001, 1)
    closed = balance_closed_form(s)
    assert closed > 1e4
    assert abs(balance_numeric(s, d_max=100 * closed) - closed) / closed < 1e-4


def test_spec_validation():
    with pytest.raises(ValueError):
        spec(0, 1, 1)
    with pytest.raises(ValueError):
        spec(1, 2, -1)


@given(st.floats(1.01, 100), st.floats(0.1, 10), st.floats(0.01, 100))
def test_closed_form_matches_oracles(k, r, c1):
    s = PairPotentialSpec.from_ratio(k, r, c1)
    closed = balance_closed_form(s)
    d_max = max(1e4 * r, 100 * closed)
    assert abs(closed - balance_numeric(s, d_max=d_max)) / closed < 1e-5
    assert abs(closed - balance_bisection(s, d_max=d_max)) / closed < 1e-9
    assert abs(closed - r * (math.sqrt(k) + 1) / (k - 1)) / closed < 1e-12


@given(st.floats(1.01, 100), st.floats(0.1, 10), st.floats(0.01, 100))
def test_scale_invariance_and_linearity(k, r, alpha):
    base = balance_closed_form(PairPotentialSpec.from_ratio(k, r))
    assert math.isclose(balance_closed_form(PairPotentialSpec.from_ratio(k, r, alpha)), base, rel_tol=1e-12)
    assert math.isclose(balance_closed_form(PairPotentialSpec.from_ratio(k, 2 * r)), 2 * base, rel_tol=1e-12)


@given(st.floats(1.01, 100), st.floats(0.1, 10))
def test_local_minimum_certificate(k, r):
    s = PairPotentialSpec.from_ratio(k, r)
    d = balance_closed_form(s)
    assert potential(s, d) < potential(s, d / 2)
    assert potential(s, d) < potential(s, 2 * d)


def test_monotonicity_scan_grid():
    rows = monotonicity_scan([1.5, 2, 4, 10])
    closed = [r["closed_form"] for r in rows]
    expected = [(math.sqrt(k) + 1) / (k - 1) for k in (1.5, 2, 4, 10)]
    np.testing.assert_allclose(closed, expected, rtol=1e-14)
    np.testing.assert_allclose([r["numeric"] for r in rows], expected, rtol=1e-5)
    assert is_strictly_decreasing(closed)
    assert abs(closed[0] - 4.449) < 1e-3 and abs(closed[1] - 2.414) < 1e-3 and closed[2] == 1.0


def test_k4_vs_k9():
    a, b = (r["closed_form"] for r in monotonicity_scan([4, 9]))
    assert a == 1.0 and abs(b - 0.5) < 1e-15


def test_doubling_r_doubles_scan():
    one = monotonicity_scan([1.5, 2, 4, 10], 1.0)
    two = monotonicity_scan([1.5, 2, 4, 10], 2.0)
    for a, b in zip(one, two):
        assert math.isclose(b["closed_form"], 2 * a["closed_form"], rel_tol=1e-14)


def test_scan_rejects_k_not_above_one():
    with pytest.raises(ValueError):
        monotonicity_scan([0.5, 2])


def test_from_charges():
    s = PairPotentialSpec.from_charges([0.5, -0.5, 1.0], [0.5, 0.5, -1.0], 1.0, 3.0)
    assert (s.c1, s.c2, s.r_tilde) == (0.25, 1.25, 2.0)


def test_energy_curve_marks_balance_points():
    rows = energy_curve([2, 4], n_points=11)
    marked = [r for r in rows if r["is_balance_point"]]
    assert [r["k"] for r in marked] == [2.0, 4.0]
    for m in marked:
        same = [r for r in rows if r["k"] == m["k"]]
        assert m["potential"] == min(r["potential"] for r in same)
