"""Closed-form prediction tests."""

import pytest

from eastlab.theory import (
    in_scaling_window,
    map_fixed_point,
    theory_exponents,
    velocity_map,
)


def test_map_fixes_inverse_dimension():
    for d in (2, 3, 4, 5):
        assert velocity_map(d, 1.0 / d) == pytest.approx(1.0 / d, abs=1e-15)


def test_map_at_one():
    assert velocity_map(2, 1.0) == 2.0 / 3.0
    assert velocity_map(3, 1.0) == 0.5


def test_fixed_point_converges_fast():
    for d in (2, 3, 4, 5):
        res = map_fixed_point(d)
        assert abs(res.value - 1.0 / d) <= 1e-6
        assert res.steps <= 200
        assert res.residual < 1e-12


def test_plain_iteration_is_too_slow():
    """The degenerate fixed point defeats direct iteration; the accelerated
    solver exists because of this, so pin the fact."""
    lam = 1.0
    for _ in range(200):
        lam = velocity_map(2, lam)
    assert abs(lam - 0.5) > 1e-4


def test_exponent_dict_values():
    out = theory_exponents(2, 0.0, 0.25)
    assert out["bulk"] == 0.5
    assert out["near_axis"] == 1.0
    assert out["outstretched_bound"] == 0.5
    assert abs(out["map_fixed_point"] - 0.5) <= 1e-6


def test_outstretched_bound_endpoints_exact():
    assert theory_exponents(2, 0.0, 1.0)["outstretched_bound"] == 0.5
    assert theory_exponents(2, 1.0, 1.0)["outstretched_bound"] == 1.0


def test_near_axis_saturates():
    assert theory_exponents(2, 0.5, 0.25)["near_axis"] == 1.0
    assert theory_exponents(2, 0.5, 5.0)["near_axis"] == 1.0
    assert theory_exponents(2, 0.5, 0.1)["near_axis"] == pytest.approx(0.7)


def test_exponents_reproducible():
    assert theory_exponents(3, 0.4, 0.2) == theory_exponents(3, 0.4, 0.2)


def test_validation():
    with pytest.raises(ValueError, match="dimension"):
        theory_exponents(1, 0.0, 1.0)
    with pytest.raises(ValueError, match="aspect"):
        theory_exponents(2, 1.5, 1.0)
    with pytest.raises(ValueError, match="positive"):
        theory_exponents(2, 0.5, 0.0)
    with pytest.raises(ValueError, match="undefined"):
        velocity_map(2, 0.25)


def test_window_monotone_in_time():
    member = [
        in_scaling_window((30, 30), 0.5, 0.1, t, 0.1)
        for t in (10.0, 100.0, 400.0, 1000.0, 4000.0)
    ]
    for a, b in zip(member, member[1:]):
        assert (not a) or b  # once in, stays in as t grows


def test_window_antitone_in_margin():
    member = [
        in_scaling_window((30, 30), 0.5, eps, 600.0, 0.1)
        for eps in (0.05, 0.2, 0.8, 2.0, 8.0)
    ]
    for a, b in zip(member, member[1:]):
        assert a or (not b)  # once out, stays out as eps grows


def test_window_axis_handling():
    assert in_scaling_window((120, 0), 0.0, 0.1, 1000.0, 0.1)
    assert not in_scaling_window((30, 0), 0.5, 0.1, 1000.0, 0.1)
    assert in_scaling_window((0, 0), 0.5, 0.1, 1.0, 0.1)
    assert not in_scaling_window((-1, 3), 0.0, 0.1, 1000.0, 0.1)
