"""Distance-to-equilibrium curve tests."""

import numpy as np
import pytest
from scipy.linalg import expm

from eastlab.cutoff import cutoff_curve
from eastlab.errors import SizeCapError
from eastlab.lattice import Box
from eastlab.spectral import build_generator


def expm_curve(n, d, q, ts):
    """Independent worst-start curve via scaling-and-squaring."""
    gen = build_generator(Box.cube(d, n).region(), q)
    L = gen.matrix.toarray()
    out = []
    for t in ts:
        P = expm(t * L)
        out.append(max(0.5 * np.abs(row - gen.mu).sum() for row in P))
    return np.array(out)


def test_exact_curve_matches_expm():
    ts = np.linspace(0.0, 60.0, 13)
    c = cutoff_curve(1, 2, 0.3, ts, mode="exact")
    oracle = expm_curve(1, 2, 0.3, ts)
    assert np.max(np.abs(c.values - oracle)) < 1e-7


def test_initial_distance_is_worst_state_mass():
    c = cutoff_curve(1, 2, 0.3, [0.0], mode="exact")
    assert c.values[0] == pytest.approx(1.0 - 0.3**4, abs=1e-10)
    c1 = cutoff_curve(3, 1, 0.2, [0.0], mode="exact")
    assert c1.values[0] == pytest.approx(1.0 - 0.2**4, abs=1e-10)


def test_curve_nonincreasing_and_vanishing():
    ts = np.linspace(0.0, 100.0, 26)
    c = cutoff_curve(1, 2, 0.3, ts, mode="exact")
    assert (np.diff(c.values) <= 1e-10).all()
    assert c.values[-1] < 1e-3


def test_all_ones_mode_lower_bounds_exact():
    ts = np.linspace(0.0, 40.0, 9)
    worst = cutoff_curve(1, 2, 0.3, ts, mode="exact")
    one = cutoff_curve(1, 2, 0.3, ts, mode="all_ones")
    assert (one.values <= worst.values + 1e-9).all()
    assert one.values[0] == pytest.approx(1.0 - (1 - 0.3) ** 4, abs=1e-10)


def test_monte_carlo_mode_tracks_all_ones_start():
    """The sampled mode estimates the all-ones start: exact at t=0 up to
    nothing (every replica still sits at all-ones), and above the true curve
    by at most the plug-in sampling bias later."""
    ts = [0.0, 5.0, 20.0]
    truth = cutoff_curve(1, 2, 0.3, ts, mode="all_ones")
    mc = cutoff_curve(1, 2, 0.3, ts, mode="monte_carlo", replicas=800, seed=3)
    assert mc.values[0] == pytest.approx(1.0 - 0.7**4, abs=1e-12)
    bias = np.sqrt(16.0 / 800.0)
    assert (mc.values <= truth.values + bias + 0.05).all()
    assert (mc.values >= truth.values - 0.05).all()
    assert mc.replicas == 800 and mc.seed == 3


def test_crossing_time_interpolates():
    c = cutoff_curve(1, 2, 0.3, np.linspace(0.0, 60.0, 25), mode="exact")
    tc = c.crossing_time(0.25)
    fine = cutoff_curve(1, 2, 0.3, [tc], mode="exact")
    assert fine.values[0] == pytest.approx(0.25, abs=0.01)
    with pytest.raises(ValueError, match="never falls"):
        cutoff_curve(1, 2, 0.3, [0.0, 1.0], mode="exact").crossing_time(1e-6)


def test_size_cap_and_validation():
    with pytest.raises(SizeCapError):
        cutoff_curve(4, 2, 0.3, [1.0], mode="exact")  # 25 sites
    with pytest.raises(ValueError, match="increasing"):
        cutoff_curve(1, 2, 0.3, [1.0, 1.0], mode="exact")
    with pytest.raises(ValueError, match="mode"):
        cutoff_curve(1, 2, 0.3, [1.0], mode="bogus")
    with pytest.raises(ValueError, match="replica"):
        cutoff_curve(1, 2, 0.3, [1.0], mode="monte_carlo", replicas=0)
