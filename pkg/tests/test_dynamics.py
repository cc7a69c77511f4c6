"""Simulator tests: laws, couplings, replay legality, compiled-path parity."""

import numpy as np
import pytest
from scipy.stats import kstest

from eastlab.config import Configuration, constraint
from eastlab.dynamics import (
    IndexedSet,
    LazyQuadrant,
    infected_set,
    infections_to_csv,
    load_trajectory,
    mean_hitting,
    rng_for,
    run_trajectory,
    save_trajectory,
    time_average_occupation,
    velocity_fit,
)
from eastlab.errors import BudgetExceededError
from eastlab.lattice import Box, Region
from eastlab.spectral import build_generator


def seg(n):
    return Region.from_sites([(i,) for i in range(n)])


# -- plumbing ---------------------------------------------------------------


def test_indexed_set_swap_pop_order():
    s = IndexedSet()
    for x in (3, 1, 4, 1, 5):
        s.add(x)
    assert len(s) == 4
    s.discard(3)  # 5 moves into slot 0
    assert s._items == [5, 1, 4]
    s.discard(9)  # absent: no-op
    assert s.pick(0.0) == 5
    assert s.pick(0.999) == 4


def test_rng_streams_are_reproducible_and_distinct():
    a = rng_for(123, 0).random(4)
    b = rng_for(123, 0).random(4)
    c = rng_for(123, 1).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# -- exact laws -------------------------------------------------------------


def test_origin_infection_is_exponential():
    taus = [
        run_trajectory(
            seg(1), 0.2, seed=42, replica=r, stop_when_vacant=(0,)
        ).t_end
        for r in range(20000)
    ]
    res = kstest(taus, "expon", args=(0, 1 / 0.2))
    assert res.pvalue > 1e-3


def test_holding_times_per_state():
    """Sojourn in each state is exponential with the generator's exit rate."""
    r2 = seg(2)
    run = run_trajectory(
        r2, 0.3, seed=9, max_events=100_000, record_events=True,
        _force_pure=True,
    )
    exit_rate = -build_generator(r2, 0.3).matrix.diagonal()
    sojourns = {s: [] for s in range(4)}
    state = 0b11
    prev_t = 0.0
    for t, site, v in run.events:
        sojourns[state].append(t - prev_t)
        prev_t = t
        bit = 1 << (0 if site == (0,) else 1)
        state = (state & ~bit) | (v << (0 if site == (0,) else 1))
    for s in range(4):
        if len(sojourns[s]) < 500:
            continue
        res = kstest(sojourns[s], "expon", args=(0, 1 / exit_rate[s]))
        assert res.pvalue > 1e-4, (s, res)


def test_event_times_strictly_increase():
    run = run_trajectory(
        Box((0, 0), (2, 2)), 0.4, seed=17, max_events=5000, record_events=True
    )
    ts = np.array([t for t, _, _ in run.events])
    assert np.all(np.diff(ts) > 0)


def test_every_event_is_legal_on_replay():
    """Replay the event list through the one-step update oracle."""
    box = Box((0, 0), (2, 2))
    run = run_trajectory(
        box, 0.35, seed=23, max_events=3000, record_events=True
    )
    w = Configuration.all_ones(box.region())
    for _, site, v in run.events:
        assert constraint(w, site) == 1, site
        assert w.value_at(site) == 1 - v  # genuine flip every event
        w = w.flipped(site)
    # every vacancy at the end must have an infection time on record
    for s in box.region().sites:
        if w.is_vacant(s):
            assert s in run.infections


def test_lazy_replay_legality():
    run = run_trajectory(
        LazyQuadrant(2), 0.3, seed=31, max_events=2000, record_events=True
    )
    vac = {(0, 0)}
    for _, site, v in run.events:
        ok = site == (0, 0) or any(
            site[:k] + (site[k] - 1,) + site[k + 1 :] in vac
            for k in range(2)
            if site[k] > 0
        )
        assert ok, site
        if v == 0:
            vac.add(site)
        else:
            assert site in vac
            vac.discard(site)


# -- coupled runs and compiled parity ---------------------------------------


def test_lazy_box_coupling():
    """Same seed, box covering the tracked extent: identical event lists."""
    lz = run_trajectory(
        LazyQuadrant(2), 0.3, seed=7, t_max=60.0, record_events=True
    )
    box = Box((0, 0), lz.tracked_extent)
    init = Configuration.all_ones(box.region()).flipped((0, 0))
    fin = run_trajectory(
        box, 0.3, seed=7, t_max=60.0, record_events=True, initial=init
    )
    assert lz.events == fin.events
    assert lz.n_events == fin.n_events


def test_lazy_box_coupling_1d():
    lz = run_trajectory(
        LazyQuadrant(1), 0.25, seed=13, t_max=200.0, record_events=True
    )
    box = Box((0,), lz.tracked_extent)
    init = Configuration.all_ones(box.region()).flipped((0,))
    fin = run_trajectory(
        box, 0.25, seed=13, t_max=200.0, record_events=True, initial=init
    )
    assert lz.events == fin.events


@pytest.mark.parametrize(
    "kwargs",
    [
        {"t_max": 50.0},
        {"stop_when_vacant": (4, 2)},
        {"max_events": 4000},
    ],
)
def test_kernel_matches_pure_loop(kwargs):
    a = run_trajectory(Box((0, 0), (4, 2)), 0.3, seed=21, **kwargs)
    b = run_trajectory(
        Box((0, 0), (4, 2)), 0.3, seed=21, _force_pure=True, **kwargs
    )
    assert a.t_end == b.t_end
    assert a.n_events == b.n_events
    assert a.stopped == b.stopped
    assert a.infections == b.infections


def test_kernel_respects_boundary_conditions():
    from eastlab.config import BoundaryCondition

    r = Region.from_sites([(1, 1), (1, 2)])
    sigma = BoundaryCondition.maximal(r)
    a = run_trajectory(r, 0.3, seed=3, sigma=sigma, t_max=40.0)
    b = run_trajectory(
        r, 0.3, seed=3, sigma=sigma, t_max=40.0, _force_pure=True
    )
    assert a.t_end == b.t_end and a.infections == b.infections
    assert a.n_events > 0


# -- autonomy of lower coordinates ------------------------------------------


def test_axis_hitting_equals_1d_bitwise():
    """The axis target's lower box is a line, so d = 2 reduces to d = 1."""
    e1 = mean_hitting((8,), 0.3, replicas=50, seed=77)
    e2 = mean_hitting((8, 0), 0.3, replicas=50, seed=77)
    assert np.array_equal(e1.times, e2.times)
    assert e1.mean == e2.mean


def test_axis_marginal_matches_1d_law():
    """Strip with an extra row: axis infection times keep the 1-d law."""
    n, reps, q = 6, 2000, 0.3
    strip = Box((0, 0), (n, 1))
    t2 = np.empty(reps)
    t1 = np.empty(reps)
    for r in range(reps):
        t2[r] = run_trajectory(
            strip, q, seed=101, replica=r, stop_when_vacant=(n, 0)
        ).t_end
        t1[r] = run_trajectory(
            Box((0,), (n,)), q, seed=202, replica=r, stop_when_vacant=(n,)
        ).t_end
    from scipy.stats import ks_2samp

    assert ks_2samp(t2, t1).pvalue > 1e-3


# -- infection records ------------------------------------------------------


def test_infection_records_and_window():
    run = run_trajectory(
        Box((0, 0), (3, 3)), 0.3, seed=5, t_max=80.0,
        record_window=Box((0, 0), (1, 1)),
    )
    assert all(s in Box((0, 0), (1, 1)) for s in run.infections)
    full = run_trajectory(Box((0, 0), (3, 3)), 0.3, seed=5, t_max=80.0)
    sub = {s: r for s, r in full.infections.items() if s in Box((0, 0), (1, 1))}
    assert run.infections == sub


def test_infected_set_grows():
    run = run_trajectory(Box((0, 0), (3, 3)), 0.3, seed=5, t_max=80.0)
    s1 = infected_set(run, 5.0)
    s2 = infected_set(run, 50.0)
    assert s1 <= s2


def test_initially_vacant_target_is_instant():
    box = Box((0,), (2,))
    init = Configuration.all_ones(box.region()).flipped((1,))
    for pure in (False, True):
        run = run_trajectory(
            box, 0.3, seed=1, stop_when_vacant=(1,), initial=init,
            _force_pure=pure,
        )
        assert run.t_end == 0.0 and run.stopped == "target"
        assert run.infections[(1,)].tau == 0.0


def test_frozen_region_behavior():
    r = Region.from_sites([(1, 1)])  # no origin, no boundary vacancy
    run = run_trajectory(r, 0.3, seed=1, t_max=10.0, _force_pure=True)
    assert run.t_end == 10.0 and run.n_events == 0
    with pytest.raises(RuntimeError, match="frozen"):
        run_trajectory(r, 0.3, seed=1, stop_when_vacant=(1, 1), _force_pure=True)
    with pytest.raises(RuntimeError, match="frozen"):
        run_trajectory(r, 0.3, seed=1, stop_when_vacant=(1, 1))


def test_budget_error_carries_partial():
    with pytest.raises(BudgetExceededError) as ei:
        run_trajectory(
            Box((0, 0), (2, 2)), 0.3, seed=2, t_max=1e9, max_events=100
        )
    partial = ei.value.partial
    assert partial.n_events == 100 and partial.stopped == "events"


def test_max_events_alone_is_a_goal():
    run = run_trajectory(Box((0, 0), (2, 2)), 0.3, seed=2, max_events=100)
    assert run.n_events == 100 and run.stopped == "events"


# -- estimates --------------------------------------------------------------


def test_mean_hitting_estimate_shape():
    est = mean_hitting((3,), 0.3, replicas=40, seed=11)
    assert est.times.shape == (40,)
    assert est.mean == pytest.approx(float(est.times.mean()))
    assert est.stderr > 0


def test_mean_hitting_budget():
    with pytest.raises(BudgetExceededError) as ei:
        mean_hitting((30,), 0.05, replicas=5, seed=1, max_events_per_replica=50)
    assert ei.value.completed == 0


def test_velocity_fit_recovers_line():
    pts = [(n, 3.0 + n / 2.0) for n in (5, 10, 15, 20)]
    fit = velocity_fit(pts, 0.25)
    assert fit.velocity == pytest.approx(2.0, abs=1e-9)
    assert fit.intercept == pytest.approx(3.0, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.theta == 2.0
    assert fit.normalized_exponent == pytest.approx(-2 * np.log2(2.0) / 4.0)


def test_velocity_fit_validation():
    with pytest.raises(ValueError, match="three"):
        velocity_fit([(1, 1.0), (2, 2.0)], 0.3)
    with pytest.raises(ValueError, match="increasing"):
        velocity_fit([(1, 1.0), (1, 2.0), (3, 3.0)], 0.3)
    with pytest.raises(ValueError, match="slope"):
        velocity_fit([(1, 5.0), (2, 3.0), (3, 1.0)], 0.3)


def test_velocity_fit_weights_pull_toward_precise_points():
    # three exact points on tau = n and one far-off point whose huge
    # stderr should make it nearly irrelevant to the weighted slope
    rows = [(1, 1.0, 0.01), (2, 2.0, 0.01), (3, 3.0, 0.01), (4, 40.0, 1e4)]
    weighted = velocity_fit(rows, 0.3)
    plain = velocity_fit([r[:2] for r in rows], 0.3)
    assert weighted.velocity == pytest.approx(1.0, rel=1e-3)
    assert abs(plain.velocity - 1.0) > 0.5
    # a single missing stderr switches the whole fit to uniform weights
    mixed = velocity_fit(
        [(1, 1.0, 0.01), (2, 2.0, 0.01), (3, 3.0), (4, 40.0, 1e4)], 0.3
    )
    assert mixed.velocity == pytest.approx(plain.velocity, rel=1e-12)


def test_occupation_fraction_near_equilibrium():
    run = run_trajectory(
        seg(1), 0.3, seed=8, max_events=60_000, record_events=True
    )
    occ = time_average_occupation(run, (0,), t_burn=run.t_end * 0.1)
    assert abs(occ - 0.7) < 0.02


def test_occupation_requires_events():
    run = run_trajectory(seg(1), 0.3, seed=8, max_events=100)
    with pytest.raises(ValueError, match="record_events"):
        time_average_occupation(run, (0,))


# -- persistence ------------------------------------------------------------


def test_trajectory_round_trip(tmp_path):
    run = run_trajectory(
        Box((0, 0), (2, 1)), 0.3, seed=4, max_events=500, record_events=True
    )
    path = tmp_path / "traj.bin"
    save_trajectory(run, path)
    head, arr = load_trajectory(path)
    assert head["n_events"] == 500 and head["q"] == 0.3
    assert head["mode"] == "finite"
    assert len(arr) == 500
    t0, s0, v0 = run.events[0]
    assert arr["t"][0] == t0
    assert tuple(arr["site"][0]) == s0
    assert arr["value"][0] == v0
    assert arr["t"][-1] == run.events[-1][0]


def test_infection_csv(tmp_path):
    run = run_trajectory(Box((0,), (2,)), 0.3, seed=4, t_max=30.0)
    path = tmp_path / "inf.csv"
    infections_to_csv(run, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,tau,first_update"
    assert len(lines) == 1 + len(run.infections)
    first = lines[1].split(",")
    site = (int(first[0]),)
    assert float(first[1]) == run.infections[site].tau
