"""Path-space tests: reachability, barriers, cut sets, escape estimates."""

import itertools
import json
import math

import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from eastlab.config import BoundaryCondition, Configuration, apply_update, constraint
from eastlab.errors import BudgetExceededError, SizeCapError, UnreachableTargetError
from eastlab.lattice import Box, Region
from eastlab.pathspace import (
    BottleneckQuery,
    barrier,
    bottleneck_measure,
    escape_oracle,
    escape_probability,
    is_bottleneck,
    reachable,
    save_witness,
    target_box,
)


def interval(a, b):
    return Region.from_sites([(i,) for i in range(a, b + 1)])


def cap_oracle(region, sigma, target, cap):
    """Can a capped-vacancy walk from all-ones infect the target?

    Depth-first search over Configuration objects calling the one-site
    constraint directly, nothing shared with the heap search under test.
    """
    start = Configuration.all_ones(region)
    seen = {start.bits}
    stack = [start]
    while stack:
        w = stack.pop()
        if w.is_vacant(target):
            return True
        for x in region.sites:
            if not constraint(w, x, sigma):
                continue
            nxt = w.flipped(x)
            if nxt.vacancy_count <= cap and nxt.bits not in seen:
                seen.add(nxt.bits)
                stack.append(nxt)
    return False


def threshold_oracle(region, target, sigma=None):
    for cap in range(1, region.size + 1):
        if cap_oracle(region, sigma, target, cap):
            return cap
    return None


# -- barriers ---------------------------------------------------------------


def test_barrier_frozen_1d_values():
    assert [barrier(interval(0, L), (L,)) for L in (1, 2, 3, 4)] == [2, 2, 3, 3]


def test_barrier_steps_up_after_powers_of_two():
    vals = [barrier(interval(0, L), (L,)) for L in (1, 2, 3, 4)]
    for a, b in zip(vals, vals[1:]):
        assert b - a in (0, 1)
    assert vals[2] - vals[1] == 1  # the one increase in this range, at L = 3
    assert vals[3] == vals[2]


@pytest.mark.parametrize(
    "region,target",
    [
        (interval(0, 3), (3,)),
        (Box((0, 0), (1, 1)).region(), (1, 1)),
        (Box((0, 0), (2, 1)).region(), (2, 1)),
        (Box((0, 0), (2, 2)).region(), (2, 2)),
    ],
)
def test_barrier_matches_threshold_oracle(region, target):
    assert barrier(region, target) == threshold_oracle(region, target)


def test_barrier_monotone_in_boundary_vacancies():
    for L in (2, 3, 4):
        reg = interval(1, L)
        vac = barrier(reg, (L,), sigma=BoundaryCondition.maximal(reg))
        with pytest.raises(UnreachableTargetError):
            barrier(reg, (L,), sigma=BoundaryCondition.all_ones(reg))
        assert vac <= reg.size  # finite once the boundary helps


def test_barrier_monotone_in_boundary_2d():
    """More boundary vacancies never raise the peak-vacancy cost."""
    reg = Region.from_sites([(1, 1), (1, 2)])
    bnd = sorted(reg.oriented_boundary())

    def k(vacant):
        sig = BoundaryCondition.from_map(
            reg, {s: (0 if s in vacant else 1) for s in bnd}
        )
        try:
            return barrier(reg, (1, 2), sigma=sig)
        except UnreachableTargetError:
            return math.inf

    subsets = [
        frozenset(c)
        for r in range(len(bnd) + 1)
        for c in itertools.combinations(bnd, r)
    ]
    for a in subsets:
        for b in subsets:
            if a <= b:
                assert k(b) <= k(a)


def test_barrier_validation():
    with pytest.raises(ValueError, match="not in the region"):
        barrier(interval(0, 2), (5,))
    with pytest.raises(SizeCapError):
        barrier(interval(0, 24), (24,))


def test_barrier_translated_interval_matches_origin_interval():
    """A vacant boundary plays the role of the unconstrained origin."""
    for L in (2, 3, 4):
        shifted = interval(1, L)
        k_shift = barrier(shifted, (L,), sigma=BoundaryCondition.maximal(shifted))
        k_origin = barrier(interval(0, L - 1), (L - 1,))
        assert k_shift == k_origin


# -- reachability -----------------------------------------------------------


def test_maximal_boundary_census():
    for reg in (interval(0, 2), Box((0, 0), (1, 1)).region()):
        res = reachable(
            reg,
            Configuration.all_ones(reg),
            lambda c: False,
            sigma=BoundaryCondition.maximal(reg),
        )
        assert not res.found
        assert res.visited == 1 << reg.size


def test_frozen_region_census_is_one():
    reg = Region.from_sites([(1, 1), (2, 1)])
    res = reachable(
        reg,
        Configuration.all_ones(reg),
        lambda c: c.vacancy_count > 0,
        sigma=BoundaryCondition.all_ones(reg),
    )
    assert not res.found and res.visited == 1


def test_self_target_has_empty_path():
    reg = interval(0, 2)
    w = Configuration.all_ones(reg)
    res = reachable(reg, w, w)
    assert res.found and res.path == []


def test_witness_path_replays():
    """Each witness step must be a legal update landing on the target."""
    reg = Box((0, 0), (1, 1)).region()
    tgt = Configuration.all_ones(reg).flipped((1, 1))
    res = reachable(reg, Configuration.all_ones(reg), tgt)
    assert res.found
    w = Configuration.all_ones(reg)
    for site, bit in res.path:
        w = apply_update(w, site, bit)
    assert w == tgt


def test_flip_edges_are_symmetric():
    """Legality never depends on the flipping site's own bit."""
    reg = Box((0, 0), (2, 1)).region()  # 6 sites, exhaustive
    sig = BoundaryCondition.maximal(reg)
    for bits in range(1 << reg.size):
        w = Configuration(reg, bits)
        for x in reg.sites:
            assert constraint(w, x, sig) == constraint(w.flipped(x), x, sig)


def test_witness_json(tmp_path):
    reg = interval(0, 1)
    res = reachable(
        reg, Configuration.all_ones(reg), Configuration(reg, 0b01)
    )
    out = tmp_path / "path.json"
    save_witness(res.path, out)
    data = json.loads(out.read_text())
    assert data == [[list(site), bit] for site, bit in res.path]
    assert all(isinstance(b, int) for _, b in data)


# -- cut sets ---------------------------------------------------------------


def test_bottleneck_extremes():
    assert is_bottleneck(BottleneckQuery((1, 1), 2, lambda c: True))
    assert not is_bottleneck(BottleneckQuery((1, 1), 2, lambda c: False))


def test_level_set_at_barrier_is_bottleneck():
    reg = target_box((1, 1), 2)
    k = barrier(reg, (1, 1), sigma=BoundaryCondition.maximal(reg))
    level = BottleneckQuery((1, 1), 2, lambda c: c.vacancy_count >= k)
    above = BottleneckQuery((1, 1), 2, lambda c: c.vacancy_count >= k + 1)
    assert is_bottleneck(level)
    assert not is_bottleneck(above)


def test_level_set_1d():
    k = barrier(interval(0, 2), (2,))
    assert k == 2
    assert is_bottleneck(BottleneckQuery((2,), 3, lambda c: c.vacancy_count >= 2))
    assert not is_bottleneck(
        BottleneckQuery((2,), 3, lambda c: c.vacancy_count >= 3)
    )


@settings(max_examples=60, deadline=None)
@given(
    base=st.sets(st.integers(min_value=0, max_value=15)),
    extra=st.sets(st.integers(min_value=0, max_value=15)),
)
@example(base={s for s in range(16) if 4 - bin(s).count("1") >= 2}, extra=set())
def test_bottleneck_monotone_in_the_set(base, extra):
    inside = lambda c: c.bits in base
    wider = lambda c: c.bits in (base | extra)
    if is_bottleneck(BottleneckQuery((1, 1), 2, inside)):
        assert is_bottleneck(BottleneckQuery((1, 1), 2, wider))


def test_target_box_clips_at_axes():
    assert sorted(target_box((2, 1), 2).sites) == [(1, 0), (1, 1), (2, 0), (2, 1)]
    assert sorted(target_box((1, 0), 3).sites) == [(0, 0), (1, 0)]
    assert sorted(target_box((0,), 4).sites) == [(0,)]


# -- measures ---------------------------------------------------------------


def test_measure_any_vacancy():
    reg = interval(0, 3)
    m = bottleneck_measure(lambda c: c.vacancy_count >= 1, reg, 0.2)
    assert m.mu == pytest.approx(1 - 0.8**4, abs=1e-12)
    assert m.reference_exponent is None and m.reference_bound is None


def test_measure_binomial_tail():
    reg = interval(0, 3)
    m = bottleneck_measure(lambda c: c.vacancy_count >= 2, reg, 0.2, d=1, L=4)
    tail = sum(
        math.comb(4, j) * 0.2**j * 0.8 ** (4 - j) for j in range(2, 5)
    )
    assert m.mu == pytest.approx(tail, abs=1e-12)
    assert m.reference_exponent == pytest.approx(2 * math.log2(5) - 1)
    assert m.reference_bound == pytest.approx(2.0 ** -(2 * math.log2(5) - 1))


def test_measure_complement_sums_to_one():
    reg = Box((0, 0), (1, 1)).region()
    pred = lambda c: c.bits % 3 == 0
    a = bottleneck_measure(pred, reg, 0.5).mu
    b = bottleneck_measure(lambda c: not pred(c), reg, 0.5).mu
    assert a + b == pytest.approx(1.0, abs=1e-12)


# -- escape estimates -------------------------------------------------------


def test_escape_zero_horizon():
    est = escape_probability((1,), 1, 0.2, 0.0, replicas=5)
    assert est.probability == 0.0 and est.hits == 0


def test_escape_certain_on_long_horizon():
    est = escape_probability((1,), 1, 0.25, 1e5, replicas=40, seed=2)
    assert est.probability == 1.0


def test_escape_matches_transient_oracle():
    for x, reps, seed in (((1, 1), 1500, 9), ((2, 1), 2000, 12)):
        exact = escape_oracle(x, 2, 0.2, 5.0)
        est = escape_probability(x, 2, 0.2, 5.0, replicas=reps, seed=seed)
        assert est.ci_low <= exact <= est.ci_high
        assert est.reference_exponent == pytest.approx(math.log2(5.0))


def test_escape_budget():
    with pytest.raises(BudgetExceededError) as ei:
        escape_probability((6,), 2, 0.3, 1e9, replicas=3, seed=1,
                           max_events_per_replica=5)
    assert ei.value.completed == 0
