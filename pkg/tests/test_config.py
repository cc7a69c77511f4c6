"""Configurations, boundary conditions, the facilitation rule, measures, IO."""

import itertools

import numpy as np
import pytest

from eastlab.config import (
    BoundaryCondition,
    Configuration,
    ProductMeasure,
    apply_update,
    constraint,
    parse_config,
    sample_config,
    serialize_config,
)
from eastlab.errors import IllegalUpdateError, SizeCapError
from eastlab.lattice import Box, Region


def seg(n):
    return Region.from_sites([(i,) for i in range(n)])


def test_configuration_basics():
    r = seg(3)
    w = Configuration.from_values(r, {(0,): 1, (1,): 1, (2,): 0})
    assert w.value_at((2,)) == 0
    assert w.is_vacant((2,)) and not w.is_vacant((0,))
    assert w.particle_count == 2 and w.vacancy_count == 1
    assert w.vacancies() == frozenset({(2,)})
    assert list(w.to_array()) == [1, 1, 0]


def test_with_value_and_flip():
    r = seg(2)
    w = Configuration.all_ones(r)
    assert w.with_value((0,), 1) is not None and w.with_value((0,), 1).bits == w.bits
    v = w.flipped((1,))
    assert v.value_at((1,)) == 0
    assert v.flipped((1,)).bits == w.bits  # involution


def test_constraint_at_origin_is_unconditional():
    r = seg(1)
    for bits in (0, 1):
        assert constraint(Configuration(r, bits), (0,)) == 1


def test_constraint_reads_lower_neighbors_only():
    box = Box((0, 0), (1, 1)).region()
    w = Configuration.from_values(
        box, {(0, 0): 1, (1, 0): 0, (0, 1): 1, (1, 1): 1}
    )
    # (1,1) sees the vacancy at (1,0); its own value is never consulted
    assert constraint(w, (1, 1)) == 1
    assert constraint(w.flipped((1, 1)), (1, 1)) == 1
    # (0,1) sees only the occupied (0,0)
    assert constraint(w, (0, 1)) == 0


def test_constraint_ignores_own_value_everywhere():
    box = Box((0, 0), (1, 1)).region()
    for bits in range(16):
        w = Configuration(box, bits)
        for x in box.sites:
            assert constraint(w, x) == constraint(w.flipped(x), x)


def test_boundary_vacancy_unlocks_site():
    r = Region.from_sites([(1, 1), (1, 2)])
    bd = r.oriented_boundary()
    assert bd == frozenset({(0, 1), (1, 0), (0, 2)})
    sigma0 = BoundaryCondition.maximal(r)
    sigma1 = BoundaryCondition.all_ones(r)
    w = Configuration.all_ones(r)
    assert constraint(w, (1, 1), sigma0) == 1
    assert constraint(w, (1, 1), sigma1) == 0
    # default boundary is all ones
    assert constraint(w, (1, 1)) == 0


def test_sigma_monotone_in_vacancies():
    """More boundary vacancies never revoke a permission."""
    r = Region.from_sites([(0, 1), (1, 1)])
    bd = sorted(r.oriented_boundary())
    assert len(bd) == 2
    for vac_small in range(4):
        for vac_big in range(4):
            if vac_small & vac_big != vac_small:
                continue  # need vacancies(small) subset of vacancies(big)
            s_small = BoundaryCondition.from_map(
                r, {b: 1 - ((vac_small >> i) & 1) for i, b in enumerate(bd)}
            )
            s_big = BoundaryCondition.from_map(
                r, {b: 1 - ((vac_big >> i) & 1) for i, b in enumerate(bd)}
            )
            for bits in range(4):
                w = Configuration(r, bits)
                for x in r.sites:
                    assert constraint(w, x, s_small) <= constraint(
                        w, x, s_big
                    )


def test_boundary_condition_domain_is_exact():
    r = seg(2)
    assert r.oriented_boundary() == frozenset()
    BoundaryCondition.from_map(r, {})
    with pytest.raises(ValueError, match="extraneous"):
        BoundaryCondition.from_map(r, {(5,): 0})
    r2 = Region.from_sites([(1,)])
    with pytest.raises(ValueError, match="missing"):
        BoundaryCondition.from_map(r2, {})


def test_apply_update():
    r = seg(2)
    w = Configuration.all_ones(r)
    v = apply_update(w, (0,), 0)
    assert v.value_at((0,)) == 0
    v2 = apply_update(v, (1,), 0)
    assert v2.vacancy_count == 2
    with pytest.raises(IllegalUpdateError) as ei:
        apply_update(w, (1,), 0)
    assert ei.value.site == (1,)


def test_apply_update_noop_still_needs_legality():
    r = seg(2)
    w = Configuration.all_ones(r)
    with pytest.raises(IllegalUpdateError):
        apply_update(w, (1,), 1)
    assert apply_update(w, (0,), 1).bits == w.bits


# -- product measure --------------------------------------------------------


def test_measure_single_config():
    r = seg(3)
    m = ProductMeasure(0.25)
    w = Configuration.from_values(r, {(0,): 1, (1,): 0, (2,): 1})
    assert m.prob(w) == pytest.approx(0.75 * 0.25 * 0.75, abs=1e-15)
    assert m.log2_prob(w) == pytest.approx(np.log2(m.prob(w)), abs=1e-12)


@pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
def test_measure_normalizes(q):
    r = Box((0, 0), (2, 2)).region()
    m = ProductMeasure(q)
    total = sum(m.prob(Configuration(r, b)) for b in range(2**r.size))
    assert abs(total - 1.0) < 1e-12


def test_event_probability():
    r = seg(4)
    m = ProductMeasure(0.3)
    assert m.event_probability(r, lambda w: w.is_vacant((2,))) == pytest.approx(
        0.3, abs=1e-12
    )
    big = Box((0,), (24,)).region()
    with pytest.raises(SizeCapError):
        m.event_probability(big, lambda w: True)


def test_sampling_statistics():
    rng = np.random.default_rng(11)
    r = Box((0, 0), (3, 1)).region()
    m = ProductMeasure(0.3)
    frac = np.mean(
        [sample_config(r, m, rng).vacancy_count / r.size for _ in range(2000)]
    )
    sd = np.sqrt(0.3 * 0.7 / (r.size * 2000))
    assert abs(frac - 0.3) < 5 * sd


# -- serialization ----------------------------------------------------------


def test_config_round_trip():
    for box in (Box((0,), (6,)), Box((1, 2), (2, 1)), Box((0, 0, 0), (1, 1, 1))):
        rng = np.random.default_rng(3)
        w = sample_config(box.region(), ProductMeasure(0.4), rng)
        blob = serialize_config(w)
        back = parse_config(blob)
        assert back.region.sites == w.region.sites
        assert back.bits == w.bits


def test_serialize_needs_box_region():
    r = Region.from_sites([(0,), (2,)])
    with pytest.raises(ValueError):
        serialize_config(Configuration.all_ones(r))


def test_parse_rejects_corrupt_payload():
    w = Configuration.all_ones(Box((0,), (3,)).region())
    head, bits, _ = serialize_config(w).decode().split("\n")
    with pytest.raises(ValueError):
        parse_config((head + "\n" + bits[:-1] + "\n").encode())
    with pytest.raises(ValueError):
        parse_config((head + "\n" + bits.replace("1", "2", 1) + "\n").encode())
    with pytest.raises(ValueError):
        parse_config(b"not json\n1111\n")
