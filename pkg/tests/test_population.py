"""Synthetic population structure: households, work/school, conditions,
apps, and senior residences."""

import numpy as np
import pytest

from dctsim.config import ConfigError, load_sim_config
from dctsim.population import (SUPERVISION_AGE, generate_population,
                               assign_apps, KIND_INDEX)


def region(pop=600):
    return load_sim_config(
        overrides=[f"region.population_size={pop}"]).region


def test_empty_population():
    pop = generate_population(region(0), np.random.default_rng(0))
    assert pop.n == 0
    assert len(pop.ages) == 0


def test_everyone_alone_when_distribution_is_singletons():
    r = region(80)
    r.household_size_distribution = {1: 1.0}
    r.household_composition = {"solo": 1.0}
    r.senior_residence_fraction = 0.0
    pop = generate_population(r, np.random.default_rng(0))
    hh = pop.household
    # every household id appears exactly once
    assert len(np.unique(hh)) == pop.n


def test_degenerate_distribution_rejected():
    r = region(50)
    r.household_size_distribution = {1: 0.0, 2: 0.0}
    with pytest.raises(ConfigError):
        generate_population(r, np.random.default_rng(0))


def test_every_agent_has_a_household(pop600):
    pop = pop600
    assert (pop.household >= 0).all()
    assert (pop.loc_kind[pop.household] == KIND_INDEX["household"]).all() or \
        (pop.loc_kind[pop.household]
         == KIND_INDEX["senior_residence"]).any()
    for i in (0, pop.n // 2, pop.n - 1):
        members = pop.household_members(pop.household[i])
        assert i in members


def test_household_sizes_match_distribution():
    r = region(12000)
    pop = generate_population(r, np.random.default_rng(3))
    hh_kind = pop.loc_kind[pop.household] == KIND_INDEX["household"]
    ordinary = pop.household[hh_kind]
    sizes = np.bincount(np.unique(ordinary, return_inverse=True)[1])
    counts = np.bincount(sizes, minlength=8)
    total = counts.sum()
    dist = r.household_size_distribution
    for size, target in dist.items():
        if int(size) >= len(counts):
            continue
        got = counts[int(size)] / total
        assert got == pytest.approx(target, abs=0.05)


def test_adults_have_workplaces(pop600):
    pop = pop600
    lo, hi = 17, 65
    working_age = (pop.ages >= lo) & (pop.ages <= hi)
    in_residence = pop.loc_kind[pop.household] == \
        KIND_INDEX["senior_residence"]
    student = pop.school_location >= 0
    # full employment for working-age non-students outside residences
    expect = working_age & ~in_residence & ~student
    assert (pop.work_location[expect] >= 0).all()
    assert (pop.work_location[~working_age & ~in_residence] == -1).all()


def test_school_age_assignment(pop600):
    pop = pop600
    school_kids = (pop.ages >= 5) & (pop.ages <= 16)
    assert (pop.school_location[school_kids] >= 0).mean() > 0.9
    adults = pop.ages >= 30
    # teachers are the only adults with a school location
    teach = pop.school_location[adults] >= 0
    assert teach.mean() < 0.2


def test_senior_residences_hold_only_seniors(pop600):
    pop = pop600
    in_res = pop.loc_kind[pop.household] == KIND_INDEX["senior_residence"]
    if in_res.any():
        assert (pop.ages[in_res] >= 65).all()


def _pop_with_conditions(n, seed=0):
    from dctsim.population import load_prevalence
    r = region(n)
    prevalence = load_prevalence(
        r.resolve_file(r.condition_prevalence_file))
    return generate_population(r, np.random.default_rng(seed),
                               prevalence), prevalence


def test_condition_prevalence_tracks_table():
    pop, _ = _pop_with_conditions(3000)
    # diabetes should be essentially absent below 30 and common above 70
    idx = pop.condition_index("diabetes")
    young = pop.ages < 30
    old = pop.ages >= 70
    assert pop.conditions[young, idx].mean() < 0.05
    assert pop.conditions[old, idx].mean() > 0.05


def test_conditions_within_three_points_of_table():
    from dctsim.config import age_to_decade
    pop, prevalence = _pop_with_conditions(3000)
    decades = np.array([age_to_decade(a) for a in pop.ages])
    for cond, table in prevalence.items():
        idx = pop.condition_index(cond)
        for dec in range(table.shape[0]):
            sel = decades == dec
            if sel.sum() < 150:
                continue
            got = pop.conditions[sel, idx].mean()
            # expected pools the sexes by their realized counts
            n_m = (sel & (pop.sex == 0)).sum()
            n_f = (sel & (pop.sex == 1)).sum()
            want = (table[dec, 0] * n_m + table[dec, 1] * n_f) / sel.sum()
            sigma = np.sqrt(max(want * (1 - want), 1e-9) / sel.sum())
            assert abs(got - want) <= max(0.03, 3 * sigma), \
                (cond, dec, want, got)


def test_determinism():
    r = region(400)
    a = generate_population(r, np.random.default_rng(42))
    b = generate_population(r, np.random.default_rng(42))
    assert np.array_equal(a.ages, b.ages)
    assert np.array_equal(a.household, b.household)
    assert np.array_equal(a.conditions, b.conditions)
    assert np.array_equal(a.has_phone, b.has_phone)


def test_assign_apps_bounds(pop600):
    pop = pop600
    rng = np.random.default_rng(0)
    assign_apps(pop, 0.0, rng)
    assert pop.has_app.sum() == 0
    assign_apps(pop, 1.0, rng)
    assert np.array_equal(pop.has_app, pop.has_phone)
    assign_apps(pop, 0.6, rng)
    assert not pop.has_app[~pop.has_phone].any()
    owners = pop.has_phone.sum()
    assert pop.has_app.sum() == pytest.approx(0.6 * owners,
                                              abs=3 * np.sqrt(owners))


def test_bluetooth_noise_uniform(pop600):
    pop = pop600
    assert ((pop.bt_noise >= 0) & (pop.bt_noise <= 1)).all()
    assert 0.3 < pop.bt_noise.mean() < 0.7


def test_supervision_age_constant():
    assert SUPERVISION_AGE == 14


def test_agent_view(pop600):
    a = pop600.agent(0)
    assert a.idx == 0
    assert a.age == pop600.ages[0]
    assert a.household == pop600.household[0]
