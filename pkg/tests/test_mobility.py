"""Behavior levels, schedules, and contact sampling."""

import numpy as np
import pytest

from dctsim.config import ConfigError, load_sim_config
from dctsim.engine import run_simulation
from dctsim.mobility import (ContactMatrices, interpolate_gammas,
                             is_weekend, sample_negative_binomial,
                             build_schedule, RESIDENTIAL_KINDS, KIND_INDEX)
from tests.conftest import small_config


def test_gamma_two_levels():
    assert interpolate_gammas(0.8, 2).tolist() == [0.0, 1.0]


def test_gamma_halving_four_levels():
    assert interpolate_gammas(0.8, 4).tolist() == [0.0, 0.4, 0.8, 1.0]


def test_gamma_halving_five_levels():
    assert interpolate_gammas(0.8, 5).tolist() == [0.0, 0.2, 0.4, 0.8, 1.0]


def test_gamma_monotone_for_any_anchor():
    for g in (0.05, 0.3, 0.5, 0.77, 0.95):
        for n in range(2, 8):
            v = interpolate_gammas(g, n)
            assert v[0] == 0.0 and v[-1] == 1.0
            assert (np.diff(v) >= 0).all()


def test_gamma_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        interpolate_gammas(0.8, 1)
    with pytest.raises(ConfigError):
        interpolate_gammas(1.0, 4)
    with pytest.raises(ConfigError):
        interpolate_gammas(0.0, 4)


def test_weekend_helper():
    assert not is_weekend(0)   # day 0 is a Monday
    assert not is_weekend(4)
    assert is_weekend(5)
    assert is_weekend(6)
    assert not is_weekend(7)


def test_negative_binomial_moments():
    rng = np.random.default_rng(0)
    mean = np.full(20000, 8.0)
    draws = sample_negative_binomial(rng, mean, dispersion=0.5)
    assert draws.mean() == pytest.approx(8.0, rel=0.05)
    # var = mean + mean^2 / k
    assert draws.var() == pytest.approx(8.0 + 64.0 / 0.5, rel=0.1)
    assert sample_negative_binomial(rng, np.zeros(5), 0.5).sum() == 0


def test_schedule_quarantined_agents_stay_home(pop600):
    pop = pop600
    rng = np.random.default_rng(1)
    absent = np.zeros(pop.n, dtype=bool)
    home_only = np.ones(pop.n, dtype=bool)
    recent = np.zeros(pop.n, dtype=np.int64)
    sched = build_schedule(pop, 2, rng, absent, home_only, recent)
    # all presence edges point at the agent's own household
    assert np.array_equal(sched.locations, pop.household[sched.agents])
    assert not sched.went_out.any()


def test_schedule_school_on_weekdays_only(pop600):
    pop = pop600
    rng = np.random.default_rng(1)
    absent = np.zeros(pop.n, dtype=bool)
    home_only = np.zeros(pop.n, dtype=bool)
    recent = np.zeros(pop.n, dtype=np.int64)
    students = np.flatnonzero(pop.school_location >= 0)

    def at_school(day):
        sched = build_schedule(pop, day, rng, absent, home_only, recent)
        at = set(sched.agents[np.isin(
            sched.locations, pop.school_location[students])])
        return len(at & set(students))

    assert at_school(1) > 0.8 * len(students)   # Tuesday
    assert at_school(6) == 0                    # Sunday


def test_schedule_absent_agents_have_no_presence(pop600):
    pop = pop600
    rng = np.random.default_rng(1)
    absent = np.zeros(pop.n, dtype=bool)
    absent[:50] = True
    home_only = np.zeros(pop.n, dtype=bool)
    recent = np.zeros(pop.n, dtype=np.int64)
    sched = build_schedule(pop, 3, rng, absent, home_only, recent)
    assert not np.isin(sched.agents, np.arange(50)).any()


def test_supervision_rule_children_accompanied(pop600):
    """An under-14 agent away from home has an adult housemate at the
    same location."""
    pop = pop600
    rng = np.random.default_rng(5)
    absent = np.zeros(pop.n, dtype=bool)
    home_only = np.zeros(pop.n, dtype=bool)
    recent = np.zeros(pop.n, dtype=np.int64)
    for day in (0, 5):
        sched = build_schedule(pop, day, rng, absent, home_only, recent)
        kind = pop.loc_kind[sched.locations]
        away = ((pop.ages[sched.agents] < 14)
                & (sched.locations != pop.household[sched.agents])
                & (kind != KIND_INDEX["school"]))
        for k in np.flatnonzero(away):
            kid, loc = sched.agents[k], sched.locations[k]
            there = sched.agents[sched.locations == loc]
            housemates = pop.household_members(pop.household[kid])
            adults = [a for a in there
                      if a in housemates and pop.ages[a] >= 18]
            assert adults, (kid, loc)


def test_contact_matrices_load():
    cfg = load_sim_config()
    m = ContactMatrices.load(
        cfg.region.resolve_file(cfg.region.contact_matrix_file),
        cfg.region.resolve_file("encounter_durations.csv"))
    for kind, mat in m.matrix.items():
        assert mat.shape == (len(m.bins), len(m.bins))
        assert (mat >= 0).all()
    assert "household" in m.matrix
    median, sigma = m.time_per_encounter("household")
    assert median > 0 and sigma > 0


def test_quarantine_level_blocks_non_household_encounters():
    """With full-population quarantine and no dropout, encounters happen
    only at residential locations."""
    cfg = small_config(pop=400, days=6, init_fraction_sick=0.0,
                      **{"behavior.baseline_level": 3,
                         "behavior.dropout": "[0,0,0,0]",
                         "output.record_encounters": "true"})
    res = run_simulation(cfg)
    kinds = [ev["kind"] for ev in res.trace
             if ev.get("event") == "encounter"]
    assert all(k in RESIDENTIAL_KINDS for k in kinds)


def test_mean_contacts_scale_with_beta():
    base = small_config(pop=800, days=8, init_fraction_sick=0.0, seed=3)
    half = small_config(pop=800, days=8, init_fraction_sick=0.0, seed=3,
                        **{"behavior.beta": 0.5})
    c_base = run_simulation(base).daily["encounters"].sum()
    c_half = run_simulation(half).daily["encounters"].sum()
    assert c_half < 0.7 * c_base


def test_severely_sick_go_out_less():
    """Cohort check: severe cases spend fewer person-days out of home
    than asymptomatic ones while infectious."""
    cfg = small_config(pop=1200, days=40, seed=4, init_fraction_sick=0.02)
    res = run_simulation(cfg)
    from dctsim.disease import SEVERE, ASYMPTOMATIC
    severe = res.severity == SEVERE
    asym = res.severity == ASYMPTOMATIC
    if severe.sum() >= 5 and asym.sum() >= 5:
        sick_home_rate_severe = res.sick_home_days[severe].mean()
        sick_home_rate_asym = res.sick_home_days[asym].mean()
        assert sick_home_rate_severe > sick_home_rate_asym
