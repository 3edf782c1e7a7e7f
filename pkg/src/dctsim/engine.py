"""Daily-loop simulator.

Each simulated day runs six phases in a fixed order:

1. disease progression (recoveries, symptom-phase transitions, onset
   behavior draws) and window shifts for the tracing state;
2. behavior: app recommendations, household follow-through, adherence
   dropout, sick/quarantine stay-home, then the day's presence schedule;
3. encounter sampling and one batched transmission sweep against the set
   of agents infectious at the start of the day (no within-day chains);
4. Bluetooth capture of eligible encounters into the message queue;
5. testing (seek/sample/resolve), hospital admissions and discharges,
   deaths;
6. message delivery in batches_per_day rounds interleaved with policy
   recomputation, then day-level aggregation.

RNG use is split across named independent streams spawned from the run
seed, so adding draws to one consumer never perturbs another and runs are
reproducible byte-for-byte.
"""

from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .disease import (DEAD, INFECTED, MILD, MODERATE, RECOVERED, SEVERE,
                      SUSCEPTIBLE, SYMPTOM_INDEX, SYMPTOMS, COVID_PHASES,
                      MINOR_PHASES, ConditionRiskRatios, FalseNegativeCurve,
                      HospitalizationTable, SymptomTables,
                      TransmissionConstants, evl_integral, sample_course,
                      transmission_probability, truncated_normal)
from .dct.messages import MessageState, capture_encounters
from .dct.policies import make_policy
from .health_system import (NO_DAY, PRIORITY_APP, PRIORITY_MILD,
                            PRIORITY_MODERATE, PRIORITY_SEVERE, HealthSystem)
from .mobility import (ContactMatrices, build_schedule, interpolate_gammas,
                       is_weekend, sample_contacts, tally_contacts)
from .population import (SUPERVISION_AGE, assign_apps, generate_population,
                         load_prevalence)
from .trace import TraceWriter

DURATIONS_FILE = "encounter_durations.csv"

SEVERITY_NAMES = {MILD: "mild", MODERATE: "moderate", SEVERE: "severe"}
SEVERITY_PRIORITY = {MILD: PRIORITY_MILD, MODERATE: PRIORITY_MODERATE,
                     SEVERE: PRIORITY_SEVERE}

# Admission lag after symptom onset for severe courses (days).
ADMIT_LAG_MEAN, ADMIT_LAG_SD, ADMIT_LAG_LO, ADMIT_LAG_HI = 4.0, 1.5, 1.0, 8.0

ADULT_AGE = 18

MINOR_NAMES = ["cold", "flu"]
# Cumulative phase end days for (first, main, last).
MINOR_PHASE_ENDS = np.array([[1, 3, 4], [1, 4, 6]], dtype=np.int64)

STREAM_NAMES = ("population", "apps", "seeding", "behavior", "schedule",
                "contacts", "disease", "testing", "dct", "minor")

NEVER_INFECTED = -2
SEED_SOURCE = -1


def spawn_streams(seed):
    """Named independent generators derived from one seed."""
    ss = np.random.SeedSequence(int(seed))
    children = ss.spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(child)
            for name, child in zip(STREAM_NAMES, children)}


def seed_count(fraction, n):
    """Initial exposures: round(fraction * n), at least 1 when positive."""
    if fraction <= 0:
        return 0
    return max(1, int(round(fraction * n)))


@dataclass
class RunResult:
    """Per-agent outcomes, the transmission record, and daily aggregates."""

    config: dict
    n_days: int
    n: int
    ages: np.ndarray
    sex: np.ndarray
    has_app: np.ndarray
    status: np.ndarray          # final compartment per agent
    exposure_time: np.ndarray   # day + hour/24 of infection (NaN if never)
    exposure_day: np.ndarray    # int day of infection (NO_DAY if never)
    infector: np.ndarray        # source agent, -1 seeded, -2 never infected
    severity: np.ndarray        # course category (-1 if never infected)
    asymptomatic: np.ndarray
    incubation: np.ndarray      # days from exposure to onset (NaN if never)
    t_inf_start: np.ndarray     # days from exposure to infectiousness
    onset_time: np.ndarray      # absolute onset (NaN if asymptomatic/never)
    recovery_day: np.ndarray
    death_day: np.ndarray
    transmissions: dict         # arrays: time, source, target, kind
    daily: dict                 # column name -> array over days
    contact_tally: dict         # kind -> encounter counts by age-bin pair
    quarantine_days: np.ndarray
    sick_home_days: np.ndarray
    supervision_days: np.ndarray
    hospital_days: np.ndarray
    icu_days: np.ndarray
    tests_sampled: int
    tests_positive: int
    trace: list

    @property
    def ever_infected(self):
        return self.exposure_day != NO_DAY

    @property
    def attack_rate(self):
        return float(self.ever_infected.mean()) if self.n else 0.0


class Simulation:
    """One configured run; construct, then call run() once."""

    def __init__(self, config):
        config.validate()
        self.cfg = config
        self.rngs = spawn_streams(config.seed)
        region = config.region

        prevalence = load_prevalence(
            region.resolve_file(region.condition_prevalence_file))
        self.pop = generate_population(region, self.rngs["population"],
                                       prevalence)
        assign_apps(self.pop, config.dct.app_uptake, self.rngs["apps"])
        n = self.n = self.pop.n

        self.matrices = ContactMatrices.load(
            region.resolve_file(region.contact_matrix_file),
            region.resolve_file(DURATIONS_FILE))
        self.constants = TransmissionConstants(
            region.resolve_file(config.transmission.constants_file))
        self.normalizer = (self.constants.normalizer
                           * config.transmission.infectiousness_normalizer)
        self.symtab = SymptomTables(
            region.resolve_file(config.disease.symptom_table_file))
        self.hosp = HospitalizationTable(
            region.resolve_file(config.disease.hospitalization_file))
        risk_ratios = ConditionRiskRatios(
            region.resolve_file(config.disease.condition_risk_file))
        fn_curve = FalseNegativeCurve(
            region.resolve_file(config.testing.false_negative_file))
        self.health = HealthSystem(self.pop, config.testing,
                                   config.quarantine, self.hosp, risk_ratios,
                                   fn_curve, self.rngs["testing"])
        self.msgs = MessageState(n, window=config.dct.tracing_days,
                                 levels=config.dct.risk_levels)
        self.policy = make_policy(config.tracing_method, self.pop, config.dct,
                                  self.health, self.msgs, self.rngs["dct"])
        self.gammas = interpolate_gammas(config.behavior.post_lockdown_gamma,
                                         config.behavior.n_levels)
        sick = config.disease.stay_home_when_sick
        self.p_stay_sick = np.array([0.0, sick.get("mild", 0.0),
                                     sick.get("moderate", 0.0),
                                     sick.get("severe", 0.0)])

        # agent state -------------------------------------------------------
        self.status = np.zeros(n, dtype=np.int8)
        self.exposure_time = np.full(n, np.nan)
        self.exposure_day = np.full(n, NO_DAY, dtype=np.int64)
        self.infector = np.full(n, NEVER_INFECTED, dtype=np.int64)
        self.severity = np.full(n, -1, dtype=np.int8)
        self.asymptomatic = np.zeros(n, dtype=bool)
        self.incubation = np.full(n, np.nan)
        self.t_inf_start = np.full(n, np.nan)
        self.t_peak = np.full(n, np.nan)
        self.t_plateau_end = np.full(n, np.nan)
        self.t_decay_end = np.full(n, np.nan)
        self.t_recovery = np.full(n, np.nan)
        self.peak_height = np.full(n, np.nan)
        self.inoculum = np.full(n, np.nan)
        self.admit_time = np.full(n, np.nan)   # absolute, severe only
        self.admit_done = np.zeros(n, dtype=bool)
        self.covid_phase = np.full(n, -1, dtype=np.int8)
        self.recovery_day = np.full(n, NO_DAY, dtype=np.int64)
        self.death_day = np.full(n, NO_DAY, dtype=np.int64)

        self.sym_covid = np.zeros((n, len(SYMPTOMS)), dtype=bool)
        self.sym_minor = np.zeros((n, len(SYMPTOMS)), dtype=bool)
        self.minor_kind = np.full(n, -1, dtype=np.int8)
        self.minor_start = np.full(n, NO_DAY, dtype=np.int64)
        self.minor_phase = np.full(n, -1, dtype=np.int8)
        self.minor_inoculum = np.zeros(n)

        self._out_hist = [np.zeros(n, dtype=bool), np.zeros(n, dtype=bool)]

        # outcome tallies ----------------------------------------------------
        self.quarantine_days = np.zeros(n, dtype=np.int64)
        self.sick_home_days = np.zeros(n, dtype=np.int64)
        self.supervision_days = np.zeros(n, dtype=np.int64)
        self.hospital_days = np.zeros(n, dtype=np.int64)
        self.icu_days = np.zeros(n, dtype=np.int64)
        self.contact_tally = {}
        self.daily_rows = []
        self._trans = {"time": [], "source": [], "target": [], "kind": []}
        self._msgs_sent_prev = 0

    # --- infection bookkeeping ---------------------------------------------

    def _infect(self, agent, time, source, day, tr):
        agent = int(agent)
        course = sample_course(int(self.pop.ages[agent]), self.rngs["disease"],
                               self.cfg.disease,
                               self.hosp.p_severe(int(self.pop.ages[agent])))
        self.status[agent] = INFECTED
        self.exposure_time[agent] = time
        self.exposure_day[agent] = day
        self.infector[agent] = source
        self.severity[agent] = course.severity
        self.asymptomatic[agent] = course.is_asymptomatic
        self.incubation[agent] = course.incubation
        self.t_inf_start[agent] = course.t_inf_start
        self.t_peak[agent] = course.t_peak
        self.t_plateau_end[agent] = course.t_plateau_end
        self.t_decay_end[agent] = course.t_decay_end
        self.t_recovery[agent] = course.t_recovery
        self.peak_height[agent] = course.peak_height
        self.inoculum[agent] = course.inoculum
        if course.severity == SEVERE:
            lag = truncated_normal(self.rngs["disease"], ADMIT_LAG_MEAN,
                                   ADMIT_LAG_SD, ADMIT_LAG_LO, ADMIT_LAG_HI)
            self.admit_time[agent] = time + course.incubation + lag
        tr.event("infection", day, agent=agent, source=int(source),
                 time=round(float(time), 4), severity=int(course.severity),
                 asymptomatic=bool(course.is_asymptomatic))

    def _seed_infections(self, tr):
        k = seed_count(self.cfg.init_fraction_sick, self.n)
        if k == 0:
            return
        susceptible = np.flatnonzero(self.status == SUSCEPTIBLE)
        if k > len(susceptible):
            raise ConfigError(
                f"cannot seed {k} infections into {len(susceptible)} "
                f"susceptible agents")
        chosen = np.sort(self.rngs["seeding"].choice(susceptible, size=k,
                                                     replace=False))
        for agent in chosen:
            self._infect(agent, 0.0, SEED_SOURCE, 0, tr)

    # --- phase 1: disease progression ---------------------------------------

    def _progress_disease(self, day, tr):
        infected = np.flatnonzero(self.status == INFECTED)
        if len(infected) == 0:
            return
        h = self.health
        t = day - self.exposure_time[infected]

        # natural recovery; severe cases resolve through the hospital path
        # (admission pending or discharge), deaths through death_day
        can_recover = ((t >= self.t_recovery[infected])
                       & ~h.in_hospital[infected]
                       & (h.death_day[infected] == NO_DAY)
                       & ((self.severity[infected] != SEVERE)
                          | self.admit_done[infected]))
        for agent in infected[can_recover]:
            self._recover(agent, day, tr)

        active = infected[~can_recover]
        symptomatic = active[~self.asymptomatic[active]]
        if len(symptomatic) == 0:
            return
        t_s = day - self.exposure_time[symptomatic]
        inc = self.incubation[symptomatic]
        rec = self.t_recovery[symptomatic]
        b1 = inc
        b2 = np.minimum(inc + 2.0, rec)
        b3 = np.minimum(inc + 5.0, rec)
        b4 = np.minimum((b3 + rec) / 2.0, rec)
        phase = ((t_s >= b1).astype(np.int8) + (t_s >= b2) + (t_s >= b3)
                 + (t_s >= b4) - 1).astype(np.int8)
        phase = np.minimum(phase, len(COVID_PHASES) - 1)
        changed = phase != self.covid_phase[symptomatic]
        for agent, new_phase in zip(symptomatic[changed], phase[changed]):
            self._covid_phase_change(int(agent), int(new_phase), day, tr)

    def _covid_phase_change(self, agent, new_phase, day, tr):
        old = int(self.covid_phase[agent])
        present = set(SYMPTOMS[k]
                      for k in np.flatnonzero(self.sym_covid[agent]))
        for ph in range(old + 1, new_phase + 1):
            if ph > 0:
                present = self.symtab.persistent("covid", COVID_PHASES[ph - 1],
                                                 present)
            present = self.symtab.sample(
                "covid", COVID_PHASES[ph], self.rngs["disease"],
                inoculum=float(self.inoculum[agent]),
                age=int(self.pop.ages[agent]),
                carefulness=float(self.pop.carefulness[agent]),
                extremely_sick=self.severity[agent] == SEVERE,
                prior=present)
        self.sym_covid[agent] = False
        for name in present:
            self.sym_covid[agent, SYMPTOM_INDEX[name]] = True
        if old < 0:
            self._onset_actions(agent, day, tr)
        self.covid_phase[agent] = new_phase

    def _onset_actions(self, agent, day, tr):
        """One-time behavior draws when an agent first turns symptomatic."""
        name = SEVERITY_NAMES[int(self.severity[agent])]
        tr.event("onset", day, agent=agent, severity=name)
        rng = self.rngs["behavior"]
        if rng.random() < self.cfg.testing.seek_probability.get(name, 0.0):
            self.health.request_test(agent,
                                     SEVERITY_PRIORITY[self.severity[agent]])
        qcfg = self.cfg.quarantine
        if (qcfg.on_self_report and rng.random()
                < qcfg.self_report_probability.get(name, 0.0)):
            self.health.apply_quarantine(agent, day, qcfg.self_report_days,
                                         household=qcfg.on_household_member)
            tr.event("self_report", day, agent=agent)

    def _recover(self, agent, day, tr):
        agent = int(agent)
        self.status[agent] = RECOVERED
        self.recovery_day[agent] = day
        self.sym_covid[agent] = False
        self.covid_phase[agent] = -1
        tr.event("recovery", day, agent=agent)

    def _progress_minor(self, day):
        """Background cold/flu courses: start, advance phases, clear."""
        rng = self.rngs["minor"]
        cfg = self.cfg.disease
        # fixed-size draw keeps this stream aligned regardless of state
        u = rng.random(self.n)
        can_start = ((self.minor_kind < 0) & (self.status != DEAD)
                     & ~self.health.in_hospital)
        start_cold = can_start & (u < cfg.cold_daily_hazard)
        start_flu = (can_start & ~start_cold
                     & (u < cfg.cold_daily_hazard + cfg.flu_daily_hazard))
        for kind, mask in ((0, start_cold), (1, start_flu)):
            idx = np.flatnonzero(mask)
            if len(idx):
                self.minor_kind[idx] = kind
                self.minor_start[idx] = day
                self.minor_phase[idx] = -1
                self.minor_inoculum[idx] = rng.random(len(idx))

        active = np.flatnonzero(self.minor_kind >= 0)
        if len(active) == 0:
            return
        elapsed = day - self.minor_start[active]
        ends = MINOR_PHASE_ENDS[self.minor_kind[active]]
        over = elapsed >= ends[:, -1]
        done = active[over]
        if len(done):
            self.minor_kind[done] = -1
            self.minor_phase[done] = -1
            self.minor_start[done] = NO_DAY
            self.sym_minor[done] = False
        active = active[~over]
        if len(active) == 0:
            return
        elapsed = elapsed[~over]
        ends = ends[~over]
        phase = (elapsed[:, None] >= ends[:, :-1]).sum(axis=1).astype(np.int8)
        changed = phase != self.minor_phase[active]
        for agent, new_phase in zip(active[changed], phase[changed]):
            self._minor_phase_change(int(agent), int(new_phase), day)

    def _minor_phase_change(self, agent, new_phase, day):
        disease = MINOR_NAMES[int(self.minor_kind[agent])]
        old = int(self.minor_phase[agent])
        present = set(SYMPTOMS[k]
                      for k in np.flatnonzero(self.sym_minor[agent]))
        for ph in range(old + 1, new_phase + 1):
            if ph > 0:
                present = self.symtab.persistent(disease,
                                                 MINOR_PHASES[ph - 1], present)
            present = self.symtab.sample(
                disease, MINOR_PHASES[ph], self.rngs["minor"],
                inoculum=float(self.minor_inoculum[agent]),
                age=int(self.pop.ages[agent]),
                carefulness=float(self.pop.carefulness[agent]),
                prior=present)
        self.sym_minor[agent] = False
        for name in present:
            self.sym_minor[agent, SYMPTOM_INDEX[name]] = True
        if old < 0 and present:
            # sniffles send some agents for a (negative) test too
            rng = self.rngs["behavior"]
            if rng.random() < self.cfg.testing.seek_probability.get(
                    "mild", 0.0):
                self.health.request_test(agent, PRIORITY_MILD)
        self.minor_phase[agent] = new_phase

    # --- phase 2: behavior and schedule --------------------------------------

    def _behavior(self, day, symptoms):
        cfg = self.cfg
        n = self.n
        h = self.health
        top = cfg.behavior.n_levels - 1

        rec = np.minimum(np.asarray(self.policy.recommendation(day),
                                    dtype=np.int8), top)
        eff = np.maximum(rec, np.int8(cfg.behavior.baseline_level))
        if (cfg.quarantine.on_app_recommendation
                and cfg.quarantine.on_household_member):
            at_top = eff >= top
            if at_top.any():
                hh_flag = np.zeros(int(self.pop.household.max()) + 1,
                                   dtype=bool)
                hh_flag[self.pop.household[at_top]] = True
                eff = np.where(hh_flag[self.pop.household], top, eff)
        defect = self.rngs["behavior"].random(n) \
            < np.asarray(cfg.behavior.dropout)[eff]
        level = np.where(defect, 0, eff).astype(np.int8)
        gamma_eff = self.gammas[level]

        alive = self.status != DEAD
        absent = h.in_hospital | ~alive
        quarantined = h.is_quarantined(day) & alive
        rec_home = (eff >= top) & ~defect & alive

        # sick agents may stay home on their own; category is the worst of
        # an active symptomatic course and any minor illness
        cat = np.zeros(n, dtype=np.int8)
        cat[(self.minor_phase >= 0) & symptoms.any(axis=1)] = MILD
        covid_sym = self.covid_phase >= 0
        cat[covid_sym] = self.severity[covid_sym]
        stay_sick = (self.rngs["behavior"].random(n) < self.p_stay_sick[cat]) \
            & alive

        home_only = (quarantined | rec_home | stay_sick) & ~absent
        supervising = self._assign_supervision(day, home_only, absent)
        home_only |= supervising

        present_home = ~absent
        self.quarantine_days += (quarantined | rec_home) & present_home
        self.sick_home_days += stay_sick & ~quarantined & ~rec_home \
            & present_home
        self.supervision_days += supervising
        self.hospital_days += h.in_hospital
        self.icu_days += h.in_icu

        recent = self._out_hist[0].astype(np.int64) \
            + self._out_hist[1].astype(np.int64)
        schedule = build_schedule(self.pop, day, self.rngs["schedule"],
                                  absent, home_only, recent)
        self._out_hist = [schedule.went_out, self._out_hist[0]]
        return schedule, gamma_eff, quarantined, rec_home, rec

    def _assign_supervision(self, day, home_only, absent):
        """School-day child at home pulls one household adult home."""
        supervising = np.zeros(self.n, dtype=bool)
        if is_weekend(day):
            return supervising
        kids = np.flatnonzero(home_only & ~absent
                              & (self.pop.ages < SUPERVISION_AGE)
                              & (self.pop.school_location >= 0))
        handled = set()
        for kid in kids:
            hh = int(self.pop.household[kid])
            if hh in handled:
                continue
            handled.add(hh)
            members = self.pop.household_members(hh)
            adults = members[(self.pop.ages[members] >= ADULT_AGE)
                             & ~absent[members]]
            if len(adults) == 0:
                continue
            if home_only[adults].any():
                continue   # someone is already home
            supervising[adults[0]] = True
        return supervising

    # --- phase 3: transmission ------------------------------------------------

    def _transmit(self, day, enc, tr):
        cfg = self.cfg
        if len(enc) == 0:
            return 0
        src = np.concatenate([enc.i, enc.j])
        dst = np.concatenate([enc.j, enc.i])
        hour = np.tile(enc.hour, 2)
        minutes = np.tile(enc.minutes, 2)
        kind = np.tile(enc.kind, 2)
        seq = np.tile(np.arange(len(enc)), 2)

        loc_factor = self.constants.location_factor[kind]
        ok = ((minutes >= cfg.transmission.min_transmission_minutes)
              & (self.status[src] == INFECTED)
              & (self.status[dst] == SUSCEPTIBLE)
              & (loc_factor > 0))
        idx = np.flatnonzero(ok)
        if len(idx) == 0:
            return 0
        s, d = src[idx], dst[idx]
        t0 = day + hour[idx] / 24.0 - self.exposure_time[s]
        t1 = t0 + minutes[idx] / (24.0 * 60.0)
        integral = evl_integral(t0, t1, self.t_inf_start[s], self.t_peak[s],
                                self.t_plateau_end[s], self.t_decay_end[s],
                                self.peak_height[s])
        p = transmission_probability(
            integral, self.constants.susceptibility[self.pop.age_bin[d]],
            self.constants.symptom_ratio[self.severity[s]], loc_factor[idx],
            cfg.transmission.r, self.normalizer)
        hit = self.rngs["disease"].random(len(idx)) < p
        if not hit.any():
            return 0
        hit_idx = idx[hit]
        # first successful exposure per target wins (earliest hour, then
        # encounter order)
        order = np.lexsort((seq[hit_idx], hour[hit_idx], dst[hit_idx]))
        hit_idx = hit_idx[order]
        first = np.r_[True, dst[hit_idx][1:] != dst[hit_idx][:-1]]
        winners = hit_idx[first]
        for w in winners:
            time = day + hour[w] / 24.0
            self._infect(dst[w], time, int(src[w]), day, tr)
            self._trans["time"].append(time)
            self._trans["source"].append(int(src[w]))
            self._trans["target"].append(int(dst[w]))
            self._trans["kind"].append(int(kind[w]))
        return len(winners)

    # --- phase 5: testing and hospital flow ------------------------------------

    def _health_flow(self, day, tr):
        h = self.health
        sampled = h.sample_tests(day, self.status, self.exposure_day)
        positives, negatives = h.resolve_results(day)
        for agent in positives:
            tr.event("test_result", day, agent=agent, result=1)
        for agent in negatives:
            tr.event("test_result", day, agent=agent, result=-1)

        due = np.flatnonzero((self.status == INFECTED) & ~self.admit_done
                             & (self.severity == SEVERE)
                             & (day >= self.admit_time))
        for agent in due:
            outcome = h.admit(int(agent), day)
            self.admit_done[agent] = True
            tr.event("admission", day, agent=int(agent), outcome=outcome)

        for agent in h.discharge_due(day):
            if h.death_day[agent] != day:
                self._recover(int(agent), day, tr)
                tr.event("discharge", day, agent=int(agent))

        dying = np.flatnonzero((h.death_day == day)
                               & (self.status == INFECTED))
        for agent in dying:
            self.status[agent] = DEAD
            self.death_day[agent] = day
            self.sym_covid[agent] = False
            self.sym_minor[agent] = False
            self.covid_phase[agent] = -1
            self.minor_kind[agent] = -1
            self.minor_phase[agent] = -1
            tr.event("death", day, agent=int(agent))
        return len(sampled), len(positives), len(negatives)

    # --- the day loop -----------------------------------------------------------

    def _day(self, day, tr):
        cfg = self.cfg
        h = self.health
        uses_msgs = self.policy.uses_messages

        self._progress_disease(day, tr)
        self._progress_minor(day)
        symptoms = self.sym_covid | self.sym_minor
        if uses_msgs:
            self.msgs.new_day(day)
        self.policy.new_day(day, symptoms)

        schedule, gamma_eff, quarantined, rec_home, rec = \
            self._behavior(day, symptoms)

        enc = sample_contacts(self.pop, schedule, self.matrices, gamma_eff,
                              cfg.behavior.beta, cfg.behavior.contact_scale,
                              cfg.behavior.negbin_dispersion, day,
                              self.rngs["contacts"])
        tick = float(cfg.tick_hours)
        enc.hour = np.floor(enc.hour / tick) * tick
        tally_contacts(self.contact_tally, enc, self.pop)
        new_infections = self._transmit(day, enc, tr)

        if uses_msgs:
            senders, recipients, risks = capture_encounters(
                enc, self.pop.has_app, self.pop.bt_noise,
                self.policy.current_risk, day, self.rngs["dct"],
                max_distance=cfg.dct.bluetooth_exchange_max_m,
                min_minutes=cfg.dct.bluetooth_exchange_min_minutes)
            self.msgs.queue_encounter_messages(senders, recipients, risks,
                                               day)

        tests_sampled, positives, negatives = self._health_flow(day, tr)

        rounds = cfg.dct.batches_per_day if uses_msgs else 1
        empty = np.empty(0, dtype=np.int64)
        for rnd in range(rounds):
            if uses_msgs:
                dirty, delivered = self.msgs.deliver_round(day)
            else:
                dirty, delivered = empty, []
            self.policy.process_round(day, rnd, dirty, delivered)

        alerts = self.policy.pop_new_alerts()
        if len(alerts):
            takers = alerts[self.rngs["dct"].random(len(alerts))
                            < cfg.testing.app_rec_seek_probability]
            for agent in takers:
                h.request_test(int(agent), PRIORITY_APP)
            tr.event("alerts", day, count=len(alerts),
                     test_seeking=len(takers))

        infected = self.status == INFECTED
        t = day + 1 - self.exposure_time
        exposed = infected & (t < self.t_inf_start)
        sent = self.msgs.messages_sent + self.msgs.updates_sent
        row = {
            "day": day,
            "susceptible": int((self.status == SUSCEPTIBLE).sum()),
            "exposed": int(exposed.sum()),
            "infectious": int((infected & ~exposed).sum()),
            "recovered": int((self.status == RECOVERED).sum()),
            "dead": int((self.status == DEAD).sum()),
            "new_infections": new_infections,
            "cum_infected": int((self.exposure_day != NO_DAY).sum()),
            "encounters": len(enc),
            "tests_sampled": tests_sampled,
            "positive_results": positives,
            "negative_results": negatives,
            "quarantined": int((quarantined | rec_home).sum()),
            "hospitalized": int(h.in_hospital.sum()),
            "icu": int(h.in_icu.sum()),
            "recommended_2plus": int((rec >= 2).sum()),
            "alerts": len(alerts),
            "messages_sent": sent - self._msgs_sent_prev,
        }
        self._msgs_sent_prev = sent
        self.daily_rows.append(row)
        tr.event("daily", day,
                 **{k: v for k, v in row.items() if k != "day"})

    def run(self, trace_path=None, keep_trace=True):
        cfg = self.cfg
        tr = TraceWriter(trace_path,
                         header={"seed": cfg.seed, "config": cfg.to_dict()},
                         keep_events=keep_trace)
        try:
            self._seed_infections(tr)
            for day in range(cfg.n_days):
                self._day(day, tr)
            self._agent_summary_event(tr)
        finally:
            tr.close()
        return self._result(tr)

    def _agent_summary_event(self, tr):
        """Per-agent end-of-run arrays; lets cost/tree analysis run from
        the persisted trace alone."""
        onset = np.where(self.asymptomatic, np.nan,
                         self.exposure_time + self.incubation)
        tr.event(
            "agents", self.cfg.n_days,
            age=self.pop.ages, sex=self.pop.sex, status=self.status,
            asymptomatic=self.asymptomatic, infector=self.infector,
            exposure_day=self.exposure_day,
            onset_time=[None if np.isnan(v) else round(float(v), 4)
                        for v in onset],
            recovery_day=self.recovery_day, death_day=self.death_day,
            quarantine_days=self.quarantine_days,
            sick_home_days=self.sick_home_days,
            supervision_days=self.supervision_days,
            hospital_days=self.hospital_days, icu_days=self.icu_days)

    def _result(self, tr):
        onset = np.where(self.asymptomatic, np.nan,
                         self.exposure_time + self.incubation)
        daily = {}
        if self.daily_rows:
            for key in self.daily_rows[0]:
                daily[key] = np.array([row[key] for row in self.daily_rows])
        transmissions = {
            "time": np.array(self._trans["time"], dtype=float),
            "source": np.array(self._trans["source"], dtype=np.int64),
            "target": np.array(self._trans["target"], dtype=np.int64),
            "kind": np.array(self._trans["kind"], dtype=np.int8),
        }
        return RunResult(
            config=self.cfg.to_dict(), n_days=self.cfg.n_days, n=self.n,
            ages=self.pop.ages.copy(), sex=self.pop.sex.copy(),
            has_app=self.pop.has_app.copy(), status=self.status,
            exposure_time=self.exposure_time, exposure_day=self.exposure_day,
            infector=self.infector, severity=self.severity,
            asymptomatic=self.asymptomatic, incubation=self.incubation,
            t_inf_start=self.t_inf_start,
            onset_time=onset, recovery_day=self.recovery_day,
            death_day=self.death_day, transmissions=transmissions,
            daily=daily, contact_tally=self.contact_tally,
            quarantine_days=self.quarantine_days,
            sick_home_days=self.sick_home_days,
            supervision_days=self.supervision_days,
            hospital_days=self.hospital_days, icu_days=self.icu_days,
            tests_sampled=self.health.tests_sampled,
            tests_positive=self.health.tests_positive,
            trace=tr.records)


def run_simulation(config, trace_path=None, keep_trace=True):
    """Run one configured simulation and return its RunResult."""
    return Simulation(config).run(trace_path=trace_path,
                                  keep_trace=keep_trace)
