"""Testing, quarantine, and hospital pathways.

A single daily-capacity PCR queue with severity/app-recommendation
priority; sampled tests report after a fixed delay with phase-dependent
false negatives (specificity is perfect). Positive reports trigger a
fixed isolation window for the agent and household. Severe courses may be
admitted to a hospital with free beds; admission probability multiplies
an age baseline by the agent's condition risk ratios.
"""

import heapq

import numpy as np

from .config import age_to_decade
from .disease import INFECTED, truncated_normal

NO_DAY = -(10 ** 9)

PRIORITY_SEVERE = 3
PRIORITY_MODERATE = 2
PRIORITY_APP = 2
PRIORITY_MILD = 1


def admission_multiplier(condition_mask, risk_ratios):
    """Product of condition risk ratios for one agent."""
    return risk_ratios.multiplier(condition_mask)


def admission_probability(age, condition_mask, hosp_table, risk_ratios,
                          cap=0.95):
    base = hosp_table.p_hosp_given_severe[age_to_decade(age)]
    return float(min(base * admission_multiplier(condition_mask,
                                                 risk_ratios), cap))


class HealthSystem:
    """Per-run mutable testing/quarantine/hospital state."""

    def __init__(self, pop, testing_cfg, quarantine_cfg, hosp_table,
                 risk_ratios, fn_curve, rng):
        n = pop.n
        self.pop = pop
        self.cfg = testing_cfg
        self.qcfg = quarantine_cfg
        self.hosp = hosp_table
        self.rr = risk_ratios
        self.fn = fn_curve
        self.rng = rng

        self.capacity_per_day = int(round(testing_cfg.capacity_fraction * n))
        self.queue = []          # (-priority, seq, agent)
        self._seq = 0
        self.queued = np.zeros(n, dtype=bool)
        self.pending_report_day = np.full(n, NO_DAY, dtype=np.int64)
        self.pending_result = np.zeros(n, dtype=np.int8)
        self.last_positive_report = np.full(n, NO_DAY, dtype=np.int64)
        self.last_negative_report = np.full(n, NO_DAY, dtype=np.int64)
        self.ever_positive = np.zeros(n, dtype=bool)
        self.tests_sampled = 0
        self.tests_positive = 0

        self.quarantine_until = np.full(n, NO_DAY, dtype=np.int64)

        self.in_hospital = np.zeros(n, dtype=bool)
        self.in_icu = np.zeros(n, dtype=bool)
        self.hospital_of = np.full(n, -1, dtype=np.int64)
        self.hospital_until = np.full(n, NO_DAY, dtype=np.int64)
        self.death_day = np.full(n, NO_DAY, dtype=np.int64)
        self.bed_used = np.zeros(len(pop.hospital_ids), dtype=np.int64)
        self.icu_used = np.zeros(len(pop.hospital_ids), dtype=np.int64)

    # --- testing ---------------------------------------------------------

    def request_test(self, agent, priority):
        """Queue an agent unless already queued, awaiting a result, or
        known positive."""
        if (self.queued[agent] or self.pending_report_day[agent] != NO_DAY
                or self.ever_positive[agent]):
            return False
        heapq.heappush(self.queue, (-int(priority), self._seq, int(agent)))
        self._seq += 1
        self.queued[agent] = True
        return True

    def sample_tests(self, day, status, exposure_day):
        """Run up to capacity tests today; results report after the delay.

        status/exposure_day: engine state arrays used to draw the result
        at sampling time.
        """
        sampled = []
        k = 0
        while self.queue and k < self.capacity_per_day:
            _, _, agent = heapq.heappop(self.queue)
            if not self.queued[agent]:
                continue
            self.queued[agent] = False
            if status[agent] == INFECTED:
                fn = self.fn.rate(day - exposure_day[agent])
                result = 1 if self.rng.random() >= fn else -1
            else:
                # perfect specificity: uninfected agents test negative
                result = -1 if self.rng.random() < self.cfg.specificity else 1
            self.pending_result[agent] = result
            self.pending_report_day[agent] = day + self.cfg.result_delay_days
            if self.qcfg.while_awaiting_result:
                self.extend_quarantine(agent, self.pending_report_day[agent])
            sampled.append(agent)
            self.tests_sampled += 1
            k += 1
        return sampled

    def resolve_results(self, day):
        """Deliver reports due today; returns (positives, negatives)."""
        due = np.flatnonzero(self.pending_report_day == day)
        positives, negatives = [], []
        for agent in due:
            result = int(self.pending_result[agent])
            self.pending_report_day[agent] = NO_DAY
            self.pending_result[agent] = 0
            if result > 0:
                self.last_positive_report[agent] = day
                self.ever_positive[agent] = True
                self.tests_positive += 1
                positives.append(int(agent))
                if self.qcfg.on_positive_test:
                    until = day + self.cfg.isolation_days_after_positive
                    self.extend_quarantine(agent, until)
                    if self.qcfg.on_household_member:
                        for m in self.pop.household_members(
                                self.pop.household[agent]):
                            self.extend_quarantine(m, until)
            else:
                self.last_negative_report[agent] = day
                negatives.append(int(agent))
        return positives, negatives

    def test_window(self, agent, day, d_max):
        """T vector over the last d_max days (index 0 = today) in
        {+1, 0, -1}: positives retained d_max days, negatives d_min."""
        w = np.zeros(d_max, dtype=np.int8)
        dp = day - self.last_positive_report[agent]
        if 0 <= dp < self.cfg.positive_retention_days and dp < d_max:
            w[dp] = 1
        dn = day - self.last_negative_report[agent]
        if 0 <= dn < self.cfg.negative_retention_days and dn < d_max:
            if w[dn] == 0:
                w[dn] = -1
        return w

    # --- quarantine --------------------------------------------------------

    def extend_quarantine(self, agent, until_day):
        if until_day > self.quarantine_until[agent]:
            self.quarantine_until[agent] = until_day

    def apply_quarantine(self, agent, day, days, household=False):
        """Quarantine an agent (and optionally housemates) for `days`
        starting today."""
        self.extend_quarantine(agent, day + days)
        if household:
            for m in self.pop.household_members(self.pop.household[agent]):
                self.extend_quarantine(m, day + days)

    def is_quarantined(self, day):
        return self.quarantine_until >= day

    # --- hospitalization ---------------------------------------------------

    def _find_bed(self, icu):
        used = self.icu_used if icu else self.bed_used
        cap = (self.pop.hospital_icu_beds if icu
               else self.pop.hospital_beds)
        for h in range(len(cap)):
            if used[h] < cap[h]:
                return h
        return -1

    def admit(self, agent, day):
        """Attempt admission of a severe case; returns one of
        "hospital", "icu", "none" and schedules discharge/death."""
        age = int(self.pop.ages[agent])
        dec = age_to_decade(age)
        p_admit = admission_probability(age, self.pop.conditions[agent],
                                        self.hosp, self.rr)
        stay = max(1, int(round(truncated_normal(
            self.rng, self.hosp.hosp_days_mean[dec],
            self.hosp.hosp_days_mean[dec] / 3.0, 1.0, 60.0))))
        if self.rng.random() < p_admit:
            icu = self.rng.random() < self.hosp.p_icu_given_hosp[dec]
            h = self._find_bed(icu)
            if h < 0 and icu:
                icu, h = False, self._find_bed(False)
            if h >= 0:
                self.in_hospital[agent] = True
                self.in_icu[agent] = icu
                self.hospital_of[agent] = h
                if icu:
                    stay += max(0, int(round(
                        self.hosp.icu_extra_days_mean[dec])))
                    self.icu_used[h] += 1
                    p_death = self.hosp.p_death_given_icu[dec]
                else:
                    self.bed_used[h] += 1
                    p_death = self.hosp.p_death_given_hosp[dec]
                self.hospital_until[agent] = day + stay
                if self.rng.random() < p_death:
                    self.death_day[agent] = day + stay
                return "icu" if icu else "hospital"
        # not admitted: possible death outside hospital
        if self.rng.random() < \
                self.hosp.p_death_given_severe_unhospitalized[dec]:
            self.death_day[agent] = day + stay
        return "none"

    def discharge_due(self, day):
        """Agents leaving hospital today (survivors and deaths alike)."""
        due = np.flatnonzero(self.in_hospital
                             & (self.hospital_until == day))
        for agent in due:
            h = self.hospital_of[agent]
            if self.in_icu[agent]:
                self.icu_used[h] -= 1
            else:
                self.bed_used[h] -= 1
            self.in_hospital[agent] = False
            self.in_icu[agent] = False
            self.hospital_of[agent] = -1
            self.hospital_until[agent] = NO_DAY
        return due
