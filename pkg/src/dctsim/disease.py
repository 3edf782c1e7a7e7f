"""Within-host disease model.

A course is a set of knot times (days since exposure) for the piecewise
linear effective viral load (EVL): zero until infectiousness onset, linear
rise to a peak just before symptom onset, a short plateau, linear decay to
zero well before clinical recovery. Transmission probability per encounter
integrates the EVL over the encounter interval and passes through a
dose-response exponential with age, course-category, and location
modifiers.

Symptoms are drawn per course phase from a linear-probability table
(base + inoculum/age/carefulness terms with gate conditions); colds and
flu circulate with the same machinery to generate non-specific reports.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .config import (AGE_BINS, DECADE_BINS, LOCATION_KINDS,
                     PRE_EXISTING_CONDITIONS, age_to_decade)

# status codes
SUSCEPTIBLE = 0
INFECTED = 1
RECOVERED = 2
DEAD = 3

# course severity categories
ASYMPTOMATIC = 0
MILD = 1
MODERATE = 2
SEVERE = 3
SEVERITY_NAMES = ["asymptomatic", "mild", "moderate", "severe"]

# share of non-severe symptomatic courses that stay mild
MILD_SHARE = 0.6

SYMPTOMS = [
    "fever", "chills", "gastro", "diarrhea", "nausea_vomiting", "fatigue",
    "hard_time_waking_up", "headache", "confused", "loss_of_consciousness",
    "unusual", "trouble_breathing", "sneezing", "cough", "runny_nose",
    "sore_throat", "severe_chest_pain", "loss_of_taste", "aches",
]
SYMPTOM_INDEX = {s: i for i, s in enumerate(SYMPTOMS)}

COVID_PHASES = ["onset", "plateau", "post_plateau_1", "post_plateau_2"]
MINOR_PHASES = ["first", "main", "last"]


def truncated_normal(rng, mean, sd, lo, hi, size=None):
    """Rejection-sampled truncated normal (bounds are a few sd wide here,
    so a handful of rounds suffice)."""
    out = rng.normal(mean, sd, size=size)
    scalar = np.isscalar(out)
    out = np.atleast_1d(out)
    for _ in range(100):
        bad = (out < lo) | (out > hi)
        if not bad.any():
            break
        out[bad] = rng.normal(mean, sd, size=int(bad.sum()))
    out = np.clip(out, lo, hi)
    return float(out[0]) if scalar else out


@dataclass
class Course:
    """Knot times in days since exposure, plus category draws."""

    is_asymptomatic: bool
    severity: int
    inoculum: float
    incubation: float
    t_inf_start: float
    t_peak: float
    t_plateau_end: float
    t_decay_end: float
    t_recovery: float
    peak_height: float


def sample_course(age, rng, cfg, p_severe_base):
    """Draw one agent's course. p_severe_base: baseline P(severe course |
    symptomatic) for the agent's age decade."""
    inoculum = float(rng.random())
    is_asym = rng.random() < cfg.asymptomatic_fraction

    incubation = max(float(rng.lognormal(cfg.incubation_logmean,
                                         cfg.incubation_logsd)),
                     cfg.incubation_min)
    lo, hi = cfg.onset_gap_bounds
    onset_gap = truncated_normal(rng, cfg.onset_gap_mean, cfg.onset_gap_sd,
                                 lo, hi)
    t_inf_start = max(incubation - onset_gap, 0.25)
    peak_lead = truncated_normal(rng, cfg.peak_lead_mean, cfg.peak_lead_sd,
                                 0.2, 1.2)
    t_peak = max(incubation - peak_lead, t_inf_start + 0.05)
    plateau = max(float(rng.normal(cfg.plateau_mean, cfg.plateau_sd)), 0.1)
    decay = max(float(rng.normal(cfg.decay_mean, cfg.decay_sd)), 0.3)
    t_plateau_end = t_peak + plateau
    t_decay_end = t_plateau_end + decay

    peak_height = float(rng.normal(cfg.peak_height_mean, cfg.peak_height_sd))
    peak_height += cfg.peak_height_age_coef * (age - 50.0) / 50.0
    peak_height = float(np.clip(peak_height, 0.05, 1.0))

    if is_asym:
        severity = ASYMPTOMATIC
        t_recovery = t_decay_end + 2.0
    else:
        recovery_gap = max(float(rng.normal(cfg.recovery_gap_mean,
                                            cfg.recovery_gap_sd)), 3.0)
        t_recovery = max(incubation + recovery_gap, t_decay_end + 0.5)
        p_severe = float(np.clip(p_severe_base * (0.75 + 0.5 * inoculum),
                                 0.0, 0.95))
        if rng.random() < p_severe:
            severity = SEVERE
        else:
            severity = MILD if rng.random() < MILD_SHARE else MODERATE

    return Course(is_asymptomatic=is_asym, severity=severity,
                  inoculum=inoculum, incubation=incubation,
                  t_inf_start=t_inf_start, t_peak=t_peak,
                  t_plateau_end=t_plateau_end, t_decay_end=t_decay_end,
                  t_recovery=t_recovery, peak_height=peak_height)


def evl_value(t, t_start, t_peak, t_plateau_end, t_decay_end, height):
    """EVL at time t (days since exposure); vectorized over any argument."""
    t = np.asarray(t, dtype=float)
    rise = np.maximum(t_peak - t_start, 1e-9)
    fall = np.maximum(t_decay_end - t_plateau_end, 1e-9)
    v = np.select(
        [t <= t_start, t <= t_peak, t <= t_plateau_end, t <= t_decay_end],
        [0.0,
         height * (t - t_start) / rise,
         height,
         height * (t_decay_end - t) / fall],
        default=0.0)
    return v


def evl_antiderivative(t, t_start, t_peak, t_plateau_end, t_decay_end,
                       height):
    """Integral of the EVL from exposure to t, exact closed form."""
    t = np.asarray(t, dtype=float)
    rise = np.maximum(t_peak - t_start, 1e-9)
    fall = np.maximum(t_decay_end - t_plateau_end, 1e-9)
    dt_r = np.clip(t - t_start, 0.0, rise)
    dt_p = np.clip(t - t_peak, 0.0, np.maximum(t_plateau_end - t_peak, 0.0))
    dt_f = np.clip(t - t_plateau_end, 0.0, fall)
    return (height * dt_r * dt_r / (2.0 * rise)
            + height * dt_p
            + height * (dt_f - dt_f * dt_f / (2.0 * fall)))


def evl_integral(t0, t1, t_start, t_peak, t_plateau_end, t_decay_end,
                 height):
    """Exact integral of the EVL over [t0, t1] (days since exposure)."""
    lo = evl_antiderivative(t0, t_start, t_peak, t_plateau_end, t_decay_end,
                            height)
    hi = evl_antiderivative(t1, t_start, t_peak, t_plateau_end, t_decay_end,
                            height)
    return np.maximum(hi - lo, 0.0)


def transmission_probability(integral, susceptibility, symptom_ratio,
                             location_factor, r, normalizer):
    """P(transmission) = 1 - exp(-lambda) with the dose-response hazard
    lambda = r * S_age * A_course * B_location * integral / normalizer."""
    lam = (r * susceptibility * symptom_ratio * location_factor
           * np.asarray(integral) / normalizer)
    return 1.0 - np.exp(-np.maximum(lam, 0.0))


class TransmissionConstants:
    """Age susceptibility, course-category infectiousness ratios,
    location factors, and the viral-load normalizer."""

    def __init__(self, path):
        self.susceptibility = np.ones(len(AGE_BINS))
        ratios = {}
        self.location_factor = np.ones(len(LOCATION_KINDS))
        self.normalizer = 1.0
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                kind, key, value = rec["kind"], rec["key"], float(rec["value"])
                if kind == "susceptibility":
                    self.susceptibility[AGE_BINS.index(key)] = value
                elif kind == "symptom_ratio":
                    ratios[key] = value
                elif kind == "location_factor":
                    self.location_factor[LOCATION_KINDS.index(key)] = value
                elif kind == "normalizer":
                    self.normalizer = value
        # by course severity category: moderate shares the mild ratio
        self.symptom_ratio = np.array([
            ratios.get("asymptomatic", 0.29),
            ratios.get("mild", 0.72),
            ratios.get("mild", 0.72),
            ratios.get("severe", 1.0),
        ])


class SymptomTables:
    """Linear per-phase symptom probabilities with gate conditions."""

    def __init__(self, path):
        self.rows = {}
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                key = (rec["disease"], rec["phase"])
                self.rows.setdefault(key, []).append((
                    rec["symptom"],
                    tuple(g for g in rec["given"].split(",") if g),
                    float(rec["p0"]), float(rec["c_inoculum"]),
                    float(rec["c_agefrac"]), float(rec["c_carefulness"]),
                    rec["persists"] in ("1", "True", "true"),
                ))

    def sample(self, disease, phase, rng, *, inoculum=0.0, age=30,
               carefulness=0.5, extremely_sick=False, prior=frozenset()):
        """Draw the symptom set for one phase. prior carries persistent
        symptoms (and feeds gates) from earlier phases."""
        present = set(s for s in prior)
        agefrac = age / 200.0
        for (symptom, given, p0, ci, ca, cc, persists) in \
                self.rows.get((disease, phase), []):
            ok = True
            for g in given:
                if g == "extremely_sick":
                    ok = extremely_sick
                elif g == "age_gt_75":
                    ok = age > 75
                elif g.startswith("inoculum_gt_"):
                    ok = inoculum > float(g.rsplit("_", 1)[1])
                else:
                    ok = g in present
                if not ok:
                    break
            if not ok:
                continue
            if symptom in present:
                continue
            p = np.clip(p0 + ci * inoculum + ca * agefrac + cc * carefulness,
                        0.0, 1.0)
            if rng.random() < p:
                present.add(symptom)
        return present

    def persistent(self, disease, phase, symptoms):
        """Subset of symptoms that persist into later phases."""
        keep = set()
        for (symptom, _given, _p0, _ci, _ca, _cc, persists) in \
                self.rows.get((disease, phase), []):
            if persists and symptom in symptoms:
                keep.add(symptom)
        return keep


def covid_phase_bounds(incubation, t_recovery):
    """Symptomatic-phase boundaries (days since exposure): onset, plateau,
    then the remaining course split into two post-plateau stretches."""
    b1 = incubation
    b2 = min(incubation + 2.0, t_recovery)
    b3 = min(incubation + 5.0, t_recovery)
    b4 = min((b3 + t_recovery) / 2.0, t_recovery)
    return b1, b2, b3, b4, t_recovery


class HospitalizationTable:
    """Age-decade baselines for severity, admission, ICU, and death."""

    COLUMNS = ["p_severe_given_symptomatic", "p_hosp_given_severe",
               "p_icu_given_hosp", "p_death_given_icu", "p_death_given_hosp",
               "p_death_given_severe_unhospitalized", "hosp_days_mean",
               "icu_extra_days_mean"]

    def __init__(self, path):
        vals = {c: np.zeros(len(DECADE_BINS)) for c in self.COLUMNS}
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                d = DECADE_BINS.index(rec["decade"])
                for c in self.COLUMNS:
                    vals[c][d] = float(rec[c])
        for c in self.COLUMNS:
            setattr(self, c, vals[c])

    def p_severe(self, age):
        return float(self.p_severe_given_symptomatic[age_to_decade(age)])


class ConditionRiskRatios:
    """Multiplicative hospitalization risk ratios per condition."""

    def __init__(self, path):
        self.ratio = np.ones(len(PRE_EXISTING_CONDITIONS))
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                name = rec["condition"]
                if name in PRE_EXISTING_CONDITIONS:
                    idx = PRE_EXISTING_CONDITIONS.index(name)
                    self.ratio[idx] = float(rec["risk_ratio"])

    def multiplier(self, condition_mask):
        """Product of ratios for an agent's condition bool vector."""
        m = np.asarray(condition_mask, dtype=bool)
        return float(np.prod(np.where(m, self.ratio, 1.0)))


class FalseNegativeCurve:
    """PCR false-negative rate by (integer) days since infection."""

    def __init__(self, path):
        days, rates = [], []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                days.append(int(rec["days_since_infection"]))
                rates.append(float(rec["false_negative_rate"]))
        order = np.argsort(days)
        self.days = np.asarray(days)[order]
        self.rates = np.asarray(rates)[order]

    def rate(self, days_since_infection):
        d = np.clip(np.floor(days_since_infection).astype(int),
                    self.days[0], self.days[-1])
        return self.rates[np.searchsorted(self.days, d)]
