"""Regenerate the bundled default data files under src/dctsim/data/.

Everything the simulator ships as data is produced here so provenance is
one script instead of scattered hand edits. Values fall into three groups:
  * region demographics and infrastructure: synthetic, Montreal-like in
    shape, not a census extract;
  * clinical and protocol tables (symptom probabilities, risk ratios,
    disability weights, false-negative curve): transcribed from the public
    sources the simulator models;
  * contact matrices: an analytic seed construction; the empirical
    recalibration in scripts/calibrate_contacts.py overwrites them with
    tallies from no-disease runs so inputs and simulated patterns agree.

Run: python scripts/build_default_data.py
"""

import csv
from pathlib import Path

import numpy as np
import yaml

DATA = Path(__file__).resolve().parents[1] / "src" / "dctsim" / "data"

AGE_BINS = [
    "0-4", "5-9", "10-14", "15-19", "20-24", "25-29", "30-34", "35-39",
    "40-44", "45-49", "50-54", "55-59", "60-64", "65-69", "70-74", "75-79",
    "80+",
]
DECADES = ["0-9", "10-19", "20-29", "30-39", "40-49", "50-59", "60-69",
           "70-79", "80+"]

AGE_DIST = [0.051, 0.050, 0.049, 0.052, 0.068, 0.077, 0.073, 0.068, 0.063,
            0.060, 0.062, 0.064, 0.059, 0.051, 0.042, 0.031, 0.080]

FEMALE = [0.49, 0.49, 0.49, 0.49, 0.49, 0.49, 0.49, 0.49, 0.49, 0.49,
          0.50, 0.51, 0.52, 0.53, 0.55, 0.57, 0.62]

SCHOOL = [0.40, 1.0, 1.0, 0.90, 0.45, 0.15, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]

PHONE = [0.0, 0.15, 0.65, 0.92, 0.97, 0.97, 0.96, 0.95, 0.94, 0.92, 0.88,
         0.84, 0.78, 0.70, 0.60, 0.46, 0.32]


def write_region():
    region = {
        "name": "default-region",
        "population_size": 3000,
        "age_distribution": dict(zip(AGE_BINS, AGE_DIST)),
        "female_fraction": dict(zip(AGE_BINS, FEMALE)),
        "household_size_distribution": {1: 0.28, 2: 0.34, 3: 0.16,
                                        4: 0.14, 5: 0.08},
        "household_composition": {"couple_with_kids": 0.5,
                                  "single_parent_with_kids": 0.2,
                                  "random": 0.3},
        "senior_residence_fraction": 0.05,
        "senior_residence_size": 20,
        "school_attendance": dict(zip(AGE_BINS, SCHOOL)),
        "employment_age_range": [17, 65],
        "employment_rate": 1.0,
        "smartphone_ownership": dict(zip(AGE_BINS, PHONE)),
        "hospitals_per_100k": 1.99,
        "hospital_beds_per_hospital": 60,
        "icu_beds_per_hospital": 10,
        "workplace_size_mean": 12.0,
        "school_size_mean": 120.0,
        "other_sites_per_1k": 20.0,
        "condition_prevalence_file": "condition_prevalence.csv",
        "contact_matrix_file": "contact_matrices.csv",
    }
    with open(DATA / "region_default.yaml", "w") as fh:
        yaml.safe_dump(region, fh, sort_keys=False)


def gaussian(x, sigma):
    return np.exp(-0.5 * (x / sigma) ** 2)


def build_matrix(kind, row_targets, pop_weights):
    """Analytic seed matrix: mixing kernel scaled to per-bin row sums,
    then symmetrized to satisfy reciprocity against pop_weights."""
    n = len(AGE_BINS)
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :]).astype(float)
    if kind == "household":
        kernel = 0.55 * gaussian(d, 1.3) + 0.45 * (
            gaussian(d - 6, 1.8) + gaussian(d + 6, 1.8))
    elif kind == "workplace":
        kernel = gaussian(d, 3.5)
        mask = np.zeros(n)
        mask[3:13] = 1.0
        kernel = kernel * mask[:, None] * mask[None, :]
    elif kind == "school":
        students = np.zeros(n)
        students[:6] = [0.6, 1.0, 1.0, 0.9, 0.5, 0.2]
        staff = np.zeros(n)
        staff[4:13] = 0.12
        w = students + staff
        kernel = gaussian(d, 0.8) * w[:, None] * w[None, :]
    elif kind == "senior_residence":
        seniors = np.zeros(n)
        seniors[13:] = 1.0
        kernel = gaussian(d, 1.2) * seniors[:, None] * seniors[None, :]
    else:
        kernel = 0.6 * gaussian(d, 2.0) + 0.4
    weighted = kernel * pop_weights[None, :]
    rows = weighted.sum(axis=1)
    rows[rows == 0] = 1.0
    m = weighted / rows[:, None] * np.asarray(row_targets)[:, None]
    # Reciprocity: total contacts bin a with bin b must match b with a.
    t = 0.5 * (m * pop_weights[:, None] + (m * pop_weights[:, None]).T)
    return t / pop_weights[:, None]


def write_contact_matrices():
    pop = np.asarray(AGE_DIST)
    kid_row = [7.0, 8.0, 8.0, 7.0, 6.0, 6.0, 6.0, 6.0, 5.5, 5.5, 5.0, 5.0,
               4.5, 4.5, 4.0, 3.5, 3.5]
    work_row = [0, 0, 0, 3.0, 9.0, 9.5, 9.5, 9.5, 9.5, 9.5, 9.0, 9.0, 8.0,
                2.0, 0, 0, 0]
    school_row = [8.0, 12.0, 12.0, 10.0, 6.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0,
                  5.0, 5.0, 0, 0, 0, 0]
    senior_row = [0] * 13 + [9.0, 9.0, 9.0, 9.0]
    other_row = [4.0, 5.0, 6.0, 8.0, 8.0, 7.5, 7.0, 7.0, 6.5, 6.5, 6.0,
                 6.0, 5.5, 5.0, 4.5, 3.5, 2.5]
    mats = {
        "household": build_matrix("household", kid_row, pop),
        "workplace": build_matrix("workplace", work_row, pop),
        "school": build_matrix("school", school_row, pop),
        "senior_residence": build_matrix("senior_residence", senior_row, pop),
        "other": build_matrix("other", other_row, pop),
    }
    with open(DATA / "contact_matrices.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["location_kind", "age_bin"] + AGE_BINS)
        for kind, m in mats.items():
            for i, bin_name in enumerate(AGE_BINS):
                w.writerow([kind, bin_name] +
                           [f"{v:.6f}" for v in m[i]])


def write_durations():
    rows = [
        ("household", 35.0, 0.85),
        ("senior_residence", 35.0, 0.80),
        ("workplace", 28.0, 0.80),
        ("school", 28.0, 0.80),
        ("other", 15.0, 0.90),
        ("hospital", 10.0, 0.50),
    ]
    with open(DATA / "encounter_durations.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["location_kind", "median_minutes", "sigma_log"])
        w.writerows(rows)


def write_transmission_constants():
    rows = [("normalizer", "i_bar", 1.0)]
    susceptibility = [0.35, 0.35, 0.68, 0.68, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
                      1.0, 1.0, 1.15, 1.15, 1.35, 1.35, 1.45]
    rows += [("susceptibility", b, s) for b, s in zip(AGE_BINS,
                                                      susceptibility)]
    rows += [("symptom_ratio", "asymptomatic", 0.29),
             ("symptom_ratio", "mild", 0.72),
             ("symptom_ratio", "severe", 1.0)]
    # Hospital factor 0 encodes protected interactions: no transmission
    # inside hospitals.
    rows += [("location_factor", "household", 2.0),
             ("location_factor", "senior_residence", 2.2),
             ("location_factor", "workplace", 1.0),
             ("location_factor", "school", 1.25),
             ("location_factor", "other", 0.80),
             ("location_factor", "hospital", 0.0)]
    with open(DATA / "transmission_constants.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "key", "value"])
        w.writerows(rows)


def write_false_negative():
    # Day-by-day RT-PCR false negative rate by days since infection,
    # digitized curve shape: undetectable early, best sensitivity around
    # day 8, slow loss afterwards. Day 4 anchored at 0.67.
    curve = [1.00, 1.00, 0.95, 0.85, 0.67, 0.45, 0.32, 0.25, 0.21, 0.20,
             0.21, 0.22, 0.24, 0.26, 0.28, 0.30, 0.33, 0.35, 0.38, 0.41,
             0.44, 0.47]
    with open(DATA / "test_false_negative.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["days_since_infection", "false_negative_rate"])
        for day, fn in enumerate(curve):
            w.writerow([day, fn])


def write_hospitalization():
    cols = ["decade", "p_severe_given_symptomatic", "p_hosp_given_severe",
            "p_icu_given_hosp", "p_death_given_icu", "p_death_given_hosp",
            "p_death_given_severe_unhospitalized", "hosp_days_mean",
            "icu_extra_days_mean"]
    rows = [
        ("0-9",   0.010, 0.50, 0.05, 0.02, 0.000, 0.000, 5, 7),
        ("10-19", 0.015, 0.50, 0.05, 0.02, 0.000, 0.000, 5, 7),
        ("20-29", 0.030, 0.55, 0.12, 0.05, 0.005, 0.002, 6, 8),
        ("30-39", 0.050, 0.60, 0.15, 0.10, 0.010, 0.005, 7, 9),
        ("40-49", 0.080, 0.65, 0.20, 0.15, 0.020, 0.010, 8, 10),
        ("50-59", 0.130, 0.70, 0.25, 0.25, 0.040, 0.030, 10, 12),
        ("60-69", 0.200, 0.75, 0.30, 0.40, 0.100, 0.080, 12, 12),
        ("70-79", 0.300, 0.80, 0.25, 0.55, 0.200, 0.150, 12, 10),
        ("80+",   0.400, 0.75, 0.12, 0.70, 0.350, 0.300, 10, 8),
    ]
    with open(DATA / "hospitalization.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerows(rows)


def write_conditions():
    # Marginal prevalence per decade and sex (male, female columns).
    base = {
        "heart_disease": [0.001, 0.002, 0.005, 0.012, 0.03, 0.07, 0.12,
                          0.20, 0.28],
        "stroke": [0.000, 0.000, 0.001, 0.002, 0.005, 0.015, 0.04, 0.08,
                   0.12],
        "asthma": [0.08, 0.09, 0.08, 0.07, 0.07, 0.07, 0.07, 0.06, 0.06],
        "copd": [0.000, 0.000, 0.002, 0.005, 0.015, 0.04, 0.08, 0.12,
                 0.14],
        "cancer": [0.002, 0.002, 0.004, 0.008, 0.02, 0.05, 0.09, 0.13,
                   0.15],
        "diabetes": [0.002, 0.004, 0.01, 0.03, 0.05, 0.10, 0.16, 0.20,
                     0.22],
        "obesity_1_2": [0.05, 0.10, 0.18, 0.22, 0.24, 0.25, 0.25, 0.22,
                        0.18],
        "obesity_3": [0.005, 0.01, 0.03, 0.05, 0.06, 0.06, 0.05, 0.04,
                      0.03],
        "chronic_kidney_disease": [0.002, 0.002, 0.005, 0.01, 0.03, 0.06,
                                   0.12, 0.20, 0.28],
        "asplenia": [0.003, 0.004, 0.005, 0.005, 0.005, 0.005, 0.005,
                     0.005, 0.005],
        "immunosuppression": [0.004, 0.005, 0.008, 0.012, 0.02, 0.025,
                              0.03, 0.04, 0.04],
        "smoking": [0.00, 0.05, 0.22, 0.22, 0.20, 0.19, 0.15, 0.10, 0.06],
    }
    with open(DATA / "condition_prevalence.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "decade", "male", "female"])
        for cond, vals in base.items():
            for dec, v in zip(DECADES, vals):
                male = round(min(1.0, v * 1.08), 5)
                female = round(max(0.0, v * 0.92), 5)
                w.writerow([cond, dec, male, female])


def write_risk_ratios():
    # Hospitalization/death outcome risk ratios; smoking carried at 1.0
    # (excluded from the outcome model).
    rows = [
        ("heart_disease", 1.17),
        ("stroke", 2.16),
        ("asthma", 1.13),
        ("copd", 1.08),
        ("cancer", 1.72),
        ("diabetes", 2.24),
        ("obesity_1_2", 1.80),
        ("obesity_3", 2.45),
        ("chronic_kidney_disease", 2.60),
        ("asplenia", 1.34),
        ("immunosuppression", 1.70),
        ("smoking", 1.00),
    ]
    with open(DATA / "condition_risk_ratios.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "risk_ratio"])
        w.writerows(rows)


def write_life_expectancy():
    ages = list(range(0, 101, 5))
    remaining = [82.3, 77.6, 72.6, 67.7, 62.8, 58.0, 53.2, 48.4, 43.7,
                 39.0, 34.4, 29.9, 25.6, 21.3, 17.2, 13.4, 10.0, 7.1,
                 4.9, 3.3, 2.2]
    with open(DATA / "life_expectancy.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["age", "remaining_years"])
        w.writerows(zip(ages, remaining))


def write_disability_weights():
    rows = [
        ("symptomatic_not_hospitalized", 0.051),
        ("hospitalized", 0.133),
        ("critical_care", 0.408),
    ]
    with open(DATA / "disability_weights.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "weight"])
        w.writerows(rows)


def write_symptom_tables():
    """Per-day symptom probabilities as a linear model in inoculum I,
    age fraction (age/200) and carefulness:

        p = clip(p0 + cI*I + cA*(age/200) + cC*carefulness, 0, 1)

    `given` lists comma-joined gate tokens that must all hold before the
    draw (another symptom present, inoculum/age/severity predicates).
    `persists` marks symptoms that, once drawn, stay for the rest of the
    course.
    """
    rows = []

    def add(disease, phase, symptom, p0, ci=0.0, ca=0.0, cc=0.0, given="",
            persists=0):
        rows.append([disease, phase, symptom, given, p0, ci, ca, cc,
                     persists])

    covid_phases = ["onset", "plateau", "post_plateau_1", "post_plateau_2"]

    for phase, p in zip(covid_phases, [0.2, 0.8, 0.0, 0.0]):
        add("covid", phase, "fever", p)
    for phase, p in zip(covid_phases, [0.8, 0.5, 0.0, 0.0]):
        add("covid", phase, "chills", p)

    # Gastro gated on high inoculum; persists once started.
    gastro = [(-0.15, 1.0), (-0.0375, 0.25), (-0.015, 0.1), (-0.015, 0.1)]
    for phase, (p0, ci) in zip(covid_phases, gastro):
        add("covid", phase, "gastro", p0, ci=ci, given="inoculum_gt_0.6",
            persists=1)
    for phase in covid_phases:
        add("covid", phase, "diarrhea", 0.9, given="gastro")
        add("covid", phase, "nausea_vomiting", 0.7, given="gastro")

    # Fatigue F = age/200 + 0.6*I - carefulness/2, escalating post-plateau.
    add("covid", "onset", "fatigue", 0.0, ci=0.6, ca=1.0, cc=-0.5)
    add("covid", "plateau", "fatigue", 0.0, ci=0.6, ca=1.0, cc=-0.5)
    add("covid", "post_plateau_1", "fatigue", -0.15, ci=1.9, ca=1.5,
        cc=-0.75)
    add("covid", "post_plateau_2", "fatigue", -0.15, ci=2.2, ca=2.0,
        cc=-1.0)
    for phase in covid_phases:
        add("covid", phase, "hard_time_waking_up", 0.6, given="fatigue")
        add("covid", phase, "headache", 0.5, given="fatigue")
        add("covid", phase, "confused", 0.1, given="fatigue")
        add("covid", phase, "loss_of_consciousness", 0.1, given="fatigue")
    for phase, p in zip(covid_phases, [0.2, 0.5, 0.5, 0.5]):
        add("covid", phase, "unusual", p, given="fatigue,age_gt_75")

    # Trouble breathing, carefulness/4 discount.
    tb = [(0.5, -0.25), (2.0, -0.5), (1.0, -0.25), (0.5, -0.125)]
    for phase, (ci, cc) in zip(covid_phases, tb):
        add("covid", phase, "trouble_breathing", 0.0, ci=ci, cc=cc)
    for phase, p in zip(covid_phases, [0.2, 0.3, 0.3, 0.3]):
        add("covid", phase, "sneezing", p, given="trouble_breathing")
    for phase, p in zip(covid_phases, [0.6, 0.9, 0.9, 0.9]):
        add("covid", phase, "cough", p, given="trouble_breathing")
    for phase, p in zip(covid_phases, [0.1, 0.2, 0.2, 0.2]):
        add("covid", phase, "runny_nose", p, given="trouble_breathing")
    for phase, p in zip(covid_phases, [0.5, 0.8, 0.8, 0.8]):
        add("covid", phase, "sore_throat", p, given="trouble_breathing")
    for phase, p in zip(covid_phases, [0.4, 0.5, 0.15, 0.15]):
        add("covid", phase, "severe_chest_pain", p,
            given="trouble_breathing,extremely_sick")

    add("covid", "onset", "loss_of_taste", 0.25)
    add("covid", "plateau", "loss_of_taste", 0.35)

    flu_phases = ["first", "main", "last"]
    for phase, p in zip(flu_phases, [0.7, 0.7, 0.3]):
        add("flu", phase, "fever", p)
    for phase, p in zip(flu_phases, [0.7, 0.7, 0.2]):
        add("flu", phase, "gastro", p)
    for phase, p in zip(flu_phases, [0.5, 0.5, 0.5]):
        add("flu", phase, "diarrhea", p, given="gastro")
    for phase, p in zip(flu_phases, [0.5, 0.5, 0.25]):
        add("flu", phase, "nausea_vomiting", p, given="gastro")
    for phase, p in zip(flu_phases, [0.4, 0.8, 0.8]):
        add("flu", phase, "fatigue", p)
    for phase, p in zip(flu_phases, [0.3, 0.5, 0.4]):
        add("flu", phase, "hard_time_waking_up", p, given="fatigue")
    for phase, p in zip(flu_phases, [0.3, 0.5, 0.8]):
        add("flu", phase, "aches", p)

    # Cold probabilities are not specified by the modeled sources; mild
    # upper-respiratory profile filled in here.
    for phase, p in zip(flu_phases, [0.8, 0.8, 0.6]):
        add("cold", phase, "runny_nose", p)
    for phase, p in zip(flu_phases, [0.6, 0.6, 0.4]):
        add("cold", phase, "sneezing", p)
    for phase, p in zip(flu_phases, [0.5, 0.5, 0.3]):
        add("cold", phase, "sore_throat", p)
    for phase, p in zip(flu_phases, [0.3, 0.4, 0.3]):
        add("cold", phase, "cough", p)
    for phase, p in zip(flu_phases, [0.2, 0.2, 0.1]):
        add("cold", phase, "fatigue", p)
    for phase, p in zip(flu_phases, [0.2, 0.2, 0.1]):
        add("cold", phase, "headache", p, given="fatigue")

    with open(DATA / "symptom_tables.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["disease", "phase", "symptom", "given", "p0",
                    "c_inoculum", "c_agefrac", "c_carefulness", "persists"])
        w.writerows(rows)


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    write_region()
    write_contact_matrices()
    write_durations()
    write_transmission_constants()
    write_false_negative()
    write_hospitalization()
    write_conditions()
    write_risk_ratios()
    write_life_expectancy()
    write_disability_weights()
    write_symptom_tables()
    print(f"wrote data files to {DATA}")


if __name__ == "__main__":
    main()
