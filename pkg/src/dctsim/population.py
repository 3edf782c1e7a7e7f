"""Synthetic population: demographics, households, institutions, devices.

Agents are stored struct-of-arrays inside Population; Agent is a light
per-index view used in tests and debugging. Location ids index a single
flat table whose kind is given by Population.loc_kind:

    households | senior residences | workplaces | schools | hospitals | other

Seniors placed in residences get the residence as their home location, so
"household" relations transparently cover both kinds.
"""

from dataclasses import dataclass, field

import numpy as np

from .config import (AGE_BINS, LOCATION_KINDS, PRE_EXISTING_CONDITIONS,
                     ConfigError, age_to_bin, age_to_decade)

KIND_INDEX = {k: i for i, k in enumerate(LOCATION_KINDS)}

# Children below this age only leave home accompanied by a household adult.
SUPERVISION_AGE = 14
ADULT_AGE = 18
STAFF_PER_HOSPITAL_BED = 0.5
STUDENTS_PER_TEACHER = 15
# Social circle size is 1 + Poisson(this); gatherings draw from the circle.
CIRCLE_MEAN_EXTRA = 2.0
CIRCLE_AGE_SD = 8.0


@dataclass
class Agent:
    """Read-only view of one agent's static attributes."""

    idx: int
    age: int
    sex: int
    age_bin: int
    carefulness: float
    household: int
    work_location: int
    school_location: int
    conditions: tuple
    has_phone: bool
    has_app: bool
    bt_noise: float


@dataclass
class Population:
    n: int
    ages: np.ndarray
    sex: np.ndarray
    age_bin: np.ndarray
    carefulness: np.ndarray
    conditions: np.ndarray  # bool [n, len(PRE_EXISTING_CONDITIONS)]
    has_phone: np.ndarray
    has_app: np.ndarray
    bt_noise: np.ndarray
    household: np.ndarray
    work_location: np.ndarray
    school_location: np.ndarray
    circle_indptr: np.ndarray
    circle_ids: np.ndarray
    loc_kind: np.ndarray
    hospital_ids: np.ndarray
    hospital_beds: np.ndarray
    hospital_icu_beds: np.ndarray
    _household_members: dict = field(default_factory=dict, repr=False)

    @property
    def n_locations(self):
        return len(self.loc_kind)

    def agent(self, i):
        return Agent(
            idx=i, age=int(self.ages[i]), sex=int(self.sex[i]),
            age_bin=int(self.age_bin[i]),
            carefulness=float(self.carefulness[i]),
            household=int(self.household[i]),
            work_location=int(self.work_location[i]),
            school_location=int(self.school_location[i]),
            conditions=tuple(
                c for c, has in zip(PRE_EXISTING_CONDITIONS,
                                    self.conditions[i]) if has),
            has_phone=bool(self.has_phone[i]),
            has_app=bool(self.has_app[i]),
            bt_noise=float(self.bt_noise[i]),
        )

    def circle_of(self, i):
        return self.circle_ids[self.circle_indptr[i]:self.circle_indptr[i + 1]]

    def household_members(self, loc):
        if not self._household_members:
            order = np.argsort(self.household, kind="stable")
            for hid, grp in _group_by(self.household[order], order):
                self._household_members[int(hid)] = grp
        return self._household_members.get(int(loc),
                                           np.empty(0, dtype=np.int64))

    def condition_index(self, name):
        return PRE_EXISTING_CONDITIONS.index(name)


def _group_by(sorted_keys, payload):
    if len(sorted_keys) == 0:
        return
    boundaries = np.flatnonzero(np.diff(sorted_keys)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [len(sorted_keys)]))
    for s, e in zip(starts, ends):
        yield sorted_keys[s], payload[s:e]


def _bin_lookup(table, default=0.0):
    """Map an AGE_BINS-keyed dict to a dense per-bin vector."""
    return np.array([float(table.get(b, default)) for b in AGE_BINS])


def _sample_ages(region, rng):
    probs = _bin_lookup(region.age_distribution)
    probs = probs / probs.sum()
    counts = rng.multinomial(region.population_size, probs)
    ages = np.empty(region.population_size, dtype=np.int64)
    pos = 0
    for b, c in enumerate(counts):
        lo = b * 5
        hi = 95 if b == len(AGE_BINS) - 1 else lo + 5
        ages[pos:pos + c] = rng.integers(lo, hi, size=c)
        pos += c
    rng.shuffle(ages)
    return ages


def _assign_households(region, ages, rng):
    """Return (household id per agent, number of households).

    Residence-bound seniors are handled by the caller; this covers the
    rest using the size distribution and composition weights.
    """
    n = len(ages)
    household = np.full(n, -1, dtype=np.int64)
    sizes = np.array(sorted(region.household_size_distribution))
    size_p = np.array([region.household_size_distribution[s] for s in sizes],
                      dtype=float)
    mass = float((sizes * size_p).sum())
    if n > 0 and mass <= 0:
        raise ConfigError(
            "household_size_distribution cannot cover the population "
            "(all size weights are zero)")
    size_p = size_p / size_p.sum()
    comp = region.household_composition
    comp_names = ["couple_with_kids", "single_parent_with_kids", "random"]
    comp_p = np.array([comp.get(k, 0.0) for k in comp_names], dtype=float)
    comp_p = comp_p / comp_p.sum() if comp_p.sum() else np.array([0, 0, 1.0])

    kids = [i for i in rng.permutation(n) if ages[i] < ADULT_AGE]
    adults = [i for i in rng.permutation(n) if ages[i] >= ADULT_AGE]

    def pop_adult(near_age=None):
        if not adults:
            return kids.pop() if kids else None
        if near_age is not None:
            # scan a shuffled suffix for an age-compatible partner
            for k in range(len(adults) - 1, max(-1, len(adults) - 40), -1):
                if abs(ages[adults[k]] - near_age) <= 8:
                    return adults.pop(k)
        return adults.pop()

    def pop_kid(parent_age=None):
        if not kids:
            return adults.pop() if adults else None
        if parent_age is not None:
            for k in range(len(kids) - 1, max(-1, len(kids) - 40), -1):
                if ages[kids[k]] <= parent_age - 18:
                    return kids.pop(k)
        return kids.pop()

    hid = 0
    while kids or adults:
        remaining = len(kids) + len(adults)
        size = int(rng.choice(sizes, p=size_p))
        size = min(size, remaining)
        members = []
        if size == 1:
            members.append(pop_adult())
        else:
            c = comp_names[int(rng.choice(3, p=comp_p))]
            if c == "couple_with_kids":
                a1 = pop_adult()
                members.append(a1)
                if size >= 2:
                    members.append(pop_adult(near_age=ages[a1]))
                for _ in range(size - 2):
                    members.append(pop_kid(parent_age=ages[a1]))
            elif c == "single_parent_with_kids":
                a1 = pop_adult()
                members.append(a1)
                for _ in range(size - 1):
                    members.append(pop_kid(parent_age=ages[a1]))
            else:
                for _ in range(size):
                    nk, na = len(kids), len(adults)
                    if nk and (not na or rng.random() < nk / (nk + na)):
                        members.append(kids.pop(int(rng.integers(nk))))
                    elif na:
                        members.append(adults.pop(int(rng.integers(na))))
        for m in members:
            if m is not None:
                household[m] = hid
        hid += 1
    return household, hid


def _assign_conditions(prevalence_rows, ages, sex, rng):
    cond = np.zeros((len(ages), len(PRE_EXISTING_CONDITIONS)), dtype=bool)
    decades = np.array([age_to_decade(a) for a in ages], dtype=np.int64)
    for j, name in enumerate(PRE_EXISTING_CONDITIONS):
        by_decade = prevalence_rows.get(name)
        if by_decade is None:
            continue
        p = np.where(sex == 1, by_decade[decades, 1], by_decade[decades, 0])
        cond[:, j] = rng.random(len(ages)) < p
    return cond


def _build_circles(ages, household, rng):
    """Age-assortative friendship lists (directed, outside the household)."""
    n = len(ages)
    if n < 3:
        indptr = np.zeros(n + 1, dtype=np.int64)
        return indptr, np.empty(0, dtype=np.int64)
    order = np.argsort(ages, kind="stable")
    sorted_ages = ages[order]
    counts = 1 + rng.poisson(CIRCLE_MEAN_EXTRA, size=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(counts)
    ids = np.empty(indptr[-1], dtype=np.int64)
    for i in range(n):
        k = counts[i]
        target = ages[i] + rng.normal(0.0, CIRCLE_AGE_SD, size=k)
        pos = np.searchsorted(sorted_ages, target)
        pos = np.clip(pos + rng.integers(-2, 3, size=k), 0, n - 1)
        friends = order[pos]
        # avoid self and housemates; fall back to random agents
        bad = (friends == i) | (household[friends] == household[i])
        if bad.any():
            friends[bad] = rng.integers(0, n, size=int(bad.sum()))
            friends[friends == i] = (friends[friends == i] + 1) % n
        ids[indptr[i]:indptr[i + 1]] = friends
    return indptr, ids


def generate_population(region, rng, prevalence_rows=None):
    """Build a Population from a RegionConfig and a numpy Generator.

    prevalence_rows: {condition: ndarray[decade, 2]} male/female marginal
    probabilities; pass the loaded table or None to skip conditions.
    """
    n = region.population_size
    if n == 0:
        empty_i = np.empty(0, dtype=np.int64)
        empty_f = np.empty(0, dtype=np.float64)
        return Population(
            n=0, ages=empty_i, sex=empty_i.copy(), age_bin=empty_i.copy(),
            carefulness=empty_f, conditions=np.zeros(
                (0, len(PRE_EXISTING_CONDITIONS)), dtype=bool),
            has_phone=np.zeros(0, dtype=bool), has_app=np.zeros(0, dtype=bool),
            bt_noise=empty_f.copy(), household=empty_i.copy(),
            work_location=empty_i.copy(), school_location=empty_i.copy(),
            circle_indptr=np.zeros(1, dtype=np.int64),
            circle_ids=empty_i.copy(),
            loc_kind=np.empty(0, dtype=np.int8),
            hospital_ids=empty_i.copy(), hospital_beds=empty_i.copy(),
            hospital_icu_beds=empty_i.copy())

    ages = _sample_ages(region, rng)
    bins = np.array([age_to_bin(a) for a in ages], dtype=np.int64)
    female_p = _bin_lookup(region.female_fraction, 0.5)
    sex = (rng.random(n) < female_p[bins]).astype(np.int8)
    carefulness = rng.random(n)

    # --- senior residences ---------------------------------------------
    seniors = np.flatnonzero(ages >= 65)
    n_in_res = int(round(region.senior_residence_fraction * len(seniors)))
    res_members = rng.choice(seniors, size=n_in_res, replace=False) \
        if n_in_res else np.empty(0, dtype=np.int64)
    n_res = int(np.ceil(n_in_res / region.senior_residence_size)) \
        if n_in_res else 0

    in_res = np.zeros(n, dtype=bool)
    in_res[res_members] = True
    free = np.flatnonzero(~in_res)

    hh_local, n_households = _assign_households(
        region, ages[free], rng)
    household = np.full(n, -1, dtype=np.int64)
    household[free] = hh_local
    # residences sit right after the households in the location table
    for k, m in enumerate(res_members):
        household[m] = n_households + k % max(n_res, 1)

    # --- schools ---------------------------------------------------------
    attend_p = _bin_lookup(region.school_attendance)
    lo, hi = region.employment_age_range
    is_student = (rng.random(n) < attend_p[bins]) & ~in_res
    students = np.flatnonzero(is_student)
    n_schools = int(np.ceil(len(students) / region.school_size_mean)) \
        if len(students) else 0

    # --- workers ---------------------------------------------------------
    employable = ((ages >= lo) & (ages <= hi) & ~is_student & ~in_res)
    employed = employable & (rng.random(n) < region.employment_rate)
    workers = rng.permutation(np.flatnonzero(employed))

    n_hospitals = int(np.ceil(n * region.hospitals_per_100k / 1e5))
    staff_per_hospital = int(round(
        STAFF_PER_HOSPITAL_BED * region.hospital_beds_per_hospital))
    n_teachers = int(np.ceil(len(students) / STUDENTS_PER_TEACHER)) \
        if n_schools else 0
    n_hospital_staff = min(len(workers), n_hospitals * staff_per_hospital)
    n_teachers = min(n_teachers, len(workers) - n_hospital_staff) \
        if len(workers) > n_hospital_staff else 0

    rest = workers[n_hospital_staff + n_teachers:]
    n_workplaces = int(np.ceil(len(rest) / region.workplace_size_mean)) \
        if len(rest) else 0
    n_other = int(np.ceil(n / 1000.0 * region.other_sites_per_1k))

    # --- location table ---------------------------------------------------
    base_work = n_households + n_res
    base_school = base_work + n_workplaces
    base_hospital = base_school + n_schools
    base_other = base_hospital + n_hospitals
    loc_kind = np.concatenate([
        np.full(n_households, KIND_INDEX["household"], dtype=np.int8),
        np.full(n_res, KIND_INDEX["senior_residence"], dtype=np.int8),
        np.full(n_workplaces, KIND_INDEX["workplace"], dtype=np.int8),
        np.full(n_schools, KIND_INDEX["school"], dtype=np.int8),
        np.full(n_hospitals, KIND_INDEX["hospital"], dtype=np.int8),
        np.full(n_other, KIND_INDEX["other"], dtype=np.int8),
    ])

    work_location = np.full(n, -1, dtype=np.int64)
    school_location = np.full(n, -1, dtype=np.int64)
    hospital_staff = workers[:n_hospital_staff]
    work_location[hospital_staff] = base_hospital + (
        np.arange(n_hospital_staff) % max(n_hospitals, 1))
    teachers = workers[n_hospital_staff:n_hospital_staff + n_teachers]
    if n_schools:
        work_location[teachers] = base_school + (
            np.arange(len(teachers)) % n_schools)
    if n_workplaces:
        work_location[rest] = base_work + rng.integers(
            0, n_workplaces, size=len(rest))
    if n_schools:
        school_location[students] = base_school + rng.integers(
            0, n_schools, size=len(students))

    phone_p = _bin_lookup(region.smartphone_ownership)
    has_phone = rng.random(n) < phone_p[bins]

    prevalence_rows = prevalence_rows or {}
    conditions = _assign_conditions(prevalence_rows, ages, sex, rng)

    indptr, circle = _build_circles(ages, household, rng)

    return Population(
        n=n, ages=ages, sex=sex, age_bin=bins, carefulness=carefulness,
        conditions=conditions, has_phone=has_phone,
        has_app=np.zeros(n, dtype=bool),
        bt_noise=rng.random(n),
        household=household, work_location=work_location,
        school_location=school_location,
        circle_indptr=indptr, circle_ids=circle,
        loc_kind=loc_kind,
        hospital_ids=np.arange(base_hospital, base_hospital + n_hospitals,
                               dtype=np.int64),
        hospital_beds=np.full(n_hospitals,
                              region.hospital_beds_per_hospital,
                              dtype=np.int64),
        hospital_icu_beds=np.full(n_hospitals,
                                  region.icu_beds_per_hospital,
                                  dtype=np.int64),
    )


def assign_apps(population, app_uptake, rng):
    """Install the tracing app on a random app_uptake share of phone owners.

    With random mixing this makes the app-captured share of encounters
    approach (uptake * phone_share)^2.
    """
    owners = np.flatnonzero(population.has_phone)
    population.has_app[:] = False
    if len(owners):
        population.has_app[owners] = rng.random(len(owners)) < app_uptake
    return population


def load_prevalence(path):
    """condition_prevalence.csv -> {condition: ndarray[decade, (male,female)]}."""
    import csv as _csv

    from .config import DECADE_BINS
    rows = {}
    with open(path, newline="") as fh:
        for rec in _csv.DictReader(fh):
            arr = rows.setdefault(
                rec["condition"], np.zeros((len(DECADE_BINS), 2)))
            d = DECADE_BINS.index(rec["decade"])
            arr[d, 0] = float(rec["male"])
            arr[d, 1] = float(rec["female"])
    return rows
