"""Daily schedules and encounter sampling.

Presence is an edge list (agent, location) rebuilt each day: everyone at
home, weekday work/school attendance, evening or weekend outings to
shared venues, and social gatherings that pull an agent's circle into the
host's household pool. Contact counts are negative-binomial demands per
agent whose means come from the per-kind contact matrices, thinned by the
agent's behavior level; stubs are then paired within each location.
"""

from dataclasses import dataclass

import numpy as np

from .config import AGE_BINS, LOCATION_KINDS, ConfigError
from .population import KIND_INDEX, SUPERVISION_AGE

P_OUT_WEEKDAY = 0.35
P_OUT_WEEKEND = 0.60
SOCIAL_SHARE = 0.30
# Repeat outings are suppressed: each outing in the last two days halves
# today's probability.
RECENCY_DECAY = 0.5

# Encounter-hour ranges per location kind, (weekday, weekend).
ENCOUNTER_HOURS = {
    "household": ((17.0, 23.0), (9.0, 23.0)),
    "senior_residence": ((9.0, 21.0), (9.0, 21.0)),
    "workplace": ((9.0, 17.0), (9.0, 17.0)),
    "school": ((8.0, 15.0), (8.0, 15.0)),
    "other": ((17.0, 21.0), (10.0, 20.0)),
    "hospital": ((8.0, 20.0), (8.0, 20.0)),
}

MINUTES_MIN = 2.0
MINUTES_MAX = 480.0

HOSPITAL_KIND = KIND_INDEX["hospital"]
WORKPLACE_KIND = KIND_INDEX["workplace"]
# Behavior levels thin discretionary contacts; demand at the places agents
# live is left alone (you cannot distance from a cohabitant), which keeps
# within-home transmission alive under quarantine (gamma 1).
RESIDENTIAL_KINDS = (KIND_INDEX["household"], KIND_INDEX["senior_residence"])


def interpolate_gammas(post_lockdown_gamma, n_levels=4):
    """Contact-reduction fraction per behavior level.

    Level 0 is pre-pandemic (0), the top level is quarantine (1), the
    level below it anchors at post_lockdown_gamma, and each level going
    down halves the one above it.

    >>> interpolate_gammas(0.8, 5).tolist()
    [0.0, 0.2, 0.4, 0.8, 1.0]
    """
    if not 2 <= int(n_levels) <= 10:
        raise ConfigError("n_levels must be in [2, 10]")
    if not 0.0 < post_lockdown_gamma < 1.0:
        raise ConfigError("post_lockdown_gamma must be in (0, 1)")
    g = np.zeros(int(n_levels))
    g[-1] = 1.0
    if n_levels >= 3:
        g[-2] = post_lockdown_gamma
        for k in range(n_levels - 3, 0, -1):
            g[k] = g[k + 1] / 2.0
    return g


def is_weekend(day):
    return day % 7 >= 5


@dataclass
class DaySchedule:
    """One day's presence edges plus bookkeeping for recency."""

    agents: np.ndarray     # edge agent ids
    locations: np.ndarray  # edge location ids
    went_out: np.ndarray   # bool per agent: outing today (venue or social)


def build_schedule(pop, day, rng, absent, home_only, recent_outings):
    """Assemble today's presence edges.

    absent: bool[n], hospitalized or dead -- no presence at all.
    home_only: bool[n], quarantined or staying home sick -- household only.
    recent_outings: int[n], outings in the last two days (suppression).
    """
    n = pop.n
    went_out = np.zeros(n, dtype=bool)
    if n == 0:
        empty = np.empty(0, dtype=np.int64)
        return DaySchedule(empty, empty.copy(), went_out)

    present = ~absent
    mobile = present & ~home_only
    weekend = is_weekend(day)

    edge_agents = []
    edge_locs = []

    home_loc = pop.household.copy()

    # --- outings ----------------------------------------------------------
    p_out = P_OUT_WEEKEND if weekend else P_OUT_WEEKDAY
    p_eff = p_out * RECENCY_DECAY ** np.maximum(recent_outings, 0)
    wants_out = mobile & (rng.random(n) < p_eff)
    social = wants_out & (rng.random(n) < SOCIAL_SHARE)
    to_venue = wants_out & ~social

    # children only go out supervised; they follow a household adult
    is_kid = pop.ages < SUPERVISION_AGE
    venue_ids = np.flatnonzero(pop.loc_kind == KIND_INDEX["other"])
    venue_of = np.full(n, -1, dtype=np.int64)
    adults_to_venue = np.flatnonzero(to_venue & ~is_kid)
    if len(venue_ids) and len(adults_to_venue):
        venue_of[adults_to_venue] = rng.choice(venue_ids,
                                               size=len(adults_to_venue))
    n_households = int(pop.household.max()) + 1 if n else 0
    hh_adult_venue = np.full(n_households + 1, -1, dtype=np.int64)
    hh_adult_venue[pop.household[adults_to_venue]] = venue_of[adults_to_venue]
    kids_out = np.flatnonzero(to_venue & is_kid)
    if len(kids_out):
        follow = hh_adult_venue[pop.household[kids_out]]
        ok = follow >= 0
        venue_of[kids_out[ok]] = follow[ok]

    venue_mask = venue_of >= 0
    edge_agents.append(np.flatnonzero(venue_mask))
    edge_locs.append(venue_of[venue_mask])
    went_out |= venue_mask

    # --- gatherings: hosts pull eligible circle members home --------------
    hosts = np.flatnonzero(social & ~is_kid)
    if len(hosts):
        taken = np.zeros(n, dtype=bool)
        for h in rng.permutation(hosts):
            circle = pop.circle_of(h)
            if len(circle) == 0:
                continue
            ok = (mobile[circle] & ~taken[circle] & ~venue_mask[circle]
                  & ~social[circle])
            guests = circle[ok]
            if len(guests) == 0:
                continue
            # supervised outings: a child guest comes along only when an
            # adult of their own household is at the same gathering
            kid_g = is_kid[guests]
            if kid_g.any():
                adult_hh = np.unique(
                    np.r_[pop.household[guests[~kid_g]], pop.household[h]])
                keep = ~kid_g | np.isin(pop.household[guests], adult_hh)
                guests = guests[keep]
                if len(guests) == 0:
                    continue
            taken[guests] = True
            home_loc[guests] = pop.household[h]
            went_out[guests] = True
            went_out[h] = True

    # --- household (possibly redirected to a gathering) -------------------
    at_home = np.flatnonzero(present)
    edge_agents.append(at_home)
    edge_locs.append(home_loc[at_home])

    # --- work and school on weekdays ---------------------------------------
    if not weekend:
        working = np.flatnonzero(mobile & (pop.work_location >= 0))
        edge_agents.append(working)
        edge_locs.append(pop.work_location[working])
        schooling = np.flatnonzero(mobile & (pop.school_location >= 0))
        edge_agents.append(schooling)
        edge_locs.append(pop.school_location[schooling])

    return DaySchedule(
        agents=np.concatenate(edge_agents),
        locations=np.concatenate(edge_locs),
        went_out=went_out,
    )


@dataclass
class Encounters:
    """Struct-of-arrays; one entry per realized encounter."""

    i: np.ndarray
    j: np.ndarray
    location: np.ndarray
    kind: np.ndarray    # location-kind index
    hour: np.ndarray    # within-day time, fractional hours
    minutes: np.ndarray

    def __len__(self):
        return len(self.i)

    @staticmethod
    def empty():
        z = np.empty(0, dtype=np.int64)
        return Encounters(z, z.copy(), z.copy(),
                          np.empty(0, dtype=np.int8),
                          np.empty(0, dtype=np.float64),
                          np.empty(0, dtype=np.float64))

    @staticmethod
    def concat(parts):
        parts = [p for p in parts if len(p)]
        if not parts:
            return Encounters.empty()
        return Encounters(*[np.concatenate([getattr(p, f) for p in parts])
                            for f in ("i", "j", "location", "kind", "hour",
                                      "minutes")])


class ContactMatrices:
    """Per-kind contact means and encounter-duration distributions.

    demand_scale[kind] converts a matrix row sum (realized daily mean)
    into the per-attendance-day sampling demand; it absorbs attendance
    frequency and pairing losses and is fitted empirically so that the
    tallied encounter rates reproduce the matrices themselves.
    """

    def __init__(self, matrices, durations, bins, demand_scale=None):
        self.bins = list(bins)
        self.matrix = {k: np.asarray(m, dtype=float)
                       for k, m in matrices.items()}
        self.row_sum = {k: m.sum(axis=1) for k, m in self.matrix.items()}
        self.durations = dict(durations)
        self.demand_scale = {k: 1.0 for k in self.matrix}
        if demand_scale:
            self.demand_scale.update(demand_scale)

    @classmethod
    def load(cls, matrix_path, durations_path):
        import csv as _csv

        from .config import AGE_BINS
        mats = {}
        with open(matrix_path, newline="") as fh:
            reader = _csv.DictReader(fh)
            for rec in reader:
                kind = rec["location_kind"]
                m = mats.setdefault(kind,
                                    np.zeros((len(AGE_BINS), len(AGE_BINS))))
                row = AGE_BINS.index(rec["age_bin"])
                m[row] = [float(rec[b]) for b in AGE_BINS]
        durations = {}
        demand_scale = {}
        with open(durations_path, newline="") as fh:
            for rec in _csv.DictReader(fh):
                durations[rec["location_kind"]] = (
                    float(rec["median_minutes"]), float(rec["sigma_log"]))
                if rec.get("demand_scale") not in (None, ""):
                    demand_scale[rec["location_kind"]] = \
                        float(rec["demand_scale"])
        return cls(mats, durations, AGE_BINS, demand_scale)

    def demand_kind(self, kind_idx):
        """Demand row source for a location kind (hospitals borrow the
        workplace rows: only staff sample contacts there)."""
        if kind_idx == HOSPITAL_KIND:
            return LOCATION_KINDS[WORKPLACE_KIND]
        return LOCATION_KINDS[kind_idx]

    def time_per_encounter(self, kind_name, bin_i=None, bin_j=None):
        """Lognormal (median minutes, sigma) for a kind; bins accepted for
        interface symmetry, durations are kind-level."""
        return self.durations[kind_name]


def sample_negative_binomial(rng, mean, dispersion):
    """NegBin with var = mean + mean^2/dispersion; mean 0 -> 0."""
    mean = np.asarray(mean, dtype=float)
    out = np.zeros(mean.shape, dtype=np.int64)
    pos = mean > 0
    if pos.any():
        p = dispersion / (dispersion + mean[pos])
        out[pos] = rng.negative_binomial(dispersion, p)
    return out


def sample_contacts(pop, schedule, matrices, gamma_eff, beta, contact_scale,
                    dispersion, day, rng):
    """Realized encounters for one day's schedule.

    Each presence edge draws a NegBin stub count with mean
    row_sum(kind, age bin) * contact_scale * beta * (1 - gamma); stubs are
    folded into pairs within each location (agents' stubs kept contiguous
    under a per-edge random key so partner choice is uniform within the
    pool), self-pairs and odd leftovers dropped.
    """
    agents = schedule.agents
    if len(agents) == 0:
        return Encounters.empty()
    locs = schedule.locations
    kinds = pop.loc_kind[locs]
    weekend = is_weekend(day)

    parts = []
    for kind_idx in np.unique(kinds):
        sel = kinds == kind_idx
        e_agents = agents[sel]
        e_locs = locs[sel]
        kind_name = LOCATION_KINDS[kind_idx]
        demand_name = matrices.demand_kind(kind_idx)
        demand_row = matrices.row_sum[demand_name]
        thin = (1.0 if kind_idx in RESIDENTIAL_KINDS
                else 1.0 - gamma_eff[e_agents])
        mu = (demand_row[pop.age_bin[e_agents]]
              * matrices.demand_scale.get(demand_name, 1.0)
              * contact_scale * beta * thin)
        stubs_per_edge = sample_negative_binomial(rng, mu, dispersion)
        total = int(stubs_per_edge.sum())
        if total < 2:
            continue
        stub_agent = np.repeat(e_agents, stubs_per_edge)
        stub_loc = np.repeat(e_locs, stubs_per_edge)
        stub_key = np.repeat(rng.random(len(e_agents)), stubs_per_edge)
        order = np.lexsort((stub_key, stub_loc))
        stub_agent = stub_agent[order]
        stub_loc = stub_loc[order]

        uniq, starts = np.unique(stub_loc, return_index=True)
        seg_lens = np.diff(np.append(starts, len(stub_loc)))
        halves = seg_lens // 2
        n_pairs = int(halves.sum())
        if n_pairs == 0:
            continue
        pair_seg = np.repeat(np.arange(len(uniq)), halves)
        rank = np.arange(n_pairs) - np.repeat(np.cumsum(halves) - halves,
                                              halves)
        i1 = starts[pair_seg] + rank
        i2 = i1 + halves[pair_seg]
        a = stub_agent[i1]
        b = stub_agent[i2]
        keep = a != b
        a, b = a[keep], b[keep]
        enc_loc = stub_loc[i1][keep]
        m = len(a)
        if m == 0:
            continue

        med, sig = matrices.time_per_encounter(kind_name)
        minutes = np.clip(rng.lognormal(np.log(med), sig, size=m),
                          MINUTES_MIN, MINUTES_MAX)
        lo, hi = ENCOUNTER_HOURS[kind_name][1 if weekend else 0]
        hour = lo + rng.random(m) * (hi - lo)
        parts.append(Encounters(
            i=a.astype(np.int64), j=b.astype(np.int64),
            location=enc_loc.astype(np.int64),
            kind=np.full(m, kind_idx, dtype=np.int8),
            hour=hour, minutes=minutes))
    return Encounters.concat(parts)


def tally_contacts(tally, enc, pop):
    """Accumulate encounter counts into per-kind bin-pair tables.

    tally: dict kind_name -> ndarray [n_bins, n_bins], mutated in place.
    """
    for kind_idx in np.unique(enc.kind):
        sel = enc.kind == kind_idx
        name = LOCATION_KINDS[kind_idx]
        t = tally.setdefault(name, np.zeros((len(AGE_BINS), len(AGE_BINS))))
        bi = pop.age_bin[enc.i[sel]]
        bj = pop.age_bin[enc.j[sel]]
        np.add.at(t, (bi, bj), 1)
        np.add.at(t, (bj, bi), 1)
    return tally


def simulated_contact_matrix(tally, pop, n_days):
    """Convert encounter tallies into per-kind mean-daily-contact matrices.

    Returns {kind: matrix} plus an "all" aggregate; entries are mean daily
    encounters an agent of the row bin has with the column bin.
    """
    n_bins = len(AGE_BINS)
    bin_counts = np.bincount(pop.age_bin, minlength=n_bins).astype(float)
    bin_counts[bin_counts == 0] = np.nan
    out = {}
    total = np.zeros((n_bins, n_bins))
    for kind, t in tally.items():
        out[kind] = t / bin_counts[:, None] / max(n_days, 1)
        total += t
    out["all"] = total / bin_counts[:, None] / max(n_days, 1)
    return out
