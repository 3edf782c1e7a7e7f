"""Evaluation metrics computed from RunResult arrays.

The reproduction estimate R-hat is the children/parents ratio over
completed infections: parents are agents whose infection has resolved
(recovered, plus the dead by default, since neither can infect further),
children are the infections they caused. Case curves and the
epidemiological summary (incubation, generation time, transmission-timing
fractions) come straight from the per-agent arrays and the transmission
record.
"""

from dataclasses import dataclass

import numpy as np

from .health_system import NO_DAY


def infection_children(result):
    """Number of infections each agent caused."""
    counts = np.zeros(result.n, dtype=np.int64)
    sources = result.infector[result.infector >= 0]
    if len(sources):
        counts += np.bincount(sources, minlength=result.n)
    return counts


def rhat(result, include_dead=True, day=None):
    """children / parents over resolved infections; None if no parents.

    day: count only parents resolved by the end of that day (default: the
    last simulated day; a death scheduled past the horizon has not
    happened and does not resolve its agent).
    """
    if day is None:
        day = result.n_days - 1
    done = np.full(result.n, np.iinfo(np.int64).max)
    has_rec = result.recovery_day != NO_DAY
    done[has_rec] = result.recovery_day[has_rec]
    if include_dead:
        has_dead = result.death_day != NO_DAY
        done[has_dead] = np.minimum(done[has_dead],
                                    result.death_day[has_dead])
    resolved = done <= day
    parents = np.flatnonzero(resolved)
    if len(parents) == 0:
        return None
    children = infection_children(result)
    return float(children[parents].sum() / len(parents))


@dataclass
class DailyMetrics:
    day: int
    daily_cases_pct: float
    cumulative_cases_pct: float
    prevalence_pct: float
    incidence_per_1000_susceptible: float
    mean_contacts: float
    rhat_t: float   # NaN until at least one parent has resolved


def case_curves(result, include_dead=True):
    """Per-day epidemic curves from the daily aggregates."""
    d = result.daily
    n = max(result.n, 1)
    children = infection_children(result)
    done = np.full(result.n, np.iinfo(np.int64).max)
    has_rec = result.recovery_day != NO_DAY
    done[has_rec] = result.recovery_day[has_rec]
    if include_dead:
        has_dead = result.death_day != NO_DAY
        done[has_dead] = np.minimum(done[has_dead],
                                    result.death_day[has_dead])

    rows = []
    for k in range(len(d["day"])):
        day = int(d["day"][k])
        new = int(d["new_infections"][k])
        s_end = int(d["susceptible"][k])
        s_start = s_end + new
        parents = done <= day
        n_par = int(parents.sum())
        rhat_t = float(children[parents].sum() / n_par) if n_par else \
            float("nan")
        rows.append(DailyMetrics(
            day=day,
            daily_cases_pct=100.0 * new / n,
            cumulative_cases_pct=100.0 * int(d["cum_infected"][k]) / n,
            prevalence_pct=100.0 * (int(d["exposed"][k])
                                    + int(d["infectious"][k])) / n,
            incidence_per_1000_susceptible=(1000.0 * new / s_start
                                            if s_start else 0.0),
            mean_contacts=2.0 * int(d["encounters"][k]) / n,
            rhat_t=rhat_t,
        ))
    return rows


def _transmission_classes(result):
    """Counts of (asymptomatic-source, presymptomatic, post-onset)."""
    tr = result.transmissions
    src = tr["source"]
    if len(src) == 0:
        return 0, 0, 0
    asym = result.asymptomatic[src]
    onset = result.onset_time[src]
    presym = ~asym & (tr["time"] < onset)
    post = ~asym & (tr["time"] >= onset)
    return int(asym.sum()), int(presym.sum()), int(post.sum())


def epi_statistics(results):
    """Pooled epidemiological summary over one or more runs.

    Returns a dict of means plus the sample counts backing them; entries
    with no backing data are NaN.
    """
    if not isinstance(results, (list, tuple)):
        results = [results]

    incubations, inf_starts, recoveries, generations = [], [], [], []
    contacts = []
    n_infections = 0
    n_asym = n_presym = n_post = 0
    for res in results:
        infected = res.ever_infected
        n_infections += int(infected.sum())
        incubations.append(res.incubation[infected])
        inf_starts.append(res.t_inf_start[infected])
        recovered = res.recovery_day != NO_DAY
        recoveries.append((res.recovery_day[recovered]
                           - res.exposure_day[recovered]).astype(float))
        tr = res.transmissions
        if len(tr["source"]):
            generations.append(tr["time"] - res.exposure_time[tr["source"]])
        a, p, q = _transmission_classes(res)
        n_asym += a
        n_presym += p
        n_post += q
        contacts.append(2.0 * res.daily["encounters"].sum()
                        / (res.n * res.n_days))

    def pooled_mean(parts):
        flat = np.concatenate(parts) if parts else np.empty(0)
        return float(flat.mean()) if len(flat) else float("nan")

    classified = n_asym + n_presym + n_post
    sym_trans = n_presym + n_post
    return {
        "n_runs": len(results),
        "n_infections": n_infections,
        "n_transmissions": classified,
        "mean_incubation_days": pooled_mean(incubations),
        "mean_infectiousness_onset_days": pooled_mean(inf_starts),
        "mean_generation_days": pooled_mean(generations),
        "mean_recovery_days": pooled_mean(recoveries),
        "mean_daily_contacts": float(np.mean(contacts)),
        "presymptomatic_transmission_fraction": (
            n_presym / sym_trans if sym_trans else float("nan")),
        "asymptomatic_transmission_fraction": (
            n_asym / classified if classified else float("nan")),
    }
