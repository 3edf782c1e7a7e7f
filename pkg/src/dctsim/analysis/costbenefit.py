"""Health-burden (DALY) and productivity-cost (TPL, ICER) accounting.

Operates on finished runs: either RunResult objects or summaries loaded
back from trace files. DALY = YLL + YLD without discounting or
age-weighting; YLD weights symptomatic time by disability weights keyed
on hospitalization status. TPL prices foregone work hours for agents of
working age, with quarantined-but-well hours discounted by a
work-from-home factor. Currency is unitless; the default wage labels
reports CAD/h.
"""

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..health_system import NO_DAY
from ..trace import read_trace

WORKDAY_HOURS = 8.0
# Day tallies count calendar days; work hours accrue on weekdays only.
WEEKDAY_SHARE = 5.0 / 7.0
WORK_AGE_LO = 25
WORK_AGE_HI = 65
DEFAULT_WAGE = 27.67        # CAD/h
DEFAULT_WFH_FACTOR = 0.49
N_AGE_DECADES = 10


def _data_path(name):
    return resources.files("dctsim.data") / name


class AnalysisError(ValueError):
    pass


@dataclass
class DWTable:
    """Disability weights by care state (2017 GBD values)."""

    symptomatic_not_hospitalized: float = 0.051
    hospitalized: float = 0.133
    critical_care: float = 0.408

    def validate(self):
        for name in ("symptomatic_not_hospitalized", "hospitalized",
                     "critical_care"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise AnalysisError(f"disability weight {name} outside [0,1]")
        return self


def load_disability_weights(path=None):
    src = _data_path("disability_weights.csv") if path is None else path
    values = {}
    with open(src) as fh:
        header = fh.readline()
        assert header.strip() == "state,weight"
        for line in fh:
            state, w = line.strip().split(",")
            values[state] = float(w)
    return DWTable(**values).validate()


def load_life_expectancy(path=None):
    """Abridged remaining-life table -> (ages, years), ascending ages."""
    src = _data_path("life_expectancy.csv") if path is None else path
    rows = np.loadtxt(src, delimiter=",", skiprows=1)
    order = np.argsort(rows[:, 0])
    return rows[order, 0], rows[order, 1]


def remaining_years(ages, table=None):
    """Step lookup: the table row with the largest age <= agent age."""
    bins, years = load_life_expectancy() if table is None else table
    idx = np.clip(np.searchsorted(bins, ages, side="right") - 1,
                  0, len(bins) - 1)
    return years[idx]


def symptomatic_spans(run):
    """Days spent in symptomatic course per agent (0 for asymptomatic
    or never-infected; truncated at the simulation horizon)."""
    onset = np.asarray(run.onset_time, dtype=float)
    end = np.where(run.recovery_day != NO_DAY,
                   run.recovery_day.astype(float),
                   np.where(run.death_day != NO_DAY,
                            np.minimum(run.death_day, run.n_days)
                            .astype(float),
                            float(run.n_days)))
    spans = np.clip(end - onset, 0.0, None)
    return np.where(np.isnan(onset), 0.0, spans)


@dataclass
class DalyBreakdown:
    yll: np.ndarray            # per agent, years
    yld: np.ndarray            # per agent, years
    by_age_decade: np.ndarray  # summed DALYs per decade bin 0-9
    by_sex: np.ndarray         # summed DALYs, index = sex code

    @property
    def per_agent(self):
        return self.yll + self.yld

    @property
    def total(self):
        return float(self.yll.sum() + self.yld.sum())

    @property
    def yll_total(self):
        return float(self.yll.sum())

    @property
    def yld_total(self):
        return float(self.yld.sum())


def compute_dalys(run, life_table=None, dw=None):
    """Per-agent YLL/YLD over one finished run.

    YLL: deaths weighted by remaining life expectancy at the agent's
    age. YLD: symptomatic days split into not-hospitalized, ward, and
    critical-care time, each weighted and converted to years. Aggregate
    DALYs equal the per-agent sum exactly.
    """
    dw = load_disability_weights() if dw is None else dw
    ages = np.asarray(run.ages)
    died = (np.asarray(run.death_day) != NO_DAY) \
        & (np.asarray(run.death_day) < run.n_days)
    yll = np.where(died, remaining_years(ages, life_table), 0.0)

    sym = symptomatic_spans(run)
    hosp = np.asarray(run.hospital_days, dtype=float)
    icu = np.asarray(run.icu_days, dtype=float)
    ward = np.clip(hosp - icu, 0.0, None)
    ambulatory = np.clip(sym - hosp, 0.0, None)
    yld = (dw.symptomatic_not_hospitalized * ambulatory
           + dw.hospitalized * ward
           + dw.critical_care * icu) / 365.0

    per_agent = yll + yld
    decades = np.clip(ages // 10, 0, N_AGE_DECADES - 1).astype(np.int64)
    by_decade = np.bincount(decades, weights=per_agent,
                            minlength=N_AGE_DECADES)
    sexes = np.asarray(run.sex, dtype=np.int64)
    by_sex = np.bincount(sexes, weights=per_agent,
                         minlength=int(sexes.max(initial=0)) + 1)
    return DalyBreakdown(yll=yll, yld=yld, by_age_decade=by_decade,
                         by_sex=by_sex)


def tpl_dollars(quarantine_hours, supervision_hours, illness_hours,
                hourly_wage=DEFAULT_WAGE, wfh_factor=DEFAULT_WFH_FACTOR):
    """Price foregone work hours; only quarantined-but-well time can be
    partially worked from home."""
    return float(hourly_wage * (wfh_factor * quarantine_hours
                                + supervision_hours + illness_hours))


@dataclass
class TplBreakdown:
    quarantine_hours: float
    supervision_hours: float
    illness_hours: float
    total: float
    currency: str = "CAD"


def compute_tpl(run, hourly_wage=DEFAULT_WAGE,
                wfh_factor=DEFAULT_WFH_FACTOR):
    """Temporary productivity loss over one finished run.

    Counts working-age agents only. Quarantine and sick-at-home day
    tallies are calendar days and get the weekday share; supervision
    days are tallied on school days and convert directly.
    """
    if hourly_wage <= 0:
        raise AnalysisError("hourly_wage must be > 0")
    ages = np.asarray(run.ages)
    working = (ages >= WORK_AGE_LO) & (ages <= WORK_AGE_HI)

    def hours(days, weekday_adjust):
        d = np.asarray(days, dtype=float)[working].sum()
        share = WEEKDAY_SHARE if weekday_adjust else 1.0
        return float(d * share * WORKDAY_HOURS)

    q_hours = hours(run.quarantine_days, True)
    sup_hours = hours(run.supervision_days, False)
    ill_hours = hours(np.asarray(run.sick_home_days)
                      + np.asarray(run.hospital_days), True)
    total = tpl_dollars(q_hours, sup_hours, ill_hours, hourly_wage,
                        wfh_factor)
    return TplBreakdown(quarantine_hours=q_hours,
                        supervision_hours=sup_hours,
                        illness_hours=ill_hours, total=total)


@dataclass
class CostReport:
    """Per-method cost summary over a set of runs (means per run)."""

    method: str
    n_runs: int
    dalys: float
    yll: float
    yld: float
    tpl: float
    dalys_se: float = np.nan
    tpl_se: float = np.nan
    daly_by_age_decade: np.ndarray = field(
        default_factory=lambda: np.zeros(N_AGE_DECADES))
    daly_by_sex: np.ndarray = field(default_factory=lambda: np.zeros(2))
    currency: str = "CAD"


def cost_report(runs, method="", hourly_wage=DEFAULT_WAGE,
                wfh_factor=DEFAULT_WFH_FACTOR, life_table=None, dw=None,
                n_resamples=100, sample_size=None, rng=None):
    """Aggregate DALY and TPL accounting across runs of one method."""
    if not runs:
        raise AnalysisError("need at least one run")
    dalys = [compute_dalys(r, life_table, dw) for r in runs]
    tpls = [compute_tpl(r, hourly_wage, wfh_factor) for r in runs]
    d_tot = np.array([d.total for d in dalys])
    t_tot = np.array([t.total for t in tpls])
    d_se = t_se = np.nan
    if len(runs) >= 2 and n_resamples > 0:
        _, d_se = bootstrap_stratified(np.mean, d_tot, n_resamples,
                                       sample_size, rng)
        _, t_se = bootstrap_stratified(np.mean, t_tot, n_resamples,
                                       sample_size, rng)
    n_sex = max(len(d.by_sex) for d in dalys)
    by_sex = np.zeros(n_sex)
    for d in dalys:
        by_sex[:len(d.by_sex)] += d.by_sex / len(dalys)
    return CostReport(
        method=method, n_runs=len(runs),
        dalys=float(d_tot.mean()),
        yll=float(np.mean([d.yll_total for d in dalys])),
        yld=float(np.mean([d.yld_total for d in dalys])),
        tpl=float(t_tot.mean()), dalys_se=float(d_se), tpl_se=float(t_se),
        daly_by_age_decade=np.mean([d.by_age_decade for d in dalys],
                                   axis=0),
        daly_by_sex=by_sex)


@dataclass
class ICERResult:
    """Incremental cost per DALY averted against a baseline.

    status: "ok" (value valid), "dominant" (method saves money and
    health; no ratio emitted), "dominated" (costs more, averts nothing),
    or "undefined" (no DALY difference).
    """

    value: float
    status: str
    delta_tpl: float
    dalys_averted: float


def icer(method_report, baseline_report):
    """ICER of a method against a baseline report."""
    d_tpl = method_report.tpl - baseline_report.tpl
    averted = baseline_report.dalys - method_report.dalys
    if averted > 0 and d_tpl < 0:
        return ICERResult(np.nan, "dominant", d_tpl, averted)
    if averted > 0:
        return ICERResult(float(d_tpl / averted), "ok", d_tpl, averted)
    if averted == 0:
        return ICERResult(np.nan, "undefined", d_tpl, averted)
    return ICERResult(np.nan, "dominated", d_tpl, averted)


def bootstrap_stratified(metric_fn, runs, n_resamples=100,
                         sample_size=None, rng=None):
    """Resample runs with replacement; (mean, SE) of the metric.

    metric_fn maps a sequence of runs to one number. sample_size
    defaults to len(runs); the reference protocol resamples 6 runs 100
    times.
    """
    runs = list(runs)
    if len(runs) < 2:
        raise AnalysisError("need at least 2 runs to bootstrap")
    rng = np.random.default_rng(0) if rng is None else rng
    k = len(runs) if sample_size is None else int(sample_size)
    vals = np.empty(n_resamples)
    for i in range(n_resamples):
        idx = rng.integers(0, len(runs), size=k)
        vals[i] = metric_fn([runs[j] for j in idx])
    return float(vals.mean()), float(vals.std(ddof=0))


@dataclass
class RunSummary:
    """Per-agent arrays reconstructed from a trace file.

    Carries the fields the metric and cost functions read, so those
    accept either this or a live RunResult.
    """

    n: int
    n_days: int
    ages: np.ndarray
    sex: np.ndarray
    status: np.ndarray
    asymptomatic: np.ndarray
    infector: np.ndarray
    exposure_day: np.ndarray
    onset_time: np.ndarray
    recovery_day: np.ndarray
    death_day: np.ndarray
    quarantine_days: np.ndarray
    sick_home_days: np.ndarray
    supervision_days: np.ndarray
    hospital_days: np.ndarray
    icu_days: np.ndarray
    daily: dict


def load_run_summary(trace_path):
    """Rebuild a RunSummary from a persisted trace file."""
    _, events = read_trace(trace_path)
    agents = None
    daily_rows = []
    for ev in events:
        if ev.get("event") == "agents":
            agents = ev
        elif ev.get("event") == "daily":
            daily_rows.append(ev)
    if agents is None:
        raise AnalysisError(f"{trace_path}: trace has no agents summary")
    onset = np.array([np.nan if v is None else v
                      for v in agents["onset_time"]], dtype=float)
    daily = {}
    if daily_rows:
        keys = [k for k in daily_rows[0] if k != "event"]
        for k in keys:
            daily[k] = np.array([row[k] for row in daily_rows])
    arr = lambda key, dt: np.array(agents[key], dtype=dt)
    return RunSummary(
        n=len(onset), n_days=int(agents["day"]),
        ages=arr("age", np.int64), sex=arr("sex", np.int8),
        status=arr("status", np.int8),
        asymptomatic=arr("asymptomatic", bool),
        infector=arr("infector", np.int64),
        exposure_day=arr("exposure_day", np.int64), onset_time=onset,
        recovery_day=arr("recovery_day", np.int64),
        death_day=arr("death_day", np.int64),
        quarantine_days=arr("quarantine_days", np.int64),
        sick_home_days=arr("sick_home_days", np.int64),
        supervision_days=arr("supervision_days", np.int64),
        hospital_days=arr("hospital_days", np.int64),
        icu_days=arr("icu_days", np.int64), daily=daily)
