"""Configuration schema and loading.

Simulator inputs live in two layered structures: a RegionConfig describing
the synthetic population and its infrastructure, and a SimConfig bundling
region, scenario, and algorithm parameters. Both load from YAML with strict
key checking so a typo fails fast instead of silently running defaults.

Override precedence: dataclass defaults < YAML file < command line
``--set key=value`` pairs (dotted paths into the nested structure).
"""

import copy
import dataclasses
import importlib.resources
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

# Five-year age bins used by demographic tables and contact matrices.
AGE_BINS = [
    "0-4", "5-9", "10-14", "15-19", "20-24", "25-29", "30-34", "35-39",
    "40-44", "45-49", "50-54", "55-59", "60-64", "65-69", "70-74", "75-79",
    "80+",
]

# Decade bins used by health tables (condition prevalence, hospitalization).
DECADE_BINS = [
    "0-9", "10-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-79",
    "80+",
]

LOCATION_KINDS = [
    "household", "senior_residence", "workplace", "school", "other",
    "hospital",
]

TRACING_METHODS = ["none", "bct1", "bct2", "heuristic"]

PRE_EXISTING_CONDITIONS = [
    "heart_disease", "stroke", "asthma", "copd", "cancer", "diabetes",
    "obesity_1_2", "obesity_3", "chronic_kidney_disease", "asplenia",
    "immunosuppression", "smoking",
]


class ConfigError(ValueError):
    """Raised for malformed, unknown, or out-of-range configuration keys."""


def age_to_bin(age):
    """Index into AGE_BINS for an integer age."""
    return min(int(age) // 5, len(AGE_BINS) - 1)


def age_to_decade(age):
    """Index into DECADE_BINS for an integer age."""
    return min(int(age) // 10, len(DECADE_BINS) - 1)


def data_path(name):
    """Path to a bundled data file shipped inside the package."""
    return Path(importlib.resources.files("dctsim")) / "data" / name


@dataclass
class RegionConfig:
    """Synthetic-region demographics and infrastructure.

    Distribution maps are keyed by AGE_BINS labels and must sum to one
    where they describe a partition. File fields name CSVs, resolved
    relative to the YAML they were loaded from, falling back to the
    bundled data directory.
    """

    name: str = "default-region"
    population_size: int = 3000
    age_distribution: dict = field(default_factory=dict)
    female_fraction: dict = field(default_factory=dict)
    household_size_distribution: dict = field(default_factory=dict)
    # Composition split for households of size >= 3. Size-2 households are
    # couples or pairs sampled from the same machinery.
    household_composition: dict = field(default_factory=lambda: {
        "couple_with_kids": 0.5, "single_parent_with_kids": 0.2,
        "random": 0.3,
    })
    # Fraction of agents 65+ living in collective senior residences.
    senior_residence_fraction: float = 0.05
    senior_residence_size: int = 20
    school_attendance: dict = field(default_factory=dict)
    employment_age_range: list = field(default_factory=lambda: [17, 65])
    employment_rate: float = 1.0
    smartphone_ownership: dict = field(default_factory=dict)
    hospitals_per_100k: float = 1.99
    hospital_beds_per_hospital: int = 60
    icu_beds_per_hospital: int = 10
    workplace_size_mean: float = 12.0
    school_size_mean: float = 120.0
    # Non-residential venue pool (stores, parks, gyms, restaurants).
    other_sites_per_1k: float = 20.0
    condition_prevalence_file: str = "condition_prevalence.csv"
    contact_matrix_file: str = "contact_matrices.csv"
    _base_dir: str = ""

    def validate(self):
        if self.population_size < 0:
            raise ConfigError("region.population_size must be >= 0")
        for key in ("age_distribution", "household_size_distribution"):
            dist = getattr(self, key)
            if not dist:
                raise ConfigError(f"region.{key} is required")
            total = sum(dist.values())
            if abs(total - 1.0) > 1e-6:
                raise ConfigError(
                    f"region.{key} sums to {total:.8f}, expected 1.0")
            if any(v < 0 for v in dist.values()):
                raise ConfigError(f"region.{key} has negative entries")
        for key in ("age_distribution", "female_fraction",
                    "school_attendance", "smartphone_ownership"):
            bad = set(getattr(self, key)) - set(AGE_BINS)
            if bad:
                raise ConfigError(
                    f"region.{key} has unknown age bins {sorted(bad)}")
        comp = self.household_composition
        bad = set(comp) - {"couple_with_kids", "single_parent_with_kids",
                           "random"}
        if bad:
            raise ConfigError(
                f"region.household_composition unknown keys {sorted(bad)}")
        if abs(sum(comp.values()) - 1.0) > 1e-6:
            raise ConfigError("region.household_composition must sum to 1")
        if not 0 <= self.senior_residence_fraction <= 1:
            raise ConfigError("region.senior_residence_fraction in [0,1]")
        lo, hi = self.employment_age_range
        if not 0 <= lo < hi:
            raise ConfigError("region.employment_age_range must be [lo, hi]")
        for key in ("female_fraction", "school_attendance",
                    "smartphone_ownership"):
            if any(not 0 <= v <= 1 for v in getattr(self, key).values()):
                raise ConfigError(f"region.{key} entries must lie in [0,1]")
        return self

    def resolve_file(self, name):
        """Resolve a data file next to the region YAML, else bundled."""
        if self._base_dir:
            cand = Path(self._base_dir) / name
            if cand.exists():
                return cand
        cand = Path(name)
        if cand.is_absolute() and cand.exists():
            return cand
        return data_path(name)


@dataclass
class BehaviorConfig:
    """Mobility levels and population-wide contact scaling.

    gamma(level) is the fraction by which contact means shrink at that
    level: level 0 is pre-pandemic (gamma 0), the top level is quarantine
    (gamma 1), the level below it anchors at post_lockdown_gamma, and each
    level halves the one above it. beta is an additional global thinning
    applied to everyone regardless of level.
    """

    n_levels: int = 4
    post_lockdown_gamma: float = 0.8
    baseline_level: int = 0
    beta: float = 1.0
    # Multiplier on every contact-matrix mean; lets one knob recalibrate
    # overall encounter volume without touching the matrices.
    contact_scale: float = 1.0
    # NegBin dispersion for daily contact counts (var = mu + mu^2/k).
    negbin_dispersion: float = 0.5
    # Per-level probability that an agent ignores the level for a day and
    # behaves as level 0 instead (imperfect adherence).
    dropout: list = field(default_factory=lambda: [0.0, 0.01, 0.02, 0.05])

    def validate(self):
        if not 2 <= self.n_levels <= 10:
            raise ConfigError("behavior.n_levels must be in [2, 10]")
        if not 0.0 < self.post_lockdown_gamma < 1.0:
            raise ConfigError("behavior.post_lockdown_gamma in (0,1)")
        if not 0 <= self.baseline_level < self.n_levels:
            raise ConfigError("behavior.baseline_level out of range")
        if not 0.0 <= self.beta <= 1.5:
            raise ConfigError("behavior.beta must lie in [0, 1.5]")
        if not 0.0 < self.contact_scale <= 10.0:
            raise ConfigError("behavior.contact_scale must lie in (0, 10]")
        if self.negbin_dispersion <= 0:
            raise ConfigError("behavior.negbin_dispersion must be > 0")
        if len(self.dropout) != self.n_levels:
            raise ConfigError("behavior.dropout needs one entry per level")
        if any(not 0 <= d <= 1 for d in self.dropout):
            raise ConfigError("behavior.dropout entries in [0,1]")
        return self


@dataclass
class TransmissionConfig:
    """Dose-response scale and per-context modifiers."""

    # Global transmission rate multiplying every exposure hazard.
    r: float = 10.0
    # Normalizer dividing the viral-load integral (kept with the bundled
    # constant tables; external-reference default).
    infectiousness_normalizer: float = 1.0
    constants_file: str = "transmission_constants.csv"
    # Surface/air contamination channel; ships disabled and stays off in
    # every bundled experiment preset.
    environmental: bool = False
    environmental_decay_days: float = 1.0
    environmental_rate: float = 0.0
    min_transmission_minutes: float = 15.0

    def validate(self):
        if self.r < 0:
            raise ConfigError("transmission.r must be >= 0")
        if self.infectiousness_normalizer <= 0:
            raise ConfigError(
                "transmission.infectiousness_normalizer must be > 0")
        if self.min_transmission_minutes < 0:
            raise ConfigError("transmission.min_transmission_minutes >= 0")
        return self


@dataclass
class DiseaseConfig:
    """Within-host course, viral-load curve, and symptom sampling knobs.

    Times are in days. The effective viral load is piecewise linear with
    knots (rise start, peak, plateau end, decay end), zero outside, peaked
    shortly before symptom onset. Clinical recovery runs past the decay
    end; infectiousness is concentrated around onset.
    """

    asymptomatic_fraction: float = 0.32
    # Lognormal incubation, mean exp(mu + sd^2/2) ~ 5.5 days.
    incubation_logmean: float = 1.6175
    incubation_logsd: float = 0.42
    incubation_min: float = 2.0
    # Infectiousness starts this long before symptom onset.
    onset_gap_mean: float = 2.0
    onset_gap_sd: float = 0.5
    onset_gap_bounds: list = field(default_factory=lambda: [0.7, 3.5])
    # Viral-load peak leads symptom onset by this much.
    peak_lead_mean: float = 0.7
    peak_lead_sd: float = 0.1
    plateau_mean: float = 0.9
    plateau_sd: float = 0.3
    decay_mean: float = 2.4
    decay_sd: float = 0.7
    # Clinical recovery measured from symptom onset.
    recovery_gap_mean: float = 13.4
    recovery_gap_sd: float = 2.7
    peak_height_mean: float = 0.70
    peak_height_sd: float = 0.14
    # Linear shift of peak height with age, +coef at age 100 vs age 50.
    peak_height_age_coef: float = 0.10
    # Probability a symptomatic agent stays home all day, by current
    # course severity (sick behavior, not an intervention).
    stay_home_when_sick: dict = field(default_factory=lambda: {
        "mild": 0.30, "moderate": 0.60, "severe": 0.95})
    # Background non-target illnesses feeding false symptom reports.
    cold_daily_hazard: float = 0.0015
    flu_daily_hazard: float = 0.0008
    symptom_table_file: str = "symptom_tables.csv"
    hospitalization_file: str = "hospitalization.csv"
    condition_risk_file: str = "condition_risk_ratios.csv"

    def validate(self):
        if not 0 <= self.asymptomatic_fraction <= 1:
            raise ConfigError("disease.asymptomatic_fraction in [0,1]")
        lo, hi = self.onset_gap_bounds
        if not 0 < lo <= hi:
            raise ConfigError("disease.onset_gap_bounds must be 0 < lo <= hi")
        for key in ("incubation_logsd", "onset_gap_sd", "plateau_mean",
                    "decay_mean", "recovery_gap_mean", "peak_height_mean"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"disease.{key} must be > 0")
        bad = set(self.stay_home_when_sick) - {"mild", "moderate", "severe"}
        if bad:
            raise ConfigError(
                f"disease.stay_home_when_sick unknown keys {sorted(bad)}")
        return self


@dataclass
class TestingConfig:
    """Lab capacity, result timing, and retention windows."""

    # Daily PCR capacity as a fraction of the population.
    capacity_fraction: float = 0.001
    result_delay_days: int = 2
    # Probability a symptomatic agent seeks a test, by current severity.
    seek_probability: dict = field(default_factory=lambda: {
        "mild": 0.3, "moderate": 0.6, "severe": 0.95})
    # Probability of seeking a test when the app recommendation first
    # rises to moderate or above.
    app_rec_seek_probability: float = 0.5
    false_negative_file: str = "test_false_negative.csv"
    specificity: float = 1.0
    # Result retention: positives kept d_max days, negatives d_min days.
    positive_retention_days: int = 14
    negative_retention_days: int = 2
    isolation_days_after_positive: int = 12

    def validate(self):
        if not 0 <= self.capacity_fraction <= 1:
            raise ConfigError("testing.capacity_fraction in [0,1]")
        if self.result_delay_days < 0:
            raise ConfigError("testing.result_delay_days >= 0")
        bad = set(self.seek_probability) - {"mild", "moderate", "severe"}
        if bad:
            raise ConfigError(
                f"testing.seek_probability unknown keys {sorted(bad)}")
        if not 0 <= self.specificity <= 1:
            raise ConfigError("testing.specificity in [0,1]")
        if self.negative_retention_days > self.positive_retention_days:
            raise ConfigError("testing retention: negatives kept longer "
                              "than positives makes the risk window ill "
                              "defined")
        return self


@dataclass
class QuarantineConfig:
    """Which events force quarantine and for how long."""

    on_self_report: bool = True
    on_positive_test: bool = True
    on_app_recommendation: bool = True
    on_household_member: bool = True
    # Probability a symptomatic agent self-reports and quarantines, by
    # current severity (applies to everyone, app user or not).
    self_report_probability: dict = field(default_factory=lambda: {
        "moderate": 0.3, "severe": 0.7})
    # Rolling self-report quarantine while symptoms persist.
    self_report_days: int = 7
    # Isolation while a test result is pending.
    while_awaiting_result: bool = True

    def validate(self):
        if self.self_report_days < 0:
            raise ConfigError("quarantine.self_report_days >= 0")
        bad = set(self.self_report_probability) - {"mild", "moderate",
                                                   "severe"}
        if bad:
            raise ConfigError(
                f"quarantine.self_report_probability unknown keys "
                f"{sorted(bad)}")
        if any(not 0 <= v <= 1
               for v in self.self_report_probability.values()):
            raise ConfigError(
                "quarantine.self_report_probability entries in [0,1]")
        return self


@dataclass
class DctConfig:
    """Digital contact tracing app and risk-level protocol parameters."""

    # Fraction of smartphone owners running the app.
    app_uptake: float = 0.6
    risk_levels: int = 16
    r_mild: int = 6
    r_moderate: int = 10
    r_high: int = 12
    batches_per_day: int = 4
    max_new_clusters_per_day: int = 16
    # Window (days) of stored encounters and risk history; shared with the
    # positive-test retention window.
    tracing_days: int = 14
    # Recovery rule: a stored message of each class blocks the reset while
    # its newest receipt is at most this many days old (inclusive offset;
    # mild horizon 1 covers today and yesterday).
    recovery_horizon_high: int = 7
    recovery_horizon_moderate: int = 4
    recovery_horizon_mild: int = 1
    # Half width of the day window zeroed around a negative test.
    negative_test_window: int = 8
    # One-hop rebroadcast level used by second-order binary tracing.
    second_order_level: int = 14
    # Symptom reporting noise in the app.
    symptom_report_dropout: float = 0.05
    symptom_report_dropin: float = 0.001
    bluetooth_exchange_max_m: float = 2.0
    bluetooth_exchange_min_minutes: float = 15.0
    # Reported-symptom severity tiers the heuristic keys on; anything
    # reported but in neither list counts as the mild tier.
    symptom_tiers_high: list = field(default_factory=lambda: [
        "loss_of_taste", "trouble_breathing", "severe_chest_pain"])
    symptom_tiers_moderate: list = field(default_factory=lambda: [
        "fever", "cough", "chills"])

    def validate(self):
        if not 0 <= self.app_uptake <= 1:
            raise ConfigError("dct.app_uptake in [0,1]")
        if self.risk_levels < 2:
            raise ConfigError("dct.risk_levels must be >= 2")
        rmax = self.risk_levels - 1
        if not 0 < self.r_mild < self.r_moderate < self.r_high <= rmax:
            raise ConfigError(
                "dct risk anchors must satisfy 0 < r_mild < r_moderate "
                "< r_high <= max level")
        if self.batches_per_day < 1:
            raise ConfigError("dct.batches_per_day >= 1")
        if self.tracing_days < 1:
            raise ConfigError("dct.tracing_days >= 1")
        if not 0 <= self.second_order_level <= rmax:
            raise ConfigError("dct.second_order_level out of range")
        for key in ("symptom_report_dropout", "symptom_report_dropin"):
            if not 0 <= getattr(self, key) <= 1:
                raise ConfigError(f"dct.{key} in [0,1]")
        overlap = set(self.symptom_tiers_high) & set(self.symptom_tiers_moderate)
        if overlap:
            raise ConfigError(
                f"dct symptom tiers overlap on {sorted(overlap)}")
        return self


@dataclass
class OutputConfig:
    """Trace verbosity. Aggregates are always recorded."""

    # Per-encounter records blow up trace size; day-level tallies by age
    # bin pair and location kind are always kept and suffice for contact
    # statistics.
    record_encounters: bool = False

    def validate(self):
        return self


@dataclass
class SimConfig:
    """Top-level scenario: region, horizon, seeding, and interventions."""

    region: RegionConfig = field(default_factory=RegionConfig)
    region_file: str = "region_default.yaml"
    n_days: int = 60
    # Fraction of the population seeded exposed on day 0 (at least one
    # agent whenever the fraction is positive).
    init_fraction_sick: float = 0.002
    seed: int = 0
    tick_hours: int = 1
    tracing_method: str = "none"
    behavior: BehaviorConfig = field(default_factory=BehaviorConfig)
    transmission: TransmissionConfig = field(default_factory=TransmissionConfig)
    disease: DiseaseConfig = field(default_factory=DiseaseConfig)
    testing: TestingConfig = field(default_factory=TestingConfig)
    quarantine: QuarantineConfig = field(default_factory=QuarantineConfig)
    dct: DctConfig = field(default_factory=DctConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self):
        if self.n_days < 1:
            raise ConfigError("n_days must be >= 1")
        if not 0 <= self.init_fraction_sick <= 1:
            raise ConfigError("init_fraction_sick in [0,1]")
        if self.tick_hours not in (1, 2, 3, 4, 6, 8, 12, 24):
            raise ConfigError("tick_hours must divide 24")
        if self.tracing_method not in TRACING_METHODS:
            raise ConfigError(
                f"tracing_method must be one of {TRACING_METHODS}, "
                f"got {self.tracing_method!r}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        self.region.validate()
        self.behavior.validate()
        self.transmission.validate()
        self.disease.validate()
        self.testing.validate()
        self.quarantine.validate()
        self.dct.validate()
        self.output.validate()
        return self

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["region"].pop("_base_dir", None)
        return d


_SECTION_TYPES = {
    "region": RegionConfig,
    "behavior": BehaviorConfig,
    "transmission": TransmissionConfig,
    "disease": DiseaseConfig,
    "testing": TestingConfig,
    "quarantine": QuarantineConfig,
    "dct": DctConfig,
    "output": OutputConfig,
}


def _build_dataclass(cls, data, path):
    """Instantiate cls from a mapping, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"'{path}' must be a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} under '{path}'")
    obj = cls()
    for key, value in data.items():
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            value = _build_dataclass(type(current), value, f"{path}.{key}")
        setattr(obj, key, value)
    return obj


def load_region(source):
    """Load a RegionConfig from a YAML path or bundled file name."""
    path = Path(source)
    if not path.exists():
        path = data_path(str(source))
    if not path.exists():
        raise ConfigError(f"region file not found: {source}")
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    region = _build_dataclass(RegionConfig, raw, "region")
    region._base_dir = str(path.parent)
    return region.validate()


def apply_overrides(raw, overrides):
    """Apply 'a.b.c=value' strings onto a nested config dict.

    Values parse as YAML scalars, so `--set behavior.beta=0.5` yields a
    float and `--set tracing_method=bct1` a string.
    """
    raw = copy.deepcopy(raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        dotted, text = item.split("=", 1)
        keys = [k for k in dotted.strip().split(".") if k]
        if not keys:
            raise ConfigError(f"override {item!r} has an empty key")
        node = raw
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} descends into a scalar")
        node[keys[-1]] = yaml.safe_load(text)
    return raw


def load_sim_config(yaml_path=None, overrides=None):
    """Build a validated SimConfig from optional YAML plus overrides."""
    raw = {}
    base_dir = None
    if yaml_path is not None:
        with open(yaml_path) as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{yaml_path} does not contain a mapping")
        base_dir = Path(yaml_path).parent
    raw = apply_overrides(raw, overrides)

    region_inline = raw.pop("region", None)
    region_file = raw.pop("region_file", None)

    cfg = _build_dataclass(SimConfig, raw, "config")
    if region_file:
        src = Path(region_file)
        if base_dir is not None and not src.is_absolute() and not src.exists():
            cand = base_dir / src
            if cand.exists():
                src = cand
        cfg.region = load_region(src)
        cfg.region_file = str(region_file)
    else:
        cfg.region = load_region(cfg.region_file)
    if region_inline:
        merged = dataclasses.asdict(cfg.region)
        base_keep = merged.pop("_base_dir", "")
        unknown = set(region_inline) - set(merged)
        if unknown:
            raise ConfigError(
                f"unknown key(s) {sorted(unknown)} under 'region'")
        merged.update(region_inline)
        region = _build_dataclass(RegionConfig, merged, "region")
        region._base_dir = base_keep
        cfg.region = region
    return cfg.validate()


def output_root(default="runs"):
    """Output directory root, overridable via DCTSIM_OUTPUT_ROOT."""
    return Path(os.environ.get("DCTSIM_OUTPUT_ROOT", default))

