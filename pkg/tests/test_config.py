"""Config loading, override precedence, and validation."""

import pytest

from dctsim.config import (ConfigError, SimConfig, apply_overrides,
                           load_sim_config)


def test_defaults_are_valid():
    cfg = load_sim_config()
    assert cfg.region.population_size == 3000
    assert cfg.n_days == 60
    assert cfg.tracing_method == "none"
    assert 0.0 <= cfg.init_fraction_sick <= 1.0
    assert cfg.dct.risk_levels == 16


def test_override_dotted_keys():
    cfg = load_sim_config(overrides=[
        "region.population_size=500",
        "n_days=10",
        "dct.app_uptake=0.4",
        "disease.asymptomatic_fraction=0.5",
    ])
    assert cfg.region.population_size == 500
    assert cfg.n_days == 10
    assert cfg.dct.app_uptake == 0.4
    assert cfg.disease.asymptomatic_fraction == 0.5


def test_override_parses_yaml_scalars():
    cfg = load_sim_config(overrides=[
        "quarantine.on_positive_test=false",
        "behavior.beta=0.75",
        "seed=11",
    ])
    assert cfg.quarantine.on_positive_test is False
    assert cfg.behavior.beta == 0.75
    assert cfg.seed == 11


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        load_sim_config(overrides=["region.no_such_field=1"])
    with pytest.raises(ConfigError):
        load_sim_config(overrides=["no_such_section.x=1"])


def test_bad_override_syntax_rejected():
    with pytest.raises(ConfigError):
        apply_overrides({}, ["missing-equals-sign"])


def test_yaml_file_layering(tmp_path):
    f = tmp_path / "exp.yaml"
    f.write_text("n_days: 12\nseed: 5\n")
    cfg = load_sim_config(yaml_path=f)
    assert cfg.n_days == 12
    assert cfg.seed == 5
    # command line wins over the file
    cfg = load_sim_config(yaml_path=f, overrides=["n_days=8"])
    assert cfg.n_days == 8


def test_missing_yaml_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_sim_config(yaml_path=tmp_path / "nope.yaml")


def test_validation_rejects_bad_fractions():
    with pytest.raises(ConfigError):
        load_sim_config(overrides=["init_fraction_sick=1.5"])
    with pytest.raises(ConfigError):
        load_sim_config(overrides=["behavior.beta=2.0"])
    with pytest.raises(ConfigError):
        load_sim_config(overrides=["dct.app_uptake=-0.1"])


def test_tracing_method_validated():
    for name in ("none", "bct1", "bct2", "heuristic"):
        assert load_sim_config(
            overrides=[f"tracing_method={name}"]).tracing_method == name
    with pytest.raises(ConfigError):
        load_sim_config(overrides=["tracing_method=oracle"])


def test_region_defaults_have_distributions():
    cfg = load_sim_config()
    assert sum(cfg.region.age_distribution.values()) == pytest.approx(1.0)
    assert sum(cfg.region.household_size_distribution.values()) == \
        pytest.approx(1.0)
    assert cfg.region.smartphone_ownership  # non-empty by-age table


def test_sim_config_dataclass_roundtrip():
    cfg = SimConfig()
    assert cfg.behavior.n_levels == 4
    assert cfg.dct.r_mild < cfg.dct.r_moderate < cfg.dct.r_high \
        < cfg.dct.risk_levels - 1
