"""Shared fixtures: small populations and cached mini-runs.

Everything here is deliberately tiny (hundreds of agents, tens of days)
so the unit suites stay fast; the acceptance suite builds its own runs
at protocol scale.
"""

import numpy as np
import pytest

from dctsim.config import load_sim_config
from dctsim.engine import run_simulation
from dctsim.population import generate_population


def make_config(**kw):
    """load_sim_config with overrides given as keyword-ish strings."""
    overrides = [f"{k}={v}" for k, v in kw.items()]
    return load_sim_config(overrides=overrides)


def small_config(pop=600, days=25, seed=0, method="none", **extra):
    overrides = [
        f"region.population_size={pop}",
        f"n_days={days}",
        f"seed={seed}",
        f"tracing_method={method}",
    ]
    overrides += [f"{k}={v}" for k, v in extra.items()]
    return load_sim_config(overrides=overrides)


@pytest.fixture(scope="session")
def pop600():
    cfg = small_config(pop=600)
    rng = np.random.default_rng(7)
    return generate_population(cfg.region, rng)


@pytest.fixture(scope="session")
def run_small():
    """One 800-agent, 30-day no-tracing run with a real epidemic."""
    cfg = small_config(pop=800, days=30, seed=1,
                       init_fraction_sick=0.01)
    return run_simulation(cfg)


@pytest.fixture(scope="session")
def run_heuristic():
    """Heuristic-tracing run, enough scale for tests to get sampled."""
    cfg = small_config(pop=1500, days=35, seed=2, method="heuristic",
                       init_fraction_sick=0.01)
    return run_simulation(cfg)
