"""Transmission calibration sweeps.

Runs small batches of unmitigated simulations over a grid of config
overrides and reports the emergent statistics the defaults are tuned to:
mean incubation, generation time, daily contacts, presymptomatic and
asymptomatic transmission fractions, R-hat, and attack rate. Used to pick
the default transmission rate and viral-load knots; the chosen values are
baked into the config defaults.

Example:
    python scripts/calibrate.py --grid transmission.r=6,9,12 --seeds 5
"""

import argparse
import itertools
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from dctsim.config import load_sim_config  # noqa: E402
from dctsim.engine import Simulation  # noqa: E402
from dctsim.metrics import epi_statistics, rhat  # noqa: E402


def parse_grid(items):
    """["a=1,2", "b=x,y"] -> list of override lists (cartesian)."""
    axes = []
    for item in items:
        key, _, values = item.partition("=")
        axes.append([f"{key}={v}" for v in values.split(",")])
    return [list(combo) for combo in itertools.product(*axes)] if axes \
        else [[]]


def evaluate(overrides, seeds, pop, days, level):
    base = [f"region.population_size={pop}", f"n_days={days}",
            f"behavior.baseline_level={level}", "tracing_method=none"]
    results = []
    for seed in range(seeds):
        cfg = load_sim_config(overrides=base + overrides + [f"seed={seed}"])
        results.append(Simulation(cfg).run(keep_trace=False))
    stats = epi_statistics(results)
    rhats = [rhat(r) for r in results]
    rhats = [x for x in rhats if x is not None]
    stats["rhat"] = float(np.mean(rhats)) if rhats else float("nan")
    stats["attack_rate"] = float(np.mean([r.attack_rate for r in results]))
    return stats


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--grid", nargs="*", default=[],
                    help="key=v1,v2 override axes (cartesian product)")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--pop", type=int, default=3000)
    ap.add_argument("--days", type=int, default=50)
    ap.add_argument("--level", type=int, default=0,
                    help="behavior baseline level (0 = pre-pandemic)")
    args = ap.parse_args()

    cols = ["incub", "gen", "contacts", "presym", "asym", "rhat", "attack"]
    print(f"{'overrides':55s} " + " ".join(f"{c:>8s}" for c in cols))
    for overrides in parse_grid(args.grid):
        t0 = time.time()
        s = evaluate(overrides, args.seeds, args.pop, args.days, args.level)
        vals = [s["mean_incubation_days"], s["mean_generation_days"],
                s["mean_daily_contacts"],
                s["presymptomatic_transmission_fraction"],
                s["asymptomatic_transmission_fraction"], s["rhat"],
                s["attack_rate"]]
        label = " ".join(o.split(".")[-1] for o in overrides) or "(defaults)"
        print(f"{label:55s} " + " ".join(f"{v:8.3f}" for v in vals)
              + f"   [{s['n_infections']} inf, {time.time()-t0:.0f}s]")


if __name__ == "__main__":
    main()
