"""Command-line experiment runner.

Subcommands: run (one simulation -> trace + daily CSV), sweep (method x
beta x adoption x seed grid with a resumable manifest), compare (GP
Pareto fits, pairwise advantages at the control threshold, DALY/TPL/ICER
tables from a sweep's traces), validate-config, and epi-stats (multi-seed
emergent-epidemiology table). Output locations default under
DCTSIM_OUTPUT_ROOT (else ./runs).
"""

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis.costbenefit import (cost_report, icer, load_run_summary)
from .analysis.gp import GPFitError, delta_rhat, gp_fit
from .config import ConfigError, load_sim_config, output_root
from .engine import run_simulation
from .metrics import case_curves, epi_statistics, rhat
from .trace import write_daily_csv

MANIFEST_SCHEMA = "dctsim-manifest-v1"


def _fail(message, code=2):
    print(f"error: {message}", file=sys.stderr)
    raise SystemExit(code)


def _load_config(args, extra=()):
    if args.config is not None and not Path(args.config).exists():
        _fail(f"config file not found: {args.config}")
    try:
        return load_sim_config(args.config,
                               list(args.set or []) + list(extra))
    except ConfigError as exc:
        _fail(f"invalid config: {exc}")


def _write_json(path, payload):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    fd, tmp = tempfile.mkstemp(dir=str(Path(path).parent), suffix=".part")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _daily_rows(result):
    """Daily aggregates merged with the derived case-curve columns."""
    curves = case_curves(result)
    rows = []
    for k in range(len(result.daily["day"])):
        row = {key: result.daily[key][k] for key in result.daily}
        c = curves[k]
        row.update(daily_cases_pct=round(c.daily_cases_pct, 6),
                   cumulative_cases_pct=round(c.cumulative_cases_pct, 6),
                   prevalence_pct=round(c.prevalence_pct, 6),
                   incidence_per_1000_susceptible=round(
                       c.incidence_per_1000_susceptible, 6),
                   mean_contacts=round(c.mean_contacts, 4),
                   rhat_t=round(c.rhat_t, 4) if np.isfinite(c.rhat_t)
                   else "")
        rows.append(row)
    return rows


def cmd_run(args):
    overrides = []
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    cfg = _load_config(args, overrides)
    out = Path(args.out) if args.out else output_root() / "single"
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / "trace.jsonl"
    result = run_simulation(cfg, trace_path=str(trace_path),
                            keep_trace=False)
    write_daily_csv(out / "daily.csv", _daily_rows(result))
    r = rhat(result)
    print(f"run complete: {cfg.n_days} days, pop {result.n}, "
          f"attack {result.attack_rate:.4f}, "
          f"rhat {'n/a' if r is None else f'{r:.3f}'}")
    print(f"wrote {trace_path} and {out / 'daily.csv'}")
    return 0


def _parse_floats(text):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_seeds(text):
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _cell_name(method, beta, adoption, seed):
    return f"{method}-b{beta:g}-a{adoption:g}-s{seed}.trace"


def _run_cell(payload):
    """Sweep worker: one simulation written atomically to its trace."""
    config_path, overrides, trace_path = payload
    try:
        cfg = load_sim_config(config_path, overrides)
        run_simulation(cfg, trace_path=trace_path, keep_trace=False)
        return "done", ""
    except Exception as exc:   # recorded per cell, sweep continues
        return "error", f"{type(exc).__name__}: {exc}"


def cmd_sweep(args):
    _load_config(args)   # fail fast on a bad base config
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    betas = _parse_floats(args.betas)
    adoptions = _parse_floats(args.adoptions)
    seeds = _parse_seeds(args.seeds)
    if not (methods and betas and adoptions and seeds):
        _fail("sweep grid must be non-empty on every axis")
    out = Path(args.out) if args.out else output_root() / "sweep"
    out.mkdir(parents=True, exist_ok=True)

    cells, jobs = [], []
    for method in methods:
        for beta in betas:
            for adoption in adoptions:
                for seed in seeds:
                    trace = out / _cell_name(method, beta, adoption, seed)
                    cell = {"method": method, "beta": beta,
                            "adoption": adoption, "seed": seed,
                            "trace": trace.name}
                    cells.append(cell)
                    if trace.exists():
                        cell["status"] = "cached"
                        continue
                    overrides = (list(args.set or [])
                                 + [f"tracing_method={method}",
                                    f"behavior.beta={beta}",
                                    f"dct.app_uptake={adoption}",
                                    f"seed={seed}"])
                    jobs.append((cell, (args.config, overrides,
                                        str(trace))))

    print(f"sweep: {len(cells)} cells, {len(jobs)} to run, "
          f"{len(cells) - len(jobs)} cached", flush=True)
    if jobs:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                outcomes = list(pool.map(_run_cell,
                                         [p for _, p in jobs]))
        else:
            outcomes = [_run_cell(p) for _, p in jobs]
        for (cell, _), (status, error) in zip(jobs, outcomes):
            cell["status"] = status
            if error:
                cell["error"] = error
            print(f"  {cell['trace']}: {status}"
                  + (f" ({error})" if error else ""), flush=True)

    manifest = {"schema": MANIFEST_SCHEMA,
                "config": args.config,
                "overrides": list(args.set or []),
                "cells": cells}
    _write_json(out / "manifest.json", manifest)
    failed = [c for c in cells if c["status"] == "error"]
    print(f"manifest: {out / 'manifest.json'}"
          + (f" ({len(failed)} failed)" if failed else ""))
    return 1 if failed else 0


def read_manifest(path):
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"{path}: not a {MANIFEST_SCHEMA} file")
    return manifest


def _mean_contacts(summary):
    enc = summary.daily["encounters"]
    days = max(len(enc), 1)
    return 2.0 * float(enc.sum()) / (summary.n * days)


def cmd_compare(args):
    manifest_path = Path(args.manifest)
    if not manifest_path.exists():
        _fail(f"manifest not found: {manifest_path}")
    manifest = read_manifest(manifest_path)
    base_dir = manifest_path.parent
    by_method = {}
    for cell in manifest["cells"]:
        if cell["status"] not in ("done", "cached"):
            continue
        by_method.setdefault(cell["method"], []).append(cell)
    if len(by_method) < 2:
        _fail("compare needs at least two methods in the manifest")
    if args.baseline not in by_method:
        _fail(f"baseline {args.baseline!r} not in manifest "
              f"(have {sorted(by_method)})")
    out = Path(args.out) if args.out else manifest_path.parent / "compare"
    out.mkdir(parents=True, exist_ok=True)

    points_rows, fits, runs_by_method = [], {}, {}
    for method, cells in sorted(by_method.items()):
        pts = []
        for cell in cells:
            summary = load_run_summary(base_dir / cell["trace"])
            runs_by_method.setdefault(method, []).append(summary)
            r = rhat(summary)
            if r is None:
                continue  # no resolved cases; still counts toward costs
            c = _mean_contacts(summary)
            pts.append((c, r))
            points_rows.append({"method": method, "beta": cell["beta"],
                                "adoption": cell["adoption"],
                                "seed": cell["seed"],
                                "contacts": round(c, 4),
                                "rhat": round(r, 4)})
        try:
            fits[method] = gp_fit(pts)
        except GPFitError as exc:
            print(f"warning: {method}: GP fit failed ({exc})",
                  file=sys.stderr)
    write_daily_csv(out / "pareto_points.csv", points_rows)

    grid_rows = []
    for method, fit in sorted(fits.items()):
        xs = np.linspace(fit.x.min(), fit.x.max(), 101)
        lo, hi = fit.ci(xs)
        mean = np.atleast_1d(fit.mean(xs))
        for x, m, a, b in zip(xs, mean, lo, hi):
            grid_rows.append({"method": method, "contacts": round(x, 4),
                              "rhat_mean": round(float(m), 4),
                              "ci_low": round(float(a), 4),
                              "ci_high": round(float(b), 4)})
    write_daily_csv(out / "gp_curves.csv", grid_rows)

    delta_rows = []
    base_fit = fits.get(args.baseline)
    for method, fit in sorted(fits.items()):
        if method == args.baseline or base_fit is None:
            continue
        d = delta_rhat(fit, base_fit, n_resamples=args.resamples)
        if not d.comparable:
            print(f"warning: {method}: posterior mean never crosses 1 "
                  "inside the observed contact range; not comparable",
                  file=sys.stderr)
        delta_rows.append({
            "method": method, "baseline": args.baseline,
            "comparable": d.comparable,
            "delta_rhat": round(d.value, 4) if d.comparable else "",
            "crossing_contacts": round(d.crossing, 4)
            if d.comparable and np.isfinite(d.crossing) else "",
            "ci_low": round(d.ci_low, 4) if np.isfinite(d.ci_low) else "",
            "ci_high": round(d.ci_high, 4)
            if np.isfinite(d.ci_high) else ""})
    if delta_rows:
        write_daily_csv(out / "delta_rhat.csv", delta_rows)

    reports = {m: cost_report(runs, method=m)
               for m, runs in sorted(runs_by_method.items())}
    cost_rows, age_rows = [], []
    base_report = reports.get(args.baseline)
    for method, rep in sorted(reports.items()):
        if method == args.baseline:
            icer_cell, status = "REF", "ref"
        else:
            res = icer(rep, base_report)
            status = res.status
            icer_cell = (round(res.value, 2) if res.status == "ok"
                         else res.status)
        cost_rows.append({
            "method": method, "n_runs": rep.n_runs,
            "dalys": round(rep.dalys, 3),
            "dalys_se": round(rep.dalys_se, 3)
            if np.isfinite(rep.dalys_se) else "",
            "yll": round(rep.yll, 3), "yld": round(rep.yld, 3),
            "tpl": round(rep.tpl, 2),
            "tpl_se": round(rep.tpl_se, 2)
            if np.isfinite(rep.tpl_se) else "",
            "icer_vs_baseline": icer_cell, "icer_status": status,
            "currency": rep.currency})
        for decade, value in enumerate(rep.daly_by_age_decade):
            age_rows.append({"method": method,
                             "age_decade": f"{decade * 10}-"
                             f"{decade * 10 + 9}",
                             "dalys": round(float(value), 4)})
    write_daily_csv(out / "costs.csv", cost_rows)
    write_daily_csv(out / "daly_by_age.csv", age_rows)

    report = {"baseline": args.baseline,
              "methods": sorted(by_method),
              "delta_rhat": delta_rows, "costs": cost_rows}
    _write_json(out / "report.json", report)
    print(f"compare: wrote {out}/pareto_points.csv, gp_curves.csv, "
          "delta_rhat.csv, costs.csv, daly_by_age.csv, report.json")
    return 0


def cmd_validate_config(args):
    cfg = _load_config(args)
    print(f"config ok: pop {cfg.region.population_size}, "
          f"{cfg.n_days} days, tracing {cfg.tracing_method!r}")
    return 0


def cmd_epi_stats(args):
    results = []
    for seed in _parse_seeds(args.seeds):
        cfg = _load_config(args, [f"seed={seed}"])
        results.append(run_simulation(cfg, keep_trace=False))
    stats = epi_statistics(results)
    for key, value in stats.items():
        if isinstance(value, float):
            print(f"{key:40s} {value:10.4f}")
        else:
            print(f"{key:40s} {value:10d}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dctsim",
        description="Agent-based epidemic simulation with digital "
                    "contact tracing policies")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None,
                       help="YAML config file (defaults used if omitted)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")

    p = sub.add_parser("run", help="run one simulation")
    common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="run a method/beta/adoption grid")
    common(p)
    p.add_argument("--methods", default="none,bct1,heuristic")
    p.add_argument("--betas", default="1.0")
    p.add_argument("--adoptions", default="0.6")
    p.add_argument("--seeds", default="0:5",
                   help="'lo:hi' range or comma list")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("compare",
                       help="GP fits, advantages, and cost tables "
                            "from a sweep manifest")
    p.add_argument("manifest")
    p.add_argument("--baseline", default="none")
    p.add_argument("--resamples", type=int, default=200)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("validate-config", help="parse and check a config")
    common(p)
    p.set_defaults(fn=cmd_validate_config)

    p = sub.add_parser("epi-stats",
                       help="emergent epidemiology over several seeds")
    common(p)
    p.add_argument("--seeds", default="0:10")
    p.set_defaults(fn=cmd_epi_stats)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
