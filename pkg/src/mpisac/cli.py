"""Command-line experiment runner.

Subcommands: roc | rcs-sweep | ddmap | optimize.  Every run writes a
manifest.json (before any results), one CSV per command, and PNG figures
alongside the CSV.  Re-running with the same config and seed reproduces all
outputs byte-identically, independent of the worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config, parse_config
from .errors import MpisacError
from .runner import (build_experiment, ddmap_frames, optimize_result,
                     rcs_sweep_rows, roc_rows)
from . import plotting


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_csv(path: str, fieldnames: list[str], rows: list[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])


def write_manifest(outdir: str, command: str, cfg: ExperimentConfig,
                   seed: int, outputs: list[str]):
    manifest = {
        "command": command,
        "config_hash": cfg.config_hash(),
        "seed": seed,
        "version": __version__,
        "outputs": sorted(outputs),
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_roc(cfg: ExperimentConfig, seed: int, n_trials: int, outdir: str,
            workers: int, figures: bool):
    outputs = ["roc.csv"] + (["roc.png"] if figures else [])
    write_manifest(outdir, "roc", cfg, seed, outputs)
    exp = build_experiment(cfg, seed)
    rows = roc_rows(exp, cfg.run.variants, cfg.run.p_fa, n_trials, workers)
    rows.sort(key=lambda r: (r["variant"], r["p_fa"]))
    write_csv(os.path.join(outdir, "roc.csv"),
              ["variant", "p_fa", "p_fa_empirical", "p_d", "halfwidth",
               "threshold", "n_trials"], rows)
    if figures:
        plotting.plot_roc(rows, os.path.join(outdir, "roc.png"))


def cmd_rcs_sweep(cfg: ExperimentConfig, seed: int, n_trials: int, outdir: str,
                  workers: int, figures: bool):
    outputs = ["rcs_sweep.csv"] + (["rcs_sweep.png"] if figures else [])
    write_manifest(outdir, "rcs-sweep", cfg, seed, outputs)
    rows = rcs_sweep_rows(cfg, seed, cfg.run.variants, cfg.run.sweep_fractions,
                          cfg.run.sweep_p_fa, n_trials, workers)
    rows.sort(key=lambda r: (r["nlos_fraction"], r["variant"]))
    write_csv(os.path.join(outdir, "rcs_sweep.csv"),
              ["nlos_fraction", "variant", "p_fa", "p_d", "halfwidth",
               "threshold", "n_trials"], rows)
    if figures:
        plotting.plot_rcs_sweep(rows, os.path.join(outdir, "rcs_sweep.png"))


def cmd_ddmap(cfg: ExperimentConfig, seed: int, n_trials: int, outdir: str,
              workers: int, figures: bool):
    outputs = ["ddmap.csv"]
    if figures:
        outputs += ["ddmap_single.png", "ddmap_combined.png"]
    write_manifest(outdir, "ddmap", cfg, seed, outputs)
    exp = build_experiment(cfg, seed)
    _, maps, _ = ddmap_frames(exp, workers)
    rows = []
    for mode in ("single", "combined"):
        vals = maps[mode]
        for k in range(vals.shape[0]):
            for r in range(vals.shape[1]):
                rows.append({"mode": mode, "delay_tap": k, "doppler_tap": r,
                             "value": float(vals[k, r])})
    write_csv(os.path.join(outdir, "ddmap.csv"),
              ["mode", "delay_tap", "doppler_tap", "value"], rows)
    if figures:
        los = exp.paths.paths[0]
        target = (los.delay_tap, los.doppler_tap)
        plotting.plot_ddmap(maps["single"],
                            os.path.join(outdir, "ddmap_single.png"),
                            "per-bin scan, geometry-blind", target)
        plotting.plot_ddmap(maps["combined"],
                            os.path.join(outdir, "ddmap_combined.png"),
                            "multipath-combined scan", target)


def cmd_optimize(cfg: ExperimentConfig, seed: int, n_trials: int, outdir: str,
                 workers: int, figures: bool):
    outputs = ["optimize_trace.csv", "optimize_solution.csv"]
    if figures:
        outputs.append("optimize_trace.png")
    write_manifest(outdir, "optimize", cfg, seed, outputs)
    exp = build_experiment(cfg, seed)
    sol = optimize_result(exp)
    trace_rows = [{"iteration": i + 1, "objective": obj}
                  for i, obj in enumerate(sol.objective_trace)]
    write_csv(os.path.join(outdir, "optimize_trace.csv"),
              ["iteration", "objective"], trace_rows)
    sol_rows = [{"kind": "weight", "index": l, "value": float(w)}
                for l, w in enumerate(sol.weights.w)]
    sol_rows += [{"kind": "gain", "index": i, "value": float(a)}
                 for i, a in enumerate(sol.alloc.gains)]
    sol_rows.append({"kind": "converged", "index": 0,
                     "value": float(sol.converged)})
    write_csv(os.path.join(outdir, "optimize_solution.csv"),
              ["kind", "index", "value"], sol_rows)
    if figures:
        plotting.plot_objective_trace(sol.objective_trace,
                                      os.path.join(outdir, "optimize_trace.png"))


COMMANDS = {
    "roc": cmd_roc,
    "rcs-sweep": cmd_rcs_sweep,
    "ddmap": cmd_ddmap,
    "optimize": cmd_optimize,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpisac",
        description="Multipath-exploiting OFDM ISAC detection experiments")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=False,
                        help="TOML experiment config (defaults built in)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the run seed")
    parser.add_argument("--trials", type=int, default=None,
                        help="override the Monte Carlo trial count")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--profile", choices=["desk", "full"], default="desk")
    parser.add_argument("--workers", type=int, default=None,
                        help="Monte Carlo worker processes")
    parser.add_argument("--no-figures", action="store_true",
                        help="skip PNG rendering, write CSV only")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config, args.profile)
        else:
            cfg = parse_config({}, args.profile)
        seed = args.seed if args.seed is not None else cfg.run.seed
        n_trials = args.trials if args.trials is not None else cfg.run.n_trials
        workers = args.workers if args.workers is not None else cfg.run.workers
        os.makedirs(args.out, exist_ok=True)
        COMMANDS[args.command](cfg, seed, n_trials, args.out, workers,
                               not args.no_figures)
    except MpisacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
