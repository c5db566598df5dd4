"""Experiment orchestration shared by the CLI: variants, ROC, sweeps, maps."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import rng as rngmod
from .channel import PathChannel, ProjectorSet, build_projectors, path_coeffs
from .config import ExperimentConfig, RcsConfig
from .detector import (DelayDopplerScanner, WeightVector, estimate_pd,
                       h0_statistics, h1_statistics, threshold_from_statistics,
                       wilson_halfwidth)
from .errors import InsufficientTrials
from .optimizer import (JointSolution, build_quadratic, joint_design,
                        mm_power_step, objective, initial_allocation,
                        update_weights)
from .scene import OfdmGrid, Path, PathSet, taps_from_geometry
from .waveform import (PowerAllocation, SymbolFrame, comm_lower_bounds,
                       draw_symbols, synthesize_echo, uniform_allocation)


@dataclass
class Experiment:
    """Fully built scene shared by all design variants of one run."""

    cfg: ExperimentConfig
    grid: OfdmGrid
    paths: PathSet
    channels: list[PathChannel]
    projectors: ProjectorSet
    symbols: SymbolFrame
    bounds: np.ndarray
    seed: int


def subcarrier_profile(rcs: RcsConfig, n_subcarriers: int) -> np.ndarray:
    """Per-subcarrier RCS variance shape, normalized to unit mean."""
    if rcs.subcarrier_profile == "flat":
        return np.ones(n_subcarriers)
    n_active = max(1, int(round(rcs.active_fraction * n_subcarriers)))
    prof = np.zeros(n_subcarriers)
    prof[:n_active] = n_subcarriers / n_active
    return prof


def effective_shares(rcs: RcsConfig, n_paths: int,
                     nlos_fraction: float | None = None) -> np.ndarray:
    """Per-path share of the total effective variance (LoS first)."""
    los = rcs.los_fraction if nlos_fraction is None else 1.0 - nlos_fraction
    shares = np.empty(n_paths)
    shares[0] = los
    if n_paths > 1:
        nlos = rcs.nlos_shares
        if nlos is None:
            nlos = np.full(n_paths - 1, 1.0 / (n_paths - 1))
        else:
            nlos = np.asarray(nlos, dtype=float)
            nlos = nlos / np.sum(nlos)
        shares[1:] = (1.0 - los) * nlos
    return shares


def apply_rcs(paths: PathSet, rcs: RcsConfig, grid: OfdmGrid,
              nlos_fraction: float | None = None) -> PathSet:
    """Attach RCS variance profiles and design gains to each path.

    The total effective variance sum_l sigma_l^2 |beta_l|^2 is split between
    LoS and NLoS paths, so the "RCS variance of the NLoS paths" knob moves
    received echo energy rather than raw variance.  A non-flat subcarrier
    profile becomes per-subcarrier RCS variance in per_subcarrier mode and a
    deterministic per-path frequency response in swerling1 mode (the frame
    RCS draw stays scalar there).  With rcs_informed_design the design gains
    carry the variance profile into the optimizer, otherwise they stay flat
    (the exact flat-channel model).
    """
    shares = effective_shares(rcs, len(paths), nlos_fraction)
    prof = subcarrier_profile(rcs, grid.n_subcarriers)
    out = []
    for share, p in zip(shares, paths):
        sigma_sq = share * rcs.total_effective_variance / abs(p.path_loss) ** 2
        if rcs.model == "swerling1":
            var = sigma_sq * np.ones_like(prof)
            freq = np.sqrt(prof) if rcs.subcarrier_profile != "flat" else None
        else:
            var = sigma_sq * prof
            freq = None
        gain = np.sqrt(var) if rcs.rcs_informed_design else None
        out.append(Path(delay_tap=p.delay_tap, doppler_tap=p.doppler_tap,
                        path_loss=p.path_loss, rcs_variance=var,
                        freq_response=freq, design_gain=gain))
    return PathSet(out)


def base_paths(cfg: ExperimentConfig) -> PathSet:
    if cfg.geometry is not None:
        return taps_from_geometry(cfg.geometry, cfg.grid, cfg.path_losses)
    paths = []
    for entry, beta in zip(cfg.explicit_paths, cfg.path_losses):
        paths.append(Path(delay_tap=int(entry["delay_tap"]),
                          doppler_tap=int(entry["doppler_tap"]),
                          path_loss=complex(beta)))
    return PathSet(paths)


def comm_channel_vector(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    if cfg.comm_channel == "flat":
        return np.ones(cfg.grid.n_subcarriers, dtype=complex)
    gen = rngmod.substream(seed, rngmod.PURPOSE_COMM, 0)
    return rngmod.complex_normal(gen, cfg.grid.n_subcarriers)


def build_experiment(cfg: ExperimentConfig, seed: int,
                     nlos_fraction: float | None = None) -> Experiment:
    grid = cfg.grid
    paths = apply_rcs(base_paths(cfg), cfg.rcs, grid, nlos_fraction)
    channels = [path_coeffs(p, grid) for p in paths]
    projectors = build_projectors(paths, grid)
    symbols = draw_symbols(grid, rngmod.substream(seed, rngmod.PURPOSE_SYMBOLS, 0))
    bounds = comm_lower_bounds(grid, comm_channel_vector(cfg, seed), symbols)
    return Experiment(cfg=cfg, grid=grid, paths=paths, channels=channels,
                      projectors=projectors, symbols=symbols, bounds=bounds,
                      seed=seed)


@dataclass
class VariantSetup:
    name: str
    paths: PathSet
    channels: list[PathChannel]
    projectors: ProjectorSet
    alloc: PowerAllocation
    weights: WeightVector


def optimize_alloc_only(exp: Experiment, weights: WeightVector,
                        max_inner: int = 200) -> PowerAllocation:
    """MM power loop with frozen weights (the transmit-only variant)."""
    alloc = initial_allocation(exp.bounds, exp.grid.power_budget)
    quad = build_quadratic(exp.paths, exp.channels, exp.symbols, weights)
    obj = objective(alloc, quad)
    for _ in range(max_inner):
        alloc = mm_power_step(alloc, quad, exp.bounds, exp.grid.power_budget)
        new_obj = objective(alloc, quad)
        if new_obj - obj <= 1e-8 * max(1.0, abs(new_obj)):
            break
        obj = new_obj
    return alloc


def variant_setup(exp: Experiment, variant: str) -> VariantSetup:
    n_paths = len(exp.paths)
    if variant == "los-only":
        paths = PathSet([exp.paths.paths[0]])
        channels = [exp.channels[0]]
        projectors = build_projectors(paths, exp.grid)
        alloc = uniform_allocation(exp.grid, exp.bounds)
        weights = WeightVector(np.ones(1))
    elif variant == "none":
        paths, channels, projectors = exp.paths, exp.channels, exp.projectors
        alloc = uniform_allocation(exp.grid, exp.bounds)
        weights = WeightVector.equal(n_paths)
    elif variant == "detector-only":
        paths, channels, projectors = exp.paths, exp.channels, exp.projectors
        alloc = uniform_allocation(exp.grid, exp.bounds)
        weights = update_weights(paths, channels, alloc, exp.symbols)
    elif variant == "transmit-only":
        paths, channels, projectors = exp.paths, exp.channels, exp.projectors
        weights = WeightVector.equal(n_paths)
        alloc = optimize_alloc_only(exp, weights)
    elif variant == "joint":
        paths, channels, projectors = exp.paths, exp.channels, exp.projectors
        sol = joint_design(paths, channels, exp.symbols, exp.bounds, exp.grid)
        alloc, weights = sol.alloc, sol.weights
    else:
        raise ValueError(f"unknown variant: {variant}")
    return VariantSetup(name=variant, paths=paths, channels=channels,
                        projectors=projectors, alloc=alloc, weights=weights)


def roc_rows(exp: Experiment, variants: list[str], p_fa_list: list[float],
             n_trials: int, workers: int = 1) -> list[dict]:
    """(variant, p_fa, p_d, halfwidth, threshold, n_trials) rows per variant."""
    rows = []
    for name in variants:
        setup = variant_setup(exp, name)
        h0 = h0_statistics(setup.projectors, setup.weights, exp.grid,
                           n_trials, exp.seed, workers)
        h1 = h1_statistics(setup.paths, setup.channels, setup.projectors,
                           setup.alloc, exp.symbols, setup.weights, exp.grid,
                           exp.cfg.rcs.model, n_trials, exp.seed, workers)
        for p_fa in p_fa_list:
            if n_trials * p_fa < 50:
                raise InsufficientTrials(
                    f"p_fa={p_fa} needs more than {n_trials} trials")
            thr = threshold_from_statistics(h0, p_fa)
            hits = int(np.sum(h1 > thr))
            rows.append({
                "variant": name,
                "p_fa": p_fa,
                "p_fa_empirical": float(np.mean(h0 > thr)),
                "p_d": hits / n_trials,
                "halfwidth": wilson_halfwidth(hits, n_trials),
                "threshold": thr,
                "n_trials": n_trials,
            })
    return rows


def rcs_sweep_rows(cfg: ExperimentConfig, seed: int, variants: list[str],
                   fractions: list[float], p_fa: float, n_trials: int,
                   workers: int = 1) -> list[dict]:
    """p_d per (NLoS effective-variance fraction, variant) at fixed p_fa."""
    rows = []
    for frac in fractions:
        exp = build_experiment(cfg, seed, nlos_fraction=frac)
        for row in roc_rows(exp, variants, [p_fa], n_trials, workers):
            row = {"nlos_fraction": frac, **row}
            rows.append(row)
    return rows


def ddmap_frames(exp: Experiment, workers: int = 1):
    """One H1 frame scanned in single-path and multipath-combined modes.

    The frame is transmitted with the joint design; the combined scan uses the
    designed weights, the single scan is geometry-blind.
    """
    sol = joint_design(exp.paths, exp.channels, exp.symbols, exp.bounds, exp.grid)
    gen = rngmod.substream(exp.seed, rngmod.PURPOSE_MISC, 0)
    frame = synthesize_echo(exp.paths, exp.channels, sol.alloc, exp.symbols,
                            "H1", exp.cfg.rcs.model, gen, exp.grid)
    delay_taps = np.arange(exp.grid.n_subcarriers)
    doppler_taps = np.arange(exp.grid.n_symbols)
    maps = {}
    for mode in ("single", "combined"):
        scanner = DelayDopplerScanner(
            exp.grid, sol.alloc, exp.symbols, mode, delay_taps, doppler_taps,
            geometry=exp.cfg.geometry)
        maps[mode] = scanner.map(frame)
    return frame, maps, sol


def optimize_result(exp: Experiment) -> JointSolution:
    return joint_design(exp.paths, exp.channels, exp.symbols, exp.bounds,
                        exp.grid)
