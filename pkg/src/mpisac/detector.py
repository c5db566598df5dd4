"""Weighted GLRT statistic, Monte Carlo calibration and delay-Doppler scans.

The H0 distribution of the statistic is free of the noise power (exact scale
invariance), so threshold calibration draws unit-variance noise frames; the
resulting threshold is bit-identical under any rescaling of the radar noise.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .channel import PathChannel, ProjectorSet, dense_projector, path_coeffs
from .errors import DegenerateDenominator, InsufficientTrials, MpisacError
from .scene import SPEED_OF_LIGHT, Geometry, OfdmGrid, Path, PathSet, taps_from_geometry
from .waveform import EchoFrame, PowerAllocation, SymbolFrame, synthesize_echo

CHUNK = 512          # Monte Carlo trials per work unit, fixed for determinism
WILSON_Z = 1.959963984540054  # 95% confidence


@dataclass
class WeightVector:
    """Unit-norm nonnegative detector weights, one per path."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if np.any(self.w < 0):
            raise ValueError("weights must be nonnegative")
        norm2 = float(np.sum(self.w ** 2))
        if abs(norm2 - 1.0) > 1e-12:
            raise ValueError(f"weights must have unit norm, got ||w||^2 = {norm2!r}")

    @classmethod
    def equal(cls, n_paths: int) -> "WeightVector":
        return cls(np.full(n_paths, 1.0 / np.sqrt(n_paths)))

    @classmethod
    def from_unnormalized(cls, d: np.ndarray) -> "WeightVector":
        d = np.asarray(d, dtype=float)
        return cls(d / np.linalg.norm(d))


@dataclass
class DetectionReport:
    threshold: float
    p_fa_target: float
    p_fa_empirical: float
    p_d_empirical: float
    n_trials: int
    confidence_halfwidth: float


def wilson_halfwidth(successes: int, n: int, z: float = WILSON_Z) -> float:
    """Halfwidth of the Wilson score interval for a binomial proportion."""
    if n == 0:
        return 1.0
    p = successes / n
    return z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)


def _statistic(y: np.ndarray, steering: np.ndarray,
               w_sq: np.ndarray) -> float:
    """Weighted ratio of projection energies to the explicit residual energy.

    The denominator is the norm of Y minus its signal-subspace component
    rather than a difference of totals, so it stays accurate at extreme
    signal-to-noise ratios where the subtraction would cancel.
    """
    proj = steering.conj().T @ y
    energies = np.sum(np.abs(proj) ** 2, axis=1)
    resid = y - steering @ proj
    noise = float(np.sum(np.abs(resid) ** 2))
    if noise < 1e-300:
        raise DegenerateDenominator("frame lies in the signal subspace")
    return 1.0 + float(np.dot(w_sq, energies)) / noise


def glrt_statistic(frame: EchoFrame | np.ndarray, projectors: ProjectorSet,
                   weights: WeightVector) -> float:
    """1 + sum_l w_l^2 ||P_s,l Y||_F^2 / ||P_n Y||_F^2 via steering products."""
    y = frame.y if isinstance(frame, EchoFrame) else np.asarray(frame)
    if y.shape[0] != projectors.n_dim:
        raise ValueError("frame/projector dimension mismatch")
    if weights.w.shape[0] != projectors.n_paths:
        raise ValueError("one weight per path required")
    return _statistic(y, projectors.steering, weights.w ** 2)


def glrt_statistic_mle_oracle(frame: EchoFrame | np.ndarray, paths: PathSet,
                              alloc: PowerAllocation, symbols: SymbolFrame,
                              grid: OfdmGrid) -> float:
    """Dense reference statistic from the explicit MLE substitution.

    Forms the stacked channel/amplification/symbol matrices, estimates each
    reflection matrix as P_s,l Y (H_l A X)^+, and evaluates the raw likelihood
    ratio ||Y||_F^2 / ||Y - sum_l est_l H_l A X||_F^2.  Equals the equal-weight
    compact statistic through oracle - 1 = L * (weighted - 1).
    """
    y = frame.y if isinstance(frame, EchoFrame) else np.asarray(frame)
    n_sc, n_sym = grid.n_subcarriers, grid.n_symbols
    a_dense = np.diag(alloc.gains)
    x_dense = np.zeros((n_sc * n_sym, n_sym), dtype=complex)
    for m in range(n_sym):
        x_dense[m * n_sc:(m + 1) * n_sc, m] = symbols.symbols[:, m]
    resid = y.astype(complex).copy()
    for path in paths:
        coeffs = path_coeffs(path, grid).coeffs
        h_dense = np.hstack([np.diag(coeffs[:, m]) for m in range(n_sym)])
        g = h_dense @ a_dense @ x_dense
        proj = dense_projector(path, grid)
        est = proj @ y @ np.linalg.pinv(g)
        resid -= est @ g
    total = float(np.sum(np.abs(y) ** 2))
    denom = float(np.sum(np.abs(resid) ** 2))
    if denom < 1e-300:
        raise DegenerateDenominator("residual vanished")
    return total / denom


# ---------------------------------------------------------------------------
# Monte Carlo machinery.  Work is split into fixed-size chunks keyed by trial
# index, so results are independent of the worker count.

def _h0_chunk(args):
    steering, w_sq, n_sym, seed, start, stop = args
    n_sc = steering.shape[0]
    out = np.empty(stop - start)
    for t in range(start, stop):
        gen = rngmod.substream(seed, rngmod.PURPOSE_H0, t)
        z = rngmod.complex_normal(gen, (n_sc, n_sym))
        out[t - start] = _statistic(z, steering, w_sq)
    return out


def _h1_chunk(args):
    (steering, w_sq, signal_base, var, rcs_model, sigma_r, comp,
     seed, start, stop) = args
    n_paths, n_sc, n_sym = signal_base.shape
    out = np.empty(stop - start)
    for t in range(start, stop):
        gen = rngmod.substream(seed, rngmod.PURPOSE_H1, t)
        if rcs_model == "swerling1":
            unit = rngmod.complex_normal(gen, n_paths)
            lam = np.sqrt(np.mean(var, axis=0)) * unit  # (L,)
            y = np.tensordot(lam, signal_base, axes=(0, 0))
        else:
            unit = rngmod.complex_normal(gen, (n_sc, n_paths))
            lam = np.sqrt(var) * unit
            y = np.einsum("nl,lnm->nm", lam, signal_base)
        y = y + sigma_r * rngmod.complex_normal(gen, (n_sc, n_sym))
        y = y * comp  # divide out the known unit-modulus symbols
        out[t - start] = _statistic(y, steering, w_sq)
    return out


def _run_chunks(fn, common_args, n_trials: int, seed: int, workers: int):
    jobs = [common_args + (seed, start, min(start + CHUNK, n_trials))
            for start in range(0, n_trials, CHUNK)]
    if workers <= 1:
        parts = [fn(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, jobs, chunksize=4))
    return np.concatenate(parts) if parts else np.empty(0)


def h0_statistics(projectors: ProjectorSet, weights: WeightVector,
                  grid: OfdmGrid, n_trials: int, seed: int,
                  workers: int = 1) -> np.ndarray:
    """Statistics of n_trials noise-only frames (unit noise variance)."""
    common = (projectors.steering, weights.w ** 2, grid.n_symbols)
    return _run_chunks(_h0_chunk, common, n_trials, seed, workers)


def h1_statistics(paths: PathSet, channels: list[PathChannel],
                  projectors: ProjectorSet, alloc: PowerAllocation,
                  symbols: SymbolFrame, weights: WeightVector,
                  grid: OfdmGrid, rcs_model: str, n_trials: int, seed: int,
                  workers: int = 1) -> np.ndarray:
    """Statistics of n_trials target-present frames with fresh RCS draws.

    The receiver divides each frame by its own (known, unit-modulus)
    communication symbols before projecting, so the per-path signal aligns
    with the steering subspace.  The division is an entrywise phase rotation
    and leaves the noise-only statistic distribution untouched, which is why
    calibration needs no symbol knowledge.
    """
    a_grid = alloc.grid_view(grid)
    base = np.stack([ch.coeffs * a_grid * symbols.symbols for ch in channels])
    var = np.ones((grid.n_subcarriers, len(paths)))
    for l, p in enumerate(paths):
        if p.rcs_variance is not None:
            var[:, l] = p.rcs_variance
    common = (projectors.steering, weights.w ** 2, base, var, rcs_model,
              float(np.sqrt(grid.radar_noise_power)), symbols.symbols.conj())
    return _run_chunks(_h1_chunk, common, n_trials, seed, workers)


def threshold_from_statistics(stats: np.ndarray, p_fa: float) -> float:
    """Upper empirical quantile by plain order statistic, no interpolation."""
    n = stats.size
    rank = max(1, math.ceil((1.0 - p_fa) * n))
    return float(np.sort(stats)[rank - 1])


def calibrate_threshold(projectors: ProjectorSet, weights: WeightVector,
                        grid: OfdmGrid, p_fa: float, n_trials: int,
                        seed: int, workers: int = 1) -> float:
    """Monte Carlo threshold at the requested false-alarm probability."""
    if n_trials * p_fa < 50:
        raise InsufficientTrials(
            f"need n_trials * p_fa >= 50, got {n_trials * p_fa:.1f}")
    stats = h0_statistics(projectors, weights, grid, n_trials, seed, workers)
    return threshold_from_statistics(stats, p_fa)


def estimate_pd(threshold: float, paths: PathSet, channels: list[PathChannel],
                projectors: ProjectorSet, alloc: PowerAllocation,
                symbols: SymbolFrame, weights: WeightVector, grid: OfdmGrid,
                rcs_model: str, n_trials: int, seed: int, workers: int = 1,
                p_fa_target: float = float("nan"),
                p_fa_empirical: float = float("nan")) -> DetectionReport:
    """Detection probability at a fixed threshold, with Wilson halfwidth."""
    if threshold < 1.0:
        raise ValueError("threshold must be >= 1")
    stats = h1_statistics(paths, channels, projectors, alloc, symbols,
                          weights, grid, rcs_model, n_trials, seed, workers)
    hits = int(np.sum(stats > threshold))
    return DetectionReport(
        threshold=threshold,
        p_fa_target=p_fa_target,
        p_fa_empirical=p_fa_empirical,
        p_d_empirical=hits / n_trials,
        n_trials=n_trials,
        confidence_halfwidth=wilson_halfwidth(hits, n_trials),
    )


# ---------------------------------------------------------------------------
# Delay-Doppler scanning (per-bin and multipath-combined maps).

def hypothesize_target(delay_tap: float, doppler_tap: float, geometry: Geometry,
                       grid: OfdmGrid) -> Geometry | None:
    """Place a hypothetical target consistent with the candidate LoS bin.

    Range comes from the delay tap along the configured BS-target bearing;
    speed is scaled along the configured velocity direction so the direct
    round trip reproduces the candidate Doppler tap (taps are read as
    unaliased nonnegative Doppler).  Returns None for degenerate bins.
    """
    n_sc, n_sym = grid.n_subcarriers, grid.n_symbols
    bs = np.asarray(geometry.bs_position, float)
    tgt = np.asarray(geometry.target_position, float)
    bearing = tgt - bs
    rng_norm = np.linalg.norm(bearing)
    if rng_norm == 0:
        return None
    bearing = bearing / rng_norm
    dist = delay_tap / (n_sc * grid.subcarrier_spacing) * SPEED_OF_LIGHT / 2.0
    if dist <= 0:
        return None
    pos = bs + dist * bearing

    nu = doppler_tap / (n_sym * grid.symbol_duration)
    v_cfg = np.asarray(geometry.target_velocity, float)
    speed_cfg = np.linalg.norm(v_cfg)
    if speed_cfg == 0 or nu == 0:
        vel = (0.0, 0.0)
    else:
        v_hat = v_cfg / speed_cfg
        denom = 2.0 * grid.carrier_freq / SPEED_OF_LIGHT * float(v_hat @ bearing)
        if abs(denom) < 1e-12:
            return None
        vel = tuple(nu / denom * v_hat)
    try:
        return Geometry(bs_position=geometry.bs_position,
                        reflector_positions=geometry.reflector_positions,
                        target_position=tuple(pos),
                        target_velocity=vel)
    except ValueError:
        return None


class DelayDopplerScanner:
    """Per-bin GLRT scan over a (delay, Doppler) grid.

    mode "single" matches each bin with the rank-one direction of a lone path
    at that bin (channel phases times the known amplification/symbol pattern),
    which is what a receiver unaware of the multipath geometry would do.
    mode "combined" maps each candidate bin through the reflector geometry to
    its full multipath route set and scores the bin by the weakest route's
    projection energy: every route of the hypothesized target must carry echo
    energy, so a bin that merely coincides with one multipath ghost stays at
    the noise floor and only the true target bin fires.  Because tap rounding
    is nonlinear in range and speed, each bin is probed on a small lattice of
    fractional tap offsets and scored by its best candidate; bins admitting no
    valid geometry score the noise floor.
    """

    FRAC_OFFSETS = np.arange(-3, 4) * 0.125

    def __init__(self, grid: OfdmGrid, alloc: PowerAllocation,
                 symbols: SymbolFrame, mode: str,
                 delay_taps: np.ndarray, doppler_taps: np.ndarray,
                 geometry: Geometry | None = None):
        if mode not in ("single", "combined"):
            raise ValueError(f"unknown scan mode: {mode}")
        if mode == "combined" and geometry is None:
            raise ValueError("combined mode needs the reflector geometry")
        self.grid = grid
        self.mode = mode
        self.delay_taps = np.asarray(delay_taps, int)
        self.doppler_taps = np.asarray(doppler_taps, int)
        pattern = alloc.grid_view(grid) * symbols.symbols
        self._dir_cache: dict[tuple[int, int], np.ndarray] = {}
        self._bins = []  # per bin: list of candidate direction stacks
        for k in self.delay_taps:
            for r in self.doppler_taps:
                if mode == "single":
                    self._bins.append(
                        [self._single_direction(int(k), int(r), pattern)[None, :]])
                else:
                    self._bins.append(self._candidate_directions(
                        int(k), int(r), pattern, geometry))

    def _single_direction(self, k: int, r: int, pattern: np.ndarray) -> np.ndarray:
        cached = self._dir_cache.get((k, r))
        if cached is None:
            coeffs = path_coeffs(Path(k, r, 1.0), self.grid).coeffs
            g = (coeffs * pattern).ravel()
            cached = self._dir_cache.setdefault((k, r), g / np.linalg.norm(g))
        return cached

    def _candidate_signatures(self, k: int, r: int, geometry: Geometry):
        """Distinct route-tap signatures over the fractional offset lattice."""
        n_routes = len(geometry.reflector_positions) + 1
        n_routes = n_routes * (n_routes + 1) // 2
        signatures = set()
        for dk in self.FRAC_OFFSETS:
            for dr in self.FRAC_OFFSETS:
                hypo = hypothesize_target(k + dk, r + dr, geometry, self.grid)
                if hypo is None:
                    continue
                try:
                    paths = taps_from_geometry(hypo, self.grid,
                                               np.ones(n_routes))
                except MpisacError:
                    continue
                signatures.add(tuple((p.delay_tap, p.doppler_tap)
                                     for p in paths))
        return sorted(signatures)

    def _candidate_directions(self, k, r, pattern, geometry):
        return [np.stack([self._single_direction(kk, rr, pattern)
                          for kk, rr in sig])
                for sig in self._candidate_signatures(k, r, geometry)]

    def bin_statistic(self, y_flat: np.ndarray, total: float, idx: int) -> float:
        best = 0.0
        for dirs in self._bins[idx]:
            energies = np.abs(dirs.conj() @ y_flat) ** 2
            noise = max(total - float(np.sum(energies)), 1e-300)
            if self.mode == "combined":
                score = float(np.min(energies)) / noise
            else:
                score = float(np.sum(energies)) / noise
            best = max(best, score)
        return 1.0 + best

    def map(self, frame: EchoFrame | np.ndarray) -> np.ndarray:
        """Statistic per bin, shape (len(delay_taps), len(doppler_taps))."""
        y = frame.y if isinstance(frame, EchoFrame) else np.asarray(frame)
        y_flat = y.ravel()
        total = float(np.sum(np.abs(y) ** 2))
        vals = [self.bin_statistic(y_flat, total, i)
                for i in range(len(self._bins))]
        return np.array(vals).reshape(len(self.delay_taps),
                                      len(self.doppler_taps))


def delay_doppler_map(frame: EchoFrame | np.ndarray, grid: OfdmGrid,
                      alloc: PowerAllocation, symbols: SymbolFrame, mode: str,
                      delay_taps: np.ndarray, doppler_taps: np.ndarray,
                      geometry: Geometry | None = None) -> np.ndarray:
    """One-shot scan; build a DelayDopplerScanner for repeated frames."""
    scanner = DelayDopplerScanner(grid, alloc, symbols, mode, delay_taps,
                                  doppler_taps, geometry)
    return scanner.map(frame)
