"""Joint transmit-power / detector-weight design.

The design objective sum_l w_l^2 ||H_l A X||_F^2 is a diagonal quadratic form
in the allocation vector, so the MM surrogate subproblem (linear objective,
power ball, per-entry floors) reduces to a KKT waterfilling-style solution
found by bisection on the multiplier; no general convex solver is needed.
Weights are updated in closed form as the normalized per-path signal norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import PathChannel
from .detector import WeightVector
from .errors import Infeasible, ZeroSignal
from .scene import OfdmGrid, PathSet
from .waveform import POWER_SLACK, PowerAllocation, SymbolFrame, flatten_grid


@dataclass
class QuadraticForm:
    """Diagonal of the design quadratic form R (R is diagonal in this model)."""

    r_diag: np.ndarray  # (N*M,) nonnegative

    def __post_init__(self):
        self.r_diag = np.asarray(self.r_diag, dtype=float)
        if np.any(self.r_diag < 0):
            raise ValueError("r_diag must be nonnegative")


def _gain_matrix(paths: PathSet, n_subcarriers: int) -> np.ndarray:
    """Per-path design gain profiles stacked as (N, L), defaulting to ones."""
    g = np.ones((n_subcarriers, len(paths)))
    for l, p in enumerate(paths):
        if p.design_gain is not None:
            g[:, l] = p.design_gain
    return g


def build_quadratic(paths: PathSet, channels: list[PathChannel],
                    symbols: SymbolFrame, weights: WeightVector) -> QuadraticForm:
    """r_diag[(m-1)N+n] = sum_l w_l^2 g[n,l]^2 |h[n,m,l]|^2 |x[n,m]|^2."""
    gains = _gain_matrix(paths, symbols.symbols.shape[0])
    x_sq = np.abs(symbols.symbols) ** 2
    acc = np.zeros_like(x_sq)
    for l, ch in enumerate(channels):
        acc += weights.w[l] ** 2 * (gains[:, l] ** 2)[:, None] * np.abs(ch.coeffs) ** 2
    return QuadraticForm(r_diag=flatten_grid(acc * x_sq))


def dense_quadratic(paths: PathSet, channels: list[PathChannel],
                    symbols: SymbolFrame, weights: WeightVector,
                    grid: OfdmGrid) -> np.ndarray:
    """Oracle: R = sum_{l,m} w_l^2 diag(s_m^H) H_l^H H_l diag(s_m), dense.

    s_m = e_m kron x_m; H_l is the stacked N x NM per-symbol diagonal block
    matrix.  Used only in tests to confirm the diagonal fast path.
    """
    n_sc, n_sym = grid.n_subcarriers, grid.n_symbols
    n_cells = n_sc * n_sym
    gains = _gain_matrix(paths, n_sc)
    r = np.zeros((n_cells, n_cells), dtype=complex)
    for l, ch in enumerate(channels):
        coeffs = (gains[:, l][:, None]) * ch.coeffs
        h_dense = np.hstack([np.diag(coeffs[:, m]) for m in range(n_sym)])
        for m in range(n_sym):
            s_m = np.zeros(n_cells, dtype=complex)
            s_m[m * n_sc:(m + 1) * n_sc] = symbols.symbols[:, m]
            d = np.diag(s_m)
            r += weights.w[l] ** 2 * d.conj().T @ h_dense.conj().T @ h_dense @ d
    return r


def objective(alloc: PowerAllocation, quad: QuadraticForm) -> float:
    """sum_i r_diag[i] * a[i]^2."""
    return float(np.sum(quad.r_diag * alloc.gains ** 2))


def mm_power_step(alloc: PowerAllocation, quad: QuadraticForm,
                  bounds: np.ndarray, power_budget: float) -> PowerAllocation:
    """One MM update: maximize the linearized objective on the feasible set.

    Maximizes sum_i c_i a_i with c = R a_k subject to the power ball and the
    per-entry floors.  KKT: a_i(mu) = max(bound_i, c_i / (2 mu)) with mu > 0
    bisected so the power budget is met; the power is monotone decreasing in
    mu.
    """
    bounds = np.asarray(bounds, dtype=float)
    floor_power = float(np.sum(bounds ** 2))
    if floor_power > power_budget + POWER_SLACK:
        raise Infeasible(
            f"SNR floors need {floor_power:.6g} W, budget is {power_budget:.6g} W")
    c = quad.r_diag * alloc.gains
    if not np.any(c > 0) or floor_power >= power_budget * (1 - 1e-15):
        return PowerAllocation(gains=bounds.copy(), lower_bounds=bounds)

    def power_at(mu):
        return float(np.sum(np.maximum(bounds, c / (2.0 * mu)) ** 2))

    # Bracket the multiplier: power_at is decreasing, -> floor_power as mu -> inf.
    lo = hi = max(float(np.max(c)) / (2.0 * np.sqrt(power_budget)), 1e-300)
    while power_at(hi) > power_budget:
        hi *= 2.0
    while power_at(lo) < power_budget:
        lo /= 2.0
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        p = power_at(mid)
        if abs(p - power_budget) <= 1e-10 * power_budget:
            lo = hi = mid
            break
        if p > power_budget:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    gains = np.maximum(bounds, c / (2.0 * mu))
    # Land exactly on the budget by scaling the above-floor component.
    excess = gains - bounds
    denom = float(np.sum(excess * gains))
    if denom > 0:
        # Solve sum (bounds + t*excess)^2 = budget for t in [0, ~1].
        aa = float(np.sum(excess ** 2))
        bb = 2.0 * float(np.sum(bounds * excess))
        cc = floor_power - power_budget
        t = (-bb + np.sqrt(bb * bb - 4 * aa * cc)) / (2 * aa)
        gains = bounds + t * excess
    return PowerAllocation(gains=gains, lower_bounds=bounds)


def update_weights(paths: PathSet, channels: list[PathChannel],
                   alloc: PowerAllocation, symbols: SymbolFrame) -> WeightVector:
    """Closed-form Rayleigh-quotient solution w = d / ||d||.

    d_l^2 = sum_{n,m} g[n,l]^2 |h[n,m,l]|^2 a[n,m]^2 |x[n,m]|^2 is the squared
    per-path signal norm under the current allocation.
    """
    n_sc, n_sym = symbols.symbols.shape
    gains = _gain_matrix(paths, n_sc)
    a_grid = alloc.gains.reshape((n_sc, n_sym), order="F")
    cell = (a_grid * np.abs(symbols.symbols)) ** 2
    d_sq = np.array([
        float(np.sum((gains[:, l] ** 2)[:, None] * np.abs(ch.coeffs) ** 2 * cell))
        for l, ch in enumerate(channels)])
    if not np.any(d_sq > 0):
        raise ZeroSignal("all per-path signal energies vanish")
    return WeightVector.from_unnormalized(np.sqrt(d_sq))


@dataclass
class JointSolution:
    alloc: PowerAllocation
    weights: WeightVector
    objective_trace: list[float] = field(default_factory=list)
    converged: bool = False


def initial_allocation(bounds: np.ndarray, power_budget: float) -> PowerAllocation:
    """Uniform power raised to the floors, rescaled into the budget."""
    bounds = np.asarray(bounds, dtype=float)
    floor_power = float(np.sum(bounds ** 2))
    if floor_power > power_budget + POWER_SLACK:
        raise Infeasible(
            f"SNR floors need {floor_power:.6g} W, budget is {power_budget:.6g} W")
    level = np.sqrt(power_budget / bounds.size)
    gains = np.maximum(bounds, level)
    total = float(np.sum(gains ** 2))
    if total > power_budget:
        excess = gains - bounds
        aa = float(np.sum(excess ** 2))
        if aa > 0:
            bb = 2.0 * float(np.sum(bounds * excess))
            cc = floor_power - power_budget
            t = (-bb + np.sqrt(bb * bb - 4 * aa * cc)) / (2 * aa)
            gains = bounds + t * excess
        else:
            gains = bounds.copy()
    return PowerAllocation(gains=gains, lower_bounds=bounds)


def joint_design(paths: PathSet, channels: list[PathChannel],
                 symbols: SymbolFrame, bounds: np.ndarray, grid: OfdmGrid,
                 rel_tol: float = 1e-6, max_outer: int = 100,
                 inner_tol: float = 1e-8, max_inner: int = 200) -> JointSolution:
    """Alternate MM power updates and closed-form weight updates.

    Each outer iteration runs the inner MM loop to surrogate stationarity for
    the current weights, then refreshes the weights; the objective trace is
    non-decreasing by construction.  Stops on relative improvement < rel_tol
    or after max_outer iterations.
    """
    alloc = initial_allocation(bounds, grid.power_budget)
    weights = WeightVector.equal(len(paths))
    trace: list[float] = []
    converged = False
    prev = None
    for _ in range(max_outer):
        quad = build_quadratic(paths, channels, symbols, weights)
        obj = objective(alloc, quad)
        for _ in range(max_inner):
            alloc = mm_power_step(alloc, quad, bounds, grid.power_budget)
            new_obj = objective(alloc, quad)
            if new_obj - obj <= inner_tol * max(1.0, abs(new_obj)):
                obj = new_obj
                break
            obj = new_obj
        weights = update_weights(paths, channels, alloc, symbols)
        quad = build_quadratic(paths, channels, symbols, weights)
        obj = objective(alloc, quad)
        trace.append(obj)
        if prev is not None and obj - prev <= rel_tol * max(1.0, abs(obj)):
            converged = True
            break
        prev = obj
    return JointSolution(alloc=alloc, weights=weights,
                         objective_trace=trace, converged=converged)
