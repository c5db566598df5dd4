"""Time-frequency channel coefficients and rank-one signal projectors.

Each path's N x M coefficient matrix factors into a Doppler-only steering
vector (columns) and per-symbol phases (rows), so the projector onto its
column space is the rank-one outer product of the unit steering vector.
Projectors are kept implicit as steering vectors; dense matrices are
materialized only for the oracle/test path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonOrthogonalPaths
from .scene import OfdmGrid, Path, PathSet

ORTHOGONALITY_TOL = 1e-8


@dataclass
class PathChannel:
    """Coefficients h[n, m] for one path and the unit steering vector."""

    coeffs: np.ndarray   # (N, M) complex
    steering: np.ndarray  # (N,) complex, unit norm


def path_coeffs(path: Path, grid: OfdmGrid) -> PathChannel:
    """Evaluate h[n, m] = beta * exp(+j2pi nu n T) * exp(-j2pi (nu + m df) tau).

    Indices n, m are 1-based; nu = r/(MT) and tau = k/(N df) are the
    quantized Doppler and delay of the path.  A path with a freq_response
    profile has its rows scaled by it; the steering vector keeps the flat
    Doppler-only direction either way.
    """
    n_sc, n_sym = grid.n_subcarriers, grid.n_symbols
    t_sym, df = grid.symbol_duration, grid.subcarrier_spacing
    nu = path.doppler_tap / (n_sym * t_sym)
    tau = path.delay_tap / (n_sc * df)
    n = np.arange(1, n_sc + 1)
    m = np.arange(1, n_sym + 1)
    col = np.exp(2j * np.pi * nu * n * t_sym)
    row = np.exp(-2j * np.pi * (nu + m * df) * tau)
    coeffs = path.path_loss * np.outer(col, row)
    if path.freq_response is not None:
        coeffs = coeffs * path.freq_response[:, None]
    steering = col / np.sqrt(n_sc)
    return PathChannel(coeffs=coeffs, steering=steering)


@dataclass
class ProjectorSet:
    """Signal projectors for all paths plus the noise projector.

    ``steering`` stacks the unit steering vectors as columns (N x L); the
    l-th signal projector is steering[:, l] steering[:, l]^H and the noise
    projector is the complement.  Energy splits are computed from steering
    inner products in O(NM) per path.
    """

    steering: np.ndarray  # (N, L)

    @property
    def n_dim(self) -> int:
        return self.steering.shape[0]

    @property
    def n_paths(self) -> int:
        return self.steering.shape[1]

    def signal_energies(self, y: np.ndarray) -> np.ndarray:
        """Per-path ||P_s,l Y||_F^2 via steering inner products."""
        proj = self.steering.conj().T @ y  # (L, M)
        return np.sum(np.abs(proj) ** 2, axis=1)

    def noise_energy(self, y: np.ndarray) -> float:
        return float(np.sum(np.abs(y) ** 2) - np.sum(self.signal_energies(y)))

    # Dense forms, used only by tests and oracles.
    @property
    def signal_projectors(self) -> list[np.ndarray]:
        return [np.outer(u, u.conj()) for u in self.steering.T]

    @property
    def noise_projector(self) -> np.ndarray:
        p_s = sum(self.signal_projectors)
        return np.eye(self.n_dim, dtype=complex) - p_s


def dense_projector(path: Path, grid: OfdmGrid) -> np.ndarray:
    """Reference P_s,l = Ht (Ht^H Ht)^+ Ht^H from the explicit N x M matrix."""
    ht = path_coeffs(path, grid).coeffs
    gram = ht.conj().T @ ht
    return ht @ np.linalg.pinv(gram) @ ht.conj().T


def build_projectors(paths: PathSet, grid: OfdmGrid) -> ProjectorSet:
    """Build the rank-one projector set, verifying pairwise orthogonality.

    The Frobenius norm of P_s,l1 P_s,l2 equals |u_l1^H u_l2|; anything above
    ORTHOGONALITY_TOL means the tap configuration breaks the orthogonality
    assumption (e.g. two paths share a Doppler tap) and is rejected.
    """
    n_paths = len(paths)
    if n_paths == 0:
        raise ValueError("PathSet is empty")
    if n_paths >= grid.n_subcarriers:
        raise ValueError("need L < N for a nontrivial noise subspace")
    steering = np.column_stack(
        [path_coeffs(p, grid).steering for p in paths])
    gram = steering.conj().T @ steering
    off = gram - np.diag(np.diag(gram))
    worst = float(np.max(np.abs(off))) if n_paths > 1 else 0.0
    if worst > ORTHOGONALITY_TOL:
        raise NonOrthogonalPaths(
            f"max |u_l1^H u_l2| = {worst:.3e} exceeds {ORTHOGONALITY_TOL:.0e}")
    return ProjectorSet(steering=steering)
