"""Symbol generation, power allocation, comm-SNR floors and echo synthesis.

Vector ordering convention: the length-N*M allocation vector stores the
(n, m) grid entry at index (m-1)*N + (n-1), i.e. column-major flattening of
the N x M grid.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .channel import PathChannel
from .errors import ZeroChannel
from .rng import complex_normal
from .scene import OfdmGrid, PathSet

POWER_SLACK = 1e-9

QPSK_POINTS = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))


@dataclass
class SymbolFrame:
    """One frame of communication symbols, unit modulus under QPSK."""

    symbols: np.ndarray  # (N, M) complex


def draw_symbols(grid: OfdmGrid, rng: np.random.Generator) -> SymbolFrame:
    """i.i.d. QPSK symbols over the whole frame."""
    idx = rng.integers(0, 4, size=(grid.n_subcarriers, grid.n_symbols))
    return SymbolFrame(symbols=QPSK_POINTS[idx])


@dataclass
class PowerAllocation:
    """Nonnegative amplification factors a with per-entry comm-SNR floors."""

    gains: np.ndarray         # (N*M,)
    lower_bounds: np.ndarray  # (N*M,)

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        self.lower_bounds = np.asarray(self.lower_bounds, dtype=float)
        if self.gains.shape != self.lower_bounds.shape:
            raise ValueError("gains and lower_bounds must have equal length")
        if np.any(self.lower_bounds < 0):
            raise ValueError("lower bounds must be nonnegative")
        if np.any(self.gains < self.lower_bounds - 1e-12):
            raise ValueError("gains must respect the lower bounds")

    def total_power(self) -> float:
        return float(np.sum(self.gains ** 2))

    def check_budget(self, power_budget: float):
        if self.total_power() > power_budget + POWER_SLACK:
            raise ValueError(
                f"allocation power {self.total_power():.6g} exceeds budget {power_budget:.6g}")

    def grid_view(self, grid: OfdmGrid) -> np.ndarray:
        """Gains reshaped to the (N, M) grid."""
        return self.gains.reshape((grid.n_subcarriers, grid.n_symbols), order="F")


def flatten_grid(values: np.ndarray) -> np.ndarray:
    """(N, M) grid -> length N*M vector in the (m-1)*N + (n-1) ordering."""
    return np.asarray(values).flatten(order="F")


def comm_lower_bounds(grid: OfdmGrid, comm_channel: np.ndarray,
                      symbols: SymbolFrame) -> np.ndarray:
    """Smallest amplification meeting the per-cell comm SNR target.

    bound[(m-1)N+n] = sqrt(gamma * sigma_c^2) / |h_c[n] x[n, m]| is the
    minimum a making |h_c a x|^2 / sigma_c^2 >= gamma.
    """
    h = np.asarray(comm_channel, dtype=complex)
    if h.shape != (grid.n_subcarriers,):
        raise ValueError("comm channel must have one entry per subcarrier")
    if np.any(np.abs(h) == 0):
        raise ZeroChannel("comm channel has a zero-gain subcarrier")
    denom = np.abs(h[:, None] * symbols.symbols)
    bounds = np.sqrt(grid.comm_snr_target * grid.comm_noise_power) / denom
    return flatten_grid(bounds)


def uniform_allocation(grid: OfdmGrid, lower_bounds: np.ndarray | None = None
                       ) -> PowerAllocation:
    """Equal power sqrt(P/NM) per cell, raised to the floors where needed."""
    n_cells = grid.n_cells
    if lower_bounds is None:
        lower_bounds = np.zeros(n_cells)
    level = np.sqrt(grid.power_budget / n_cells)
    gains = np.maximum(lower_bounds, level)
    alloc = PowerAllocation(gains=gains, lower_bounds=np.asarray(lower_bounds, float))
    alloc.check_budget(grid.power_budget)
    return alloc


@dataclass
class EchoFrame:
    """One received coherent frame plus its generating hypothesis."""

    y: np.ndarray       # (N, M) complex
    hypothesis: str     # "H0" or "H1"
    rcs_draw: np.ndarray | None = None  # (N, L) realized reflection coefficients


def _rcs_variances(paths: PathSet, grid: OfdmGrid) -> np.ndarray:
    """Per-path per-subcarrier variance matrix, defaulting to all-ones."""
    out = np.ones((grid.n_subcarriers, len(paths)))
    for l, p in enumerate(paths):
        if p.rcs_variance is not None:
            if p.rcs_variance.size == 1:
                out[:, l] = float(p.rcs_variance)
            else:
                out[:, l] = p.rcs_variance
    return out


def synthesize_echo(paths: PathSet, channels: list[PathChannel],
                    alloc: PowerAllocation, symbols: SymbolFrame,
                    hypothesis: str, rcs_model: str,
                    rng: np.random.Generator, grid: OfdmGrid) -> EchoFrame:
    """Generate one echo frame under H0 (noise only) or H1 (target present).

    rcs_model "swerling1" draws one coefficient per path per frame (variance =
    subcarrier mean of the path profile) and replicates it across subcarriers;
    "per_subcarrier" draws independently per subcarrier.  RCS coefficients are
    drawn before the noise so paired-seed comparisons share the noise draw.
    """
    n_sc, n_sym = grid.n_subcarriers, grid.n_symbols
    sigma_r = np.sqrt(grid.radar_noise_power)
    if hypothesis == "H0":
        noise = sigma_r * complex_normal(rng, (n_sc, n_sym))
        return EchoFrame(y=noise, hypothesis="H0")
    if hypothesis != "H1":
        raise ValueError(f"unknown hypothesis: {hypothesis}")

    var = _rcs_variances(paths, grid)  # (N, L)
    n_paths = len(paths)
    if rcs_model == "swerling1":
        unit = complex_normal(rng, n_paths)
        lam = np.sqrt(np.mean(var, axis=0))[None, :] * unit[None, :]
        lam = np.broadcast_to(lam, (n_sc, n_paths)).copy()
    elif rcs_model == "per_subcarrier":
        unit = complex_normal(rng, (n_sc, n_paths))
        lam = np.sqrt(var) * unit
    else:
        raise ValueError(f"unknown rcs model: {rcs_model}")

    a_grid = alloc.grid_view(grid)
    base = a_grid * symbols.symbols
    y = np.zeros((n_sc, n_sym), dtype=complex)
    for l, ch in enumerate(channels):
        y += lam[:, l][:, None] * ch.coeffs * base
    y += sigma_r * complex_normal(rng, (n_sc, n_sym))
    return EchoFrame(y=y, hypothesis="H1", rcs_draw=lam)


# Debug dump format: little-endian header "MPIS", uint32 N, M, L, then the
# N x M frame as row-major (re, im) float64 pairs.
_MAGIC = b"MPIS"


def dump_frame(frame: EchoFrame, path: str, n_paths: int):
    n_sc, n_sym = frame.y.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", n_sc, n_sym, n_paths))
        interleaved = np.empty((n_sc, n_sym, 2))
        interleaved[..., 0] = frame.y.real
        interleaved[..., 1] = frame.y.imag
        fh.write(interleaved.astype("<f8").tobytes())


def load_frame(path: str) -> tuple[np.ndarray, int]:
    """Read a dumped frame; returns (y, n_paths)."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not an mpisac frame dump")
        n_sc, n_sym, n_paths = struct.unpack("<III", fh.read(12))
        raw = np.frombuffer(fh.read(), dtype="<f8").reshape((n_sc, n_sym, 2))
        return raw[..., 0] + 1j * raw[..., 1], n_paths
