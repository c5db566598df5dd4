"""Experiment scene: OFDM grid, geometry, and the map to delay/Doppler taps.

A scene consists of the base station, a set of static specular reflectors and
one moving target.  Round-trip propagation routes are enumerated as unordered
pairs of one-way legs (direct or via one reflector); with two reflectors this
yields the six distinguishable paths used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import DuplicateTap

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class OfdmGrid:
    """Carrier/subcarrier/symbol-slot parameters of one coherent frame."""

    n_subcarriers: int
    n_symbols: int
    subcarrier_spacing: float  # Hz
    carrier_freq: float        # Hz
    comm_noise_power: float    # W
    radar_noise_power: float   # W
    power_budget: float        # W
    comm_snr_target: float     # linear ratio

    def __post_init__(self):
        if self.n_subcarriers < 2 or self.n_symbols < 2:
            raise ValueError("need at least 2 subcarriers and 2 symbols")
        for name in ("subcarrier_spacing", "carrier_freq", "comm_noise_power",
                     "radar_noise_power", "power_budget"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.comm_snr_target < 0:
            raise ValueError("comm_snr_target must be nonnegative")

    @property
    def symbol_duration(self) -> float:
        """T = 1/spacing, so T * spacing = 1 holds by construction."""
        return 1.0 / self.subcarrier_spacing

    @property
    def n_cells(self) -> int:
        return self.n_subcarriers * self.n_symbols


@dataclass
class Path:
    """One propagation path: integer taps, complex loss, RCS variance profile.

    ``rcs_variance`` is the per-subcarrier variance of the reflection
    coefficient; ``freq_response`` is an optional deterministic per-subcarrier
    amplitude response of the path (all-ones keeps the flat-channel model
    exact); ``design_gain`` is an optional per-subcarrier amplitude prior
    used by the power/weight design.
    """

    delay_tap: int
    doppler_tap: int
    path_loss: complex
    rcs_variance: np.ndarray | None = None
    freq_response: np.ndarray | None = None
    design_gain: np.ndarray | None = None

    def __post_init__(self):
        if self.delay_tap < 0 or self.doppler_tap < 0:
            raise ValueError("tap indices must be nonnegative")
        if self.rcs_variance is not None:
            self.rcs_variance = np.asarray(self.rcs_variance, dtype=float)
            if np.any(self.rcs_variance < 0):
                raise ValueError("rcs_variance entries must be >= 0")
        if self.freq_response is not None:
            self.freq_response = np.asarray(self.freq_response, dtype=float)
            if np.any(self.freq_response < 0):
                raise ValueError("freq_response entries must be >= 0")
        if self.design_gain is not None:
            self.design_gain = np.asarray(self.design_gain, dtype=float)


@dataclass
class PathSet:
    """Ordered collection of distinguishable paths (LoS first by convention)."""

    paths: list[Path]

    def __post_init__(self):
        taps = [(p.delay_tap, p.doppler_tap) for p in self.paths]
        if len(set(taps)) != len(taps):
            raise DuplicateTap(f"tap pairs are not pairwise distinct: {taps}")

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)


@dataclass(frozen=True)
class Geometry:
    """2-D positions of BS, reflectors and target, plus target velocity."""

    bs_position: tuple[float, float]
    reflector_positions: tuple[tuple[float, float], ...]
    target_position: tuple[float, float]
    target_velocity: tuple[float, float]

    def __post_init__(self):
        pts = [self.bs_position, *self.reflector_positions, self.target_position]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if np.allclose(pts[i], pts[j]):
                    raise ValueError(f"positions must be pairwise distinct: {pts[i]}")


def _legs(geom: Geometry):
    """One-way legs BS->target: (length, unit vector into the target).

    The unit vector points from the last scatter point (BS or reflector)
    toward the target; its dot product with the target velocity is the
    radial speed along that leg.
    """
    bs = np.asarray(geom.bs_position, dtype=float)
    tgt = np.asarray(geom.target_position, dtype=float)
    legs = []
    d = tgt - bs
    legs.append((float(np.linalg.norm(d)), d / np.linalg.norm(d)))
    for refl in geom.reflector_positions:
        r = np.asarray(refl, dtype=float)
        d2 = tgt - r
        length = float(np.linalg.norm(r - bs) + np.linalg.norm(d2))
        legs.append((length, d2 / np.linalg.norm(d2)))
    return legs


def route_delay_doppler(geom: Geometry, grid: OfdmGrid):
    """Continuous (tau_l, nu_l) per round-trip route, route-enumeration order.

    Routes are unordered pairs of legs, direct-direct (LoS) first.  Doppler
    comes from target motion only; reflectors are static.
    """
    legs = _legs(geom)
    v = np.asarray(geom.target_velocity, dtype=float)
    out = []
    for (la, ua), (lb, ub) in combinations_with_replacement(legs, 2):
        tau = (la + lb) / SPEED_OF_LIGHT
        nu = grid.carrier_freq / SPEED_OF_LIGHT * (float(v @ ua) + float(v @ ub))
        out.append((tau, nu))
    return out


def taps_from_geometry(geom: Geometry, grid: OfdmGrid,
                       path_losses: np.ndarray) -> PathSet:
    """Quantize every round-trip route to integer delay/Doppler taps.

    delay_tap = round(tau * N * spacing) mod N, doppler_tap = round(nu * M * T)
    mod M; wrapping is consistent because the channel coefficients are periodic
    in the tap indices.  Raises DuplicateTap when two routes collapse onto the
    same tap pair.
    """
    routes = route_delay_doppler(geom, grid)
    path_losses = np.asarray(path_losses, dtype=complex)
    if len(path_losses) != len(routes):
        raise ValueError(f"expected {len(routes)} path losses, got {len(path_losses)}")
    n, m = grid.n_subcarriers, grid.n_symbols
    paths = []
    for (tau, nu), beta in zip(routes, path_losses):
        k = int(np.round(tau * n * grid.subcarrier_spacing)) % n
        r = int(np.round(nu * m * grid.symbol_duration)) % m
        paths.append(Path(delay_tap=k, doppler_tap=r, path_loss=complex(beta)))
    taps = [(p.delay_tap, p.doppler_tap) for p in paths]
    if len(set(taps)) != len(taps):
        raise DuplicateTap(
            f"routes collapse onto shared tap pairs at N={n}, M={m}: {taps}")
    return PathSet(paths)
