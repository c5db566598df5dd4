"""Experiment configuration: TOML schema, validation and profiles.

The config file has [grid], [scene], [rcs], [comm] and [run] tables.  The
"desk" profile (default) fills in N = M = 16 and 10^4 trials for quick runs;
"full" selects the 64 x 64 grid with 10^5 trials.  Explicit config keys always
win over profile defaults.
"""

from __future__ import annotations

import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .scene import Geometry, OfdmGrid

# Grid defaults per profile.  Carrier and spacing are chosen so the six
# round-trip routes of the default two-reflector scene land on six distinct
# Doppler taps (the steering vectors depend only on the Doppler tap, so
# distinct Doppler is what path distinguishability actually requires) and,
# for the desk grid, so the 55 m target sits a few delay taps out.
PROFILES = {
    "desk": {"n_subcarriers": 16, "n_symbols": 16, "n_trials": 10_000,
             "subcarrier_spacing_hz": 500e3, "carrier_freq_hz": 1.2e12},
    "full": {"n_subcarriers": 64, "n_symbols": 64, "n_trials": 100_000,
             "subcarrier_spacing_hz": 120e3, "carrier_freq_hz": 75e9},
}

VARIANTS = ("joint", "transmit-only", "detector-only", "none", "los-only")

DEFAULT_PATH_LOSSES = [9.84, 1.02, 1.61, 0.10, 0.17, 0.26]

# Default split of the NLoS effective variance for the six-route scene;
# uneven on purpose so the weight design has something to exploit.
DEFAULT_NLOS_SHARES = [0.45, 0.25, 0.15, 0.10, 0.05]


def _require(table: dict, key: str, kind, path: str, default=None):
    if key not in table:
        if default is not None:
            return default
        raise ConfigError(f"missing key '{path}.{key}'")
    val = table[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ConfigError(
            f"'{path}.{key}' must be {kind.__name__}, got {type(val).__name__}")
    return val


def _point(table: dict, key: str, path: str) -> tuple[float, float]:
    val = table.get(key)
    if (not isinstance(val, list) or len(val) != 2
            or not all(isinstance(v, (int, float)) for v in val)):
        raise ConfigError(f"'{path}.{key}' must be a 2-element number list")
    return (float(val[0]), float(val[1]))


@dataclass
class RcsConfig:
    model: str = "swerling1"                   # or "per_subcarrier"
    total_effective_variance: float = 3e-12    # sum_l sigma_l^2 |beta_l|^2
    los_fraction: float = 0.4
    nlos_shares: list[float] | None = None
    subcarrier_profile: str = "bandlimited"    # or "flat"
    active_fraction: float = 0.5
    rcs_informed_design: bool = True


@dataclass
class RunConfig:
    seed: int = 1
    n_trials: int = 10_000
    p_fa: list[float] = field(default_factory=lambda: [1e-2, 1e-1])
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))
    workers: int = 1
    sweep_fractions: list[float] = field(
        default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])
    sweep_p_fa: float = 1e-2


@dataclass
class ExperimentConfig:
    grid: OfdmGrid
    geometry: Geometry | None
    explicit_paths: list[dict] | None
    path_losses: np.ndarray
    rcs: RcsConfig
    comm_channel: str
    run: RunConfig
    raw: dict

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def load_config(path: str, profile: str = "desk") -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML syntax error: {exc}") from exc
    return parse_config(raw, profile)


def parse_config(raw: dict, profile: str = "desk") -> ExperimentConfig:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile '{profile}'")
    prof = PROFILES[profile]

    g = raw.get("grid", {})
    if not isinstance(g, dict):
        raise ConfigError("'grid' must be a table")
    snr_db = _require(g, "comm_snr_target_db", float, "grid", default=8.0)
    try:
        grid = OfdmGrid(
            n_subcarriers=_require(g, "n_subcarriers", int, "grid",
                                   default=prof["n_subcarriers"]),
            n_symbols=_require(g, "n_symbols", int, "grid",
                               default=prof["n_symbols"]),
            subcarrier_spacing=_require(g, "subcarrier_spacing_hz", float,
                                        "grid",
                                        default=prof["subcarrier_spacing_hz"]),
            carrier_freq=_require(g, "carrier_freq_hz", float, "grid",
                                  default=prof["carrier_freq_hz"]),
            comm_noise_power=_require(g, "comm_noise_power_w", float, "grid",
                                      default=1e-11),
            radar_noise_power=_require(g, "radar_noise_power_w", float, "grid",
                                       default=1e-11),
            power_budget=_require(g, "power_budget_w", float, "grid",
                                  default=100.0),
            comm_snr_target=10.0 ** (snr_db / 10.0) if snr_db > -300 else 0.0,
        )
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc

    s = raw.get("scene", {})
    mode = _require(s, "mode", str, "scene", default="geometry")
    geometry = None
    explicit = None
    if mode == "geometry":
        geometry = Geometry(
            bs_position=_point(s, "bs", "scene") if "bs" in s else (0.0, 0.0),
            reflector_positions=tuple(
                tuple(map(float, p)) for p in s.get(
                    "reflectors", [[-30.0, 10.0], [20.0, 30.0]])),
            target_position=_point(s, "target", "scene") if "target" in s
            else (0.0, 55.0),
            target_velocity=_point(s, "velocity", "scene") if "velocity" in s
            else (30.0, 50.0),
        )
        n_routes = len(geometry.reflector_positions) + 1
        n_routes = n_routes * (n_routes + 1) // 2
    elif mode == "taps":
        explicit = s.get("paths")
        if not isinstance(explicit, list) or not explicit:
            raise ConfigError("'scene.paths' must be a non-empty array of tables")
        n_routes = len(explicit)
    else:
        raise ConfigError(f"'scene.mode' must be 'geometry' or 'taps', got '{mode}'")

    losses = s.get("path_losses", DEFAULT_PATH_LOSSES[:n_routes]
                   if n_routes <= len(DEFAULT_PATH_LOSSES) else None)
    if losses is None or len(losses) != n_routes:
        raise ConfigError(
            f"'scene.path_losses' must list {n_routes} values")
    path_losses = np.asarray([complex(v) if not isinstance(v, list)
                              else complex(v[0], v[1]) for v in losses])
    if np.any(np.abs(path_losses) == 0):
        raise ConfigError("'scene.path_losses' entries must be nonzero")

    r = raw.get("rcs", {})
    default_shares = DEFAULT_NLOS_SHARES if n_routes == 6 else None
    rcs = RcsConfig(
        model=_require(r, "model", str, "rcs", default="swerling1"),
        total_effective_variance=_require(
            r, "total_effective_variance", float, "rcs", default=3e-12),
        los_fraction=_require(r, "los_fraction", float, "rcs", default=0.4),
        nlos_shares=r.get("nlos_shares", default_shares),
        subcarrier_profile=_require(r, "subcarrier_profile", str, "rcs",
                                    default="bandlimited"),
        active_fraction=_require(r, "active_fraction", float, "rcs",
                                 default=0.5),
        rcs_informed_design=bool(r.get("rcs_informed_design", True)),
    )
    if rcs.model not in ("swerling1", "per_subcarrier"):
        raise ConfigError(f"'rcs.model' must be swerling1|per_subcarrier, got '{rcs.model}'")
    if rcs.subcarrier_profile not in ("flat", "bandlimited"):
        raise ConfigError("'rcs.subcarrier_profile' must be flat|bandlimited")
    if not 0.0 <= rcs.los_fraction <= 1.0:
        raise ConfigError("'rcs.los_fraction' must lie in [0, 1]")
    if rcs.nlos_shares is not None and len(rcs.nlos_shares) != n_routes - 1:
        raise ConfigError(f"'rcs.nlos_shares' must list {n_routes - 1} values")

    c = raw.get("comm", {})
    comm_channel = _require(c, "channel", str, "comm", default="flat")
    if comm_channel not in ("flat", "rayleigh"):
        raise ConfigError("'comm.channel' must be flat|rayleigh")

    run_raw = raw.get("run", {})
    run = RunConfig(
        seed=_require(run_raw, "seed", int, "run", default=1),
        n_trials=_require(run_raw, "n_trials", int, "run",
                          default=prof["n_trials"]),
        p_fa=[float(v) for v in run_raw.get("p_fa", [1e-2, 1e-1])],
        variants=list(run_raw.get("variants", VARIANTS)),
        workers=_require(run_raw, "workers", int, "run", default=1),
        sweep_fractions=[float(v) for v in run_raw.get(
            "sweep_fractions", [0.1, 0.3, 0.5, 0.7, 0.9])],
        sweep_p_fa=_require(run_raw, "sweep_p_fa", float, "run", default=1e-2),
    )
    for v in run.variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown design variant '{v}' in 'run.variants'")
    for p in run.p_fa:
        if not 0.0 < p <= 1.0:
            raise ConfigError(f"'run.p_fa' entries must lie in (0, 1], got {p}")

    return ExperimentConfig(grid=grid, geometry=geometry, explicit_paths=explicit,
                            path_losses=path_losses, rcs=rcs,
                            comm_channel=comm_channel, run=run, raw=raw)
