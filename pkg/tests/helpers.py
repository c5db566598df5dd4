"""Shared fixtures-in-plain-python for the test suite."""

import numpy as np

from mpisac import Geometry, OfdmGrid, Path, PathSet


def make_grid(n=16, m=16, spacing=500e3, f0=1.2e12, budget=100.0,
              noise=1e-11, snr_db=8.0):
    return OfdmGrid(n_subcarriers=n, n_symbols=m, subcarrier_spacing=spacing,
                    carrier_freq=f0, comm_noise_power=noise,
                    radar_noise_power=noise, power_budget=budget,
                    comm_snr_target=10 ** (snr_db / 10.0))


TABLE_SCENE = Geometry(bs_position=(0.0, 0.0),
                       reflector_positions=((-30.0, 10.0), (20.0, 30.0)),
                       target_position=(0.0, 55.0),
                       target_velocity=(30.0, 50.0))


def random_pathset(rng, n_sc, n_paths):
    """Random paths with pairwise distinct Doppler taps."""
    dopplers = rng.choice(n_sc, size=n_paths, replace=False)
    return PathSet([Path(delay_tap=int(rng.integers(0, n_sc)),
                         doppler_tap=int(d),
                         path_loss=complex(rng.normal(), rng.normal()))
                    for d in dopplers])
