"""GLRT statistic, calibration, Monte Carlo machinery and scanning."""

import numpy as np
import pytest
from scipy import stats as sps

from mpisac import (DegenerateDenominator, InsufficientTrials, Path, PathSet,
                    WeightVector, build_projectors, calibrate_threshold,
                    delay_doppler_map, draw_symbols, estimate_pd,
                    glrt_statistic, glrt_statistic_mle_oracle, path_coeffs,
                    synthesize_echo, uniform_allocation)
from mpisac import rng as rngmod
from mpisac.detector import (DelayDopplerScanner, h0_statistics, h1_statistics,
                             hypothesize_target, threshold_from_statistics,
                             wilson_halfwidth)

from helpers import TABLE_SCENE, make_grid, random_pathset


def build_case(seed=0, n=16, m=16, n_paths=3):
    grid = make_grid(n=n, m=m)
    rng = np.random.default_rng(seed)
    paths = random_pathset(rng, n, n_paths)
    channels = [path_coeffs(p, grid) for p in paths]
    projectors = build_projectors(paths, grid)
    alloc = uniform_allocation(grid)
    symbols = draw_symbols(grid, rng)
    return grid, paths, channels, projectors, alloc, symbols


def test_weight_vector_validation():
    with pytest.raises(ValueError):
        WeightVector(np.array([0.5, 0.5]))  # norm != 1
    with pytest.raises(ValueError):
        WeightVector(np.array([-1.0, 0.0]))
    w = WeightVector.equal(4)
    assert np.sum(w.w ** 2) == pytest.approx(1.0, abs=1e-15)
    w = WeightVector.from_unnormalized(np.array([3.0, 4.0]))
    np.testing.assert_allclose(w.w, [0.6, 0.8], rtol=1e-12)


def test_wilson_halfwidth_closed_form():
    z = 1.959963984540054
    n, k = 10000, 500
    p = k / n
    expected = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    assert wilson_halfwidth(k, n) == pytest.approx(expected, rel=1e-12)
    assert wilson_halfwidth(0, 0) == 1.0


def test_statistic_equals_dense_definition():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    rng = np.random.default_rng(1)
    y = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    w = WeightVector.from_unnormalized(np.array([1.0, 2.0, 3.0]))
    got = glrt_statistic(y, projectors, w)
    pn = projectors.noise_projector
    denom = np.sum(np.abs(pn @ y) ** 2)
    num = sum(w.w[l] ** 2 * np.sum(np.abs(projectors.signal_projectors[l] @ y) ** 2)
              for l in range(3))
    assert got == pytest.approx(1.0 + num / denom, rel=1e-12)


def test_equal_weight_affine_identity_vs_mle_oracle():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    rng = np.random.default_rng(2)
    w = WeightVector.equal(len(paths))
    for _ in range(5):
        y = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        weighted = glrt_statistic(y, projectors, w)
        oracle = glrt_statistic_mle_oracle(y, paths, alloc, symbols, grid)
        assert oracle - 1.0 == pytest.approx(len(paths) * (weighted - 1.0),
                                             rel=1e-9)


def test_statistic_scale_invariance_power_of_two():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    rng = np.random.default_rng(3)
    y = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    w = WeightVector.equal(3)
    assert glrt_statistic(y, projectors, w) == glrt_statistic(4.0 * y, projectors, w)


def test_zero_frame_degenerate():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    with pytest.raises(DegenerateDenominator):
        glrt_statistic(np.zeros((16, 16), dtype=complex), projectors,
                       WeightVector.equal(3))


def test_signal_subspace_frame_blows_up():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    u = projectors.steering[:, 0]
    y = np.outer(u, np.ones(16))
    assert glrt_statistic(y, projectors, WeightVector.equal(3)) > 1e20


def test_threshold_rank_small_example():
    stats = np.arange(1, 11, dtype=float)  # 1..10
    assert threshold_from_statistics(stats, 0.3) == 7.0
    assert threshold_from_statistics(stats, 1.0) == 1.0
    assert threshold_from_statistics(stats, 1e-9) == 10.0


def test_calibrate_threshold_requires_enough_trials():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    with pytest.raises(InsufficientTrials):
        calibrate_threshold(projectors, WeightVector.equal(3), grid,
                            p_fa=1e-3, n_trials=1000, seed=0)


def test_threshold_independent_of_noise_power_bitwise():
    # Calibration draws unit-variance noise, so rescaling the radar noise
    # leaves the threshold bit-identical.
    _, paths, _, projectors, _, _ = build_case()
    w = WeightVector.equal(3)
    t1 = calibrate_threshold(projectors, w, make_grid(noise=1e-11), 1e-2, 6000, 0)
    t2 = calibrate_threshold(projectors, w, make_grid(noise=7e-3), 1e-2, 6000, 0)
    assert t1 == t2


def test_empirical_false_alarm_matches_target():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    w = WeightVector.equal(3)
    stats = h0_statistics(projectors, w, grid, 20000, seed=4)
    thr = threshold_from_statistics(stats, 0.1)
    assert np.mean(stats > thr) == pytest.approx(0.1, abs=0.001)


def test_h0_statistic_f_distribution_single_path():
    grid = make_grid()
    paths = PathSet([Path(0, 5, 1.0)])
    projectors = build_projectors(paths, grid)
    stats = h0_statistics(projectors, WeightVector(np.ones(1)), grid,
                          20000, seed=5)
    n, m = 16, 16
    sample = (stats - 1.0) * (n - 1)
    _, p_value = sps.kstest(sample, sps.f(2 * m, 2 * m * (n - 1)).cdf)
    assert p_value > 0.01


def test_monte_carlo_worker_count_invariance():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    w = WeightVector.equal(3)
    h0_serial = h0_statistics(projectors, w, grid, 1500, seed=6, workers=1)
    h0_pool = h0_statistics(projectors, w, grid, 1500, seed=6, workers=2)
    np.testing.assert_array_equal(h0_serial, h0_pool)
    h1_serial = h1_statistics(paths, channels, projectors, alloc, symbols, w,
                              grid, "swerling1", 1500, seed=6, workers=1)
    h1_pool = h1_statistics(paths, channels, projectors, alloc, symbols, w,
                            grid, "swerling1", 1500, seed=6, workers=2)
    np.testing.assert_array_equal(h1_serial, h1_pool)


def attach_variance(paths, value):
    return PathSet([Path(p.delay_tap, p.doppler_tap, p.path_loss,
                         rcs_variance=np.full(1, value)) for p in paths])


def test_pd_approaches_one_at_infinite_snr():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    strong = attach_variance(paths, 1e6)
    report = estimate_pd(1.5, strong, channels, projectors, alloc, symbols,
                         WeightVector.equal(3), grid, "swerling1", 500, seed=7)
    assert report.p_d_empirical > 0.99


def test_pd_matches_pfa_without_signal():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    silent = attach_variance(paths, 1e-30)
    w = WeightVector.equal(3)
    thr = calibrate_threshold(projectors, w, grid, 0.1, 10000, seed=8)
    report = estimate_pd(thr, silent, channels, projectors, alloc, symbols, w,
                         grid, "swerling1", 10000, seed=8)
    assert report.p_d_empirical == pytest.approx(0.1, abs=0.02)


def test_pd_monotone_in_rcs_variance():
    grid, paths, channels, projectors, alloc, symbols = build_case()
    w = WeightVector.equal(3)
    thr = calibrate_threshold(projectors, w, grid, 1e-2, 10000, seed=9)
    pds = []
    for var in (1e-13, 1e-12, 1e-11):
        pset = attach_variance(paths, var)
        rep = estimate_pd(thr, pset, channels, projectors, alloc, symbols, w,
                          grid, "swerling1", 4000, seed=9)
        pds.append(rep.p_d_empirical)
    assert pds[0] < pds[1] < pds[2]


def test_hypothesize_target_inverts_true_bin():
    grid = make_grid()
    hypo = hypothesize_target(3, 13, TABLE_SCENE, grid)
    # Range within one delay-bin width of the true 55 m target, on the bearing.
    assert hypo.target_position[0] == pytest.approx(0.0, abs=1e-9)
    assert abs(hypo.target_position[1] - 55.0) < 20.0
    # Speed close to the configured one (same Doppler bin).
    assert np.linalg.norm(hypo.target_velocity) == pytest.approx(
        np.linalg.norm([30.0, 50.0]), rel=0.1)


def test_hypothesize_target_degenerate_bins():
    grid = make_grid()
    assert hypothesize_target(0, 13, TABLE_SCENE, grid) is None
    hypo = hypothesize_target(3, 0, TABLE_SCENE, grid)
    assert hypo.target_velocity == (0.0, 0.0)


def test_single_mode_map_peaks_at_true_bin():
    grid = make_grid(noise=1e-30)
    paths = PathSet([Path(5, 9, 1.0)])
    channels = [path_coeffs(paths.paths[0], grid)]
    alloc = uniform_allocation(grid)
    symbols = draw_symbols(grid, np.random.default_rng(10))
    frame = synthesize_echo(paths, channels, alloc, symbols, "H1", "swerling1",
                            rngmod.substream(11, 1, 0), grid)
    vals = delay_doppler_map(frame, grid, alloc, symbols, "single",
                             np.arange(16), np.arange(16))
    assert np.unravel_index(np.argmax(vals), vals.shape) == (5, 9)


def test_combined_mode_map_peaks_at_los_bin():
    grid = make_grid(noise=1e-20)
    from mpisac.scene import taps_from_geometry
    paths = taps_from_geometry(TABLE_SCENE, grid, np.ones(6))
    channels = [path_coeffs(p, grid) for p in paths]
    alloc = uniform_allocation(grid)
    symbols = draw_symbols(grid, np.random.default_rng(12))
    frame = synthesize_echo(paths, channels, alloc, symbols, "H1", "swerling1",
                            rngmod.substream(13, 1, 0), grid)
    vals = delay_doppler_map(frame, grid, alloc, symbols, "combined",
                             np.arange(16), np.arange(16),
                             geometry=TABLE_SCENE)
    los = (paths.paths[0].delay_tap, paths.paths[0].doppler_tap)
    assert np.unravel_index(np.argmax(vals), vals.shape) == los


def test_scanner_rejects_bad_mode_and_missing_geometry():
    grid = make_grid()
    alloc = uniform_allocation(grid)
    symbols = draw_symbols(grid, np.random.default_rng(14))
    with pytest.raises(ValueError):
        DelayDopplerScanner(grid, alloc, symbols, "both", np.arange(4),
                            np.arange(4))
    with pytest.raises(ValueError):
        DelayDopplerScanner(grid, alloc, symbols, "combined", np.arange(4),
                            np.arange(4))
