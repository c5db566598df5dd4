"""End-to-end CLI runs: outputs, manifest, determinism, error paths."""

import json
import os

import pytest

from mpisac.cli import main

FAST_CONFIG = """
[run]
seed = 3
n_trials = 600
p_fa = [0.1]
sweep_p_fa = 0.1
sweep_fractions = [0.2, 0.8]
variants = ["joint", "none"]
"""


@pytest.fixture()
def fast_config(tmp_path):
    path = tmp_path / "fast.toml"
    path.write_text(FAST_CONFIG)
    return str(path)


def run_cli(*argv):
    return main(list(argv))


def read_tree(outdir):
    out = {}
    for name in sorted(os.listdir(outdir)):
        with open(os.path.join(outdir, name), "rb") as fh:
            out[name] = fh.read()
    return out


def test_roc_outputs_and_manifest(fast_config, tmp_path):
    out = tmp_path / "roc"
    assert run_cli("roc", "--config", fast_config, "--out", str(out)) == 0
    files = sorted(os.listdir(out))
    assert files == ["manifest.json", "roc.csv", "roc.png"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "roc"
    assert manifest["seed"] == 3
    assert manifest["outputs"] == ["roc.csv", "roc.png"]
    assert len(manifest["config_hash"]) == 16
    header, *rows = (out / "roc.csv").read_text().splitlines()
    assert header == "variant,p_fa,p_fa_empirical,p_d,halfwidth,threshold,n_trials"
    assert len(rows) == 2  # two variants, one p_fa
    assert (out / "roc.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_no_figures_flag(fast_config, tmp_path):
    out = tmp_path / "roc"
    assert run_cli("roc", "--config", fast_config, "--out", str(out),
                   "--no-figures") == 0
    assert sorted(os.listdir(out)) == ["manifest.json", "roc.csv"]


def test_roc_byte_identical_across_runs_and_workers(fast_config, tmp_path):
    outs = [tmp_path / f"run{i}" for i in range(3)]
    run_cli("roc", "--config", fast_config, "--out", str(outs[0]))
    run_cli("roc", "--config", fast_config, "--out", str(outs[1]))
    run_cli("roc", "--config", fast_config, "--out", str(outs[2]),
            "--workers", "4")
    base = read_tree(outs[0])
    assert read_tree(outs[1]) == base
    assert read_tree(outs[2]) == base


def test_rcs_sweep_outputs(fast_config, tmp_path):
    out = tmp_path / "sweep"
    assert run_cli("rcs-sweep", "--config", fast_config, "--out", str(out)) == 0
    assert sorted(os.listdir(out)) == ["manifest.json", "rcs_sweep.csv",
                                       "rcs_sweep.png"]
    header, *rows = (out / "rcs_sweep.csv").read_text().splitlines()
    assert header == "nlos_fraction,variant,p_fa,p_d,halfwidth,threshold,n_trials"
    assert len(rows) == 4  # two fractions x two variants


def test_ddmap_outputs(tmp_path):
    cfg = tmp_path / "dd.toml"
    cfg.write_text("[run]\nseed = 5\n")
    out = tmp_path / "dd"
    assert run_cli("ddmap", "--config", str(cfg), "--out", str(out)) == 0
    assert sorted(os.listdir(out)) == ["ddmap.csv", "ddmap_combined.png",
                                       "ddmap_single.png", "manifest.json"]
    header, *rows = (out / "ddmap.csv").read_text().splitlines()
    assert header == "mode,delay_tap,doppler_tap,value"
    assert len(rows) == 2 * 16 * 16


def test_optimize_outputs(fast_config, tmp_path):
    out = tmp_path / "opt"
    assert run_cli("optimize", "--config", fast_config, "--out", str(out)) == 0
    assert sorted(os.listdir(out)) == ["manifest.json", "optimize_solution.csv",
                                       "optimize_trace.csv",
                                       "optimize_trace.png"]
    lines = (out / "optimize_trace.csv").read_text().splitlines()
    objs = [float(l.split(",")[1]) for l in lines[1:]]
    assert all(b >= a - 1e-9 for a, b in zip(objs, objs[1:]))
    sol = (out / "optimize_solution.csv").read_text().splitlines()
    kinds = [l.split(",")[0] for l in sol[1:]]
    assert kinds.count("weight") == 6
    assert kinds.count("gain") == 256
    assert kinds[-1] == "converged"


def test_seed_and_trials_overrides(fast_config, tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    run_cli("roc", "--config", fast_config, "--out", str(out1),
            "--no-figures")
    run_cli("roc", "--config", fast_config, "--out", str(out2),
            "--no-figures", "--seed", "99")
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m2["seed"] == 99
    assert read_tree(out1)["roc.csv"] != read_tree(out2)["roc.csv"]


def test_insufficient_trials_exit_code(tmp_path, capsys):
    cfg = tmp_path / "tiny.toml"
    cfg.write_text("[run]\nn_trials = 100\np_fa = [0.01]\n"
                   'variants = ["none"]\n')
    code = run_cli("roc", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('[scene]\nmode = "rays"\n')
    code = run_cli("roc", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 2
    assert "scene.mode" in capsys.readouterr().err
