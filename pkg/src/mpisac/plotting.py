"""Figure rendering for the CLI report path (matplotlib, Agg backend).

Each command writes PNG figures next to its CSV output.  Figures carry no
timestamps or host-dependent metadata so repeat runs stay byte-identical.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(dpi=150, bbox_inches="tight", metadata={"Software": "mpisac"})

VARIANT_STYLE = {
    "joint": dict(color="tab:red", marker="o", label="joint design"),
    "transmit-only": dict(color="tab:orange", marker="s", label="transmit design only"),
    "detector-only": dict(color="tab:blue", marker="^", label="detector design only"),
    "none": dict(color="tab:gray", marker="d", label="no design"),
    "los-only": dict(color="tab:green", marker="x", label="LoS only"),
}


def _style(variant: str) -> dict:
    return VARIANT_STYLE.get(variant, dict(marker=".", label=variant))


def plot_roc(rows: list[dict], out_path: str):
    """Detection vs false-alarm probability, one curve per design variant."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    variants = sorted({r["variant"] for r in rows})
    for name in variants:
        pts = sorted((r["p_fa"], r["p_d"], r["halfwidth"])
                     for r in rows if r["variant"] == name)
        p_fa, p_d, hw = (np.array(v) for v in zip(*pts))
        ax.errorbar(p_fa, p_d, yerr=hw, capsize=2, **_style(name))
    ax.set_xscale("log")
    ax.set_xlabel("probability of false alarm")
    ax.set_ylabel("probability of detection")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def plot_rcs_sweep(rows: list[dict], out_path: str):
    """p_d versus the NLoS share of the effective RCS variance."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    variants = sorted({r["variant"] for r in rows})
    for name in variants:
        pts = sorted((r["nlos_fraction"], r["p_d"], r["halfwidth"])
                     for r in rows if r["variant"] == name)
        frac, p_d, hw = (np.array(v) for v in zip(*pts))
        ax.errorbar(frac, p_d, yerr=hw, capsize=2, **_style(name))
    ax.set_xlabel("NLoS fraction of effective RCS variance")
    ax.set_ylabel("probability of detection")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower left", fontsize=8)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def plot_ddmap(values: np.ndarray, out_path: str, title: str,
               target_bin: tuple[int, int] | None = None):
    """Delay-Doppler statistic map on a log scale; target circled in white."""
    fig, ax = plt.subplots(figsize=(4.8, 4))
    img = ax.imshow(np.log10(values), origin="lower", aspect="auto",
                    cmap="viridis",
                    extent=(-0.5, values.shape[1] - 0.5,
                            -0.5, values.shape[0] - 0.5))
    if target_bin is not None:
        ax.scatter([target_bin[1]], [target_bin[0]], s=120,
                   facecolors="none", edgecolors="white", linewidths=1.5)
    ax.set_xlabel("Doppler tap")
    ax.set_ylabel("delay tap")
    ax.set_title(title, fontsize=10)
    fig.colorbar(img, ax=ax, label="log10 statistic")
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def plot_objective_trace(trace: list[float], out_path: str):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.plot(np.arange(1, len(trace) + 1), trace, marker="o", color="tab:red")
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("design objective")
    ax.grid(True, alpha=0.3)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
