"""Matplotlib figure rendering for the report paths.

CSV files are the authoritative artifacts; these figures are the
human-readable rendering written alongside them. SVG output is made
byte-deterministic by pinning the hash salt and dropping the date
metadata, so re-running a command reproduces the file exactly.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_DETERMINISTIC_RC = {"svg.hashsalt": "prefopt"}


def save_figure(fig, path) -> None:
    with plt.rc_context(_DETERMINISTIC_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def coefficient_curve_figure(curve):
    """One line per beta of the gradient scale across the margin grid."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for beta, values in zip(curve.betas, curve.values):
        ax.plot(curve.margins, values, label=f"beta={beta:g}")
    ax.set_xlabel("margin")
    ax.set_ylabel("coefficient")
    ax.set_title("sample-level dynamic coefficient")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def training_curves_figure(rows, title: str):
    """Rewards trends (chosen / reject / margin) over training steps."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    steps = [r.step for r in rows]
    ax.plot(steps, [r.rewards_chosen_mean for r in rows], label="rewards/chosen")
    ax.plot(steps, [r.rewards_reject_mean for r in rows], label="rewards/reject")
    ax.plot(steps, [r.rewards_margin_mean for r in rows], label="rewards/margin")
    ax.axhline(0.0, color="black", linewidth=0.8, alpha=0.5)
    ax.set_xlabel("step")
    ax.set_ylabel("normalized rewards (nats)")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def accuracy_report_figure(cells):
    """Toy accuracy per method across the (beta, lr) grid, one panel per lr."""
    lrs = sorted({c.lr for c in cells})
    methods = sorted({c.method for c in cells})
    fig, axes = plt.subplots(1, max(len(lrs), 1), figsize=(5.2 * max(len(lrs), 1), 4.2),
                             squeeze=False)
    for ax, lr in zip(axes[0], lrs):
        for method in methods:
            pts = sorted(
                [(c.beta, c.toy_accuracy) for c in cells if c.lr == lr and c.method == method]
            )
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=method)
        ax.set_xscale("log")
        ax.set_xlabel("beta")
        ax.set_ylabel("toy accuracy")
        ax.set_title(f"lr={lr:g}")
        ax.set_ylim(-0.05, 1.05)
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    return fig
