"""Figure rendering for run and sweep bundles (SVG files next to the CSVs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_run_figure(records, path) -> None:
    """Time-series panels of the main monitored functionals."""
    t = np.array([r.time for r in records])
    panels = [
        ("mass", "total cell mass"),
        ("n_linf", "max density"),
        ("quasi_energy", "quasi-energy"),
        ("grad_c_l2", "signal gradient energy"),
        ("u_l2", "kinetic energy"),
        ("n_l2_sq", "density L2^2"),
    ]
    fig, axes = plt.subplots(3, 2, figsize=(9, 8), sharex=True)
    for ax, (name, title) in zip(axes.ravel(), panels):
        ax.plot(t, [getattr(r, name) for r in records], lw=1.2)
        ax.set_title(title, fontsize=9)
        ax.grid(alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_eps_figure(eps_list, d_n, d_c, path) -> None:
    pairs = [f"{a:g}/{b:g}" for a, b in zip(eps_list[:-1], eps_list[1:])]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(range(len(d_n)), d_n, "o-", label="density L1 distance")
    ax.semilogy(range(len(d_c)), d_c, "s-", label="signal H1 distance")
    ax.set_xticks(range(len(pairs)), pairs)
    ax.set_xlabel("regularization pair")
    ax.set_ylabel("trajectory distance")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_mu_figure(mu_list, late_sup, slopes, path) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.loglog(mu_list, late_sup, "o-")
    ax1.set_xlabel("mu")
    ax1.set_ylabel("late-window sup max density")
    ax1.grid(alpha=0.3, which="both")
    ax2.semilogx(mu_list, slopes, "o-")
    ax2.axhline(0.0, color="k", lw=0.6)
    ax2.set_xlabel("mu")
    ax2.set_ylabel("late log-density slope")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_mms_figure(h_list, errors, order, label, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.loglog(h_list, errors, "o-", label=f"{label} (fitted order {order:.2f})")
    ref = errors[0] * (np.array(h_list) / h_list[0]) ** round(order)
    ax.loglog(h_list, ref, "k--", lw=0.8, label=f"slope {round(order)}")
    ax.set_xlabel("h")
    ax.set_ylabel("L2 error")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
