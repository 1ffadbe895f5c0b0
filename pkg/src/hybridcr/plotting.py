"""Matplotlib rendering of experiment result tables."""

from __future__ import annotations

from typing import Dict, List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_RATE_SERIES = (("hybrid_rate", "hybrid"),
                ("interweave_rate", "interweave"),
                ("underlay_rate", "underlay"))

_AXIS_LABELS = {
    "Pout_target": "primary outage budget",
    "P1_prior": "primary activity probability",
    "gamma0_db": "SINR threshold [dB]",
}


def _column(rows: List[Dict[str, float]], name: str) -> np.ndarray:
    return np.array([row[name] for row in rows], dtype=float)


def render_figure(experiment_id: str, rows: List[Dict[str, float]],
                  png_path: str, sweep_axis: str | None = None) -> None:
    """Render the standard figure for an experiment to a PNG file."""
    x = _column(rows, "sweep_value")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    log_x = x.min() > 0 and x.max() / x.min() > 8

    if experiment_id == "fig2_outage_approx":
        ax.plot(x, _column(rows, "closed_form_outage"), "-o", label="closed form")
        ax.errorbar(x, _column(rows, "mc_outage"),
                    yerr=3 * _column(rows, "mc_outage_se"),
                    fmt="s", ms=4, capsize=3, label="Monte Carlo")
        ax.set_ylabel("primary outage probability")
        sweep_axis = sweep_axis or "gamma0_db"
    elif experiment_id == "fig6_power_vs_pout":
        ax.plot(x, _column(rows, "P1_star"), "-o", label="hybrid busy-branch power")
        ax.plot(x, _column(rows, "P_und"), "-s", label="underlay power")
        ax.set_ylabel("secondary transmit power (linear)")
        sweep_axis = sweep_axis or "Pout_target"
    else:
        for column, label in _RATE_SERIES:
            y = _column(rows, column)
            se = _column(rows, column + "_se")
            ax.errorbar(x, y, yerr=3 * se, fmt="-o", ms=4, capsize=3, label=label)
        ax.set_ylabel("average secondary rate [bits/s/Hz]")

    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(_AXIS_LABELS.get(sweep_axis or "", sweep_axis or "sweep value"))
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
