"""Figure rendering for recorded trajectories.

Uses the non-interactive backend so the CLI can run headless; every
figure lands next to the delimited output with a predictable name.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be set first

import numpy as np  # noqa: E402

from .sim import Trajectory  # noqa: E402

# State/input panels stay readable only up to a couple dozen curves.
MAX_CURVES = 24


def _save(fig, path: str) -> str:
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def _semilogy(ax, t, series, label: str) -> None:
    positive = np.where(series > 0.0, series, np.nan)
    ax.semilogy(t, positive, label=label)


def error_figure(traj: Trajectory, path: str) -> str:
    """Decision and plant error norms against time, log scale."""
    t = traj.times
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    plotted = False
    for name, label in (("err_dm", "decision error"),
                        ("err_phys", "plant error")):
        try:
            series = traj.column(name)
        except ValueError:
            continue
        if np.all(np.isnan(series)):
            continue
        _semilogy(ax, t, series, label)
        plotted = True
    if not plotted:
        ax.text(0.5, 0.5, "no reference supplied", ha="center",
                va="center", transform=ax.transAxes)
    ax.set_xlabel("t")
    ax.set_ylabel("error norm")
    ax.grid(True, which="both", alpha=0.3)
    if plotted:
        ax.legend(loc="best")
    fig.tight_layout()
    return _save(fig, path)


def monitor_figure(traj: Trajectory, path: str) -> str:
    """Stationarity residual and Lyapunov value, shared time axis."""
    t = traj.times
    fig, axes = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)
    _semilogy(axes[0], t, traj.kkt, "kkt residual")
    axes[0].set_ylabel("kkt residual")
    axes[0].grid(True, which="both", alpha=0.3)
    v = traj.lyapunov
    if np.all(np.isnan(v)):
        axes[1].text(0.5, 0.5, "no reference supplied", ha="center",
                     va="center", transform=axes[1].transAxes)
    else:
        _semilogy(axes[1], t, v, "V")
    axes[1].set_ylabel("V")
    axes[1].set_xlabel("t")
    axes[1].grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def state_figure(traj: Trajectory, path: str) -> str:
    """State components and agent inputs; thins out crowded panels."""
    t = traj.times
    state_cols = [c for c in traj.columns if c.startswith("x_")]
    input_cols = [c for c in traj.columns if c.startswith("u_")]
    if not state_cols:
        state_cols = [c for c in traj.columns if c.startswith("wbar_")]
    n_panels = 2 if input_cols else 1
    fig, axes = plt.subplots(n_panels, 1, figsize=(6.0, 3.0 * n_panels),
                             sharex=True, squeeze=False)
    ax = axes[0][0]
    shown = state_cols[:MAX_CURVES]
    for c in shown:
        ax.plot(t, traj.column(c), lw=0.9,
                label=c if len(shown) <= 8 else None)
    if len(state_cols) > MAX_CURVES:
        ax.set_title(f"first {MAX_CURVES} of {len(state_cols)} components",
                     fontsize=9)
    if len(shown) <= 8:
        ax.legend(loc="best", fontsize=8)
    ax.set_ylabel("state")
    ax.grid(True, alpha=0.3)
    if input_cols:
        ax = axes[1][0]
        for c in input_cols[:MAX_CURVES]:
            ax.plot(t, traj.column(c), lw=0.9,
                    label=c if len(input_cols) <= 8 else None)
        if len(input_cols) <= 8:
            ax.legend(loc="best", fontsize=8)
        ax.set_ylabel("input")
        ax.grid(True, alpha=0.3)
    axes[-1][0].set_xlabel("t")
    fig.tight_layout()
    return _save(fig, path)


def render_report(traj: Trajectory, out_dir: str, stem: str) -> list:
    """All figures for one run; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    written.append(error_figure(
        traj, os.path.join(out_dir, f"{stem}_errors.png")))
    written.append(monitor_figure(
        traj, os.path.join(out_dir, f"{stem}_monitors.png")))
    written.append(state_figure(
        traj, os.path.join(out_dir, f"{stem}_state.png")))
    return written
