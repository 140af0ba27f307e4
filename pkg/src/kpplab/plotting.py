"""Figures written next to the CSV outputs of each experiment."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 3.8),
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "legend.frameon": False,
    "savefig.dpi": 120,
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps reruns byte-stable
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def trajectory_figure(traj, path, title: str = ""):
    """Mass and front markers against time."""
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
        ax1.plot(traj.times, traj.mass, color="k")
        ax1.set_xlabel("t")
        ax1.set_ylabel("total mass")
        for series, label in ((traj.right, "R0"), (traj.left, "L0"), (traj.exp_marker, "R1")):
            y = np.where(np.isfinite(series), series, np.nan)
            ax2.plot(traj.times, y, label=label)
        ax2.set_xlabel("t")
        ax2.set_ylabel("position")
        ax2.legend()
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def pair_figure(pair, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(pair.lower.times, pair.lower.mass, label="lower")
        ax.plot(pair.upper.times, pair.upper.mass, label="upper", ls="--")
        ax.set_xlabel("t")
        ax.set_ylabel("total mass")
        ax.set_title(f"{pair.kind} coupling, min(upper - lower) = {pair.min_gap:.3g}")
        ax.legend()
        return _save(fig, path)


def estimate_bars(estimates, path, reference: float | None = None, ylabel: str = "estimate"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        idx = np.arange(len(estimates))
        ax.errorbar(
            idx, [e.mean for e in estimates], yerr=[e.half_width for e in estimates],
            fmt="o", capsize=4, color="k",
        )
        ax.set_xticks(idx)
        ax.set_xticklabels([e.name for e in estimates], rotation=15, ha="right", fontsize=8)
        if reference is not None:
            ax.axhline(reference, color="C3", ls=":", label="closed form")
            ax.legend()
        ax.set_ylabel(ylabel)
        return _save(fig, path)


def extinction_figure(ts: np.ndarray, p_hat: np.ndarray, exact: np.ndarray, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.step(ts, p_hat, where="post", label="Monte Carlo", color="k")
        ax.plot(ts, exact, color="C3", ls="--", label="superprocess formula")
        ax.set_xlabel("t")
        ax.set_ylabel("P(tau <= t)")
        ax.legend()
        return _save(fig, path)


def profile_figure(profiles: Sequence, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for prof in profiles:
            x = prof.mean.x
            m = prof.mean.values
            ax.plot(x, m, label=f"T = {prof.T:g}")
            ax.fill_between(x, m - 2 * prof.stderr, m + 2 * prof.stderr, alpha=0.2)
        ax.set_xlabel("x - R0(s)")
        ax.set_ylabel("front-aligned mean density")
        ax.legend()
        return _save(fig, path)


def scaling_figure(scaling, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        T = scaling.T
        m = np.array([e.mean for e in scaling.estimates])
        hw = np.array([e.half_width for e in scaling.estimates])
        use = (T > 0) & (m > 0)
        ax.errorbar(T[use], m[use], yerr=hw[use], fmt="o", color="k", capsize=3)
        if use.any():
            ref = m[use][-1] * (T[use] / T[use][-1]) ** 0.25
            ax.plot(T[use], ref, ls=":", color="C3", label="T^(1/4) reference")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("T")
        ax.set_ylabel("E[max(0, R0)]")
        ax.set_title(f"fitted slope {scaling.slope:.3f} +- {scaling.slope_se:.3f}")
        ax.legend()
        return _save(fig, path)


def curve_figure(x, estimates, path, xlabel: str, ylabel: str):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.errorbar(
            x, [e.mean for e in estimates], yerr=[e.half_width for e in estimates],
            fmt="o-", capsize=3, color="k",
        )
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_ylim(-0.02, 1.05)
        return _save(fig, path)
