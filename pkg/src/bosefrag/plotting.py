"""Figures rendered from the CSV outputs of a run directory."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "axes.labelsize": 11,
    "legend.fontsize": 9,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "savefig.dpi": 150,
}


def read_csv(path) -> Dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def plot_trajectory(data, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.5))
        t = data["t_au"]
        ax1.plot(t, data["x0_exact"], "k-", lw=1.2, label="exact")
        ax1.plot(t, data["x0_trotter"], "r--", lw=1.0, label="Trotter")
        ax1.set_ylabel(r"$\langle x \rangle$")
        ax1.legend(frameon=False)
        ax2.plot(t, data["left_exact"], "k-", lw=1.2, label="left well, exact")
        ax2.plot(t, data["left_trotter"], "r--", lw=1.0, label="left well, Trotter")
        ax2.set_ylabel("population")
        ax2.set_xlabel("time (a.u.)")
        ax2.set_ylim(-0.02, 1.02)
        ax2.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_sweep(data, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        dt, err = data["dt_au"], data["overlap_error"]
        ax.loglog(dt, err, "o-", color="C0", label="vs exact H")
        if "trotter_error" in data:
            err = data["trotter_error"]
            ax.loglog(dt, err, "s-", color="C3", label="vs fragment sum")
        ref = err[-1] * (dt / dt[-1]) ** 2
        ax.loglog(dt, ref, ":", color="0.5", label=r"$\propto \Delta t^2$")
        ax.set_xlabel(r"Trotter step $\Delta t$ (a.u.)")
        ax.set_ylabel(r"$1 - |\langle\psi_{ex}|\psi_{tr}\rangle|$")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_spectrum(data, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.5))
        lvl = data["level"].astype(int)
        ax1.hlines(data["exact_cm"], lvl - 0.35, lvl + 0.35, colors="k", label="exact")
        ax1.plot(lvl, data["heff_cm"], "r_", ms=18, label=r"$H_{\rm eff}$")
        ax1.set_xlabel("level")
        ax1.set_ylabel(r"energy (cm$^{-1}$)")
        ax1.legend(frameon=False)
        ax2.bar(lvl, data["difference_cm"], color="C1")
        ax2.axhline(0.0, color="k", lw=0.8)
        ax2.set_xlabel("level")
        ax2.set_ylabel(r"$E_{\rm eff} - E_{\rm exact}$ (cm$^{-1}$)")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


FIGURES = {
    "trajectory.csv": ("trajectory.png", plot_trajectory),
    "trotter_sweep.csv": ("trotter_sweep.png", plot_sweep),
    "spectrum.csv": ("spectrum.png", plot_spectrum),
}


def render_report(directory) -> List[Path]:
    """Render a PNG next to each known CSV in ``directory``; returns the written paths."""
    directory = Path(directory)
    written = []
    for name, (png, fn) in FIGURES.items():
        src = directory / name
        if not src.exists():
            continue
        data = read_csv(src)
        if not data:
            continue
        fn(data, directory / png)
        written.append(directory / png)
    return written
