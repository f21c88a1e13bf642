"""Matplotlib rendering of the experiment outputs.

Figures are written next to the CSV files they visualize; the CSV schema
stays the machine contract, the PNGs are for eyeballing runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_density", "render_sweep_losses", "render_sweep_rhos"]


def render_density(path: str | Path, hist: np.ndarray, curve=None,
                   atom_location=None, atom_mass: float = 0.0, title: str = "") -> Path:
    """hist columns: bin_left, bin_right, count, density."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4.2))
    if hist.size:
        widths = hist[:, 1] - hist[:, 0]
        ax.bar(hist[:, 0], hist[:, 3], width=widths, align="edge",
               color="0.8", edgecolor="0.4", linewidth=0.4, label="empirical eigenvalues")
    if curve is not None and len(curve.grid):
        ax.plot(curve.grid, curve.density, "k-", lw=1.2, label="limiting density")
    if atom_location is not None and atom_mass > 0:
        ax.plot([atom_location], [0.0], "ko", ms=6,
                label=f"Dirac mass {atom_mass:g}")
    ax.set_xlabel("eigenvalue")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _series(rows, metric):
    pts = sorted((r.n, r.mean, r.stderr) for r in rows if r.metric == metric)
    if not pts:
        return None
    arr = np.array(pts, dtype=float)
    return arr[:, 0], arr[:, 1], arr[:, 2]


_LOSS_STYLE = [
    ("loss_check_inf", "o-", "inf loss (check)"),
    ("loss_check_selected", "o--", "selected loss (check)"),
    ("loss_hat_inf", "s-", "inf loss (hat)"),
    ("loss_hat_selected", "s--", "selected loss (hat)"),
    ("loss_check_clairvoyant", "^-", "clairvoyant baseline"),
    ("d_star", "k:", "limit optimum"),
]

_RHO_STYLE = [
    ("rho_check_selected", "o--", "selected rho (check)"),
    ("rho_check_argmin", "o-", "argmin rho (check)"),
    ("rho_check_star", "k:", "limit rho (check)"),
    ("rho_hat_selected", "s--", "selected rho (hat)"),
    ("rho_hat_argmin", "s-", "argmin rho (hat)"),
    ("rho_hat_star", "k-.", "limit rho (hat)"),
    ("rho_check_clairvoyant", "^-", "clairvoyant rho"),
]


def _render_rows(path, rows, styles, ylabel):
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for metric, style, label in styles:
        ser = _series(rows, metric)
        if ser is None:
            continue
        ns, means, errs = ser
        ax.errorbar(ns, means, yerr=errs, fmt=style, ms=4, lw=1.0, capsize=2, label=label)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_sweep_losses(path, rows) -> Path:
    return _render_rows(path, rows, _LOSS_STYLE, "normalized Frobenius loss")


def render_sweep_rhos(path, rows) -> Path:
    return _render_rows(path, rows, _RHO_STYLE, "shrinkage parameter")
