"""Matplotlib figures written next to CSV/JSON reports (Agg backend, no display)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_flow", "plot_curve", "plot_field", "plot_mass_scan"]

RC = {"font.size": 9, "axes.labelsize": 9, "legend.fontsize": 8, "figure.dpi": 120}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return str(path)


def plot_flow(state, path):
    """m_H, area drift and time-flat residual along a flow."""
    lam = state.column("lambda")
    with plt.rc_context(RC):
        fig, ax = plt.subplots(1, 3, figsize=(9, 2.8))
        ax[0].plot(lam, state.column("m_H"), "k.-", ms=3)
        ax[0].set_xlabel(r"$\lambda$")
        ax[0].set_ylabel(r"$m_H$")
        ax[1].semilogy(lam, np.maximum(state.column("area_rel_err"), 1e-17), "C0.-", ms=3)
        ax[1].set_xlabel(r"$\lambda$")
        ax[1].set_ylabel("relative area drift")
        if "tf_r_abs" in state.records[0]:
            ax[2].semilogy(lam, np.maximum(state.column("tf_r_abs"), 1e-17), "C3.-", ms=3)
        ax[2].set_xlabel(r"$\lambda$")
        ax[2].set_ylabel(r"$\|\mathrm{div}\,\alpha_H\|_2$")
        return _save(fig, path)


def plot_curve(data, path, title=None):
    """Curvature and torsion against arclength."""
    from .curves import _arclength

    s = _arclength(data.t, data.speed)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(s, data.kappa, label=r"$\kappa$")
        ax.plot(s, data.tau, label=r"$\tau$")
        ax.set_xlabel("s")
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_field(grid, values, path, label=""):
    """Pseudocolour map of a node field over (phi, theta)."""
    th, ph = grid.mesh
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 3))
        pc = ax.pcolormesh(ph, th, values, shading="nearest", cmap="RdBu_r")
        ax.invert_yaxis()
        ax.set_xlabel(r"$\phi$")
        ax.set_ylabel(r"$\theta$")
        fig.colorbar(pc, ax=ax, label=label)
        return _save(fig, path)


def plot_mass_scan(eps, pipeline, oracle, path):
    """Hawking mass of the graph-sphere family against amplitude."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        ax.plot(eps, pipeline, "ko-", ms=4, label="spectral pipeline")
        ax.plot(eps, oracle, "C1x", ms=7, label="symbolic oracle")
        ax.axhline(0.0, color="0.6", lw=0.8)
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_ylabel(r"$m_H$")
        ax.legend(frameon=False)
        return _save(fig, path)
