"""Figures rendered next to the CSV outputs.

Uses the object-oriented Agg canvas, so importing this module never touches
global pyplot state.  PNG metadata is pinned (no software/version stamp),
which keeps files byte-identical across re-runs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 7.0
STYLE = {
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
    "image.cmap": "RdBu_r",
}
COMPONENT_LABELS = {
    "s11": r"$S_{11}$",
    "s22": r"$S_{22}$",
    "re_s12": r"Re $S_{12}$",
    "im_s12": r"Im $S_{12}$",
}


def _figure(nrows: int, ncols: int, height: float | None = None) -> tuple[Figure, np.ndarray]:
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(fig_width, height or fig_width * golden_mean))
        FigureCanvasAgg(fig)
        axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def save(fig: Figure, path: Path, prov: dict) -> Path:
    meta = {"Software": None, "Description": f"config_digest={prov['config_digest']} seed={prov['seed']}"}
    with matplotlib.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path, dpi=120, metadata=meta)
    return path


def _grid(rows: Sequence[dict], xkey: str, ykey: str, zkey: str):
    xs = np.unique([r[xkey] for r in rows])
    ys = np.unique([r[ykey] for r in rows])
    z = np.full((len(ys), len(xs)), np.nan)
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: i for i, v in enumerate(ys)}
    for r in rows:
        z[yi[r[ykey]], xi[r[xkey]]] = r[zkey]
    return xs, ys, z


def _heatmap(ax, xs, ys, z, label: str, fig: Figure) -> None:
    vmax = np.nanmax(np.abs(z)) or 1.0
    mesh = ax.pcolormesh(xs, ys, z, shading="nearest", vmin=-vmax, vmax=vmax, cmap=STYLE["image.cmap"])
    fig.colorbar(mesh, ax=ax, label=label)


def plot_ramsey(rows: Sequence[dict], path: Path, prov: dict) -> Path:
    fig, axes = _figure(1, 3, fig_width * 0.32)
    for ax, key, label in zip(axes[0], ("z1", "z2", "czz"), (r"$\sigma^z_1$", r"$\sigma^z_2$", r"$C_{zz}$")):
        t, nbar, z = _grid(rows, "time_s", "nbar", key)
        _heatmap(ax, t * 1e6, nbar, z, label, fig)
        ax.set_xlabel(r"$t$ ($\mu$s)")
        ax.set_ylabel(r"$\bar n$")
    return save(fig, path, prov)


def plot_spinlock(rows: Sequence[dict], path: Path, prov: dict) -> Path:
    fig, axes = _figure(1, 3, fig_width * 0.32)
    for ax, key, label in zip(axes[0], ("tz1", "tz2", "kzz"), (r"$\tau^z_1$", r"$\tau^z_2$", r"$K_{zz}$")):
        t, w1, z = _grid(rows, "time_s", "omega1_hz", key)
        _heatmap(ax, t * 1e6, w1 / 1e6, z, label, fig)
        ax.set_xlabel(r"$t$ ($\mu$s)")
        ax.set_ylabel(r"$\Omega_1/2\pi$ (MHz)")
    return save(fig, path, prov)


def plot_spectra(rows: Sequence[dict], truth: Sequence[dict], path: Path, prov: dict) -> Path:
    """Reconstructed components with confidence bars, over the analytic truth."""
    fig, axes = _figure(2, 2)
    f = np.array([r["omega_hz"] for r in rows]) / 1e6
    for ax, c in zip(axes.ravel(), COMPONENT_LABELS):
        val = np.array([r[c] for r in rows])
        lo = np.array([r[f"{c}_ci_low"] for r in rows])
        hi = np.array([r[f"{c}_ci_high"] for r in rows])
        err = np.vstack([val - lo, hi - val])
        for sign in (-1, 1):
            sel = np.sign(f) == sign
            ax.errorbar(f[sel], val[sel], yerr=err[:, sel], fmt="o", color="C0", capsize=1.5,
                        label="reconstruction" if sign > 0 else None)
            if truth:
                ft = np.array([r["omega_hz"] for r in truth]) / 1e6
                tsel = np.sign(ft) == sign
                ax.plot(ft[tsel], np.array([r[c] for r in truth])[tsel], "-", color="C3",
                        label="shot-noise model" if sign > 0 else None)
        ax.set_title(COMPONENT_LABELS[c])
        ax.set_xlabel(r"$\omega/2\pi$ (MHz)")
        ax.set_ylabel(r"$10^3$ rad/s")
        ax.axhline(0, color="0.7", lw=0.5)
    axes[0, 0].legend(frameon=False)
    return save(fig, path, prov)


def plot_delta_omega(rows: Sequence[dict], path: Path, prov: dict) -> Path:
    fig, axes = _figure(1, 1, fig_width * 0.4)
    pos = [r for r in rows if r["omega_hz"] > 0]
    axes[0, 0].plot([r["omega_hz"] / 1e6 for r in pos], [r["delta_omega_hz"] / 1e3 for r in pos], "o-")
    axes[0, 0].set_xlabel(r"$\Omega/2\pi$ (MHz)")
    axes[0, 0].set_ylabel(r"$\delta\Omega/2\pi$ (kHz)")
    return save(fig, path, prov)


def plot_loss_comparison(rows: Sequence[dict], path: Path, prov: dict) -> Path:
    fig, axes = _figure(2, 2)
    for ax, c in zip(axes.ravel(), COMPONENT_LABELS):
        sel = [r for r in rows if r["component"] == c]
        f = np.array([r["omega_hz"] for r in sel]) / 1e6
        for sign in (-1, 1):
            m = np.sign(f) == sign
            first = sign > 0
            ax.plot(f[m], np.array([r["truth"] for r in sel])[m], "-", color="0.3", label="truth" if first else None)
            ax.plot(f[m], np.array([r["huber"] for r in sel])[m], "o", color="C0", label="Huber" if first else None)
            ax.plot(f[m], np.array([r["quadratic"] for r in sel])[m], "x", color="C3",
                    label="least squares" if first else None)
        ax.set_title(COMPONENT_LABELS[c])
        ax.set_xlabel(r"$\omega/2\pi$ (MHz)")
        ax.set_ylabel(r"$10^3$ rad/s")
    axes[0, 0].legend(frameon=False)
    return save(fig, path, prov)
