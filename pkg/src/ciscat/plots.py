"""Optional figure rendering (PNG) for the CLI's ``--plot`` flag.

Everything here is presentation only: no quantity is computed in this
module that is not already in the delimited outputs, and nothing else in
the package imports it except behind ``plot=True``.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .field import SpinorField, to_adiabatic  # noqa: E402
from .gauge import LoopPath, abelian_field  # noqa: E402

__all__ = [
    "plot_field", "plot_wave", "plot_diagnostics", "plot_crosssection",
    "plot_backscatter", "plot_wilson", "plot_dislocations", "plot_surfaces",
]

_DPI = 140


def _extent(grid):
    return (grid.xi_range[0], grid.xi_range[1],
            grid.eta_range[0], grid.eta_range[1])


def _save(fig, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def plot_field(snap: SpinorField, model, path, adiabatic: bool = True):
    """Imaginary part of the ground-channel amplitude, grid-aligned."""
    field = snap
    if adiabatic and model is not None:
        xx, yy = snap.grid.meshgrid()
        field = to_adiabatic(snap, model.unitary(xx, yy))
    plot_wave(field.g2, snap.grid, path,
              title=f"tau = {snap.tau:.3f}")


def plot_wave(values, grid, path, title: str = ""):
    """Imaginary part of a complex scalar field over the grid."""
    arr = np.imag(np.asarray(values))
    vmax = float(np.abs(arr).max()) or 1.0
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    im = ax.imshow(arr.T, origin="lower", extent=_extent(grid),
                   cmap="RdBu_r", vmin=-vmax, vmax=vmax, aspect="equal")
    ax.set_xlabel("xi")
    ax.set_ylabel("eta")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="Im amplitude")
    _save(fig, path)


def plot_diagnostics(records, path):
    """Norm, channel populations, absorbed and backscattered mass vs time."""
    tau = [r.tau for r in records]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.5, 6.0), sharex=True)
    ax1.plot(tau, [r.norm for r in records], label="norm")
    ax1.plot(tau, [r.p_ground for r in records], label="ground")
    ax1.plot(tau, [r.p_excited for r in records], label="excited")
    ax1.set_ylabel("probability mass")
    ax1.legend(loc="best")
    ax2.plot(tau, [r.absorbed for r in records], label="absorbed")
    ax2.plot(tau, [r.backscatter for r in records], label="backscatter")
    ax2.set_xlabel("tau")
    ax2.set_ylabel("fraction")
    ax2.legend(loc="best")
    _save(fig, path)


def plot_crosssection(theta, curves: dict, k: float, path):
    """Angular distributions k dsigma/dtheta; one line per labeled curve."""
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for label, values in curves.items():
        ax.plot(theta, values, label=label)
    ax.set_xlabel("theta")
    ax.set_ylabel("k dsigma/dtheta")
    ax.set_title(f"k = {k:g}")
    ax.legend(loc="best")
    _save(fig, path)


def plot_backscatter(betas, fractions, path):
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.plot(betas, fractions, "o-")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("beta")
    ax.set_ylabel("backscattered fraction")
    _save(fig, path)


def plot_wilson(model, loop: LoopPath, path, margin: float = 1.6):
    """Streamlines of the projected gauge field with the loop overlaid."""
    lx, ly = loop.points(256)
    cx, cy = float(np.mean(lx)), float(np.mean(ly))
    half = margin * max(np.ptp(lx), np.ptp(ly)) / 2.0
    xs = np.linspace(cx - half, cx + half, 64)
    ys = np.linspace(cy - half, cy + half, 64)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    a_func = abelian_field(model.h, model.c, grad_h=model.grad_h,
                           grad_g=model.grad_g)
    ax_field, ay_field = a_func(gx, gy)
    speed = np.hypot(ax_field, ay_field)
    fig, ax = plt.subplots(figsize=(5.5, 5.0))
    ax.streamplot(gx, gy, ax_field, ay_field, density=1.4,
                  color=np.log10(speed + 1e-12), cmap="viridis",
                  linewidth=0.8)
    ax.plot(lx, ly, "r-", lw=1.6)
    ax.set_xlabel("xi")
    ax.set_ylabel("eta")
    ax.set_aspect("equal")
    _save(fig, path)


def plot_dislocations(values, grid, dset, path):
    """Amplitude map with extracted nodal-line cells overlaid."""
    amp = np.abs(np.asarray(values))
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    im = ax.imshow(amp.T, origin="lower", extent=_extent(grid),
                   cmap="magma", aspect="equal")
    for seg in dset:
        pts = np.asarray(seg.points)
        ax.plot(pts[:, 0], pts[:, 1], ".", ms=2.0, color="cyan")
    ax.set_xlabel("xi")
    ax.set_ylabel("eta")
    fig.colorbar(im, ax=ax, label="|amplitude|")
    _save(fig, path)


def plot_surfaces(xx, yy, lower, upper, path):
    """The two adiabatic sheets as 3-D surfaces."""
    from mpl_toolkits.mplot3d import Axes3D  # noqa: F401

    fig = plt.figure(figsize=(6.5, 5.0))
    ax = fig.add_subplot(projection="3d")
    stride = max(1, xx.shape[0] // 64)
    kw = dict(rstride=stride, cstride=stride, linewidth=0,
              antialiased=False)
    ax.plot_surface(xx, yy, np.asarray(lower), cmap="viridis", alpha=0.9,
                    **kw)
    ax.plot_surface(xx, yy, np.asarray(upper), cmap="plasma", alpha=0.6,
                    **kw)
    ax.set_xlabel("xi")
    ax.set_ylabel("eta")
    ax.set_zlabel("energy")
    _save(fig, path)
