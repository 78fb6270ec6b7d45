"""Figure rendering for the command-line reports.

Every command that emits a CSV can also render a companion PNG next to it.
Rendering is headless (Agg) and atomic: the image is written to a temp
file in the target directory and renamed into place.
"""

from __future__ import annotations

import os
import tempfile

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .fd import FieldGrid  # noqa: E402


def _atomic_savefig(fig, path: str, dpi: int = 150) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=dpi, format="png", bbox_inches="tight")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)


def _heatmap(ax, field: FieldGrid, rho: float, title: str) -> None:
    N = field.N
    xs = np.linspace(0.0, 1.0, N + 1)
    zs = np.linspace(0.0, 1.0, N + 1)
    pm = ax.pcolormesh(xs, zs, field.values.T, shading="nearest",
                       cmap="viridis", vmin=0.0)
    ax.axhline(rho, color="w", lw=0.8, ls="--", alpha=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.set_title(title, fontsize=9)
    plt.colorbar(pm, ax=ax, shrink=0.85)


def save_field_heatmap(field: FieldGrid, rho: float, path: str, title: str) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    _heatmap(ax, field, rho, title)
    _atomic_savefig(fig, path)


def save_sweep_grid(entries, path: str) -> None:
    """entries: list of (label, field, rho). Renders a grid of heatmaps."""
    n = len(entries)
    ncols = 2
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(4.6 * ncols, 3.9 * nrows),
                             squeeze=False)
    for k, (label, field, rho) in enumerate(entries):
        _heatmap(axes[k // ncols][k % ncols], field, rho, label)
    for k in range(n, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    _atomic_savefig(fig, path)


def save_rates(series, path: str) -> None:
    """series: list of (label, Ns, errors). Log-log error-vs-N plot with
    first- and second-order slope guides."""
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    n_ref = None
    e_ref = None
    for label, Ns, errors in series:
        ax.loglog(Ns, errors, "o-", label=label)
        if n_ref is None:
            n_ref, e_ref = np.asarray(Ns, float), float(errors[0])
    if n_ref is not None:
        for p, style in ((1.0, ":"), (2.0, "--")):
            guide = e_ref * (n_ref[0] / n_ref) ** p
            ax.loglog(n_ref, guide, "k" + style, lw=0.8,
                      label=f"slope -{p:g}")
    ax.set_xlabel("N")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    _atomic_savefig(fig, path)


def save_fichera(edges, rho: float, path: str) -> None:
    """edges: list of (edge_name, coords, values). One panel per edge with
    the zero level and the threshold marked on the x=1 panel."""
    fig, axes = plt.subplots(2, 2, figsize=(8.4, 6.2), squeeze=False)
    for k, (name, coords, values) in enumerate(edges):
        ax = axes[k // 2][k % 2]
        ax.plot(coords, values, lw=1.0)
        ax.axhline(0.0, color="k", lw=0.6)
        if name == "x=1":
            ax.axvline(rho, color="r", lw=0.8, ls="--")
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("edge coordinate")
        ax.set_ylabel("drift flux against inward normal")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    _atomic_savefig(fig, path)


def save_crossval(probes, fd_values, mc_means, mc_errs, path: str) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    idx = np.arange(len(probes))
    ax.errorbar(idx, mc_means, yerr=3.0 * np.asarray(mc_errs), fmt="s",
                capsize=4, label="simulation (3 s.e.)")
    ax.plot(idx, fd_values, "o", label="grid solve")
    ax.set_xticks(idx)
    ax.set_xticklabels([f"({x:g},{z:g})" for x, z in probes], fontsize=8)
    ax.set_ylabel("V")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _atomic_savefig(fig, path)


def save_tau_hist(taus, t_max: float, path: str) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    taus = np.asarray(taus)
    if taus.size:
        ax.hist(taus, bins=50, range=(0.0, t_max), color="tab:blue",
                alpha=0.85)
    ax.set_xlabel("hitting time")
    ax.set_ylabel("paths")
    ax.grid(alpha=0.3)
    _atomic_savefig(fig, path)
