"""Figure rendering for the report paths.

Each CLI report writes its figure next to the delimited output; everything
uses the Agg backend so headless runs work.  Figures are a convenience view
of the CSV data, never an extra computation.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_bands(lams, disc, k, in_band, path: str) -> None:
    lams = np.asarray(lams)
    disc = np.asarray(disc)
    k = np.asarray(k)
    in_band = np.asarray(in_band, dtype=bool)
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7.0, 5.6))
    ax1.plot(lams, np.clip(disc, -6.0, 6.0), color="tab:blue", lw=1.2)
    ax1.axhline(2.0, color="k", ls="--", lw=0.8)
    ax1.axhline(-2.0, color="k", ls="--", lw=0.8)
    _shade_gaps(ax1, lams, in_band)
    ax1.set_ylabel("discriminant D")
    ax1.set_ylim(-6.0, 6.0)
    ax2.plot(lams, k, color="tab:red", lw=1.2)
    _shade_gaps(ax2, lams, in_band)
    ax2.set_ylabel("quasimomentum k")
    ax2.set_xlabel("lambda")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    _save(fig, path)


def _shade_gaps(ax, lams, in_band) -> None:
    gap = ~np.asarray(in_band, dtype=bool)
    if not gap.any():
        return
    edges = np.flatnonzero(np.diff(gap.astype(int)) != 0) + 1
    blocks = np.split(np.arange(len(lams)), edges)
    for blk in blocks:
        if blk.size and gap[blk[0]]:
            ax.axvspan(lams[blk[0]], lams[blk[-1]], color="0.85", zorder=0)


def plot_quasimomentum(lams, k, path: str, rotation=None) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.plot(lams, k, color="tab:red", lw=1.2, label="band analysis")
    if rotation is not None:
        ax.plot(lams, rotation, ls="none", marker=".", ms=3.0,
                color="tab:blue", label="rotation number")
        ax.legend()
    ax.set_xlabel("lambda")
    ax.set_ylabel("quasimomentum k")
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_count_interval(lengths, counts, ratios, path: str) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.plot(lengths, ratios, marker="o", color="tab:blue")
    ax.set_xlabel("interval length")
    ax.set_ylabel("eigenvalues per unit length")
    ax.set_xscale("log")
    ax.grid(alpha=0.3, which="both")
    _save(fig, path)


def plot_count_halfline(cs, counts, path: str) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.plot(cs, counts, marker="o", color="tab:blue")
    ax.set_xlabel("scale c")
    ax.set_ylabel("gap eigenvalue count N(c)")
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_convergence(cs, n_over_c, ratios, predicted, band, path: str) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.0))
    ax1.plot(cs, n_over_c, marker="o", color="tab:blue", label="N(c) / c")
    ax1.axhline(predicted, color="tab:red", ls="--", label="predicted density")
    ax1.set_xlabel("scale c")
    ax1.set_ylabel("eigenvalues per unit scale")
    ax1.legend()
    ax1.grid(alpha=0.3)
    if any(r is not None for r in ratios):
        ax2.axhspan(band[0], band[1], color="0.9", zorder=0)
        ax2.axhline(1.0, color="k", lw=0.8)
        ax2.plot([c for c, r in zip(cs, ratios) if r is not None],
                 [r for r in ratios if r is not None],
                 marker="o", color="tab:blue")
        ax2.set_ylabel("N(c) / (c * predicted)")
    else:
        ax2.plot(cs, n_over_c, marker="o", color="tab:blue")
        ax2.set_ylabel("N(c) / c (prediction is zero)")
    ax2.set_xlabel("scale c")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)
