"""Report figures rendered next to the CSV outputs.

Figures use the Agg backend and are written as PNG without the ``Software``
metadata entry, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402
import numpy as np  # noqa: E402

from .harness import DIFF_COLORS, diff_to_rgb  # noqa: E402
from .ising import T_C  # noqa: E402

golden_mean = (math.sqrt(5.0) - 1.0) / 2.0
STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}


def figure(width=6.0, height=None, nrows=1, ncols=1, **kw):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(nrows, ncols, figsize=(width, height or width * golden_mean), **kw)
    return fig, ax


def save(fig, path) -> None:
    with plt.rc_context(STYLE):
        fig.savefig(path, format="png", metadata={"Software": None}, bbox_inches="tight")
    plt.close(fig)


def _mark_tc(ax):
    ax.axvline(T_C, color="0.6", lw=0.8, ls="--", zorder=0)


def plot_magnetization(temps, mean_abs_m, std_abs_m, path, examples=None):
    """|M| against temperature, optionally with one sample image per temperature below."""
    temps = np.asarray(temps)
    if examples is not None and len(examples):
        k = min(len(examples), 8)
        pick = np.linspace(0, len(examples) - 1, k).round().astype(int)
        fig = plt.figure(figsize=(7, 5))
        ax = fig.add_axes([0.1, 0.42, 0.85, 0.52])
        for i, idx in enumerate(pick):
            sub = fig.add_axes([0.05 + i * 0.9 / k, 0.04, 0.9 / k - 0.01, 0.25])
            sub.imshow(examples[idx], cmap="gray", vmin=0, vmax=255, interpolation="nearest")
            sub.set_title(f"T={temps[idx]:.2f}", fontsize=7)
            sub.axis("off")
    else:
        fig, ax = figure()
    ax.errorbar(temps, mean_abs_m, yerr=std_abs_m, fmt="o-", ms=3, lw=1, capsize=2)
    _mark_tc(ax)
    ax.set_xlabel("temperature")
    ax.set_ylabel("|magnetization|")
    ax.set_ylim(-0.02, 1.05)
    save(fig, path)


def plot_response_map(rmap, path):
    fig, (a1, a2) = figure(8, 3, ncols=2)
    t = rmap.temperatures
    a1.errorbar(t, rmap.mean_slope, yerr=rmap.std_slope, fmt="o-", ms=3, lw=1, capsize=2)
    a1.set_ylabel("PSD slope")
    a2.errorbar(t, rmap.mean_intercept, yerr=rmap.std_intercept, fmt="o-", ms=3, lw=1, capsize=2, color="C1")
    a2.set_ylabel("PSD intercept")
    for ax in (a1, a2):
        ax.set_xlabel("temperature")
        _mark_tc(ax)
    save(fig, path)


def plot_evaluation(report, rmap, path):
    """Recovered temperature and PSD parameters against the conditioning temperature."""
    rows = report.rows
    t = np.array([r.temperature for r in rows])
    fig, axes = figure(11, 3.2, ncols=3)
    ax = axes[0]
    ax.errorbar(t, [r.t_hat_mean for r in rows], yerr=[r.t_hat_std for r in rows],
                fmt="o", ms=3, capsize=2, label="generated")
    lim = [min(t.min(), rmap.temperatures[0]), max(t.max(), rmap.temperatures[-1])]
    ax.plot(lim, lim, color="0.5", lw=0.8, ls=":", label="ideal")
    ax.set_xlabel("conditioning temperature")
    ax.set_ylabel("recovered temperature")
    ax.set_title(f"Pearson r = {report.pearson():.3f}", fontsize=9)
    ax.legend(frameon=False)
    for ax, key, ref, ref_std, label in (
        (axes[1], "slope", rmap.mean_slope, rmap.std_slope, "PSD slope"),
        (axes[2], "intercept", rmap.mean_intercept, rmap.std_intercept, "PSD intercept"),
    ):
        ax.fill_between(rmap.temperatures, ref - ref_std, ref + ref_std, color="0.85", label="simulated")
        ax.plot(rmap.temperatures, ref, color="0.4", lw=1)
        ax.errorbar(t, [getattr(r, key + "_mean") for r in rows], yerr=[getattr(r, key + "_std") for r in rows],
                    fmt="o", ms=3, capsize=2, label="generated")
        ax.set_xlabel("conditioning temperature")
        ax.set_ylabel(label)
        ax.legend(frameon=False)
    for ax in axes:
        _mark_tc(ax)
    save(fig, path)


def plot_neuron_boxplots(matrix, path, max_neurons=None, title=None):
    """One Tukey boxplot per embedding neuron (rows of ``matrix``)."""
    m = np.asarray(matrix)
    if max_neurons is not None:
        m = m[:max_neurons]
    fig, ax = figure(max(4.0, 0.16 * len(m) + 1.5), 3)
    ax.boxplot(m.T, whis=1.5, showfliers=True, flierprops={"markersize": 1.5},
               medianprops={"color": "C1"}, widths=0.6)
    ax.set_xlabel("neuron")
    ax.set_ylabel("activation")
    ax.set_ylim(-1.05, 1.05)
    step = max(1, len(m) // 16)
    ticks = np.arange(1, len(m) + 1, step)
    ax.set_xticks(ticks, [str(i - 1) for i in ticks])
    if title:
        ax.set_title(title, fontsize=9)
    save(fig, path)


def plot_sensitivity(report, path, max_rows: int = 4):
    """Base image followed by its diff map for every epsilon, one row per noise seed."""
    rows = min(max_rows, len(report.seeds))
    cols = len(report.epsilons) + 1
    fig, axes = plt.subplots(rows, cols, figsize=(1.6 * cols, 1.6 * rows), squeeze=False)
    for i in range(rows):
        axes[i, 0].imshow(report.base_images[i], cmap="gray", vmin=0, vmax=255, interpolation="nearest")
        for j in range(len(report.epsilons)):
            axes[i, j + 1].imshow(diff_to_rgb(report.diffs[i, j]), interpolation="nearest")
        for ax in axes[i]:
            ax.set_xticks([])
            ax.set_yticks([])
        axes[i, 0].set_ylabel(f"seed {report.seeds[i]}", fontsize=7)
    axes[0, 0].set_title(f"T={report.base_t:.4f}", fontsize=7)
    for j, e in enumerate(report.epsilons):
        axes[0, j + 1].set_title(f"eps={e:g}\n{report.mean_changed()[j]:.3f} changed", fontsize=7)
    handles = [Patch(color=np.array(c) / 255, label=l)
               for c, l in zip(DIFF_COLORS.values(), ("unchanged", "flipped up", "flipped down"))]
    fig.legend(handles=handles, loc="lower center", ncol=3, fontsize=7, frameon=False)
    save(fig, path)


def plot_losses(loss_log, path):
    log = np.asarray(loss_log, dtype=np.float64)
    fig, ax = figure()
    if len(log):
        ax.plot(log[:, 0], log[:, 1], lw=0.6, label="discriminator")
        ax.plot(log[:, 0], log[:, 2], lw=0.6, label="generator")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend(frameon=False)
    save(fig, path)
