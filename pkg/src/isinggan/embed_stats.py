"""Per-neuron activity of an embedding over its working range."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .conditioning import Conditioning

DEAD_TAU = 1e-6


def sweep_activations(strategy: Conditioning, num_samples: int = 1000) -> np.ndarray:
    """(embedding_dim, num_samples) matrix; column j is the embedding of grid input j.

    Class-bin strategies ignore ``num_samples`` and sweep every class index.
    """
    if num_samples < 2:
        raise ValueError("num_samples must be >= 2")
    inputs = strategy.sweep_inputs(num_samples)
    return np.asarray(strategy.forward_encoded(inputs), dtype=np.float64).T


@dataclass
class NeuronStats:
    min: np.ndarray
    q1: np.ndarray
    median: np.ndarray
    q3: np.ndarray
    max: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    whisker_lo: np.ndarray
    whisker_hi: np.ndarray

    def __len__(self):
        return len(self.median)


def boxplot_stats(matrix) -> NeuronStats:
    """Quartiles by linear interpolation; Tukey whiskers at 1.5 IQR."""
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if m.size == 0:
        raise ValueError("empty activity matrix")
    q1, med, q3 = np.quantile(m, [0.25, 0.5, 0.75], axis=1)
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside_lo = np.where(m >= lo_fence[:, None], m, np.inf).min(axis=1)
    inside_hi = np.where(m <= hi_fence[:, None], m, -np.inf).max(axis=1)
    # Q1/Q3 are interpolated, so clip the whiskers to keep min <= wlo <= Q1
    return NeuronStats(
        min=m.min(axis=1), q1=q1, median=med, q3=q3, max=m.max(axis=1),
        mean=m.mean(axis=1), std=m.std(axis=1),
        whisker_lo=np.minimum(inside_lo, q1), whisker_hi=np.maximum(inside_hi, q3),
    )


def dead_mask(matrix, tau: float = DEAD_TAU) -> np.ndarray:
    if tau <= 0:
        raise ValueError("tau must be > 0")
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    return (m.max(axis=1) - m.min(axis=1)) < tau


def dead_fraction(matrix, tau: float = DEAD_TAU) -> float:
    mask = dead_mask(matrix, tau)
    return float(mask.sum()) / len(mask)


def write_stats_csv(path, stats: NeuronStats, dead) -> None:
    cols = ["min", "q1", "median", "q3", "max", "mean", "std", "whisker_lo", "whisker_hi"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["neuron", *cols, "dead"])
        for i in range(len(stats)):
            w.writerow([i, *(repr(float(getattr(stats, c)[i])) for c in cols), int(bool(dead[i]))])
