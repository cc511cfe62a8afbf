"""Evaluation sweep, label-sensitivity experiment and diff maps."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conditioning import check_labels
from .gan import GanState, binarize, generate_raw
from .imageio import format_f32, write_pgm, write_ppm
from .ising import T_C
from .psd import ResponseMap, batch_features, invert_batch

DEFAULT_EPSILONS = (1e-6, 1e-3, 1e-1)
# diff-map RGB: unchanged gray, flipped up red, flipped down blue
DIFF_COLORS = {0: (128, 128, 128), 1: (220, 40, 40), -1: (40, 70, 220)}


def _is_uniform(img) -> bool:
    return img.min() == img.max()


def recover_temperatures(images, rmap: ResponseMap, kmin=None, kmax=None):
    """(t_hat, features) per image.

    A uniform image has no fluctuation spectrum; it is the fully ordered state
    and maps to the lowest knot temperature with NaN features.
    """
    t_hat = np.full(len(images), float(rmap.temperatures[0]))
    feats = np.full((len(images), 2), np.nan)
    keep = [i for i, im in enumerate(images) if not _is_uniform(im)]
    if keep:
        f = batch_features([images[i] for i in keep], kmin, kmax)
        feats[keep] = f
        t_hat[keep] = invert_batch(f, rmap)
    return t_hat, feats


@dataclass
class EvalRow:
    temperature: float
    t_hat_mean: float
    t_hat_std: float
    slope_mean: float
    slope_std: float
    intercept_mean: float
    intercept_std: float
    count: int
    uniform: int = 0


@dataclass
class EvalReport:
    rows: list[EvalRow]
    t_hat: np.ndarray = field(repr=False, default=None)  # (temps, samples)

    COLUMNS = ("temperature", "t_hat_mean", "t_hat_std", "slope_mean", "slope_std",
               "intercept_mean", "intercept_std", "count")

    def pearson(self) -> float:
        t = np.array([r.temperature for r in self.rows])
        m = np.array([r.t_hat_mean for r in self.rows])
        if t.std() == 0 or m.std() == 0:
            return float("nan")
        return float(np.corrcoef(t, m)[0, 1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([format_f32(r.temperature)]
                           + [repr(float(getattr(r, c))) for c in self.COLUMNS[1:-1]] + [r.count])


def _nan_stats(x):
    x = x[np.isfinite(x)]
    return (float(x.mean()), float(x.std())) if len(x) else (float("nan"), float("nan"))


def run_evaluation_sweep(state: GanState, rmap: ResponseMap, temps, samples_per_temp: int = 100,
                         seed: int = 0, kmin=None, kmax=None, sample_dir=None) -> EvalReport:
    """Generate ``samples_per_temp`` images per temperature and invert each back to T.

    The same noise batch (seeded by ``seed``) is used at every temperature.
    """
    temps = check_labels(temps)
    if rmap.image_size is not None and rmap.image_size != state.config.n:
        raise ValueError(f"response map calibrated on {rmap.image_size}px images, "
                         f"checkpoint generates {state.config.n}px")
    if samples_per_temp < 1:
        raise ValueError("samples_per_temp must be >= 1")
    rows, all_t = [], []
    for ti, T in enumerate(temps):
        images = binarize(generate_raw(state.generator, T, samples_per_temp, seed))
        if sample_dir is not None:
            Path(sample_dir).mkdir(parents=True, exist_ok=True)
            write_pgm(Path(sample_dir) / f"T{ti:03d}.pgm", images[0])
        t_hat, feats = recover_temperatures(images, rmap, kmin, kmax)
        all_t.append(t_hat)
        rows.append(EvalRow(float(T), float(t_hat.mean()), float(t_hat.std()),
                            *_nan_stats(feats[:, 0]), *_nan_stats(feats[:, 1]),
                            samples_per_temp, int(np.isnan(feats[:, 0]).sum())))
    return EvalReport(rows, np.array(all_t))


def image_diff_map(a, b):
    """Signed per-pixel change from ``a`` to ``b``: +1 for 0->255, -1 for 255->0, 0 unchanged.

    Returns (diff map as int8, changed fraction).
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    for im in (a, b):
        if not np.all((im == 0) | (im == 255)):
            raise ValueError("diff maps need binary 0/255 images")
    diff = (b > a).astype(np.int8) - (b < a).astype(np.int8)
    return diff, float(np.count_nonzero(diff)) / diff.size


def diff_to_rgb(diff) -> np.ndarray:
    rgb = np.empty(diff.shape + (3,), dtype=np.uint8)
    for code, color in DIFF_COLORS.items():
        rgb[diff == code] = color
    return rgb


@dataclass
class SensitivityReport:
    base_t: float
    epsilons: list[float]
    seeds: list[int]
    changed: np.ndarray  # (len(seeds), len(epsilons))
    diff_paths: list[Path] = field(default_factory=list)
    base_images: np.ndarray = field(default=None, repr=False)
    diffs: np.ndarray = field(default=None, repr=False)  # (seeds, eps, n, n)

    def mean_changed(self) -> np.ndarray:
        return self.changed.mean(axis=0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "epsilon", "changed_fraction"])
            for i, s in enumerate(self.seeds):
                for j, e in enumerate(self.epsilons):
                    w.writerow([s, repr(float(e)), repr(float(self.changed[i, j]))])


def run_sensitivity(state: GanState, base_t: float = T_C, epsilons=DEFAULT_EPSILONS,
                    noise_seeds=range(16), out_dir=None) -> SensitivityReport:
    """Fix the noise per seed, generate at base_t and base_t + eps, and diff."""
    base = np.float32(base_t)
    check_labels(base)
    perturbed = [np.float32(float(base) + e) for e in epsilons]
    check_labels(np.array(perturbed, dtype=np.float32))
    seeds = [int(s) for s in noise_seeds]
    G = state.generator
    changed = np.zeros((len(seeds), len(epsilons)))
    bases, diffs, paths = [], [], []
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(seeds):
        a = binarize(generate_raw(G, base, 1, s))[0]
        bases.append(a)
        row = []
        for j, (e, t) in enumerate(zip(epsilons, perturbed)):
            b = binarize(generate_raw(G, t, 1, s))[0]
            d, frac = image_diff_map(a, b)
            changed[i, j] = frac
            row.append(d)
            if out_dir is not None:
                p = Path(out_dir) / f"diff_seed{s:03d}_eps{j}.ppm"
                write_ppm(p, diff_to_rgb(d))
                paths.append(p)
        diffs.append(row)
    return SensitivityReport(float(base), [float(e) for e in epsilons], seeds, changed, paths,
                             np.array(bases), np.array(diffs))
