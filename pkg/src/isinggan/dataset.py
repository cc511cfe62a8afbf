"""Labeled Ising image datasets: one independent simulation per image."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .imageio import DatasetManifest, format_f32, lattice_to_image, write_pgm
from .ising import T_C, T_MIN, SimParams, run_simulation


def temperature_grid(num: int, t_min: float = T_MIN, t_max: float | None = None) -> np.ndarray:
    """Inclusive uniform grid of float32 labels in (0, 2*T_c]."""
    t_max = float(np.float32(2 * T_C)) if t_max is None else t_max
    if num < 1:
        raise ValueError("grid needs at least one temperature")
    grid = np.linspace(t_min, t_max, num) if num > 1 else np.array([t_min])
    grid = grid.astype(np.float32)
    check_temperatures(grid)
    return grid


def check_temperatures(temps) -> np.ndarray:
    temps = np.asarray(temps, dtype=np.float32)
    hi = np.float32(2 * T_C)
    bad = ~(np.isfinite(temps) & (temps > 0) & (temps <= hi))
    if bad.any():
        raise ValueError(f"temperatures must lie in (0, {format_f32(hi)}], got {temps[bad].tolist()}")
    return temps


def simulate_images(temps, per_temperature: int, n: int, seed: int,
                    max_steps: int | None = None, workers: int = 1) -> np.ndarray:
    """Return uint8 images of shape (len(temps), per_temperature, n, n).

    Image (ti, si) uses the generator stream keyed by (seed, ti, si), so the
    result does not depend on ``workers``.
    """
    temps = check_temperatures(temps)
    jobs = [(ti, si) for ti in range(len(temps)) for si in range(per_temperature)]

    def one(job):
        ti, si = job
        p = SimParams(n=n, temperature=float(temps[ti]), seed=seed, max_steps=max_steps, stream=(ti, si))
        return lattice_to_image(run_simulation(p))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            imgs = list(pool.map(one, jobs))
    else:
        imgs = [one(j) for j in jobs]
    return np.stack(imgs).reshape(len(temps), per_temperature, n, n)


def generate_dataset(out_dir, temps, per_temperature: int, n: int, seed: int,
                     max_steps: int | None = None, workers: int = 1) -> DatasetManifest:
    """Simulate and write ``T{ti:03d}_S{si:04d}.pgm`` images plus the manifest."""
    if per_temperature < 1:
        raise ValueError("per_temperature must be >= 1")
    temps = check_temperatures(temps)
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    images = simulate_images(temps, per_temperature, n, seed, max_steps=max_steps, workers=workers)
    filenames, labels = [], []
    for ti, t in enumerate(temps):
        for si in range(per_temperature):
            name = f"T{ti:03d}_S{si:04d}.pgm"
            write_pgm(out_dir / name, images[ti, si])
            filenames.append(name)
            labels.append(t)
    manifest = DatasetManifest(
        root=out_dir,
        filenames=filenames,
        temperatures=np.asarray(labels, dtype=np.float32),
        n=n,
        per_temperature=per_temperature,
        grid={
            "temperatures": [format_f32(t) for t in temps],
            "seed": seed,
            "max_steps": max_steps if max_steps is not None else n**3,
        },
    )
    manifest.write()
    return manifest
