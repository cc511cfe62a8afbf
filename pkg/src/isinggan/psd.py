"""Power-spectral-density fingerprint of binary microstructure images.

Conventions
-----------
* Pixels are mapped linearly to spins, ``s = p / 127.5 - 1`` (0 -> -1, 255 -> +1),
  and the image mean is subtracted before the transform.
* ``power_spectrum`` returns the unnormalized ``|fft2(s - mean)|**2``, so
  ``power.sum() == n**2 * ((s - mean)**2).sum()``.
* Radial bins are integer rings ``r = round(sqrt(kx**2 + ky**2))`` for
  ``r = 1 .. n // 2`` in cycles per image; DC never enters a bin.
* The fingerprint is the OLS line ``log10(power) = slope * log10(k) + intercept``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class PsdCurve:
    wavenumbers: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        k, p = np.asarray(self.wavenumbers), np.asarray(self.power)
        if k.shape != p.shape or k.ndim != 1:
            raise ValueError("wavenumbers and power must be 1D arrays of equal length")
        if np.any(np.diff(k) <= 0) or np.any(k <= 0):
            raise ValueError("wavenumbers must be positive and strictly increasing")
        if np.any(p < 0):
            raise ValueError("power must be nonnegative")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "power"])
            for k, p in zip(self.wavenumbers, self.power):
                w.writerow([repr(float(k)), repr(float(p))])


@dataclass(frozen=True)
class PsdParams:
    slope: float
    intercept: float


def power_spectrum(image) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ValueError(f"image must be square, got shape {image.shape}")
    if image.shape[0] < 4:
        raise ValueError("image side must be >= 4")
    spins = image / 127.5 - 1.0
    centered = spins - spins.mean()
    return np.abs(np.fft.fft2(centered)) ** 2


def _ring_index(n: int) -> np.ndarray:
    k = np.arange(n) - n // 2
    kx, ky = np.meshgrid(k, k, indexing="ij")
    return np.rint(np.hypot(kx, ky)).astype(np.int64)


def radial_average(power2d) -> PsdCurve:
    power2d = np.asarray(power2d, dtype=np.float64)
    if power2d.ndim != 2 or power2d.shape[0] != power2d.shape[1]:
        raise ValueError("power spectrum must be a square 2D array")
    n = power2d.shape[0]
    rings = _ring_index(n).ravel()
    shifted = np.fft.fftshift(power2d).ravel()
    nbins = n // 2
    keep = (rings >= 1) & (rings <= nbins)
    sums = np.bincount(rings[keep], weights=shifted[keep], minlength=nbins + 1)[1:]
    counts = np.bincount(rings[keep], minlength=nbins + 1)[1:]
    nonempty = counts > 0
    k = np.arange(1, nbins + 1, dtype=np.float64)[nonempty]
    return PsdCurve(k, sums[nonempty] / counts[nonempty])


def loglog_fit(curve: PsdCurve, kmin: float | None = None, kmax: float | None = None) -> PsdParams:
    k = np.asarray(curve.wavenumbers, dtype=np.float64)
    p = np.asarray(curve.power, dtype=np.float64)
    mask = (p > 0) & (k > 0)
    if kmin is not None:
        mask &= k >= kmin
    if kmax is not None:
        mask &= k <= kmax
    if mask.sum() < 2:
        raise ValueError("need at least 2 bins with positive power to fit")
    x, y = np.log10(k[mask]), np.log10(p[mask])
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    return PsdParams(slope, float(ym - slope * xm))


def image_features(image, kmin=None, kmax=None) -> PsdParams:
    return loglog_fit(radial_average(power_spectrum(image)), kmin=kmin, kmax=kmax)


def batch_features(images, kmin=None, kmax=None) -> np.ndarray:
    """(slope, intercept) rows for a stack of images."""
    out = np.empty((len(images), 2))
    for i, im in enumerate(images):
        f = image_features(im, kmin, kmax)
        out[i] = f.slope, f.intercept
    return out


@dataclass(frozen=True)
class ResponseMap:
    temperatures: np.ndarray
    mean_slope: np.ndarray
    mean_intercept: np.ndarray
    std_slope: np.ndarray
    std_intercept: np.ndarray
    image_size: int | None = None  # side length of the calibration images, if known

    def __post_init__(self):
        arrs = [np.asarray(a) for a in (self.temperatures, self.mean_slope, self.mean_intercept,
                                         self.std_slope, self.std_intercept)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise ValueError("response map arrays must be 1D and equally long")
        if len(arrs[0]) < 2:
            raise ValueError("response map needs at least 2 temperature knots")
        if np.any(np.diff(arrs[0]) <= 0):
            raise ValueError("knot temperatures must be strictly increasing")
        if np.any(arrs[3] < 0) or np.any(arrs[4] < 0):
            raise ValueError("standard deviations must be nonnegative")

    def global_std(self) -> np.ndarray:
        """Overall std of each feature across all calibration images (equal knot weights)."""
        means = np.stack([self.mean_slope, self.mean_intercept])
        stds = np.stack([self.std_slope, self.std_intercept])
        return np.sqrt((stds**2).mean(axis=1) + means.var(axis=1))

    def to_csv(self, path) -> None:
        """Write the map CSV; the image size goes to a ``.json`` sidecar."""
        path = Path(path)
        if self.image_size is not None:
            path.with_suffix(".json").write_text(json.dumps({"image_size": self.image_size}) + "\n")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["temperature", "mean_slope", "mean_intercept", "std_slope", "std_intercept"])
            for row in zip(self.temperatures, self.mean_slope, self.mean_intercept,
                           self.std_slope, self.std_intercept):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "ResponseMap":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            expected = ["temperature", "mean_slope", "mean_intercept", "std_slope", "std_intercept"]
            if reader.fieldnames != expected:
                raise ValueError(f"{path}: header must be {','.join(expected)}")
            rows = [[float(r[c]) for c in expected] for r in reader]
        cols = np.array(rows, dtype=np.float64).T if rows else np.empty((5, 0))
        sidecar = Path(path).with_suffix(".json")
        size = json.loads(sidecar.read_text()).get("image_size") if sidecar.exists() else None
        return cls(*cols, image_size=size)


def response_map_from_features(temperatures, features, image_size=None) -> ResponseMap:
    """Aggregate per-image (slope, intercept) rows by temperature label."""
    temperatures = np.asarray(temperatures, dtype=np.float32)
    features = np.asarray(features, dtype=np.float64)
    knots = np.unique(temperatures)
    if len(knots) < 2:
        raise ValueError("need at least 2 distinct temperatures")
    stats = []
    for t in knots:
        f = features[temperatures == t]
        if len(f) < 2:
            raise ValueError(f"temperature {float(t)} has {len(f)} image(s); need >= 2")
        stats.append((f.mean(axis=0), f.std(axis=0)))
    mean = np.array([s[0] for s in stats])
    std = np.array([s[1] for s in stats])
    return ResponseMap(knots.astype(np.float64), mean[:, 0], mean[:, 1], std[:, 0], std[:, 1], image_size)


def build_response_map(manifest, kmin=None, kmax=None) -> ResponseMap:
    images = manifest.load_images()
    return response_map_from_features(manifest.temperatures, batch_features(images, kmin, kmax),
                                      image_size=int(images.shape[1]))


def invert_temperature(params: PsdParams, rmap: ResponseMap) -> float:
    """Temperature of the closest point on the piecewise-linear mean curve.

    Distances are measured after dividing each feature by the map's global
    std; a feature with zero spread is ignored.
    """
    scale = rmap.global_std()
    if np.all(scale == 0):
        raise ValueError("degenerate response map: both features have zero spread")
    weight = np.where(scale > 0, 1.0 / np.where(scale > 0, scale, 1.0), 0.0)
    curve = np.stack([rmap.mean_slope, rmap.mean_intercept], axis=1) * weight
    q = np.array([params.slope, params.intercept]) * weight
    a, b = curve[:-1], curve[1:]
    d = b - a
    dd = (d * d).sum(axis=1)
    t = np.where(dd > 0, ((q - a) * d).sum(axis=1) / np.where(dd > 0, dd, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    dist = (((a + t[:, None] * d) - q) ** 2).sum(axis=1)
    i = int(np.argmin(dist))
    temps = np.asarray(rmap.temperatures, dtype=np.float64)
    est = temps[i] + t[i] * (temps[i + 1] - temps[i])
    return float(np.clip(est, temps[0], temps[-1]))


def invert_batch(features, rmap: ResponseMap) -> np.ndarray:
    return np.array([invert_temperature(PsdParams(s, c), rmap) for s, c in np.asarray(features)])


def save_curve(path, curve: PsdCurve) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    curve.to_csv(path)
