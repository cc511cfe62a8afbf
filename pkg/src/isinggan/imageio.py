"""Netpbm image files and the dataset manifest.

Grayscale images are binary PGM (P5, maxval 255); RGB diff maps are binary
PPM (P6). The manifest is ``manifest.csv`` with header ``filename,temperature``
where temperatures are the shortest decimal that round-trips the float32 label.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ising import T_C

MANIFEST = "manifest.csv"
METADATA = "dataset.json"


def format_f32(x) -> str:
    return np.format_float_positional(np.float32(x), unique=True, trim="-")


def _write_netpbm(path, magic: bytes, arr: np.ndarray) -> None:
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(arr, dtype=np.uint8).tobytes())


def _read_netpbm(path, magic: bytes, channels: int) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval separated by whitespace (comments allowed)
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != magic:
        raise ValueError(f"{path}: expected {magic.decode()} image, got {tokens[0]!r}")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported")
    body = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=pos)
    shape = (h, w) if channels == 1 else (h, w, channels)
    return body.reshape(shape).copy()


def write_pgm(path, image) -> None:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM image must be 2D")
    _write_netpbm(path, b"P5", image)


def read_pgm(path) -> np.ndarray:
    return _read_netpbm(path, b"P5", 1)


def write_ppm(path, image) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("PPM image must be (h, w, 3)")
    _write_netpbm(path, b"P6", image)


def read_ppm(path) -> np.ndarray:
    return _read_netpbm(path, b"P6", 3)


def lattice_to_image(lattice) -> np.ndarray:
    """-1 -> 0, +1 -> 255."""
    lattice = np.asarray(lattice)
    if not np.all(np.abs(lattice) == 1):
        raise ValueError("lattice entries must be exactly -1 or +1")
    return np.where(lattice > 0, 255, 0).astype(np.uint8)


def image_to_lattice(image) -> np.ndarray:
    image = np.asarray(image)
    if not np.all((image == 0) | (image == 255)):
        raise ValueError("binary image pixels must be 0 or 255")
    return np.where(image == 255, 1, -1).astype(np.int8)


@dataclass
class DatasetManifest:
    root: Path
    filenames: list[str]
    temperatures: np.ndarray  # float32
    n: int | None = None
    per_temperature: int | None = None
    grid: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.filenames)

    def paths(self) -> list[Path]:
        return [self.root / f for f in self.filenames]

    def load_images(self) -> np.ndarray:
        imgs = [read_pgm(p) for p in self.paths()]
        if not imgs:
            return np.empty((0, self.n or 0, self.n or 0), dtype=np.uint8)
        shapes = {im.shape for im in imgs}
        if len(shapes) != 1:
            raise ValueError(f"dataset mixes image shapes {sorted(shapes)}")
        if self.n is not None and imgs[0].shape != (self.n, self.n):
            raise ValueError(f"images are {imgs[0].shape}, manifest declares n={self.n}")
        return np.stack(imgs)

    def write(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.root / MANIFEST, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["filename", "temperature"])
            for f, t in zip(self.filenames, self.temperatures):
                w.writerow([f, format_f32(t)])
        meta = {"n": self.n, "per_temperature": self.per_temperature, "grid": self.grid}
        (self.root / METADATA).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> DatasetManifest:
    """Load a manifest from a dataset directory or a ``manifest.csv`` path."""
    path = Path(path)
    root = path if path.is_dir() else path.parent
    csv_path = root / MANIFEST if path.is_dir() else path
    filenames, temps = [], []
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["filename", "temperature"]:
            raise ValueError(f"{csv_path}: header must be 'filename,temperature'")
        for row in reader:
            filenames.append(row["filename"])
            temps.append(float(row["temperature"]))
    labels = np.asarray(temps, dtype=np.float32)
    bad = ~(np.isfinite(labels) & (labels > 0) & (labels <= np.float32(2 * T_C)))
    if bad.any():
        raise ValueError(f"{csv_path}: temperature labels outside (0, 2*T_c]: {labels[bad][:5].tolist()}")
    meta = {}
    if (root / METADATA).exists():
        meta = json.loads((root / METADATA).read_text())
    return DatasetManifest(
        root=root,
        filenames=filenames,
        temperatures=labels,
        n=meta.get("n"),
        per_temperature=meta.get("per_temperature"),
        grid=meta.get("grid", {}),
    )
