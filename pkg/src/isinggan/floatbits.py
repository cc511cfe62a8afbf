"""Bit-exact IEEE-754 single-precision decomposition.

Vector layout (the checkpoint compatibility contract): 32 entries, sign bit
first, then the 8 exponent bits MSB->LSB, then the 23 mantissa bits MSB->LSB.
Bit 0 encodes as 0.0 and bit 1 as 1.0 (or -1.0 / +1.0 with ``polarity="pm1"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIGN_BITS, EXPONENT_BITS, MANTISSA_BITS = 1, 8, 23
PARTS = (SIGN_BITS, EXPONENT_BITS, MANTISSA_BITS)
# slices into the 32-entry vector for each part
PART_SLICES = (slice(0, 1), slice(1, 9), slice(9, 32))


@dataclass(frozen=True)
class FloatBits:
    sign: int
    exponent: int  # 0..255
    mantissa: int  # 0..2**23 - 1

    def __post_init__(self):
        if self.sign not in (0, 1):
            raise ValueError("sign must be 0 or 1")
        if not 0 <= self.exponent < 256:
            raise ValueError("exponent must fit in 8 bits")
        if not 0 <= self.mantissa < 2**23:
            raise ValueError("mantissa must fit in 23 bits")

    @property
    def pattern(self) -> int:
        return (self.sign << 31) | (self.exponent << 23) | self.mantissa

    def bitstring(self) -> str:
        return f"{self.sign:01b} {self.exponent:08b} {self.mantissa:023b}"


def float_to_bits(x) -> FloatBits:
    x = np.float32(x)
    if not np.isfinite(x):
        raise ValueError(f"only finite values can be encoded, got {x}")
    u = int(np.array(x, dtype=np.float32).view(np.uint32))
    return FloatBits(u >> 31, (u >> 23) & 0xFF, u & 0x7FFFFF)


def bits_to_float(b: FloatBits) -> np.float32:
    if b.exponent == 0xFF:
        raise ValueError("exponent 255 encodes Inf/NaN, which are rejected")
    return np.array(b.pattern, dtype=np.uint32).view(np.float32)[()]


def bits_to_vector(b: FloatBits, polarity: str = "01") -> np.ndarray:
    return patterns_to_vectors(np.array([b.pattern], dtype=np.uint32), polarity)[0]


_SHIFTS = np.arange(31, -1, -1, dtype=np.uint32)


def patterns_to_vectors(patterns, polarity: str = "01") -> np.ndarray:
    """(m,) uint32 bit patterns -> (m, 32) float32 bit vectors."""
    patterns = np.asarray(patterns, dtype=np.uint32)
    bits = ((patterns[:, None] >> _SHIFTS) & np.uint32(1)).astype(np.float32)
    if polarity == "pm1":
        return bits * 2 - 1
    if polarity != "01":
        raise ValueError(f"unknown polarity {polarity!r}")
    return bits


def encode_labels(labels, polarity: str = "01") -> np.ndarray:
    """Vectorized float_to_bits + bits_to_vector for an array of labels."""
    labels = np.asarray(labels, dtype=np.float32).reshape(-1)
    if not np.all(np.isfinite(labels)):
        raise ValueError("labels must be finite")
    return patterns_to_vectors(labels.view(np.uint32), polarity)


def split_vector(vec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    vec = np.asarray(vec)
    return tuple(vec[..., s] for s in PART_SLICES)


def exponent_of_power_of_two(x: float) -> int:
    """Biased exponent field expected for an exact power of two."""
    return 127 + int(round(math.log2(x)))
