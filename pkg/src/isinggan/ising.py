"""2D Ising model on a periodic square lattice with single-site Metropolis updates.

Units: J = 1, k_B = 1, h = 0. A lattice is an ``(n, n)`` int8 array of +/-1.

The Monte Carlo contract is deterministic given a seed:

* each step draws one site index ``next_below(n * n)`` (row-major);
* moves with dE <= 0 are accepted without touching the generator;
* uphill moves draw exactly one uniform ``u`` and are accepted iff
  ``u < exp(-dE / T)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .rng import derive_state, next_below, next_double


def critical_temperature() -> float:
    """Curie temperature 2 / ln(1 + sqrt(2)) of the square-lattice model."""
    return 2.0 / math.log1p(math.sqrt(2.0))


T_C = critical_temperature()
T_MIN = 0.01  # smallest grid temperature; T = 0 is rejected


@dataclass(frozen=True)
class SimParams:
    n: int
    temperature: float
    seed: int = 0
    max_steps: int | None = None
    stream: tuple[int, ...] = ()  # extra key components, e.g. (temp index, sample index)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"lattice side must be >= 2, got {self.n}")
        if not math.isfinite(self.temperature) or self.temperature <= 0:
            raise ValueError(f"temperature must be finite and > 0, got {self.temperature}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def steps(self) -> int:
        return self.n**3 if self.max_steps is None else self.max_steps


def validate_lattice(lattice) -> np.ndarray:
    lattice = np.asarray(lattice)
    if lattice.ndim != 2 or lattice.shape[0] != lattice.shape[1]:
        raise ValueError(f"lattice must be square 2D, got shape {lattice.shape}")
    if lattice.shape[0] < 2:
        raise ValueError("lattice side must be >= 2")
    if not np.all(np.abs(lattice) == 1):
        raise ValueError("lattice entries must be exactly -1 or +1")
    return lattice.astype(np.int8, copy=False)


def random_lattice(n: int, state: np.ndarray) -> np.ndarray:
    """Uniform random spins, one generator output per site (lowest bit)."""
    return _random_spins(n, state)


@njit(cache=True)
def _random_spins(n, s):
    out = np.empty((n, n), dtype=np.int8)
    for i in range(n):
        for j in range(n):
            out[i, j] = 1 if next_below(s, 2) == 1 else -1
    return out


def total_energy(lattice) -> int:
    """H = -sum over the 2 n^2 periodic nearest-neighbour bonds, each counted once."""
    s = validate_lattice(lattice).astype(np.int64)
    return int(-np.sum(s * (np.roll(s, -1, axis=0) + np.roll(s, -1, axis=1))))


def local_delta_energy(lattice, row: int, col: int) -> int:
    """Energy change caused by flipping the spin at (row, col)."""
    s = validate_lattice(lattice)
    n = s.shape[0]
    if not (0 <= row < n and 0 <= col < n):
        raise IndexError(f"site ({row}, {col}) outside {n}x{n} lattice")
    return int(_delta_e(s, row, col, n))


@njit(cache=True, inline="always")
def _delta_e(s, i, j, n):
    nb = (
        s[(i + 1) % n, j]
        + s[(i - 1 + n) % n, j]
        + s[i, (j + 1) % n]
        + s[i, (j - 1 + n) % n]
    )
    return 2 * s[i, j] * nb


def magnetization(lattice) -> float:
    s = validate_lattice(lattice)
    return float(s.sum(dtype=np.int64)) / s.size


@njit(cache=True, nogil=True)
def _metropolis(s, steps, temperature, state):
    n = s.shape[0]
    n2 = n * n
    # dE is one of {-8, -4, 0, 4, 8}; only the two uphill values need a table
    p4 = math.exp(-4.0 / temperature)
    p8 = math.exp(-8.0 / temperature)
    accepted = 0
    for _ in range(steps):
        k = next_below(state, n2)
        i = k // n
        j = k - i * n
        de = _delta_e(s, i, j, n)
        if de <= 0:
            s[i, j] = -s[i, j]
            accepted += 1
        else:
            p = p4 if de == 4 else p8
            if next_double(state) < p:
                s[i, j] = -s[i, j]
                accepted += 1
    return accepted


def run_simulation(params: SimParams, initial=None) -> np.ndarray:
    """Run ``params.steps`` single-site Metropolis updates and return the lattice.

    The generator stream is derived from ``params.seed``. Without ``initial``
    the lattice starts from uniform random spins drawn from the same stream.
    """
    state = derive_state(params.seed, *params.stream)
    if initial is None:
        lattice = _random_spins(params.n, state)
    else:
        lattice = validate_lattice(initial).copy()
        if lattice.shape[0] != params.n:
            raise ValueError(f"initial lattice is {lattice.shape[0]}x{lattice.shape[0]}, expected n={params.n}")
    _metropolis(lattice, params.steps, float(params.temperature), state)
    return lattice


@njit(cache=True)
def _encode(s):
    code = 0
    n = s.shape[0]
    for i in range(n):
        for j in range(n):
            code = code * 2 + (1 if s[i, j] > 0 else 0)
    return code


@njit(cache=True)
def _trace(s, temperature, state, burn_in, n_samples, thin):
    _metropolis(s, burn_in, temperature, state)
    out = np.empty(n_samples, dtype=np.int64)
    for k in range(n_samples):
        _metropolis(s, thin, temperature, state)
        out[k] = _encode(s)
    return out


def sample_states(n: int, temperature: float, n_samples: int, *, seed: int = 0,
                  burn_in: int = 10_000, thin: int | None = None) -> np.ndarray:
    """Record the chain every ``thin`` steps as integer state codes.

    Site (i, j) is bit ``n*n - 1 - (i*n + j)`` of the code, +1 -> 1. Only
    meaningful for small lattices (n * n <= 62).
    """
    if n * n > 62:
        raise ValueError("state codes only fit lattices with n*n <= 62")
    params = SimParams(n=n, temperature=temperature, seed=seed)
    state = derive_state(seed)
    lattice = _random_spins(n, state)
    return _trace(lattice, float(params.temperature), state, burn_in, n_samples, thin or n * n)


def decode_state(code: int, n: int) -> np.ndarray:
    bits = [(code >> (n * n - 1 - k)) & 1 for k in range(n * n)]
    return np.where(np.array(bits, dtype=np.int8).reshape(n, n) == 1, 1, -1).astype(np.int8)


def boltzmann_distribution(n: int, temperature: float) -> np.ndarray:
    """Exact p(state) = exp(-H/T)/Z by enumerating all 2^(n*n) states."""
    if n * n > 20:
        raise ValueError("exhaustive enumeration limited to n*n <= 20")
    energies = np.array([total_energy(decode_state(c, n)) for c in range(2 ** (n * n))], dtype=np.float64)
    w = np.exp(-(energies - energies.min()) / temperature)
    return w / w.sum()
