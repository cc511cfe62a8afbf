"""Label -> embedding strategies: class-bin lookup, normalized scalar, binary bits.

Labels are float32 temperatures in (0, 2*T_c]. All strategies end in tanh, so
every embedding coordinate lies in (-1, 1).
"""

from __future__ import annotations

import numpy as np

from .floatbits import PART_SLICES, PARTS, encode_labels
from .ising import T_C, T_MIN
from .nn import Activation, Dense, Lookup, Module, Sequential

T_MAX = np.float32(2 * T_C)  # float32 upper label bound; 2*T_C rounded to single precision
KINDS = ("class-bin", "normalized-scalar", "binary-bits")


def check_labels(labels) -> np.ndarray:
    labels = np.atleast_1d(np.asarray(labels, dtype=np.float32))
    bad = ~(np.isfinite(labels) & (labels > 0) & (labels <= T_MAX))
    if bad.any():
        raise ValueError(f"label(s) {labels[bad][:5].tolist()} outside working range (0, {float(T_MAX)}]")
    return labels


def bin_label(T, K: int):
    """Uniform bins over (0, 2*T_c]: index = min(floor(T / (2*T_c) * K), K - 1)."""
    if K < 2:
        raise ValueError("need at least 2 classes")
    labels = check_labels(T)
    idx = np.minimum(np.floor(labels.astype(np.float64) / float(T_MAX) * K), K - 1).astype(np.int64)
    return int(idx[0]) if np.ndim(T) == 0 else idx


def normalize_label(T):
    """T / (2*T_c), computed from the float32 label."""
    labels = check_labels(T)
    out = labels.astype(np.float64) / float(T_MAX)
    return float(out[0]) if np.ndim(T) == 0 else out


class Conditioning(Module):
    """Common surface: ``forward(labels)`` -> (batch, embedding_dim)."""

    kind = ""

    def __init__(self, embedding_dim: int):
        super().__init__()
        self.embedding_dim = embedding_dim

    def encode(self, labels):
        """Validate labels and map them to the network's raw input."""
        raise NotImplementedError

    def sweep_inputs(self, num_samples: int):
        """Inclusive uniform grid over the strategy's working range (raw inputs)."""
        raise NotImplementedError

    def forward_encoded(self, x):
        raise NotImplementedError

    def forward(self, labels):
        return self.forward_encoded(self.encode(labels))

    def embed(self, T) -> np.ndarray:
        out = self.forward(T)
        return out[0] if np.ndim(T) == 0 else out

    def hyperparameters(self) -> dict:
        return {"kind": self.kind, "embedding_dim": self.embedding_dim}


class ClassBinEmbedding(Conditioning):
    kind = "class-bin"

    def __init__(self, num_classes: int = 64, embedding_dim: int = 64, rng=None):
        super().__init__(embedding_dim)
        if num_classes < 2:
            raise ValueError("need at least 2 classes")
        self.num_classes = num_classes
        self.table = self._add("table", Lookup(num_classes, embedding_dim, rng))
        self.act = Activation("tanh")

    def encode(self, labels):
        return np.atleast_1d(bin_label(np.asarray(labels, dtype=np.float32).reshape(-1), self.num_classes))

    def sweep_inputs(self, num_samples: int):
        return np.arange(self.num_classes)

    def forward_encoded(self, x):
        return self.act.forward(self.table.forward(x))

    def backward(self, dy):
        self.table.backward(self.act.backward(dy))
        return None

    def hyperparameters(self):
        return {**super().hyperparameters(), "num_classes": self.num_classes}


class NormalizedScalarEmbedding(Conditioning):
    """1 -> hidden -> d_e, tanh after each layer, fed with T / (2*T_c)."""

    kind = "normalized-scalar"

    def __init__(self, embedding_dim: int = 64, hidden: int = 64, rng=None):
        super().__init__(embedding_dim)
        self.hidden = hidden
        self.net = self._add("net", Sequential(
            Dense(1, hidden, rng), Activation("tanh"),
            Dense(hidden, embedding_dim, rng), Activation("tanh"),
        ))

    def encode(self, labels):
        return np.asarray(normalize_label(np.asarray(labels, dtype=np.float32).reshape(-1)),
                          dtype=np.float32).reshape(-1, 1)

    def sweep_inputs(self, num_samples: int):
        return np.linspace(0.0, 1.0, num_samples).astype(np.float32).reshape(-1, 1)

    def forward_encoded(self, x):
        return self.net.forward(np.asarray(x).reshape(-1, 1))

    def backward(self, dy):
        self.net.backward(dy)
        return None

    def hyperparameters(self):
        return {**super().hyperparameters(), "hidden": self.hidden}


class BinaryBitsEmbedding(Conditioning):
    """Sign, exponent and mantissa bits through separate dense+tanh branches,
    concatenated, then a final dense+tanh."""

    kind = "binary-bits"

    def __init__(self, embedding_dim: int = 64, branch_widths=(4, 32, 92), polarity: str = "01", rng=None):
        super().__init__(embedding_dim)
        if len(branch_widths) != 3:
            raise ValueError("need one width per bit group (sign, exponent, mantissa)")
        self.branch_widths = tuple(int(w) for w in branch_widths)
        self.polarity = polarity
        self.branches = [
            self._add(name, Sequential(Dense(bits, width, rng), Activation("tanh")))
            for name, bits, width in zip(("sign", "exponent", "mantissa"), PARTS, self.branch_widths)
        ]
        self.merge = self._add("merge", Sequential(Dense(sum(self.branch_widths), embedding_dim, rng),
                                                   Activation("tanh")))

    def encode(self, labels):
        labels = check_labels(np.asarray(labels, dtype=np.float32).reshape(-1))
        return encode_labels(labels, self.polarity)

    def sweep_inputs(self, num_samples: int):
        grid = np.linspace(T_MIN, float(T_MAX), num_samples).astype(np.float32)
        grid[-1] = T_MAX
        return encode_labels(grid, self.polarity)

    def forward_encoded(self, x):
        x = np.asarray(x, dtype=self.dtype)
        parts = [br.forward(x[:, s]) for br, s in zip(self.branches, PART_SLICES)]
        return self.merge.forward(np.concatenate(parts, axis=1))

    def backward(self, dy):
        d_cat = self.merge.backward(dy)
        start = 0
        for br, w in zip(self.branches, self.branch_widths):
            br.backward(d_cat[:, start:start + w])
            start += w
        return None

    def hyperparameters(self):
        return {**super().hyperparameters(), "branch_widths": list(self.branch_widths),
                "polarity": self.polarity}


def make_strategy(kind: str, embedding_dim: int = 64, rng=None, *, num_classes: int = 64,
                  hidden: int = 64, branch_widths=(4, 32, 92), polarity: str = "01") -> Conditioning:
    if kind == "class-bin":
        return ClassBinEmbedding(num_classes, embedding_dim, rng)
    if kind == "normalized-scalar":
        return NormalizedScalarEmbedding(embedding_dim, hidden, rng)
    if kind == "binary-bits":
        return BinaryBitsEmbedding(embedding_dim, branch_widths, polarity, rng)
    raise ValueError(f"unknown conditioning kind {kind!r}; expected one of {KINDS}")
