"""Small numpy layers with hand-written backward passes, plus Adam.

Every module caches what it needs during ``forward`` and accumulates
parameter gradients in ``backward``; ``backward`` returns the gradient with
respect to the module input. Arithmetic follows the parameter dtype
(float32 by default; :meth:`Module.astype` switches a copy to float64 for
gradient checking).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

ACTIVATIONS = ("tanh", "leaky_relu", "identity")
LEAKY_SLOPE = 0.2


# -- pure functional forms ---------------------------------------------------

def dense_apply(weights, bias, x):
    """y = x @ W.T + b for a batch of row vectors (or a single vector)."""
    x = np.asarray(x)
    if x.shape[-1] != weights.shape[1]:
        raise ValueError(f"input width {x.shape[-1]} != layer in-dim {weights.shape[1]}")
    return x @ weights.T + bias


def dense_gradient(weights, bias, x, upstream):
    """Return (d_input, d_weights, d_bias) for ``dense_apply``."""
    x = np.asarray(x)
    upstream = np.asarray(upstream)
    if x.shape[-1] != weights.shape[1] or upstream.shape[-1] != weights.shape[0]:
        raise ValueError("shape mismatch in dense_gradient")
    x2 = x.reshape(-1, x.shape[-1])
    u2 = upstream.reshape(-1, upstream.shape[-1])
    d_in = (u2 @ weights).reshape(x.shape)
    return d_in, u2.T @ x2, u2.sum(axis=0)


def activation_apply(kind: str, x):
    if kind == "tanh":
        return np.tanh(x)
    if kind == "leaky_relu":
        return np.where(x > 0, x, x * x.dtype.type(LEAKY_SLOPE))
    if kind == "identity":
        return x
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def activation_gradient(kind: str, x, upstream):
    """Upstream times the elementwise derivative, evaluated at pre-activation x."""
    if kind == "tanh":
        t = np.tanh(x)
        return upstream * (1 - t * t)
    if kind == "leaky_relu":
        return upstream * np.where(x > 0, 1, LEAKY_SLOPE).astype(x.dtype)
    if kind == "identity":
        return upstream
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def lookup_embed(table, index):
    table = np.asarray(table)
    idx = np.asarray(index)
    if np.any(idx < 0) or np.any(idx >= table.shape[0]):
        raise IndexError(f"lookup index out of range [0, {table.shape[0]})")
    return table[idx].copy()


# -- modules -----------------------------------------------------------------

class Module:
    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.children: dict[str, Module] = {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def __call__(self, x):
        return self.forward(x)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for k, v in self.params.items():
            yield prefix + k, v
        for name, child in self.children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_grads(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for k, v in self.grads.items():
            yield prefix + k, v
        for name, child in self.children.items():
            yield from child.named_grads(f"{prefix}{name}.")

    def parameters(self) -> dict[str, np.ndarray]:
        return dict(self.named_parameters())

    def gradients(self) -> dict[str, np.ndarray]:
        return dict(self.named_grads())

    def zero_grad(self) -> None:
        for g in self.gradients().values():
            g[...] = 0

    def load_parameters(self, values: dict[str, np.ndarray]) -> None:
        """Copy ``values`` into the parameters; nothing is written unless all match."""
        own = self.parameters()
        for name, arr in own.items():
            if name not in values:
                raise KeyError(f"missing parameter {name}")
            if np.shape(values[name]) != arr.shape:
                raise ValueError(f"parameter {name}: shape {np.shape(values[name])} != {arr.shape}")
        for name, arr in own.items():
            arr[...] = values[name]

    def astype(self, dtype) -> "Module":
        """Deep copy with every parameter and gradient cast to ``dtype``."""
        clone = copy.deepcopy(self)
        for m in clone._walk():
            m.params = {k: v.astype(dtype) for k, v in m.params.items()}
            m.grads = {k: v.astype(dtype) for k, v in m.grads.items()}
        return clone

    @property
    def dtype(self):
        for _, v in self.named_parameters():
            return v.dtype
        return np.dtype(np.float32)

    def _walk(self):
        yield self
        for c in self.children.values():
            yield from c._walk()

    def _add(self, name: str, module: "Module") -> "Module":
        self.children[name] = module
        return module


class Dense(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        super().__init__()
        if in_dim < 1 or out_dim < 1:
            raise ValueError("layer dimensions must be positive")
        bound = math.sqrt(1.0 / in_dim)
        if rng is None:
            w = np.zeros((out_dim, in_dim))
            b = np.zeros(out_dim)
        else:
            w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
            b = rng.uniform(-bound, bound, size=out_dim)
        self.params = {"W": w.astype(np.float32), "b": b.astype(np.float32)}
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._x = None

    @property
    def in_dim(self):
        return self.params["W"].shape[1]

    @property
    def out_dim(self):
        return self.params["W"].shape[0]

    def forward(self, x):
        self._x = np.asarray(x, dtype=self.params["W"].dtype)
        return dense_apply(self.params["W"], self.params["b"], self._x)

    def backward(self, dy):
        dx, dw, db = dense_gradient(self.params["W"], self.params["b"], self._x, dy)
        self.grads["W"] += dw
        self.grads["b"] += db
        return dx


class Activation(Module):
    def __init__(self, kind: str):
        super().__init__()
        if kind not in ACTIVATIONS:
            raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
        self.kind = kind
        self._x = None

    def forward(self, x):
        self._x = x
        return activation_apply(self.kind, x)

    def backward(self, dy):
        return activation_gradient(self.kind, self._x, dy)


class Lookup(Module):
    """Learnable table; rows initialized N(0, 0.02)."""

    def __init__(self, num_entries: int, dim: int, rng: np.random.Generator | None = None):
        super().__init__()
        if num_entries < 1:
            raise ValueError("lookup table needs at least one row")
        rows = np.zeros((num_entries, dim)) if rng is None else rng.normal(0.0, 0.02, size=(num_entries, dim))
        self.params = {"rows": rows.astype(np.float32)}
        self.grads = {"rows": np.zeros_like(self.params["rows"])}
        self._idx = None

    def forward(self, index):
        self._idx = np.asarray(index, dtype=np.int64)
        return lookup_embed(self.params["rows"], self._idx)

    def backward(self, dy):
        np.add.at(self.grads["rows"], self._idx, dy)
        return None


class Sequential(Module):
    def __init__(self, *layers: Module):
        super().__init__()
        self.layers = list(layers)
        for i, layer in enumerate(self.layers):
            self._add(str(i), layer)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


def mlp(widths, activation: str, rng, final_activation: str | None = None) -> Sequential:
    """Dense stack with ``activation`` between layers and ``final_activation`` last."""
    layers: list[Module] = []
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        layers.append(Dense(a, b, rng))
        last = i == len(widths) - 2
        kind = (final_activation or "identity") if last else activation
        if kind != "identity":
            layers.append(Activation(kind))
    return Sequential(*layers)


# -- optimizer ---------------------------------------------------------------

class Adam:
    """Adam with bias correction; defaults lr=1e-4, betas=(0, 0.99)."""

    def __init__(self, lr: float = 1e-4, betas=(0.0, 0.99), eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def init_state(self, params: dict[str, np.ndarray]) -> None:
        for k, p in params.items():
            self.m.setdefault(k, np.zeros_like(p))
            self.v.setdefault(k, np.zeros_like(p))

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update ``params`` in place."""
        for k, p in params.items():
            g = grads.get(k)
            if g is None or g.shape != p.shape:
                raise ValueError(f"gradient for {k} missing or mis-shaped")
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for {k}")
        self.init_state(params)
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            m, v = self.m[k], self.v[k]
            dt = p.dtype.type
            m *= dt(self.beta1)
            m += dt(1.0 - self.beta1) * g
            v *= dt(self.beta2)
            v += dt(1.0 - self.beta2) * (g * g)
            p -= dt(self.lr / bc1) * m / (np.sqrt(v / dt(bc2)) + dt(self.eps))


def adam_step(state: Adam, params, grads):
    state.step(params, grads)
    return params


# -- gradient checking -------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_parameter: str
    worst_index: tuple
    analytic: float
    numeric: float
    tolerance: float
    checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def relative_error(a, b, floor: float = 1e-6):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def grad_check(loss: Callable[[], float], params: dict[str, np.ndarray], analytic: dict[str, np.ndarray],
               tolerance: float = 1e-3, step: float = 1e-5, floor: float = 1e-6,
               max_per_param: int | None = None, rng: np.random.Generator | None = None) -> GradCheckReport:
    """Compare ``analytic`` against central differences of ``loss()``.

    ``loss`` must read the arrays in ``params`` (they are perturbed in place
    and restored). ``max_per_param`` samples coordinates instead of checking
    every one.
    """
    worst = (-1.0, "", (), 0.0, 0.0)
    checked = 0
    for name, p in params.items():
        coords = list(np.ndindex(p.shape))
        if max_per_param is not None and len(coords) > max_per_param:
            rng = rng or np.random.default_rng(0)
            pick = rng.choice(len(coords), size=max_per_param, replace=False)
            coords = [coords[i] for i in sorted(pick)]
        for idx in coords:
            orig = p[idx]
            p[idx] = orig + step
            up = loss()
            p[idx] = orig - step
            down = loss()
            p[idx] = orig
            num = (up - down) / (2 * step)
            ana = float(analytic[name][idx])
            err = float(relative_error(ana, num, floor))
            checked += 1
            if err > worst[0]:
                worst = (err, name, idx, ana, num)
    return GradCheckReport(max(worst[0], 0.0), worst[1], worst[2], worst[3], worst[4], tolerance, checked)


def grad_check_module(module: Module, x, tolerance: float = 1e-3, step: float = 1e-5,
                      seed: int = 0, include_input: bool = False, **kw) -> GradCheckReport:
    """Gradient check of a random linear head ``sum(c * module(x))`` in float64."""
    m64 = module.astype(np.float64)
    x64 = np.asarray(x, dtype=np.float64) if np.asarray(x).dtype.kind == "f" else np.asarray(x)
    out = m64.forward(x64)
    head = np.random.default_rng(seed).normal(size=np.shape(out))

    def loss():
        return float(np.sum(head * m64.forward(x64)))

    m64.zero_grad()
    m64.forward(x64)
    dx = m64.backward(head)
    params = m64.parameters()
    analytic = {k: v.copy() for k, v in m64.gradients().items()}
    if include_input:
        params = dict(params, input=x64)
        analytic["input"] = dx
    return grad_check(loss, params, analytic, tolerance=tolerance, step=step, **kw)
