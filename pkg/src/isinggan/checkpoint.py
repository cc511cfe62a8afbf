"""Binary checkpoint format.

Layout::

    b"BCGN"                      magic
    u32 little-endian            format version (currently 1)
    u32 little-endian            byte length L of the manifest
    L bytes                      UTF-8 JSON manifest (sorted keys, compact)
    payload                      raw little-endian float32 tensors, in the
                                 order of manifest["tensors"]

The manifest carries the training config, step counter, optimizer scalars,
generator stream state, label range/pool, the loss log and the tensor
directory (name + shape).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .gan import GanState, TrainConfig
from .nn import Adam

MAGIC = b"BCGN"
VERSION = 1


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def _tensors(state: GanState) -> list[tuple[str, np.ndarray]]:
    out = []
    for prefix, module, opt in (("G", state.generator, state.opt_g), ("D", state.discriminator, state.opt_d)):
        params = module.parameters()
        opt.init_state(params)
        out += [(f"{prefix}.{k}", v) for k, v in params.items()]
        out += [(f"opt.{prefix}.m.{k}", opt.m[k]) for k in params]
        out += [(f"opt.{prefix}.v.{k}", opt.v[k]) for k in params]
    return out


def _opt_meta(opt: Adam) -> dict:
    return {"t": opt.t, "lr": opt.lr, "betas": [opt.beta1, opt.beta2], "eps": opt.eps}


def to_bytes(state: GanState) -> bytes:
    tensors = _tensors(state)
    manifest = {
        "config": state.config.to_dict(),
        "step": state.step,
        "rng": state.rng_state(),
        "label_range": list(state.label_range),
        "label_pool": None if state.label_pool is None else [float(x) for x in state.label_pool],
        "optimizers": {"G": _opt_meta(state.opt_g), "D": _opt_meta(state.opt_d)},
        "loss_log": [[int(s), float(d), float(g)] for s, d, g in state.loss_log],
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in tensors],
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(blob)), blob]
    parts += [np.ascontiguousarray(v, dtype="<f4").tobytes() for _, v in tensors]
    return b"".join(parts)


def _state_from_manifest(manifest: dict) -> GanState:
    cfg = TrainConfig.from_dict(manifest["config"])
    state = GanState.initialize(cfg, tuple(manifest["label_range"]))
    state.step = int(manifest["step"])
    pool = manifest.get("label_pool")
    state.label_pool = None if pool is None else np.asarray(pool, dtype=np.float32)
    state.loss_log = [(int(s), float(d), float(g)) for s, d, g in manifest.get("loss_log", [])]
    for key, opt in (("G", state.opt_g), ("D", state.opt_d)):
        meta = manifest["optimizers"][key]
        opt.t, opt.lr, opt.eps = int(meta["t"]), float(meta["lr"]), float(meta["eps"])
        opt.beta1, opt.beta2 = (float(b) for b in meta["betas"])
    return state


def from_bytes(data: bytes) -> GanState:
    if len(data) < 12:
        raise CheckpointError("truncated checkpoint header")
    if data[:4] != MAGIC:
        raise CheckpointError(f"bad magic {data[:4]!r}; not a checkpoint file")
    version, length = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version} (expected {VERSION})")
    if len(data) < 12 + length:
        raise CheckpointError("truncated checkpoint manifest")
    try:
        manifest = json.loads(data[12:12 + length])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt manifest: {exc}") from exc

    try:
        state = _state_from_manifest(manifest)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"invalid checkpoint manifest: {exc!r}") from exc

    expected = _tensors(state)
    entries = manifest.get("tensors", [])
    if [e.get("name") for e in entries] != [k for k, _ in expected]:
        raise CheckpointError("tensor directory does not match the architecture in the config")
    pos = 12 + length
    for entry, (name, target) in zip(entries, expected):
        shape = tuple(entry["shape"])
        if shape != target.shape:
            raise CheckpointError(f"tensor {name}: stored shape {shape} != config shape {target.shape}")
        nbytes = 4 * int(np.prod(shape, dtype=np.int64))
        if pos + nbytes > len(data):
            raise CheckpointError(f"truncated payload at tensor {name}")
        target[...] = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=pos).reshape(shape)
        pos += nbytes
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes after payload")
    return state


def save_checkpoint(path, state: GanState) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(to_bytes(state))


def load_checkpoint(path) -> GanState:
    return from_bytes(Path(path).read_bytes())
