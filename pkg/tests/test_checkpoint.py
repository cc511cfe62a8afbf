import json
import struct

import numpy as np
import pytest
from conftest import tiny_config

from isinggan.checkpoint import (MAGIC, VERSION, CheckpointError, CheckpointVersionError, from_bytes,
                                 load_checkpoint, save_checkpoint, to_bytes)
from isinggan.gan import GanState, train


@pytest.fixture(scope="module")
def trained():
    rng = np.random.default_rng(0)
    images = rng.choice(np.array([-1.0, 1.0], np.float32), size=(16, 8, 8))
    labels = np.repeat(np.array([1.0, 3.0], np.float32), 8)
    return train(tiny_config(steps=6), images, labels)


def _header(blob):
    version, length = struct.unpack("<II", blob[4:12])
    return version, length, json.loads(blob[12:12 + length])


def test_save_load_save_is_byte_identical(tmp_path, trained):
    save_checkpoint(tmp_path / "a.bcgn", trained)
    st = load_checkpoint(tmp_path / "a.bcgn")
    save_checkpoint(tmp_path / "b.bcgn", st)
    assert (tmp_path / "a.bcgn").read_bytes() == (tmp_path / "b.bcgn").read_bytes()
    assert st.step == 6 and st.loss_log == trained.loss_log
    assert st.opt_g.t == trained.opt_g.t == 6
    np.testing.assert_array_equal(st.label_pool, trained.label_pool)


def test_layout(trained):
    blob = to_bytes(trained)
    assert blob[:4] == MAGIC == b"BCGN"
    version, length, manifest = _header(blob)
    assert version == VERSION
    assert manifest["config"] == trained.config.to_dict()
    assert manifest["rng"]["next_step"] == 6
    names = [t["name"] for t in manifest["tensors"]]
    assert names[0].startswith("G.") and any(n.startswith("D.embed.") for n in names)
    assert any(n.startswith("opt.G.m.") for n in names) and any(n.startswith("opt.D.v.") for n in names)
    payload = sum(4 * int(np.prod(t["shape"])) for t in manifest["tensors"])
    assert len(blob) == 12 + length + payload
    first = manifest["tensors"][0]
    stored = np.frombuffer(blob, "<f4", count=int(np.prod(first["shape"])), offset=12 + length)
    np.testing.assert_array_equal(stored, trained.generator.parameters()[first["name"][2:]].ravel())


def test_bad_magic(trained):
    blob = bytearray(to_bytes(trained))
    blob[:4] = b"XXXX"
    with pytest.raises(CheckpointError, match="magic"):
        from_bytes(bytes(blob))


def test_version_bump(trained):
    blob = bytearray(to_bytes(trained))
    blob[4:8] = struct.pack("<I", VERSION + 1)
    with pytest.raises(CheckpointVersionError):
        from_bytes(bytes(blob))


@pytest.mark.parametrize("cut", [3, 11, 40, -1])
def test_truncation(trained, cut):
    blob = to_bytes(trained)
    with pytest.raises(CheckpointError):
        from_bytes(blob[:cut])


def test_trailing_bytes(trained):
    with pytest.raises(CheckpointError, match="trailing"):
        from_bytes(to_bytes(trained) + b"\0\0\0\0")


def _rewrite_manifest(blob, edit):
    _, length, manifest = _header(blob)
    edit(manifest)
    new = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    return blob[:4] + struct.pack("<II", VERSION, len(new)) + new + blob[12 + length:]


def test_shape_mismatch_against_config(trained):
    def grow(m):
        m["config"]["g_hidden"] = 17
    with pytest.raises(CheckpointError, match="shape"):
        from_bytes(_rewrite_manifest(to_bytes(trained), grow))


def test_directory_mismatch(trained):
    def swap(m):
        m["config"]["strategy"] = "class-bin"
    with pytest.raises(CheckpointError, match="directory"):
        from_bytes(_rewrite_manifest(to_bytes(trained), swap))


def test_invalid_manifest(trained):
    def drop(m):
        del m["optimizers"]
    with pytest.raises(CheckpointError):
        from_bytes(_rewrite_manifest(to_bytes(trained), drop))
    blob = to_bytes(trained)
    _, length, _ = _header(blob)
    with pytest.raises(CheckpointError):
        from_bytes(blob[:12] + b"{" * length + blob[12 + length:])


def test_fresh_state_roundtrip():
    st = GanState.initialize(tiny_config(strategy="normalized-scalar"))
    back = from_bytes(to_bytes(st))
    for (k, v), (_, w) in zip(st.discriminator.named_parameters(), back.discriminator.named_parameters()):
        np.testing.assert_array_equal(v, w, err_msg=k)
    assert back.label_pool is None
