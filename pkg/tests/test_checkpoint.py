"""Binary checkpoint format: bit-exact round trips and error handling."""

import numpy as np
import pytest

from facefactor.checkpoint import (CheckpointError, load_checkpoint,
                                   save_checkpoint)


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(4)
    named = [("a.w0", rng.standard_normal((3, 5))),
             ("a.b0", rng.standard_normal(3)),
             ("table", rng.standard_normal((2, 2)))]
    path = tmp_path / "m.ffl"
    save_checkpoint(path, "test", {"n_id": 2, "n_exp": 3, "v": 10}, named)
    kind, meta, params = load_checkpoint(path)
    assert kind == "test"
    assert meta == {"n_id": 2, "n_exp": 3, "v": 10}
    for name, arr in named:
        assert params[name].tobytes() == arr.tobytes()
        assert params[name].shape == arr.shape


def test_save_load_save_identical_bytes(tmp_path):
    rng = np.random.default_rng(5)
    named = [("w", rng.standard_normal((4, 4)))]
    p1 = tmp_path / "a.ffl"
    p2 = tmp_path / "b.ffl"
    save_checkpoint(p1, "k", {"x": 1}, named)
    _, meta, params = load_checkpoint(p1)
    save_checkpoint(p2, "k", meta, list(params.items()))
    assert p1.read_bytes() == p2.read_bytes()


def test_magic_enforced(tmp_path):
    path = tmp_path / "bad.ffl"
    path.write_bytes(b"NOPE" + b"\0" * 16)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_truncation_detected(tmp_path):
    path = tmp_path / "m.ffl"
    save_checkpoint(path, "k", {}, [("w", np.ones((4, 4)))])
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_header_magic_and_layout(tmp_path):
    path = tmp_path / "m.ffl"
    save_checkpoint(path, "k", {}, [])
    assert path.read_bytes()[:4] == b"FFL1"
