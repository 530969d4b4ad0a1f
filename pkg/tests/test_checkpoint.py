import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mthetgnn import checkpoint as ck
from mthetgnn.errors import CheckpointError


def sample():
    rng = np.random.default_rng(0)
    return ck.Checkpoint(
        {"config": {"a": 1, "b": [1, 2]}, "note": "x"},
        {"w": rng.normal(size=(3, 4)), "b": np.zeros(2), "s": np.array(2.5)},
    )


def test_round_trip_exact():
    c = sample()
    back = ck.decode(ck.encode(c))
    assert back.header == c.header
    assert list(back.arrays) == list(c.arrays)
    for k in c.arrays:
        np.testing.assert_array_equal(back.arrays[k], c.arrays[k])
        assert back.arrays[k].shape == np.shape(c.arrays[k])


def test_encoding_is_deterministic_and_key_order_free():
    a = ck.encode(sample())
    c = sample()
    c.header = dict(reversed(list(c.header.items())))
    assert ck.encode(c) == a


def test_bad_magic():
    blob = bytearray(ck.encode(sample()))
    blob[0:8] = b"NOTACKPT"
    with pytest.raises(CheckpointError, match="magic"):
        ck.decode(bytes(blob))


def test_flipped_byte_fails_digest():
    blob = bytearray(ck.encode(sample()))
    blob[len(blob) // 2] ^= 0xFF
    with pytest.raises(CheckpointError, match="digest"):
        ck.decode(bytes(blob))


def test_truncated_file():
    with pytest.raises(CheckpointError):
        ck.decode(ck.encode(sample())[:20])


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        ck.load(tmp_path / "none.ckpt")


def test_config_hash_ignores_key_order():
    assert ck.config_hash({"a": 1, "b": 2}) == ck.config_hash({"b": 2, "a": 1})
    assert ck.config_hash({"a": 1}) != ck.config_hash({"a": 2})


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(1, 4)), min_size=1, max_size=4), st.integers(0, 999))
def test_round_trip_shapes(shapes, seed):
    rng = np.random.default_rng(seed)
    arrays = {f"e{i}": rng.normal(size=(d,) * nd) for i, (nd, d) in enumerate(shapes)}
    back = ck.decode(ck.encode(ck.Checkpoint({}, arrays)))
    for k, v in arrays.items():
        np.testing.assert_array_equal(back.arrays[k], v)
