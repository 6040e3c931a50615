import numpy as np
import pytest

from durable_recourse import checkpoint
from durable_recourse.errors import CheckpointFormatError


def test_roundtrip(tmp_path):
    arrays = {"w": np.arange(6.0).reshape(2, 3), "b": np.array([0.5]), "s": np.array(3.0)}
    p = tmp_path / "x.rarn"
    checkpoint.save(p, "predictor", {"a": 1}, arrays)
    header, back = checkpoint.load(p, expect_kind="predictor")
    assert header == {"a": 1}
    for k, v in arrays.items():
        assert np.array_equal(back[k], v) and back[k].shape == v.shape
    assert p.read_bytes()[:4] == b"RARN"


def test_encoding_is_deterministic():
    a = checkpoint.encode("scorer", {"y": 2, "x": 1}, {"w": np.ones(3)})
    b = checkpoint.encode("scorer", {"x": 1, "y": 2}, {"w": np.ones(3)})
    assert a == b


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:-3],
    lambda b: b + b"\0",
    lambda b: b[:4] + b"\x09\x00" + b[6:],
])
def test_corruption_detected(mutate):
    blob = checkpoint.encode("recommender", {}, {"w": np.ones(4)})
    with pytest.raises(CheckpointFormatError):
        checkpoint.decode(mutate(blob))


def test_kind_mismatch(tmp_path):
    p = tmp_path / "x.rarn"
    checkpoint.save(p, "scorer", {}, {})
    with pytest.raises(CheckpointFormatError):
        checkpoint.load(p, expect_kind="predictor")
    with pytest.raises(FileNotFoundError):
        checkpoint.load(tmp_path / "missing.rarn")
