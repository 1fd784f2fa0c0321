import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from mivarnet import io as mio
from mivarnet.config import ExperimentConfig
from mivarnet.errors import FormatError
from mivarnet.varnet import ReconModel

DTYPES = [np.float32, np.float64, np.complex64, np.complex128]


@settings(max_examples=60, deadline=None)
@given(
    shape=st.lists(st.integers(0, 5), min_size=0, max_size=4),
    code=st.integers(0, 3),
    seed=st.integers(0, 2**31),
)
def test_tensor_roundtrip_is_bit_exact(shape, code, seed):
    r = np.random.default_rng(seed)
    arr = r.standard_normal(shape)
    if code >= 2:
        arr = arr + 1j * r.standard_normal(shape)
    arr = arr.astype(DTYPES[code])
    blob = mio.encode_tensor(arr)
    back, end = mio.decode_tensor(blob)
    assert end == len(blob) and back.dtype == arr.dtype and back.shape == arr.shape
    assert back.tobytes() == arr.tobytes()
    assert mio.encode_tensor(back) == blob


def test_layout_is_as_documented():
    arr = np.array([[1 + 2j, 3 - 4j]], dtype=np.complex128)
    blob = mio.encode_tensor(arr)
    assert blob[:8] == b"CTNS" + bytes([1, 3, 2, 0])
    assert struct.unpack("<2Q", blob[8:24]) == (1, 2)
    assert struct.unpack("<4d", blob[24:]) == (1.0, 2.0, 3.0, -4.0)


def test_big_endian_input_is_stored_little_endian():
    arr = np.arange(3, dtype=">f8")
    back, _ = mio.decode_tensor(mio.encode_tensor(arr))
    np.testing.assert_array_equal(back, [0.0, 1.0, 2.0])


@pytest.mark.parametrize(
    "mutate",
    [
        lambda b: b"XTNS" + b[4:],
        lambda b: b[:4] + bytes([2]) + b[5:],
        lambda b: b[:5] + bytes([9]) + b[6:],
        lambda b: b[:7] + bytes([1]) + b[8:],
        lambda b: b[:-1],
        lambda b: b + b"\0",
        lambda b: b[:6],
    ],
    ids=["magic", "version", "dtype", "reserved", "short", "long", "header"],
)
def test_malformed_containers_rejected(mutate):
    blob = mio.encode_tensor(np.ones((2, 3)))
    with pytest.raises(FormatError):
        mio.decode_tensor(mutate(blob))


def test_unsupported_dtype():
    with pytest.raises(FormatError):
        mio.encode_tensor(np.arange(3))


def test_checkpoint_roundtrip(tmp_path, rng):
    cfg = ExperimentConfig(image_size=16, coils=2, cascades=2, channels=4, midcp_channels=2)
    model = ReconModel(cfg, "varnet")
    for p in model.parameters():
        p.value = p.value + rng.standard_normal(p.shape)
    model.step = 17
    path = tmp_path / "m.ckpt"
    mio.save_checkpoint(path, model)
    back = mio.load_checkpoint(path)
    assert back.mode == "varnet" and back.step == 17 and back.config == model.config
    for name, v in model.state_dict().items():
        assert back.state_dict()[name].tobytes() == v.tobytes()
    assert mio.encode_checkpoint(back) == path.read_bytes()


def test_corrupt_checkpoint_rejected(tmp_path):
    model = ReconModel(ExperimentConfig(image_size=16, coils=1, cascades=1, channels=2, midcp_channels=1))
    blob = mio.encode_checkpoint(model)
    with pytest.raises(FormatError):
        mio.decode_checkpoint(blob[:-3])
    with pytest.raises(FormatError):
        mio.decode_checkpoint(blob[:8] + b"X" + blob[9:])


def test_png_export(tmp_path, rng):
    img = rng.random((12, 20))
    path = tmp_path / "x.png"
    mio.write_png(path, img)
    back = np.asarray(Image.open(path))
    assert back.shape == (12, 20) and back.dtype == np.uint8 and back.max() == 255
    np.testing.assert_array_equal(back, np.round(255 * img / img.max()))


def test_json_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    mio.write_json(a, {"b": 1, "a": [1.5, None]})
    mio.write_json(b, {"a": [1.5, None], "b": 1})
    assert a.read_bytes() == b.read_bytes()
    assert mio.read_json(a) == {"a": [1.5, None], "b": 1}
