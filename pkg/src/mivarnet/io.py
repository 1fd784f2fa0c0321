"""On-disk artifacts: binary tensor containers, checkpoints, JSON and PNG.

A tensor container is::

    b"CTNS" | version u8 | dtype u8 | ndim u8 | reserved u8 | ndim x u64 dims | payload

All integers and samples are little-endian; complex samples are stored as
interleaved (re, im) pairs. A checkpoint is a u64 header length, a JSON
header and one container per parameter, in header order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .config import ExperimentConfig
from .errors import FormatError

MAGIC = b"CTNS"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<c8"), 3: np.dtype("<c16")}
CODES = {dt: code for code, dt in DTYPES.items()}
_PREFIX = struct.Struct("<4sBBBB")


def encode_tensor(array) -> bytes:
    arr = np.asarray(array)
    dtype = arr.dtype.newbyteorder("<")
    if dtype not in CODES:
        raise FormatError(f"unsupported dtype {arr.dtype}")
    code = CODES[dtype]
    if arr.ndim > 255:
        raise FormatError("too many dimensions")
    head = _PREFIX.pack(MAGIC, VERSION, code, arr.ndim, 0)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return head + dims + np.ascontiguousarray(arr, dtype=dtype).tobytes()


def decode_tensor(buf: bytes, offset: int = 0, exact: bool = True):
    """Parse one container at ``offset``; returns ``(array, end_offset)``.

    With ``exact`` the container must end the buffer.
    """
    if len(buf) - offset < _PREFIX.size:
        raise FormatError("truncated tensor header")
    magic, version, code, ndim, reserved = _PREFIX.unpack_from(buf, offset)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    if code not in DTYPES:
        raise FormatError(f"unknown dtype code {code}")
    if reserved != 0:
        raise FormatError("reserved byte must be zero")
    pos = offset + _PREFIX.size
    if len(buf) - pos < 8 * ndim:
        raise FormatError("truncated dimension table")
    shape = struct.unpack_from(f"<{ndim}Q", buf, pos)
    pos += 8 * ndim
    dtype = DTYPES[code]
    nbytes = int(np.prod(shape, dtype=np.uint64)) * dtype.itemsize
    end = pos + nbytes
    if end > len(buf) or (exact and end != len(buf)):
        raise FormatError(f"payload is {len(buf) - pos} bytes, expected {nbytes}")
    arr = np.frombuffer(buf, dtype=dtype, count=nbytes // dtype.itemsize, offset=pos).reshape(shape)
    return arr.astype(dtype.newbyteorder("="), copy=True), end


def write_tensor(path, array) -> None:
    Path(path).write_bytes(encode_tensor(array))


def read_tensor(path) -> np.ndarray:
    arr, _ = decode_tensor(Path(path).read_bytes())
    return arr


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# checkpoints -------------------------------------------------------------------


def encode_checkpoint(model) -> bytes:
    state = model.state_dict()
    names = sorted(state)
    header = {
        "mode": model.mode,
        "T": model.cascades,
        "step": model.step,
        "config": model.config.to_dict(),
        "names": names,
        "shapes": {n: list(state[n].shape) for n in names},
    }
    head = json.dumps(header, sort_keys=True).encode()
    return struct.pack("<Q", len(head)) + head + b"".join(encode_tensor(state[n]) for n in names)


def decode_checkpoint(buf: bytes):
    from .varnet import ReconModel

    if len(buf) < 8:
        raise FormatError("truncated checkpoint")
    (n,) = struct.unpack_from("<Q", buf, 0)
    try:
        header = json.loads(buf[8 : 8 + n].decode())
        names = header["names"]
        config = ExperimentConfig.from_dict(header["config"])
        mode = header["mode"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"bad checkpoint header: {exc}") from exc
    pos = 8 + n
    state = {}
    for i, name in enumerate(names):
        state[name], pos = decode_tensor(buf, pos, exact=i == len(names) - 1)
        if list(state[name].shape) != header["shapes"][name]:
            raise FormatError(f"{name}: shape does not match header")
    model = ReconModel(config, mode)
    model.load_state_dict(state)
    model.step = int(header["step"])
    return model


def save_checkpoint(path, model) -> None:
    Path(path).write_bytes(encode_checkpoint(model))


def load_checkpoint(path):
    return decode_checkpoint(Path(path).read_bytes())


# images --------------------------------------------------------------------------


def to_uint8(image) -> np.ndarray:
    """Magnitude scaled by its own maximum to 0..255."""
    mag = np.abs(np.asarray(image))
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
    return np.round(255 * mag).astype(np.uint8)


def write_png(path, image) -> None:
    Image.fromarray(to_uint8(image)).save(path, format="PNG")
