"""Tensor-exchange file format shared with the training bridge.

One file per map: a single JSON header line
``{"shape": [R, R, C], "dtype": "f32", "order": "row-major", "name": ...}``
terminated by a newline, followed by the raw little-endian float32 payload
in row-major order.
"""

from __future__ import annotations

import json

import numpy as np

from .codec import TargetMaps


class TensorFormatError(ValueError):
    pass


def write_tensor(path, arr: np.ndarray, name: str) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise TensorFormatError(f"expected (R, R, C) array, got shape {arr.shape}")
    header = {
        "shape": list(arr.shape),
        "dtype": "f32",
        "order": "row-major",
        "name": name,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_tensor(path):
    """Read one tensor-exchange file, returning (array, name)."""
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise TensorFormatError(f"{path}: bad header line: {e}") from e
        for key in ("shape", "dtype", "order"):
            if key not in header:
                raise TensorFormatError(f"{path}: header missing {key!r}")
        if header["dtype"] != "f32" or header["order"] != "row-major":
            raise TensorFormatError(
                f"{path}: unsupported dtype/order {header['dtype']}/{header['order']}"
            )
        shape = tuple(int(s) for s in header["shape"])
        if len(shape) != 3:
            raise TensorFormatError(f"{path}: expected 3-D shape, got {shape}")
        payload = f.read()
    expected = int(np.prod(shape)) * 4
    if len(payload) != expected:
        raise TensorFormatError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float64)
    return arr, header.get("name", "")


def write_maps(maps: TargetMaps, prefix) -> None:
    """Write hm/wh/offset files as <prefix>_hm.t32 etc."""
    write_tensor(f"{prefix}_hm.t32", maps.hm, "hm")
    write_tensor(f"{prefix}_wh.t32", maps.wh, "wh")
    write_tensor(f"{prefix}_offset.t32", maps.offset, "offset")


def read_maps(prefix) -> TargetMaps:
    hm, _ = read_tensor(f"{prefix}_hm.t32")
    wh, _ = read_tensor(f"{prefix}_wh.t32")
    offset, _ = read_tensor(f"{prefix}_offset.t32")
    if hm.shape[2] != 1 or wh.shape[2] != 2 or offset.shape[2] != 2:
        raise TensorFormatError(
            f"{prefix}: channel counts must be 1/2/2, got "
            f"{hm.shape[2]}/{wh.shape[2]}/{offset.shape[2]}"
        )
    return TargetMaps(hm=hm[:, :, 0], wh=wh, offset=offset)
