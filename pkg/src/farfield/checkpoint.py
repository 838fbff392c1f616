"""Versioned parameter checkpoints ("CKPT1"): named float32 arrays + a config snapshot."""

import json
import struct

import numpy as np

MAGIC = b"CKPT1"
_U64 = struct.Struct("<Q")


def save_checkpoint(path, kind: str, config: dict, arrays: dict) -> None:
    """Write named arrays with a JSON manifest; arrays stored little-endian float32."""
    manifest = []
    blobs = []
    for name, values in arrays.items():
        values = np.asarray(values, dtype="<f4")
        manifest.append({"name": name, "shape": list(values.shape), "dtype": "<f4"})
        blobs.append(values.tobytes(order="C"))
    header = json.dumps({"kind": kind, "config": config, "arrays": manifest}).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_U64.pack(len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    """Read a checkpoint back as (kind, config, {name: float32 array})."""
    with open(path, "rb") as f:
        magic = f.read(5)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        (header_len,) = _U64.unpack(f.read(8))
        header = json.loads(f.read(header_len).decode("utf-8"))
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            payload = f.read(count * 4)
            if len(payload) != count * 4:
                raise ValueError(f"{path}: truncated data for {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    return header["kind"], header["config"], arrays
