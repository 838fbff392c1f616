"""Binary feature archive ("FEA1"): utterance id -> float32 feature matrix records."""

import struct

import numpy as np

MAGIC = b"FEA1"
_U32 = struct.Struct("<I")


def write_feature_archive(path, items) -> None:
    """Write (utt_id, T x F array) pairs; values stored as little-endian float32."""
    if hasattr(items, "items"):
        items = items.items()
    with open(path, "wb") as f:
        f.write(MAGIC)
        for utt_id, values in items:
            values = np.ascontiguousarray(values, dtype="<f4")
            if values.ndim != 2:
                raise ValueError(f"{utt_id}: expected 2-D matrix, got shape {values.shape}")
            encoded = utt_id.encode("utf-8")
            f.write(_U32.pack(len(encoded)))
            f.write(encoded)
            f.write(_U32.pack(values.shape[0]))
            f.write(_U32.pack(values.shape[1]))
            f.write(values.tobytes())


def read_feature_archive(path) -> dict:
    """Read an archive back as an ordered {utt_id: float32 array} dict."""
    out = {}
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) < 4:
                raise ValueError(f"{path}: truncated record header")
            (id_len,) = _U32.unpack(head)
            utt_id = f.read(id_len).decode("utf-8")
            rows, cols = _U32.unpack(f.read(4))[0], _U32.unpack(f.read(4))[0]
            payload = f.read(rows * cols * 4)
            if len(payload) != rows * cols * 4:
                raise ValueError(f"{path}: truncated data for {utt_id!r}")
            out[utt_id] = np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()
    return out
