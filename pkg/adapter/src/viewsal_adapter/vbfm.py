"""Writer for the feature-map interchange format.

Layout: 4-byte magic ``VBFM``, then version u16 = 1, width u32,
height u32, channels u32 (little-endian), then float32 values row-major
with channels interleaved.  Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"VBFM"
VERSION = 1
_HEADER = struct.Struct("<HIII")


def write_feature_map(path: str | Path, values: np.ndarray):
    values = np.asarray(values)
    if values.ndim == 2:
        channels = 1
    elif values.ndim == 3 and values.shape[2] == 2:
        channels = 2
    else:
        raise ValueError(f"expected (H, W) or (H, W, 2) values, got {values.shape}")
    if not np.isfinite(values).all():
        raise ValueError("feature map values must all be finite")
    height, width = values.shape[:2]
    data = MAGIC + _HEADER.pack(VERSION, width, height, channels) + values.astype("<f4").tobytes()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
