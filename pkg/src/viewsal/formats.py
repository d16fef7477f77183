"""On-disk formats: feature-map binaries, PNG frames, config files,
run manifests.

Feature maps and flow fields travel between tools as a small binary
format: the 4-byte magic ``VBFM`` followed by a 14-byte header
(version u16, width u32, height u32, channels u32, all little-endian)
and width*height*channels IEEE-754 float32 values, row-major with
channels interleaved.  channels=1 is a scalar map, channels=2 a flow
field (u then v per pixel).

Every write in the package goes through :func:`atomic_write_bytes`
(write to a temp file, then rename), so an interrupted run never leaves
a partially written output behind.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "FeatureMapError",
    "write_feature_map",
    "read_feature_map",
    "atomic_write_bytes",
    "read_frame_png",
    "read_mask_png",
    "parse_config_file",
    "sha256_file",
    "write_manifest",
]

MAGIC = b"VBFM"
VERSION = 1
_HEADER = struct.Struct("<HIII")  # version, width, height, channels
HEADER_SIZE = len(MAGIC) + _HEADER.size


class FeatureMapError(ValueError):
    """Raised when a feature-map file fails validation."""


def atomic_write_bytes(path: str | Path, data: bytes):
    """Write bytes via a temp file + rename in the destination directory."""
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


def write_feature_map(path: str | Path, values: np.ndarray):
    """Serialize an (H, W) map or (H, W, 2) flow field."""
    values = np.asarray(values)
    if values.ndim == 2:
        channels = 1
    elif values.ndim == 3 and values.shape[2] in (1, 2):
        channels = values.shape[2]
    else:
        raise ValueError(f"expected (H, W) or (H, W, 2) values, got {values.shape}")
    if not np.isfinite(values).all():
        raise ValueError("feature map values must all be finite")
    height, width = values.shape[:2]
    payload = values.astype("<f4").tobytes()
    data = MAGIC + _HEADER.pack(VERSION, width, height, channels) + payload
    atomic_write_bytes(path, data)


def read_feature_map(path: str | Path, expect: str | None = None) -> np.ndarray:
    """Load and validate a feature-map file.

    Returns an (H, W) array for channels=1 or an (H, W, 2) array for
    channels=2.  ``expect`` may be "feature" or "flow" to also enforce
    the channel kind.  Malformed files raise :class:`FeatureMapError`
    naming the offending byte offset or length.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < HEADER_SIZE:
        raise FeatureMapError(
            f"{path}: truncated header, expected at least {HEADER_SIZE} bytes, "
            f"got {len(data)}"
        )
    if data[:4] != MAGIC:
        raise FeatureMapError(f"{path}: bad magic {data[:4]!r} at byte 0")
    version, width, height, channels = _HEADER.unpack_from(data, 4)
    if version != VERSION:
        raise FeatureMapError(f"{path}: unsupported version {version} at byte 4")
    if channels not in (1, 2):
        raise FeatureMapError(f"{path}: unsupported channel count {channels} at byte 14")
    expected_len = HEADER_SIZE + 4 * width * height * channels
    if len(data) != expected_len:
        raise FeatureMapError(
            f"{path}: expected {expected_len} bytes for {width}x{height}x{channels}, "
            f"got {len(data)}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=HEADER_SIZE).astype(float)
    values = values.reshape(height, width, channels)
    if not np.isfinite(values).all():
        raise FeatureMapError(f"{path}: payload contains non-finite values")
    if expect == "feature" and channels != 1:
        raise FeatureMapError(
            f"{path}: expected a 1-channel feature map, found {channels} channels"
        )
    if expect == "flow" and channels != 2:
        raise FeatureMapError(
            f"{path}: expected a 2-channel flow field, found {channels} channels"
        )
    return values[..., 0] if channels == 1 else values


def read_frame_png(path: str | Path) -> np.ndarray:
    """8-bit PNG frame as an (H, W, 3) float array on the 0-255 scale."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return np.asarray(rgb, dtype=float)


def read_mask_png(path: str | Path) -> np.ndarray:
    """Single-channel mask PNG as a binary (H, W) float array."""
    with Image.open(path) as img:
        gray = np.asarray(img.convert("L"), dtype=float)
    return (gray > 0).astype(float)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    result: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            result[key.strip()] = value.strip()
    return result


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    path: str | Path,
    config: dict,
    input_checksums: dict[str, str],
    outputs: dict[str, str],
    version: str,
):
    """Reproducibility record: rerunning with the recorded config on
    inputs matching the checksums yields byte-identical outputs."""
    manifest = {
        "tool_version": version,
        "config": config,
        "inputs": dict(sorted(input_checksums.items())),
        "outputs": dict(sorted(outputs.items())),
    }
    atomic_write_bytes(path, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
