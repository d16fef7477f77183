"""Viewport block extraction for the export pipeline.

Self-contained gnomonic sampler so the adapter only talks to the main
pipeline through files.  Conventions match the pipeline's: phi is the
polar angle (0 = north pole), theta the azimuth in [0, 2*pi), block "up"
follows the local meridian, equirect pixel centers at
(row + 0.5) / H * pi and (col + 0.5) / W * 2*pi.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

__all__ = ["read_targets_csv", "block_sampling_grid", "extract_block"]


def read_targets_csv(path: str | Path) -> list[tuple[float, float]]:
    """Load (phi, theta) rows as dumped by the pipeline's targets tool."""
    targets = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValueError(f"{path}:{line_no}: expected 'phi,theta', got {line!r}")
        targets.append((float(parts[0]), float(parts[1])))
    if not targets:
        raise ValueError(f"{path}: no targets found")
    return targets


def block_sampling_grid(
    phi0: float, theta0: float, fov: float, resolution: int, height: int, width: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fractional equirect pixel coordinates for each block pixel."""
    forward = np.array(
        [math.sin(phi0) * math.cos(theta0), math.sin(phi0) * math.sin(theta0), math.cos(phi0)]
    )
    up = np.array(
        [-math.cos(phi0) * math.cos(theta0), -math.cos(phi0) * math.sin(theta0), math.sin(phi0)]
    )
    right = np.array([-math.sin(theta0), math.cos(theta0), 0.0])

    ndc = (np.arange(resolution) + 0.5) / resolution * 2.0 - 1.0
    tan_half = math.tan(fov / 2.0)
    x = ndc[np.newaxis, :] * tan_half
    y = -ndc[:, np.newaxis] * tan_half
    dirs = forward + x[..., np.newaxis] * right + y[..., np.newaxis] * up
    norm = np.linalg.norm(dirs, axis=-1)
    phi = np.arccos(np.clip(dirs[..., 2] / norm, -1.0, 1.0))
    theta = np.arctan2(dirs[..., 1], dirs[..., 0]) % (2.0 * math.pi)

    row_f = phi / math.pi * height - 0.5
    col_f = theta / (2.0 * math.pi) * width - 0.5
    return row_f, col_f


def extract_block(
    frame: np.ndarray, phi0: float, theta0: float, fov: float, resolution: int
) -> np.ndarray:
    """Bilinear gnomonic sample of an (H, W, C) frame; wraps longitude,
    clamps the pole rows."""
    height, width = frame.shape[:2]
    row_f, col_f = block_sampling_grid(phi0, theta0, fov, resolution, height, width)
    r0 = np.floor(row_f).astype(int)
    c0 = np.floor(col_f).astype(int)
    fr = (row_f - r0)[..., np.newaxis]
    fc = (col_f - c0)[..., np.newaxis]
    r0c = np.clip(r0, 0, height - 1)
    r1c = np.clip(r0 + 1, 0, height - 1)
    c0m = c0 % width
    c1m = (c0 + 1) % width
    return (
        frame[r0c, c0m] * (1 - fr) * (1 - fc)
        + frame[r0c, c1m] * (1 - fr) * fc
        + frame[r1c, c0m] * fr * (1 - fc)
        + frame[r1c, c1m] * fr * fc
    )
