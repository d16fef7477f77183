"""Batch export of per-(frame, block) feature files.

Outputs land in the directory layout the prediction pipeline reads with
its external-file feature sources:

    <out_dir>/spatial/f{frame}_b{block}.vbfm   channels=1, values in [0, 1]
    <out_dir>/flow/f{frame}_b{block}.vbfm      channels=2, pixels/frame-step

Frames are sampled at ``frame_stride``; flow is computed between
consecutive sampled frames, and the first sampled frame gets a zero
field (it has no predecessor, matching the pipeline's convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import extract_block, read_targets_csv
from .networks import load_network, run_flow, run_spatial
from .vbfm import write_feature_map

__all__ = ["AdapterConfig", "export_spatial_features", "export_flow"]


@dataclass(frozen=True)
class AdapterConfig:
    frames_dir: str
    targets_csv: str
    out_dir: str
    spatial_model: str | None = None
    flow_model: str | None = None
    block_resolution: int = 224
    fov: float = math.pi / 3.0
    frame_stride: int = 5
    device: str = "cpu"

    def __post_init__(self):
        if self.block_resolution < 2:
            raise ValueError("block_resolution must be >= 2")
        if self.frame_stride < 1:
            raise ValueError("frame_stride must be >= 1")
        if not (0.0 < self.fov < math.pi):
            raise ValueError("fov must lie in (0, pi)")


def _sampled_frames(config: AdapterConfig) -> list[int]:
    frames_dir = Path(config.frames_dir)
    indices = sorted(
        int(p.stem.split("_")[1])
        for p in frames_dir.glob("frame_*.png")
        if p.stem.split("_")[1].isdigit()
    )
    if not indices:
        raise FileNotFoundError(f"no frame_*.png files under {frames_dir}")
    last = indices[-1]
    sampled = list(range(0, last + 1, config.frame_stride))
    missing = [i for i in sampled if i not in set(indices)]
    if missing:
        raise FileNotFoundError(
            f"missing sampled frames under {frames_dir}: {missing}"
        )
    return sampled


def _load_frame(config: AdapterConfig, index: int) -> np.ndarray:
    path = Path(config.frames_dir) / f"frame_{index:06d}.png"
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=float)


def _blocks_of(config: AdapterConfig, frame: np.ndarray, targets) -> list[np.ndarray]:
    return [
        extract_block(frame, phi, theta, config.fov, config.block_resolution)
        for phi, theta in targets
    ]


def export_spatial_features(config: AdapterConfig) -> list[Path]:
    """One spatial feature file per (sampled frame, block)."""
    if not config.spatial_model:
        raise ValueError("config.spatial_model is required for a spatial export")
    module = load_network(config.spatial_model, "spatial")
    targets = read_targets_csv(config.targets_csv)
    written = []
    for frame_index in _sampled_frames(config):
        frame = _load_frame(config, frame_index)
        for block_index, block in enumerate(_blocks_of(config, frame, targets)):
            values = run_spatial(module, block, config.block_resolution, config.device)
            path = Path(config.out_dir) / "spatial" / f"f{frame_index}_b{block_index}.vbfm"
            write_feature_map(path, values.astype(np.float32))
            written.append(path)
    return written


def export_flow(config: AdapterConfig) -> list[Path]:
    """One flow file per (sampled frame, block); frame 0 is all zeros."""
    if not config.flow_model:
        raise ValueError("config.flow_model is required for a flow export")
    module = load_network(config.flow_model, "flow")
    targets = read_targets_csv(config.targets_csv)
    res = config.block_resolution
    written = []
    prev_blocks = None
    for frame_index in _sampled_frames(config):
        frame = _load_frame(config, frame_index)
        blocks = _blocks_of(config, frame, targets)
        for block_index, block in enumerate(blocks):
            if prev_blocks is None:
                values = np.zeros((res, res, 2))
            else:
                values = run_flow(module, prev_blocks[block_index], block, res, config.device)
            path = Path(config.out_dir) / "flow" / f"f{frame_index}_b{block_index}.vbfm"
            write_feature_map(path, values.astype(np.float32))
            written.append(path)
        prev_blocks = blocks
    return written
