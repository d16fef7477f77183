import math
import subprocess
import sys

import numpy as np
import pytest
import torch
from PIL import Image
from torch import nn


class SpatialStub(nn.Module):
    """Stand-in saliency backbone: tiny seeded conv stack that emits a
    half-resolution single-channel map (exercising the resize path).
    Reflection padding keeps constant inputs exactly constant."""

    def __init__(self):
        super().__init__()
        torch.manual_seed(1234)
        self.conv1 = nn.Conv2d(3, 8, 5, stride=2, padding=2, padding_mode="reflect")
        self.conv2 = nn.Conv2d(8, 1, 3, padding=1, padding_mode="reflect")

    def forward(self, x):
        return self.conv2(torch.relu(self.conv1(x)))


class GlobalTranslationFlow(nn.Module):
    """Stand-in flow network: solves the global 2x2 least-squares
    translation from image gradients (one (u, v) for the whole block)."""

    def forward(self, x):
        prev = x[:, :3].mean(dim=1)
        nxt = x[:, 3:].mean(dim=1)
        ix = torch.zeros_like(prev)
        iy = torch.zeros_like(prev)
        ix[:, :, 1:-1] = (prev[:, :, 2:] - prev[:, :, :-2]) / 2.0
        iy[:, 1:-1, :] = (prev[:, 2:, :] - prev[:, :-2, :]) / 2.0
        it = nxt - prev
        a11 = (ix * ix).sum()
        a12 = (ix * iy).sum()
        a22 = (iy * iy).sum()
        b1 = -(ix * it).sum()
        b2 = -(iy * it).sum()
        det = a11 * a22 - a12 * a12
        # textureless pair: singular normal equations, no motion evidence
        safe = torch.clamp(det, min=1e-12)
        u = torch.where(det > 1e-12, (a22 * b1 - a12 * b2) / safe, torch.zeros_like(det))
        v = torch.where(det > 1e-12, (a11 * b2 - a12 * b1) / safe, torch.zeros_like(det))
        out = torch.zeros(
            x.shape[0], 2, x.shape[2], x.shape[3], dtype=x.dtype, device=x.device
        )
        out[:, 0] = u
        out[:, 1] = v
        return out


@pytest.fixture(scope="session")
def spatial_model_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("models") / "spatial.pt"
    torch.jit.script(SpatialStub().eval()).save(str(path))
    return path


@pytest.fixture(scope="session")
def flow_model_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("models") / "flow.pt"
    torch.jit.script(GlobalTranslationFlow().eval()).save(str(path))
    return path


def rolling_pano_video(directory, n_frames, height=128, width=256, px_per_frame=1):
    """Smooth texture that cyclically translates ``px_per_frame`` pixels
    per frame along the equator (integer wavenumbers, so the roll is an
    exact translation with no seam)."""
    directory.mkdir(parents=True, exist_ok=True)
    phi = (np.arange(height) + 0.5) * math.pi / height
    theta = (np.arange(width) + 0.5) * 2 * math.pi / width
    base = (
        128.0
        + 50.0 * np.sin(11 * theta)[None, :] * np.sin(phi)[:, None]
        + 40.0 * np.sin(23 * theta + 1.0)[None, :] * np.sin(phi)[:, None]
        + 25.0 * np.cos(5 * phi)[:, None]
    )
    for index in range(n_frames):
        frame = np.roll(base, px_per_frame * index, axis=1)
        rgb = np.repeat(frame[:, :, None], 3, axis=2).astype(np.uint8)
        Image.fromarray(rgb).save(directory / f"frame_{index:06d}.png")
    return directory


def dump_targets(path, n):
    """Generate the block list through the prediction pipeline's CLI
    (the file interface the adapter is specified against)."""
    subprocess.run(
        [sys.executable, "-m", "viewsal", "targets", "--n", str(n), "--out", str(path)],
        check=True,
        capture_output=True,
    )
    return path
