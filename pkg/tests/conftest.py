import math
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def equirect_angles(height, width):
    phi = (np.arange(height) + 0.5) * math.pi / height
    theta = (np.arange(width) + 0.5) * 2 * math.pi / width
    return phi, theta


def disk_center_at(frame_index, speed=math.radians(3.0), theta0=1.0):
    """Disk drifts along the equator at ``speed`` radians per frame."""
    return math.pi / 2, (theta0 + speed * frame_index) % (2 * math.pi)


def _speckle_field(height, width, seed=0):
    """Blobby texture (coarse noise upsampled 8x) that the flow solver
    can track; cached per size."""
    key = (height, width, seed)
    cached = _speckle_field._cache.get(key)
    if cached is None:
        rng = np.random.default_rng(seed)
        coarse = rng.uniform(140, 255, (height // 8 + 2, width // 8 + 2))
        rows = np.arange(height) / 8.0
        cols = np.arange(width) / 8.0
        r0 = rows.astype(int)
        c0 = cols.astype(int)
        fr = (rows - r0)[:, None]
        fc = (cols - c0)[None, :]
        top = coarse[np.ix_(r0, c0)] * (1 - fc) + coarse[np.ix_(r0, c0 + 1)] * fc
        bot = coarse[np.ix_(r0 + 1, c0)] * (1 - fc) + coarse[np.ix_(r0 + 1, c0 + 1)] * fc
        cached = top * (1 - fr) + bot * fr
        _speckle_field._cache[key] = cached
    return cached


_speckle_field._cache = {}


def disk_frame(height, width, frame_index, radius=math.radians(12.0), noisy=False, seed=0):
    """Gray panorama with one bright disk; noisy=True textures the disk
    (texture translates with the disk, so its motion is trackable and
    the luma histogram carries entropy)."""
    phi, theta = equirect_angles(height, width)
    disk_phi, disk_theta = disk_center_at(frame_index)
    cos_g = (
        math.cos(disk_phi) * np.cos(phi)[:, None]
        + math.sin(disk_phi) * np.sin(phi)[:, None] * np.cos(theta[None, :] - disk_theta)
    )
    inside = cos_g >= math.cos(radius)
    frame = np.full((height, width), 110.0)
    if noisy:
        # unwrapped drift so the texture keeps translating with the disk
        shift = round(math.radians(3.0) * frame_index / (2 * math.pi / width))
        speckle = np.roll(_speckle_field(height, width, seed), shift, axis=1)
        frame[inside] = speckle[inside]
    else:
        frame[inside] = 235.0
    return np.repeat(frame[:, :, None], 3, axis=2)


def write_video(
    directory: Path,
    n_frames: int,
    height=128,
    width=256,
    noisy=False,
    mask_stride=None,
    mask_halfwidth=math.radians(20.0),
):
    """Write a numbered PNG sequence (and optional per-frame masks that
    cover a box around the disk)."""
    frames_dir = directory / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    masks_dir = None
    if mask_stride is not None:
        masks_dir = directory / "masks"
        masks_dir.mkdir(parents=True, exist_ok=True)
    phi, theta = equirect_angles(height, width)
    for index in range(n_frames):
        frame = disk_frame(height, width, index, noisy=noisy)
        Image.fromarray(frame.astype(np.uint8)).save(
            frames_dir / f"frame_{index:06d}.png"
        )
        if masks_dir is not None and index % mask_stride == 0:
            disk_phi, disk_theta = disk_center_at(index)
            dphi = np.abs(phi - disk_phi)
            dtheta = np.abs(theta - disk_theta)
            dtheta = np.minimum(dtheta, 2 * math.pi - dtheta)
            mask = (
                (dphi[:, None] < mask_halfwidth) & (dtheta[None, :] < mask_halfwidth)
            ).astype(np.uint8) * 255
            Image.fromarray(mask, mode="L").save(masks_dir / f"mask_{index:06d}.png")
    return frames_dir, masks_dir


@pytest.fixture(scope="session")
def disk_video(tmp_path_factory):
    """30-frame plain disk video shared by the pipeline tests."""
    root = tmp_path_factory.mktemp("disk_video")
    frames_dir, _ = write_video(root, 30)
    return frames_dir
