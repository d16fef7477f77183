"""Gaze-log processing: saccade filtering, fixation maps, ground truth.

Input logs are CSV rows of ``subject_id,frame_index,lat_rad,lon_rad``
with the latitude already expressed as the polar angle in [0, pi] (the
capture side converts headset quaternions upstream).  The same
filtering applies to head traces; nothing here distinguishes the two.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .fusion import normalize
from .sphere import SphereCoord, geodesic_distance_arrays, spherical_gaussian_filter

__all__ = [
    "GazeSample",
    "GazeTrace",
    "read_gaze_csv",
    "traces_by_subject",
    "filter_saccades",
    "build_fixation_map",
    "ground_truth_saliency",
    "packed_saliency",
]

GAZE_CSV_HEADER = ["subject_id", "frame_index", "lat_rad", "lon_rad"]


@dataclass(frozen=True)
class GazeSample:
    subject_id: str
    frame_index: int
    coord: SphereCoord

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")


@dataclass
class GazeTrace:
    """Ordered samples of one subject for one video."""

    subject_id: str
    samples: list[GazeSample]
    filtered: bool = False
    warning: str | None = None

    def __post_init__(self):
        frames = [s.frame_index for s in self.samples]
        if any(b < a for a, b in zip(frames, frames[1:])):
            raise ValueError("trace frame indices must be nondecreasing")


def read_gaze_csv(path: str | Path) -> list[GazeSample]:
    """Parse a gaze log; raises ValueError on a malformed header or row."""
    samples = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != GAZE_CSV_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(GAZE_CSV_HEADER)}, got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{line_no}: expected 4 fields, got {len(row)}")
            subject, frame, lat, lon = row
            samples.append(
                GazeSample(
                    subject_id=subject.strip(),
                    frame_index=int(frame),
                    coord=SphereCoord(float(lat), float(lon)),
                )
            )
    return samples


def traces_by_subject(samples: list[GazeSample]) -> dict[str, GazeTrace]:
    """Group samples into per-subject traces, preserving input order."""
    grouped: dict[str, list[GazeSample]] = {}
    for sample in samples:
        grouped.setdefault(sample.subject_id, []).append(sample)
    return {
        subject: GazeTrace(subject_id=subject, samples=items)
        for subject, items in grouped.items()
    }


def filter_saccades(trace: GazeTrace) -> GazeTrace:
    """Drop samples reached by an outlier-length gaze step.

    The step set X holds the geodesic distances between consecutive
    samples of the trace; a sample is kept when its incoming step lies
    within mean(X) +/- 3*std(X) (inclusive, so a zero-spread trace keeps
    everything).  The first sample has no incoming step and is always
    kept.  Samples are only removed, never reordered.
    """
    if len(trace.samples) < 2:
        return replace(trace, filtered=True, warning="trace has fewer than 2 samples")
    phis = np.array([s.coord.phi for s in trace.samples])
    thetas = np.array([s.coord.theta for s in trace.samples])
    steps = geodesic_distance_arrays(phis[:-1], thetas[:-1], phis[1:], thetas[1:])
    mean = steps.mean()
    std = steps.std()
    keep_step = (steps >= mean - 3.0 * std) & (steps <= mean + 3.0 * std)
    kept = [trace.samples[0]]
    kept.extend(s for s, ok in zip(trace.samples[1:], keep_step) if ok)
    return replace(trace, samples=kept, filtered=True, warning=None)


def build_fixation_map(samples: list[GazeSample], shape: tuple[int, int]) -> np.ndarray:
    """Accumulate fixation counts on the equirectangular grid.

    Each sample increments the pixel bin containing its coordinate
    (longitude wraps); the total count always equals the sample count.
    """
    height, width = shape
    counts = np.zeros(shape, dtype=np.int64)
    for sample in samples:
        row = min(int(sample.coord.phi / np.pi * height), height - 1)
        col = int(sample.coord.theta / (2.0 * np.pi) * width) % width
        counts[row, col] += 1
    return counts


def ground_truth_saliency(fixation_map: np.ndarray, sigma: float) -> np.ndarray:
    """Sphere-smoothed, [0, 1]-normalized version of a fixation map.

    Smoothing runs on the sphere (geodesic kernel), so the result is an
    isotropic bump around each fixation instead of the stretched blobs a
    planar kernel produces near the poles.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    smoothed = spherical_gaussian_filter(np.asarray(fixation_map, dtype=float), sigma)
    return normalize(smoothed)


def packed_saliency(frame_maps: list[np.ndarray]) -> np.ndarray:
    """Per-video map: the normalized sum of all per-frame maps."""
    if not frame_maps:
        raise ValueError("packed saliency needs at least one frame map")
    shapes = {m.shape for m in frame_maps}
    if len(shapes) > 1:
        raise ValueError(f"frame maps must share a shape, got {sorted(shapes)}")
    total = np.zeros(frame_maps[0].shape)
    for m in frame_maps:
        total += np.asarray(m, dtype=float)
    return normalize(total)
