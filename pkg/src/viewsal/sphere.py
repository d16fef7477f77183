"""Spherical geometry: target sampling, geodesics, viewport extraction,
and on-sphere Gaussian smoothing.

Conventions shared by the whole package:
  - phi is the polar angle in radians, 0 at the north pole, pi at the
    south pole; theta is the azimuth in radians, normalized to [0, 2*pi).
  - Unit vectors: x = sin(phi)*cos(theta), y = sin(phi)*sin(theta),
    z = cos(phi).
  - Equirectangular maps are plain (H, W) float arrays (W = 2*H for real
    panoramas), row 0 at the north pole.  Pixel centers sit at
    phi = (row + 0.5) * pi / H and theta = (col + 0.5) * 2*pi / W.
  - All angles are radians; degrees appear only at the CLI boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "GOLDEN_ANGLE",
    "SphereCoord",
    "ViewportSpec",
    "BlockImage",
    "BlockFeatureMap",
    "generate_targets",
    "geodesic_distance",
    "geodesic_distance_arrays",
    "sphere_to_vector",
    "vector_to_sphere",
    "extract_block",
    "reproject_block",
    "SphericalGaussian",
    "spherical_gaussian_filter",
]

TWO_PI = 2.0 * math.pi

# Golden-angle increment for the spiral lattice: 2*pi * (1 - 1/GR) with
# GR the golden ratio.  Successive azimuths land maximally far apart.
GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
GOLDEN_ANGLE = TWO_PI * (1.0 - 1.0 / GOLDEN_RATIO)


@dataclass(frozen=True)
class SphereCoord:
    """A point on the unit sphere, (polar, azimuth) in radians."""

    phi: float
    theta: float

    def __post_init__(self):
        if not (0.0 <= self.phi <= math.pi):
            raise ValueError(f"phi must lie in [0, pi], got {self.phi}")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)
        object.__setattr__(self, "phi", float(self.phi))

    def to_vector(self) -> np.ndarray:
        """Unit 3-vector for this point."""
        sp = math.sin(self.phi)
        return np.array(
            [sp * math.cos(self.theta), sp * math.sin(self.theta), math.cos(self.phi)]
        )

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "SphereCoord":
        """Back-convert a 3-vector (not necessarily unit length)."""
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("zero vector has no direction")
        phi = math.acos(min(1.0, max(-1.0, v[2] / norm)))
        theta = math.atan2(v[1], v[0])
        return cls(phi, theta)


@dataclass(frozen=True)
class ViewportSpec:
    """Square view frustum centered at a sphere point.

    fov is the full field of view of the frustum in radians (the block
    spans [-fov/2, fov/2] horizontally and vertically); resolution is the
    number of pixels per side.
    """

    center: SphereCoord
    fov: float = math.pi / 3.0
    resolution: int = 224

    def __post_init__(self):
        if not (0.0 < self.fov < math.pi):
            raise ValueError(f"fov must lie in (0, pi), got {self.fov}")
        if self.resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {self.resolution}")


@dataclass
class BlockImage:
    """Viewport pixels sampled from a panorama; (R, R) or (R, R, C) array."""

    spec: ViewportSpec
    pixels: np.ndarray


@dataclass
class BlockFeatureMap:
    """Nonnegative per-pixel feature values in one viewport, (R, R) array."""

    spec: ViewportSpec
    values: np.ndarray


def generate_targets(n: int, pole_margin: float = 0.0) -> list[SphereCoord]:
    """Evenly distributed viewport centers on the sphere.

    Golden-angle spiral: theta_i = i * GOLDEN_ANGLE mod 2*pi and
    phi_i = arccos(1 - 2*i/n) for i = 1..n, which makes the point count
    in any latitude band proportional to the band's area.  The index
    range runs through i = n, so the south pole is included; pass a
    positive ``pole_margin`` (radians) to clamp phi away from the exact
    poles when downstream code cannot tolerate sin(phi) = 0.
    """
    if n < 1:
        raise ValueError(f"target count must be >= 1, got {n}")
    i = np.arange(1, n + 1, dtype=float)
    phi = np.arccos(np.clip(1.0 - 2.0 * i / n, -1.0, 1.0))
    if pole_margin > 0.0:
        phi = np.clip(phi, pole_margin, math.pi - pole_margin)
    theta = (i * GOLDEN_ANGLE) % TWO_PI
    return [SphereCoord(p, t) for p, t in zip(phi, theta)]


def sphere_to_vector(phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Stack of unit vectors, shape (..., 3), for angle arrays."""
    sp = np.sin(phi)
    return np.stack([sp * np.cos(theta), sp * np.sin(theta), np.cos(phi)], axis=-1)


def vector_to_sphere(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(phi, theta) arrays for a (..., 3) stack of direction vectors."""
    norm = np.linalg.norm(v, axis=-1)
    phi = np.arccos(np.clip(v[..., 2] / norm, -1.0, 1.0))
    theta = np.arctan2(v[..., 1], v[..., 0]) % TWO_PI
    return phi, theta


def geodesic_distance_arrays(phi1, theta1, phi2, theta2) -> np.ndarray:
    """Great-circle distance in radians, broadcasting over angle arrays.

    Uses atan2 of the cross/dot pair, which stays accurate for both tiny
    and near-antipodal separations (arccos alone loses ~8 digits there).
    """
    a = sphere_to_vector(np.asarray(phi1, dtype=float), np.asarray(theta1, dtype=float))
    b = sphere_to_vector(np.asarray(phi2, dtype=float), np.asarray(theta2, dtype=float))
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)


def geodesic_distance(a: SphereCoord, b: SphereCoord) -> float:
    """Great-circle distance between two sphere points, in [0, pi]."""
    return float(geodesic_distance_arrays(a.phi, a.theta, b.phi, b.theta))


# ---------------------------------------------------------------------------
# Gnomonic (perspective) viewport extraction


def _viewport_frame(center: SphereCoord) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right/up/forward unit vectors of the viewport tangent frame.

    "Up" follows the local meridian toward the north pole, so blocks are
    rendered the way an upright viewer would see them.  At the exact
    poles the meridian direction is taken from the stored azimuth, which
    keeps the frame deterministic.
    """
    phi, theta = center.phi, center.theta
    forward = center.to_vector()
    up = np.array(
        [-math.cos(phi) * math.cos(theta), -math.cos(phi) * math.sin(theta), math.sin(phi)]
    )
    right = np.array([-math.sin(theta), math.cos(theta), 0.0])
    return right, up, forward


@lru_cache(maxsize=128)
def _viewport_grid(spec: ViewportSpec, height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Fractional panorama pixel coordinates for every block pixel.

    Returns (row_f, col_f) float32 arrays of shape (R, R); cached because
    the pipeline reuses the same viewport grid for every frame.
    """
    res = spec.resolution
    right, up, forward = _viewport_frame(spec.center)
    tan_half = math.tan(spec.fov / 2.0)

    ndc = (np.arange(res, dtype=float) + 0.5) / res * 2.0 - 1.0
    x = ndc[np.newaxis, :] * tan_half          # columns: left -> right
    y = -ndc[:, np.newaxis] * tan_half         # rows: top -> bottom

    dirs = (
        forward[np.newaxis, np.newaxis, :]
        + x[..., np.newaxis] * right
        + y[..., np.newaxis] * up
    )
    phi, theta = vector_to_sphere(dirs)

    row_f = (phi / math.pi) * height - 0.5
    col_f = (theta / TWO_PI) * width - 0.5
    grids = (row_f.astype(np.float32), col_f.astype(np.float32))
    for g in grids:
        g.flags.writeable = False
    return grids


def _bilinear_gather(values: np.ndarray, row_f: np.ndarray, col_f: np.ndarray) -> np.ndarray:
    """Bilinear sample with longitude wrap-around and pole row clamping."""
    height, width = values.shape[:2]
    r0 = np.floor(row_f).astype(np.int64)
    c0 = np.floor(col_f).astype(np.int64)
    fr = (row_f - r0).astype(float)
    fc = (col_f - c0).astype(float)

    r0c = np.clip(r0, 0, height - 1)
    r1c = np.clip(r0 + 1, 0, height - 1)
    c0m = c0 % width
    c1m = (c0 + 1) % width

    if values.ndim == 3:
        fr = fr[..., np.newaxis]
        fc = fc[..., np.newaxis]
    v00 = values[r0c, c0m]
    v01 = values[r0c, c1m]
    v10 = values[r1c, c0m]
    v11 = values[r1c, c1m]
    return (
        v00 * (1.0 - fr) * (1.0 - fc)
        + v01 * (1.0 - fr) * fc
        + v10 * fr * (1.0 - fc)
        + v11 * fr * fc
    )


def extract_block(pano: np.ndarray, spec: ViewportSpec) -> BlockImage:
    """Render the gnomonic viewport of ``spec`` from an equirect panorama.

    Accepts (H, W) scalar maps or (H, W, C) frames; every ray through the
    frustum is valid, so there are no edge cases beyond wrap and clamp.
    """
    pano = np.asarray(pano, dtype=float)
    row_f, col_f = _viewport_grid(spec, pano.shape[0], pano.shape[1])
    return BlockImage(spec=spec, pixels=_bilinear_gather(pano, row_f, col_f))


def reproject_block(
    block_map: BlockFeatureMap, pano_shape: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Splat a block feature map back onto the equirectangular grid.

    Each block pixel deposits its value onto the four surrounding
    panorama pixels with bilinear weights (the exact adjoint of
    extraction).  Returns ``(splat, coverage)``; dividing splat by
    coverage where coverage > 0 recovers per-pixel values, which is left
    to the caller so mass-style and value-style uses both work.
    """
    height, width = pano_shape
    row_f, col_f = _viewport_grid(block_map.spec, height, width)
    values = np.asarray(block_map.values, dtype=float).ravel()

    r0 = np.floor(row_f).astype(np.int64).ravel()
    c0 = np.floor(col_f).astype(np.int64).ravel()
    fr = np.asarray(row_f, dtype=float).ravel() - r0
    fc = np.asarray(col_f, dtype=float).ravel() - c0

    r0c = np.clip(r0, 0, height - 1)
    r1c = np.clip(r0 + 1, 0, height - 1)
    c0m = c0 % width
    c1m = (c0 + 1) % width

    splat = np.zeros(height * width)
    coverage = np.zeros(height * width)
    for rows, cols, w in (
        (r0c, c0m, (1.0 - fr) * (1.0 - fc)),
        (r0c, c1m, (1.0 - fr) * fc),
        (r1c, c0m, fr * (1.0 - fc)),
        (r1c, c1m, fr * fc),
    ):
        flat = rows * width + cols
        splat += np.bincount(flat, weights=w * values, minlength=height * width)
        coverage += np.bincount(flat, weights=w, minlength=height * width)
    return splat.reshape(pano_shape), coverage.reshape(pano_shape)


# ---------------------------------------------------------------------------
# Geodesic Gaussian smoothing on the equirectangular grid


class SphericalGaussian:
    """Gaussian smoothing operator with geodesic distances on the sphere.

    The kernel weight between two pixels is exp(-g^2 / (2 sigma^2)) with
    g their great-circle distance, truncated at ``truncate * sigma``.
    Because the weight between two rows depends only on the column
    offset, each output row is a circular convolution over a small set
    of input rows, evaluated with FFTs.

    The raw kernel is symmetrically rescaled (one scale factor per
    latitude row, computed by a Sinkhorn fixed point) so the discrete
    operator is doubly stochastic: constant maps pass through unchanged
    and the plain pixel sum is preserved, both to ~1e-12.
    """

    _SINKHORN_TOL = 1e-13
    _SINKHORN_MAX_ITERS = 100_000

    def __init__(self, height: int, width: int, sigma: float, truncate: float = 3.0):
        if sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.height = int(height)
        self.width = int(width)
        self.sigma = float(sigma)
        self.truncate = float(truncate)
        self.radius = self.sigma * self.truncate

        self._phi = (np.arange(self.height) + 0.5) * math.pi / self.height
        dtheta = (np.arange(self.width) * TWO_PI / self.width)
        self._cos_dtheta = np.cos(dtheta)
        self._sin_dtheta = np.sin(dtheta)

        # Row-aggregated kernel mass, used to solve for the per-row scale
        # factors; stencil FFTs are cached when they fit in memory.
        row_sums = np.zeros((self.height, self.height))
        self._rows: list[np.ndarray] = []
        cache_elems = 0
        for r0 in range(self.height):
            rows, weights = self._stencil(r0)
            self._rows.append(rows)
            row_sums[r0, rows] = weights.sum(axis=1)
            cache_elems += weights.size
        self._scale = self._sinkhorn(row_sums)

        self._fft_cache: list[np.ndarray] | None = None
        if cache_elems <= 8_000_000:
            self._fft_cache = [
                np.fft.rfft(self._stencil(r0)[1], axis=1) for r0 in range(self.height)
            ]

    def _stencil(self, r0: int) -> tuple[np.ndarray, np.ndarray]:
        """Input rows within reach of output row r0 and their kernel
        weights per circular column offset, shape (n_rows, W)."""
        phi0 = self._phi[r0]
        # Minimum geodesic distance to a row is attained along the same
        # meridian or straight across a pole.
        min_dist = np.minimum(
            np.abs(self._phi - phi0),
            np.minimum(self._phi + phi0, TWO_PI - self._phi - phi0),
        )
        rows = np.nonzero(min_dist <= self.radius)[0]
        phi = self._phi[rows][:, np.newaxis]

        cos_d = self._cos_dtheta[np.newaxis, :]
        sin_d = self._sin_dtheta[np.newaxis, :]
        dot = math.cos(phi0) * np.cos(phi) + math.sin(phi0) * np.sin(phi) * cos_d
        cx = -math.cos(phi0) * np.sin(phi) * sin_d
        cy = math.cos(phi0) * np.sin(phi) * cos_d - math.sin(phi0) * np.cos(phi)
        cz = math.sin(phi0) * np.sin(phi) * sin_d
        g = np.arctan2(np.sqrt(cx * cx + cy * cy + cz * cz), dot)

        weights = np.exp(-(g * g) / (2.0 * self.sigma * self.sigma))
        weights[g > self.radius] = 0.0
        return rows, weights

    def _sinkhorn(self, row_sums: np.ndarray) -> np.ndarray:
        """Per-row scale d with d_i * sum_j R_ij * d_j = 1 for all i."""
        d = 1.0 / np.sqrt(row_sums.sum(axis=1))
        for _ in range(self._SINKHORN_MAX_ITERS):
            q = row_sums @ d
            if np.max(np.abs(d * q - 1.0)) < self._SINKHORN_TOL:
                return d
            d = np.sqrt(d / q)
        raise RuntimeError("row-scale fixed point did not converge")

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Smooth an (H, W) map; pure, input left untouched."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.height, self.width):
            raise ValueError(
                f"map shape {values.shape} does not match operator "
                f"({self.height}, {self.width})"
            )
        spectrum = np.fft.rfft(values, axis=1)
        out = np.empty_like(values)
        for r0 in range(self.height):
            rows = self._rows[r0]
            if self._fft_cache is not None:
                w_hat = self._fft_cache[r0]
            else:
                w_hat = np.fft.rfft(self._stencil(r0)[1], axis=1)
            acc = (w_hat * spectrum[rows] * self._scale[rows, np.newaxis]).sum(axis=0)
            out[r0] = self._scale[r0] * np.fft.irfft(acc, n=self.width)
        return out


_OPERATOR_CACHE: dict[tuple, SphericalGaussian] = {}


def spherical_gaussian_filter(
    values: np.ndarray, sigma: float, truncate: float = 3.0
) -> np.ndarray:
    """Convenience wrapper around a cached :class:`SphericalGaussian`."""
    values = np.asarray(values, dtype=float)
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    key = (values.shape[0], values.shape[1], round(float(sigma), 15), float(truncate))
    op = _OPERATOR_CACHE.get(key)
    if op is None:
        op = SphericalGaussian(values.shape[0], values.shape[1], sigma, truncate)
        if len(_OPERATOR_CACHE) >= 8:
            _OPERATOR_CACHE.pop(next(iter(_OPERATOR_CACHE)))
        _OPERATOR_CACHE[key] = op
    return op.apply(values)
