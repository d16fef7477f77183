"""Per-block spatial and temporal feature extraction.

The built-in extractors are classical: center-surround contrast over a
3-level grayscale pyramid for the spatial map, and a variational
(quadratic data + smoothness) flow solver for motion.  Either can be
swapped for externally computed maps via :class:`FeatureSource`, in
which case the pipeline reads per-(frame, block) files instead; the
contract is the same nonnegative per-block map either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.ndimage import gaussian_filter

from .fusion import normalize
from .sphere import BlockFeatureMap, BlockImage, ViewportSpec

__all__ = [
    "FeatureSource",
    "FlowField",
    "FlowParams",
    "to_grayscale",
    "spatial_saliency",
    "optical_flow",
    "temporal_saliency",
]

# ITU-R BT.601 luma weights; fixed so grayscale conversion is bit-stable.
_LUMA = np.array([0.299, 0.587, 0.114])


class FeatureSource(Enum):
    BUILTIN_SPATIAL = "builtin_spatial"
    BUILTIN_FLOW = "builtin_flow"
    EXTERNAL_FILE = "external_file"


@dataclass
class FlowField:
    """Dense per-pixel displacement for one block, in pixels/frame-step."""

    spec: ViewportSpec
    u: np.ndarray
    v: np.ndarray
    energy_trace: np.ndarray | None = None


@dataclass(frozen=True)
class FlowParams:
    """Solver settings for the variational flow estimate.

    smoothness is the regularization weight (images are kept on the 0-255
    scale so the default balances data and smoothness terms the classic
    way); iterations caps the sweep count; tol stops early once the mean
    per-pixel update drops below it.
    """

    smoothness: float = 15.0
    iterations: int = 200
    tol: float = 1e-4
    presmooth_sigma: float = 1.0


def to_grayscale(pixels: np.ndarray) -> np.ndarray:
    """Luma of an (H, W, 3) image; (H, W) inputs pass through."""
    pixels = np.asarray(pixels, dtype=float)
    if pixels.ndim == 2:
        return pixels
    if pixels.ndim == 3 and pixels.shape[2] == 3:
        return pixels @ _LUMA
    raise ValueError(f"expected (H, W) or (H, W, 3) pixels, got {pixels.shape}")


def _resize_bilinear(values: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Deterministic bilinear resize used by the pyramid upsampling."""
    h_in, w_in = values.shape
    h_out, w_out = shape
    rows = np.clip((np.arange(h_out) + 0.5) * h_in / h_out - 0.5, 0, h_in - 1)
    cols = np.clip((np.arange(w_out) + 0.5) * w_in / w_out - 0.5, 0, w_in - 1)
    r0 = np.floor(rows).astype(int)
    c0 = np.floor(cols).astype(int)
    r1 = np.minimum(r0 + 1, h_in - 1)
    c1 = np.minimum(c0 + 1, w_in - 1)
    fr = (rows - r0)[:, np.newaxis]
    fc = (cols - c0)[np.newaxis, :]
    top = values[np.ix_(r0, c0)] * (1 - fc) + values[np.ix_(r0, c1)] * fc
    bot = values[np.ix_(r1, c0)] * (1 - fc) + values[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


def spatial_saliency(block: BlockImage) -> BlockFeatureMap:
    """Center-surround local contrast over a 3-level grayscale pyramid.

    At each level the map is |G_1 * I - G_4 * I| (fine vs coarse local
    mean); levels are upsampled back to block resolution, summed, and
    rescaled to [0, 1].  Deterministic, and identically zero for
    constant blocks.
    """
    gray = to_grayscale(block.pixels)
    res = block.spec.resolution
    acc = np.zeros((res, res))
    level = gray
    for _ in range(3):
        center = gaussian_filter(level, 1.0, mode="nearest")
        surround = gaussian_filter(level, 4.0, mode="nearest")
        contrast = np.abs(center - surround)
        acc += contrast if contrast.shape == (res, res) else _resize_bilinear(contrast, (res, res))
        level = gaussian_filter(level, 1.0, mode="nearest")[::2, ::2]
    return BlockFeatureMap(spec=block.spec, values=normalize(acc))


def _flow_derivatives(prev: np.ndarray, nxt: np.ndarray):
    gx1, gy1 = np.gradient(prev, axis=1), np.gradient(prev, axis=0)
    gx2, gy2 = np.gradient(nxt, axis=1), np.gradient(nxt, axis=0)
    ix = 0.5 * (gx1 + gx2)
    iy = 0.5 * (gy1 + gy2)
    it = nxt - prev
    return ix, iy, it


def _neighbor_sum(a: np.ndarray) -> np.ndarray:
    """Sum of the existing 4-neighbors (no wrap at block borders)."""
    s = np.zeros_like(a)
    s[1:, :] += a[:-1, :]
    s[:-1, :] += a[1:, :]
    s[:, 1:] += a[:, :-1]
    s[:, :-1] += a[:, 1:]
    return s


def _flow_energy(u, v, ix, iy, it, alpha2) -> float:
    data = ix * u + iy * v + it
    smooth = (
        np.sum(np.diff(u, axis=0) ** 2)
        + np.sum(np.diff(u, axis=1) ** 2)
        + np.sum(np.diff(v, axis=0) ** 2)
        + np.sum(np.diff(v, axis=1) ** 2)
    )
    return float(np.sum(data * data) + alpha2 * smooth)


def optical_flow(prev: BlockImage, nxt: BlockImage, params: FlowParams = FlowParams()) -> FlowField:
    """Dense flow from ``prev`` to ``nxt`` by minimizing a quadratic
    data + smoothness energy.

    The solver is red-black Gauss-Seidel: each half-sweep jointly
    minimizes the energy over one checkerboard color's (u, v) pairs in
    closed form, so the recorded per-iteration energy is guaranteed
    non-increasing.  Iteration stops when the mean absolute update falls
    below ``params.tol`` (in pixels) or after ``params.iterations``.
    """
    if prev.spec != nxt.spec:
        raise ValueError("flow inputs must share a viewport spec")
    i1 = to_grayscale(prev.pixels)
    i2 = to_grayscale(nxt.pixels)
    if params.presmooth_sigma > 0:
        i1 = gaussian_filter(i1, params.presmooth_sigma, mode="nearest")
        i2 = gaussian_filter(i2, params.presmooth_sigma, mode="nearest")

    ix, iy, it = _flow_derivatives(i1, i2)
    alpha2 = params.smoothness**2

    h, w = i1.shape
    n_neighbors = np.full((h, w), 4.0)
    n_neighbors[0, :] -= 1.0
    n_neighbors[-1, :] -= 1.0
    n_neighbors[:, 0] -= 1.0
    n_neighbors[:, -1] -= 1.0

    rows, cols = np.indices((h, w))
    color_masks = [(rows + cols) % 2 == 0, (rows + cols) % 2 == 1]

    # Per-pixel 2x2 system coefficients (constant across sweeps).
    a11 = ix * ix + alpha2 * n_neighbors
    a12 = ix * iy
    a22 = iy * iy + alpha2 * n_neighbors
    det = a11 * a22 - a12 * a12

    u = np.zeros((h, w))
    v = np.zeros((h, w))
    energies = [_flow_energy(u, v, ix, iy, it, alpha2)]
    for _ in range(params.iterations):
        u_before = u.copy()
        v_before = v.copy()
        for mask in color_masks:
            su = _neighbor_sum(u)
            sv = _neighbor_sum(v)
            b1 = alpha2 * su - ix * it
            b2 = alpha2 * sv - iy * it
            u_new = (a22 * b1 - a12 * b2) / det
            v_new = (a11 * b2 - a12 * b1) / det
            u[mask] = u_new[mask]
            v[mask] = v_new[mask]
        energies.append(_flow_energy(u, v, ix, iy, it, alpha2))
        if energies[-1] > energies[-2] * (1.0 + 1e-12) + 1e-9:
            raise AssertionError("flow energy increased; solver is inconsistent")
        update = np.mean(np.abs(u - u_before) + np.abs(v - v_before))
        if update < params.tol:
            break
    return FlowField(spec=prev.spec, u=u, v=v, energy_trace=np.array(energies))


def zero_flow(spec: ViewportSpec) -> FlowField:
    """All-zero flow; stands in when a block has no predecessor frame."""
    res = spec.resolution
    return FlowField(spec=spec, u=np.zeros((res, res)), v=np.zeros((res, res)))


def temporal_saliency(flow: FlowField, sigma_px: float = 5.0) -> BlockFeatureMap:
    """Gaussian-smoothed flow magnitude, rescaled to [0, 1].

    Magnitude-based, so it is invariant to a global sign flip of the
    flow, and scaling the flow by any k > 0 leaves the output unchanged.
    """
    if sigma_px <= 0:
        raise ValueError(f"sigma_px must be positive, got {sigma_px}")
    magnitude = np.hypot(flow.u, flow.v)
    smoothed = gaussian_filter(magnitude, sigma_px, mode="nearest")
    return BlockFeatureMap(spec=flow.spec, values=normalize(smoothed))
