"""Heatmap rendering for saliency maps."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

__all__ = ["render_heatmap"]

# Anchor colors of the perceptually ordered viridis ramp; interpolated
# to a 256-entry lookup table below.
_ANCHORS = np.array(
    [
        (68, 1, 84),
        (71, 44, 122),
        (59, 81, 139),
        (44, 113, 142),
        (33, 144, 141),
        (39, 173, 129),
        (92, 200, 99),
        (170, 220, 50),
        (253, 231, 37),
    ],
    dtype=float,
)


def _build_lut() -> np.ndarray:
    positions = np.linspace(0.0, 1.0, len(_ANCHORS))
    t = np.linspace(0.0, 1.0, 256)
    lut = np.stack(
        [np.interp(t, positions, _ANCHORS[:, c]) for c in range(3)], axis=1
    )
    return np.clip(np.rint(lut), 0, 255).astype(np.uint8)


_LUT = _build_lut()


def render_heatmap(values: np.ndarray, overlay: np.ndarray | None = None) -> bytes:
    """PNG bytes for a [0, 1] map, optionally alpha-blended on a frame.

    The blend is 50/50 with the frame when ``overlay`` (H, W, 3, 0-255
    scale) is given.  Output dimensions always match the input map, and
    the bytes are deterministic for fixed inputs.
    """
    values = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    rgb = _LUT[np.rint(values * 255).astype(int)]
    if overlay is not None:
        overlay = np.asarray(overlay, dtype=float)
        if overlay.shape[:2] != values.shape:
            raise ValueError(
                f"overlay shape {overlay.shape[:2]} does not match map {values.shape}"
            )
        rgb = np.clip(np.rint(0.5 * rgb + 0.5 * overlay), 0, 255).astype(np.uint8)
    buffer = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buffer, format="PNG")
    return buffer.getvalue()
