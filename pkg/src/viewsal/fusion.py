"""Linear [0,1] normalization and pixel-wise spatio-temporal fusion."""

from __future__ import annotations

from enum import Enum

import numpy as np

__all__ = ["FusionStrategy", "normalize", "fuse"]


class FusionStrategy(Enum):
    """How the spatial and temporal maps are combined pixel-wise."""

    PRODUCT = "product"
    MAX = "max"
    SUM = "sum"

    @classmethod
    def from_string(cls, name: str) -> "FusionStrategy":
        try:
            return cls(name.lower())
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown fusion strategy {name!r} (choices: {choices})")


def normalize(values: np.ndarray) -> np.ndarray:
    """Rescale a map linearly to [0, 1].

    Constant maps (max == min) become all zeros: a featureless map should
    contribute no saliency rather than a uniform 0.5 or a 0/0 NaN.
    """
    values = np.asarray(values, dtype=float)
    vmin = values.min()
    vmax = values.max()
    if vmax == vmin:
        return np.zeros_like(values)
    return (values - vmin) / (vmax - vmin)


def fuse(
    s_spatial: np.ndarray, s_temporal: np.ndarray, strategy: FusionStrategy
) -> np.ndarray:
    """Normalize both inputs, combine pixel-wise, normalize the result."""
    s_spatial = np.asarray(s_spatial, dtype=float)
    s_temporal = np.asarray(s_temporal, dtype=float)
    if s_spatial.shape != s_temporal.shape:
        raise ValueError(
            f"fusion inputs must share a shape, got {s_spatial.shape} vs {s_temporal.shape}"
        )
    a = normalize(s_spatial)
    b = normalize(s_temporal)
    if strategy is FusionStrategy.PRODUCT:
        combined = a * b
    elif strategy is FusionStrategy.MAX:
        combined = np.maximum(a, b)
    elif strategy is FusionStrategy.SUM:
        combined = a + b
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unhandled strategy {strategy}")
    return normalize(combined)
