"""Soft-decision spatial weighting for augmented viewport blocks.

Overlaid virtual content either directs attention toward its associated
surroundings (complementary) or attracts attention to itself and away
from everything else (adversarial).  Real overlays mix both, so instead
of a hard classification the two type probabilities are estimated from
the motion coherence between the overlay and its environment, and the
per-region weights are the probability-weighted expectation of an
entropy-driven boost/attenuation pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import FlowField, to_grayscale
from .sphere import BlockFeatureMap, BlockImage, ViewportSpec, extract_block

__all__ = [
    "AugTypeModel",
    "BlockPartition",
    "select_augmented_blocks",
    "block_entropy",
    "mean_region_flow",
    "flow_difference",
    "augmentation_probability",
    "augmentation_weights",
    "apply_spatial_weighting",
]

COMPLEMENTARY = "complementary"
ADVERSARIAL = "adversarial"

OVERLAP_THRESHOLD = 0.3
MASK_BINARIZE_THRESHOLD = 0.5


@dataclass(frozen=True)
class AugTypeModel:
    """Priors and kernel parameters for the augmentation-type estimate.

    ``prior`` is the belief about the overlay type before looking at the
    motion evidence.  The kernel is centered at 0 for coherent motion
    (complementary) and at 1 for fully independent motion (adversarial).
    With ``use_density`` the kernel is replaced by the Gaussian density;
    the default unnormalized kernel peaks at 1 so perfectly coherent
    motion under a complementary prior yields probability 1.
    """

    prior: str = ADVERSARIAL
    mu_complementary: float = 0.0
    sigma_complementary: float = 0.85
    mu_adversarial: float = 1.0
    sigma_adversarial: float = 0.85
    use_density: bool = False

    def __post_init__(self):
        if self.prior not in (COMPLEMENTARY, ADVERSARIAL):
            raise ValueError(f"prior must be '{COMPLEMENTARY}' or '{ADVERSARIAL}'")
        if self.sigma_complementary <= 0 or self.sigma_adversarial <= 0:
            raise ValueError("kernel sigmas must be positive")


@dataclass
class BlockPartition:
    """Pixel split of one augmented block into overlay and environment."""

    block_index: int
    aug_pixels: np.ndarray  # boolean (R, R); True = overlay pixel
    overlap_ratio: float

    @property
    def env_pixels(self) -> np.ndarray:
        return ~self.aug_pixels


def select_augmented_blocks(
    blocks: list[BlockImage],
    mask: np.ndarray,
    threshold: float = OVERLAP_THRESHOLD,
) -> list[BlockPartition]:
    """Find blocks whose viewport overlaps the augmented area.

    The panorama-domain mask is projected through each viewport and
    binarized at 0.5; a block qualifies only if the overlay covers
    strictly more than ``threshold`` of its pixels.
    """
    mask = np.asarray(mask, dtype=float)
    partitions = []
    for index, block in enumerate(blocks):
        projected = extract_block(mask, block.spec).pixels
        aug = projected >= MASK_BINARIZE_THRESHOLD
        ratio = float(np.count_nonzero(aug)) / aug.size
        if ratio > threshold:
            partitions.append(
                BlockPartition(block_index=index, aug_pixels=aug, overlap_ratio=ratio)
            )
    return partitions


def block_entropy(block: BlockImage, pixels: np.ndarray) -> float:
    """Shannon entropy (bits) of the 8-bit luma histogram over a region.

    ``pixels`` is a boolean mask over the block; 0*log(0) counts as 0.
    """
    pixels = np.asarray(pixels, dtype=bool)
    if not pixels.any():
        raise ValueError("entropy region must contain at least one pixel")
    luma = to_grayscale(block.pixels)[pixels]
    levels = np.clip(np.rint(luma), 0, 255).astype(np.int64)
    counts = np.bincount(levels, minlength=256)
    p = counts[counts > 0] / levels.size
    return float(-(p * np.log2(p)).sum())


def mean_region_flow(flow: FlowField, pixels: np.ndarray) -> np.ndarray:
    """Arithmetic mean (u, v) over a boolean pixel region."""
    pixels = np.asarray(pixels, dtype=bool)
    if not pixels.any():
        raise ValueError("flow region must contain at least one pixel")
    return np.array([flow.u[pixels].mean(), flow.v[pixels].mean()])


def flow_difference(aug_mean: np.ndarray, env_mean: np.ndarray) -> float:
    """Euclidean norm of the mean-flow difference between the regions."""
    delta = np.asarray(aug_mean, dtype=float) - np.asarray(env_mean, dtype=float)
    return float(np.linalg.norm(delta))


def _kernel(x: float, mu: float, sigma: float, use_density: bool) -> float:
    value = math.exp(-((x - mu) ** 2) / (2.0 * sigma * sigma))
    if use_density:
        value /= sigma * math.sqrt(2.0 * math.pi)
    return value


def augmentation_probability(
    delta_f: float, model: AugTypeModel = AugTypeModel()
) -> tuple[float, float]:
    """(p_complementary, p_adversarial) from the mean-flow difference.

    tanh squashes the difference into [0, 1); the kernel for the prior
    type is evaluated there and the other probability is its complement,
    so the decision stays soft and continuous in ``delta_f``.
    """
    if delta_f < 0:
        raise ValueError(f"flow difference must be >= 0, got {delta_f}")
    x = math.tanh(delta_f)
    if model.prior == COMPLEMENTARY:
        p_c1 = _kernel(x, model.mu_complementary, model.sigma_complementary, model.use_density)
        p_c2 = 1.0 - p_c1
    else:
        p_c2 = _kernel(x, model.mu_adversarial, model.sigma_adversarial, model.use_density)
        p_c1 = 1.0 - p_c2
    return p_c1, p_c2


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def augmentation_weights(entropy_bits: float, p_c1: float, p_c2: float) -> tuple[float, float]:
    """(w_aug, w_env) soft-decision weights for the two pixel regions.

    The overlay weight is the expectation over the type probabilities of
    2*sigmoid(k*H), with k = -1 for complementary (overlay attenuated,
    environment enhanced) and k = +1 for adversarial; the environment
    weight is its complement to 2.  H = 0 gives exactly (1, 1).
    """
    w_aug = p_c1 * (2.0 * _sigmoid(-entropy_bits)) + p_c2 * (2.0 * _sigmoid(entropy_bits))
    return w_aug, 2.0 - w_aug


def apply_spatial_weighting(
    feature_map: BlockFeatureMap,
    partition: BlockPartition,
    w_aug: float,
    w_env: float,
) -> BlockFeatureMap:
    """Scale overlay pixels by w_aug and environment pixels by w_env.

    No renormalization happens here; the final panorama-domain rescale
    restores the [0, 1] range downstream.
    """
    values = np.where(
        partition.aug_pixels,
        feature_map.values * w_aug,
        feature_map.values * w_env,
    )
    return BlockFeatureMap(spec=feature_map.spec, values=values)
