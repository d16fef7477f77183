"""Transition graph over viewport centers and its equilibrium weights.

Every viewport center is a node of a complete directed graph.  An edge
weight combines three behavioral factors: the equator bias sin(phi) of
the destination (upright heads favor the equator), the destination's
share of mean feature mass within the source's field of view, and a
Gaussian penalty on the geodesic gaze-shift distance.  Normalizing each
node's outbound weights turns the graph into an irreducible Markov
chain whose stationary distribution gives the fraction of attention
each block receives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fusion import normalize
from .sphere import (
    BlockFeatureMap,
    SphereCoord,
    geodesic_distance_arrays,
    reproject_block,
    spherical_gaussian_filter,
)

__all__ = [
    "TransitionGraph",
    "EquilibriumWeights",
    "ConvergenceError",
    "DEFAULT_FOV_DELTA",
    "DEFAULT_DISTANCE_SIGMA",
    "WEIGHT_FLOOR",
    "fov_set",
    "transition_weight",
    "build_graph",
    "equilibrium",
    "rearrange",
]

# Half width/height of the field of view used for node visibility, and
# the distance-penalty scale (half the comfortable head turn plus the
# best eye rotation, ~45 degrees).
DEFAULT_FOV_DELTA = 0.3 * math.pi
DEFAULT_DISTANCE_SIGMA = 0.25 * math.pi

# Raw edge weights are clamped below at this value before row
# normalization: sin(phi) vanishes at the poles, and the equilibrium
# computation needs strictly positive entries.
WEIGHT_FLOOR = 1e-12


class ConvergenceError(RuntimeError):
    """Power iteration failed to reach the requested tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass
class TransitionGraph:
    """Row-stochastic transition matrix over the target set."""

    nodes: list[SphereCoord]
    weights: np.ndarray  # (N, N), zero diagonal, positive off-diagonal


@dataclass
class EquilibriumWeights:
    """Stationary distribution of the chain, L1-normalized."""

    alpha: np.ndarray
    residual: float
    iterations: int


def fov_set(
    targets: list[SphereCoord],
    center_index: int,
    phi_delta: float = DEFAULT_FOV_DELTA,
    theta_delta: float = DEFAULT_FOV_DELTA,
) -> np.ndarray:
    """Indices of targets inside the viewport centered at one target.

    Polar angles compare directly; azimuths compare circularly so the
    set behaves the same across the antimeridian.  The center index is
    always a member.
    """
    phis = np.array([t.phi for t in targets])
    thetas = np.array([t.theta for t in targets])
    dphi = np.abs(phis - phis[center_index])
    dtheta = np.abs(thetas - thetas[center_index])
    dtheta = np.minimum(dtheta, 2.0 * math.pi - dtheta)
    return np.nonzero((dphi < phi_delta) & (dtheta < theta_delta))[0]


def _distance_penalty(distance, sigma: float):
    return np.exp(-(np.asarray(distance, dtype=float) ** 2) / (2.0 * sigma * sigma))


def transition_weight(
    i: int,
    j: int,
    targets: list[SphereCoord],
    block_means: np.ndarray,
    fov_sets: list[np.ndarray],
    sigma_dist: float = DEFAULT_DISTANCE_SIGMA,
) -> float:
    """Unnormalized edge weight from node i to node j (i != j).

    Inside the source's field of view the feature ratio uses the
    destination's mean; outside it the destination is invisible, so the
    ratio falls back to the source's own mean (the chance of rejecting
    every visible candidate).  The result is floored at WEIGHT_FLOOR.
    """
    if i == j:
        raise ValueError("self-loops are excluded from the graph")
    means = np.maximum(np.asarray(block_means, dtype=float), WEIGHT_FLOOR)
    visible = fov_sets[i]
    denom = means[visible].sum()
    numer = means[j] if j in set(visible.tolist()) else means[i]
    g = geodesic_distance_arrays(
        targets[i].phi, targets[i].theta, targets[j].phi, targets[j].theta
    )
    raw = math.sin(targets[j].phi) * (numer / denom) * float(_distance_penalty(g, sigma_dist))
    return max(raw, WEIGHT_FLOOR)


def build_graph(
    targets: list[SphereCoord],
    block_means: np.ndarray,
    phi_delta: float = DEFAULT_FOV_DELTA,
    theta_delta: float = DEFAULT_FOV_DELTA,
    sigma_dist: float = DEFAULT_DISTANCE_SIGMA,
) -> TransitionGraph:
    """Weight every ordered node pair and normalize each row to sum 1."""
    n = len(targets)
    if n < 2:
        raise ValueError(f"graph needs at least 2 nodes, got {n}")
    means = np.maximum(np.asarray(block_means, dtype=float), WEIGHT_FLOOR)
    if means.shape != (n,):
        raise ValueError(f"expected {n} block means, got shape {means.shape}")

    phis = np.array([t.phi for t in targets])
    thetas = np.array([t.theta for t in targets])
    distances = geodesic_distance_arrays(
        phis[:, np.newaxis], thetas[:, np.newaxis], phis[np.newaxis, :], thetas[np.newaxis, :]
    )
    penalty = _distance_penalty(distances, sigma_dist)
    sin_dest = np.sin(phis)[np.newaxis, :]

    weights = np.zeros((n, n))
    for i in range(n):
        visible = fov_set(targets, i, phi_delta, theta_delta)
        denom = means[visible].sum()
        numer = np.full(n, means[i])
        numer[visible] = means[visible]
        row = sin_dest[0] * (numer / denom) * penalty[i]
        row = np.maximum(row, WEIGHT_FLOOR)
        row[i] = 0.0
        weights[i] = row / row.sum()
    return TransitionGraph(nodes=list(targets), weights=weights)


def equilibrium(
    graph: TransitionGraph, tol: float = 1e-10, max_iters: int = 100_000
) -> EquilibriumWeights:
    """Stationary distribution of the chain by power iteration.

    Iterates the lazy chain (I + P)/2, which shares the stationary
    distribution of P but is aperiodic, so the iteration converges even
    for the periodic two-node case.  Convergence is declared when the L1
    change drops below ``tol``; otherwise a :class:`ConvergenceError`
    carrying the final residual is raised.
    """
    p_t = graph.weights.T
    n = p_t.shape[0]
    alpha = np.full(n, 1.0 / n)
    for iteration in range(1, max_iters + 1):
        updated = 0.5 * (alpha + p_t @ alpha)
        updated /= updated.sum()
        change = np.abs(updated - alpha).sum()
        alpha = updated
        if change < tol:
            residual = float(np.abs(graph.weights.T @ alpha - alpha).sum())
            return EquilibriumWeights(alpha=alpha, residual=residual, iterations=iteration)
    residual = float(np.abs(graph.weights.T @ alpha - alpha).sum())
    raise ConvergenceError(
        f"power iteration did not converge in {max_iters} iterations "
        f"(final L1 residual {residual:.3e})",
        residual,
    )


def rearrange(
    alpha: np.ndarray,
    block_maps: list[BlockFeatureMap],
    pano_shape: tuple[int, int],
    smooth_sigma: float,
    smooth_per_block: bool = True,
) -> np.ndarray:
    """Blend weighted block maps back into one equirectangular map.

    Each block map is scaled by its equilibrium weight, splatted back
    through the inverse viewport projection, and Gaussian-smoothed on
    the sphere to hide the block seams (per block by default; set
    ``smooth_per_block=False`` to smooth once after summation).  The sum
    is rescaled to [0, 1].
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape[0] != len(block_maps):
        raise ValueError(
            f"{alpha.shape[0]} weights for {len(block_maps)} block maps"
        )
    acc = np.zeros(pano_shape)
    for weight, block_map in zip(alpha, block_maps):
        splat, coverage = reproject_block(block_map, pano_shape)
        contribution = np.zeros(pano_shape)
        np.divide(weight * splat, coverage, out=contribution, where=coverage > 0)
        if smooth_per_block:
            contribution = spherical_gaussian_filter(contribution, smooth_sigma)
        acc += contribution
    if not smooth_per_block:
        acc = spherical_gaussian_filter(acc, smooth_sigma)
    return normalize(acc)
