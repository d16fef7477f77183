"""End-to-end prediction pipeline for one frame or a whole video.

Per sampled frame: extract viewport blocks at the evenly distributed
targets, compute spatial and temporal block features (built-in or from
external files), fuse them, soft-weight the blocks that overlap the
augmentation mask, build the transition graph over block centers, take
its equilibrium distribution, and blend the weighted block maps back
into an equirectangular saliency map.

Everything here is a pure function of (frames, mask, config): no state
survives between frames or videos, so results are deterministic and
frames can be processed in any order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import augment, formats, gaze as gaze_mod, metrics
from .features import (
    FeatureSource,
    FlowField,
    FlowParams,
    optical_flow,
    spatial_saliency,
    temporal_saliency,
    zero_flow,
)
from .fusion import FusionStrategy, fuse
from .graph import (
    DEFAULT_DISTANCE_SIGMA,
    DEFAULT_FOV_DELTA,
    build_graph,
    equilibrium,
    rearrange,
)
from .sphere import BlockFeatureMap, BlockImage, ViewportSpec, extract_block, generate_targets

__all__ = ["PipelineConfig", "FrameResult", "run_frame", "run_video"]


@dataclass(frozen=True)
class PipelineConfig:
    """All tunables of the prediction pipeline, with library defaults."""

    # Geometry
    n_targets: int = 64
    fov: float = math.pi / 3.0
    block_resolution: int = 224

    # Sampling and fusion
    frame_stride: int = 5
    fusion: FusionStrategy = FusionStrategy.SUM
    flow_between: str = "sampled"  # or "adjacent": flow from frame t-1

    # Augmentation weighting
    prior: str = augment.ADVERSARIAL
    overlap_threshold: float = augment.OVERLAP_THRESHOLD
    use_density_kernel: bool = False
    enable_augmentation_weighting: bool = True  # the mask-driven reweighting
    enable_graph_weighting: bool = True  # equilibrium weights vs uniform

    # Graph parameters
    phi_delta: float = DEFAULT_FOV_DELTA
    theta_delta: float = DEFAULT_FOV_DELTA
    sigma_dist: float = DEFAULT_DISTANCE_SIGMA

    # Smoothing
    rearrange_sigma: float = math.radians(2.0)
    gaze_sigma: float = math.radians(2.0)
    temporal_sigma_px: float = 5.0
    smooth_per_block: bool = True

    # Feature sources
    spatial_source: FeatureSource = FeatureSource.BUILTIN_SPATIAL
    flow_source: FeatureSource = FeatureSource.BUILTIN_FLOW
    flow: FlowParams = field(default_factory=FlowParams)

    # I/O paths (used by run_video)
    frames_dir: str | None = None
    masks_dir: str | None = None
    gaze_path: str | None = None
    features_dir: str | None = None

    # Output
    output_shape: tuple[int, int] | None = None  # default: input frame shape
    workers: int = 1

    def __post_init__(self):
        if self.n_targets < 2:
            raise ValueError("n_targets must be >= 2")
        if self.frame_stride < 1:
            raise ValueError("frame_stride must be >= 1")
        if not (0.0 < self.overlap_threshold < 1.0):
            raise ValueError("overlap_threshold must lie in (0, 1)")
        for name in ("fov", "phi_delta", "theta_delta", "sigma_dist"):
            value = getattr(self, name)
            if not (0.0 < value <= math.pi):
                raise ValueError(f"{name} must lie in (0, pi], got {value}")
        if self.flow_between not in ("sampled", "adjacent"):
            raise ValueError("flow_between must be 'sampled' or 'adjacent'")

    def aug_model(self) -> augment.AugTypeModel:
        return augment.AugTypeModel(prior=self.prior, use_density=self.use_density_kernel)


@dataclass
class FrameResult:
    frame_index: int
    saliency: np.ndarray
    diagnostics: dict | None = None


def _feature_path(features_dir: str, kind: str, frame_index: int, block_index: int) -> Path:
    return Path(features_dir) / kind / f"f{frame_index}_b{block_index}.vbfm"


def _load_external_spatial(
    config: PipelineConfig, frame_index: int, block_index: int, spec: ViewportSpec
) -> BlockFeatureMap:
    if not config.features_dir:
        raise ValueError("external feature source requires features_dir")
    path = _feature_path(config.features_dir, "spatial", frame_index, block_index)
    values = formats.read_feature_map(path, expect="feature")
    if values.shape != (spec.resolution, spec.resolution):
        raise ValueError(
            f"{path}: expected {spec.resolution}x{spec.resolution} map, got {values.shape}"
        )
    return BlockFeatureMap(spec=spec, values=np.maximum(values, 0.0))


def _load_external_flow(
    config: PipelineConfig, frame_index: int, block_index: int, spec: ViewportSpec
) -> FlowField:
    if not config.features_dir:
        raise ValueError("external flow source requires features_dir")
    path = _feature_path(config.features_dir, "flow", frame_index, block_index)
    values = formats.read_feature_map(path, expect="flow")
    if values.shape[:2] != (spec.resolution, spec.resolution):
        raise ValueError(
            f"{path}: expected {spec.resolution}x{spec.resolution} flow, got {values.shape[:2]}"
        )
    return FlowField(spec=spec, u=values[..., 0], v=values[..., 1])


def run_frame(
    frame: np.ndarray,
    prev_frame: np.ndarray | None,
    mask: np.ndarray | None,
    config: PipelineConfig,
    frame_index: int = 0,
    collect_diagnostics: bool = False,
) -> FrameResult:
    """Predict the saliency map of one frame.

    ``prev_frame`` is the predecessor used for motion (None on the first
    sampled frame, which then gets zero temporal saliency).  ``mask`` is
    the binary augmentation map for this frame; None means plain 360
    video and skips the augmentation weighting entirely.
    """
    frame = np.asarray(frame, dtype=float)
    if prev_frame is not None:
        prev_frame = np.asarray(prev_frame, dtype=float)
        if prev_frame.shape != frame.shape:
            raise ValueError(
                f"frame {frame_index}: predecessor shape {prev_frame.shape} "
                f"does not match frame shape {frame.shape}"
            )
    if mask is not None:
        mask = np.asarray(mask, dtype=float)
        if mask.shape != frame.shape[:2]:
            raise ValueError(
                f"frame {frame_index}: mask shape {mask.shape} does not match "
                f"frame shape {frame.shape[:2]}"
            )

    targets = generate_targets(config.n_targets)
    specs = [
        ViewportSpec(center=t, fov=config.fov, resolution=config.block_resolution)
        for t in targets
    ]
    blocks = [extract_block(frame, spec) for spec in specs]
    prev_blocks = (
        [extract_block(prev_frame, spec) for spec in specs] if prev_frame is not None else None
    )

    fused: list[BlockFeatureMap] = []
    flows: list[FlowField] = []
    for index, (spec, block) in enumerate(zip(specs, blocks)):
        if config.spatial_source is FeatureSource.EXTERNAL_FILE:
            spatial = _load_external_spatial(config, frame_index, index, spec)
        else:
            spatial = spatial_saliency(block)

        if config.flow_source is FeatureSource.EXTERNAL_FILE:
            flow = _load_external_flow(config, frame_index, index, spec)
        elif prev_blocks is not None:
            flow = optical_flow(prev_blocks[index], block, config.flow)
        else:
            flow = zero_flow(spec)
        temporal = temporal_saliency(flow, config.temporal_sigma_px)

        flows.append(flow)
        fused.append(
            BlockFeatureMap(
                spec=spec, values=fuse(spatial.values, temporal.values, config.fusion)
            )
        )

    aug_diag = []
    if mask is not None and config.enable_augmentation_weighting:
        model = config.aug_model()
        partitions = augment.select_augmented_blocks(blocks, mask, config.overlap_threshold)
        for part in partitions:
            i = part.block_index
            entropy = augment.block_entropy(blocks[i], part.aug_pixels)
            if part.env_pixels.any():
                mean_aug = augment.mean_region_flow(flows[i], part.aug_pixels)
                mean_env = augment.mean_region_flow(flows[i], part.env_pixels)
                delta = augment.flow_difference(mean_aug, mean_env)
            else:
                # the overlay fills the whole viewport: no environment to
                # compare motion against, so no coherence evidence
                delta = 0.0
            p_c1, p_c2 = augment.augmentation_probability(delta, model)
            w_aug, w_env = augment.augmentation_weights(entropy, p_c1, p_c2)
            fused[i] = augment.apply_spatial_weighting(fused[i], part, w_aug, w_env)
            aug_diag.append(
                {
                    "block_index": i,
                    "overlap_ratio": part.overlap_ratio,
                    "entropy_bits": entropy,
                    "flow_difference": delta,
                    "p_complementary": p_c1,
                    "p_adversarial": p_c2,
                    "w_aug": w_aug,
                    "w_env": w_env,
                }
            )

    block_means = np.array([fm.values.mean() for fm in fused])
    if config.enable_graph_weighting:
        graph = build_graph(
            targets, block_means, config.phi_delta, config.theta_delta, config.sigma_dist
        )
        alpha = equilibrium(graph).alpha
    else:
        alpha = np.full(config.n_targets, 1.0 / config.n_targets)

    out_shape = config.output_shape or frame.shape[:2]
    saliency = rearrange(
        alpha, fused, out_shape, config.rearrange_sigma, config.smooth_per_block
    )

    diagnostics = None
    if collect_diagnostics:
        diagnostics = {
            "frame_index": frame_index,
            "alpha": alpha.tolist(),
            "block_means": block_means.tolist(),
            "augmented_blocks": aug_diag,
        }
    return FrameResult(frame_index=frame_index, saliency=saliency, diagnostics=diagnostics)


def _frame_path(frames_dir: str | Path, index: int) -> Path:
    return Path(frames_dir) / f"frame_{index:06d}.png"


def _mask_path(masks_dir: str | Path, index: int) -> Path:
    return Path(masks_dir) / f"mask_{index:06d}.png"


def sampled_indices(n_frames: int, stride: int) -> list[int]:
    return list(range(0, n_frames, stride))


def _count_frames(frames_dir: str | Path) -> int:
    indices = []
    for path in Path(frames_dir).glob("frame_*.png"):
        try:
            indices.append(int(path.stem.split("_")[1]))
        except (IndexError, ValueError):
            continue
    if not indices:
        raise FileNotFoundError(f"no frame_*.png files under {frames_dir}")
    return max(indices) + 1


def _run_one(args) -> FrameResult:
    config, index, prev_index, collect_diagnostics = args
    frame = formats.read_frame_png(_frame_path(config.frames_dir, index))
    prev = (
        formats.read_frame_png(_frame_path(config.frames_dir, prev_index))
        if prev_index is not None
        else None
    )
    mask = None
    if config.masks_dir is not None:
        mask = formats.read_mask_png(_mask_path(config.masks_dir, index))
    return run_frame(frame, prev, mask, config, index, collect_diagnostics)


def run_video(
    config: PipelineConfig, collect_diagnostics: bool = False
) -> tuple[list[FrameResult], metrics.EvaluationReport | None]:
    """Process frames 0, s, 2s, ... of the configured frame directory.

    Results come back in ascending frame order regardless of execution
    order.  When ``config.gaze_path`` is set, an evaluation report
    against the gaze-derived ground truth is returned as well.
    """
    if not config.frames_dir:
        raise ValueError("run_video requires config.frames_dir")
    n_frames = _count_frames(config.frames_dir)
    indices = sampled_indices(n_frames, config.frame_stride)

    jobs = []
    missing = []
    for position, index in enumerate(indices):
        if config.flow_between == "adjacent":
            prev_index = index - 1 if index > 0 else None
        else:
            prev_index = indices[position - 1] if position > 0 else None
        for required in (index, prev_index):
            if required is not None and not _frame_path(config.frames_dir, required).exists():
                missing.append(str(_frame_path(config.frames_dir, required)))
        if config.masks_dir is not None and not _mask_path(config.masks_dir, index).exists():
            missing.append(str(_mask_path(config.masks_dir, index)))
        jobs.append((config, index, prev_index, collect_diagnostics))
    if missing:
        raise FileNotFoundError("missing inputs: " + ", ".join(sorted(set(missing))))

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    results.sort(key=lambda r: r.frame_index)

    report = None
    if config.gaze_path:
        report = evaluate_predictions(
            {r.frame_index: r.saliency for r in results},
            config.gaze_path,
            config.gaze_sigma,
        )
    return results, report


def evaluate_predictions(
    predictions: dict[int, np.ndarray],
    gaze_path: str | Path,
    gaze_sigma: float,
) -> metrics.EvaluationReport:
    """Score per-frame predictions against gaze-derived ground truth.

    Gaze traces are saccade-filtered per subject, aggregated into
    per-frame fixation maps, and sphere-smoothed.  Frames without any
    fixation are skipped (the fixation metrics are undefined there).
    The packed row compares the normalized sums over all frames.
    """
    samples = gaze_mod.read_gaze_csv(gaze_path)
    traces = gaze_mod.traces_by_subject(samples)
    filtered = [s for trace in traces.values() for s in gaze_mod.filter_saccades(trace).samples]

    by_frame: dict[int, list] = {}
    for sample in filtered:
        by_frame.setdefault(sample.frame_index, []).append(sample)

    shape = next(iter(predictions.values())).shape
    rows = []
    packed_fix = np.zeros(shape, dtype=np.int64)
    for frame_index in sorted(predictions):
        frame_samples = by_frame.get(frame_index, [])
        if not frame_samples:
            continue
        fixmap = gaze_mod.build_fixation_map(frame_samples, shape)
        packed_fix += fixmap
        gt = gaze_mod.ground_truth_saliency(fixmap, gaze_sigma)
        pred = predictions[frame_index]
        rows.append(
            metrics.FrameMetrics(
                frame_index=frame_index,
                auc_judd=metrics.auc_judd(pred, fixmap),
                nss=metrics.nss(pred, fixmap),
                kl=metrics.kl_divergence(pred, gt),
                cc=metrics.cc(pred, gt),
            )
        )
    if not rows:
        raise ValueError(f"no frames in {gaze_path} overlap the predictions")

    packed_pred = gaze_mod.packed_saliency(
        [predictions[r.frame_index] for r in rows]
    )
    packed_gt = gaze_mod.ground_truth_saliency(packed_fix, gaze_sigma)
    packed = metrics.FrameMetrics(
        frame_index=-1,
        auc_judd=metrics.auc_judd(packed_pred, packed_fix),
        nss=metrics.nss(packed_pred, packed_fix),
        kl=metrics.kl_divergence(packed_pred, packed_gt),
        cc=metrics.cc(packed_pred, packed_gt),
    )
    return metrics.EvaluationReport(frames=rows, packed=packed)
