"""viewsal: viewport-based saliency prediction for augmented 360 video.

The package decomposes an equirectangular video into gnomonic viewport
blocks at evenly distributed sphere targets, extracts spatial and
temporal per-block features, soft-weights blocks overlapped by
augmentation overlays, blends the blocks back through the equilibrium
distribution of a Markov chain over block centers, and ships the gaze
processing and evaluation metrics needed to score predictions.
"""

__version__ = "0.1.0"

from .augment import (
    AugTypeModel,
    BlockPartition,
    apply_spatial_weighting,
    augmentation_probability,
    augmentation_weights,
    block_entropy,
    flow_difference,
    mean_region_flow,
    select_augmented_blocks,
)
from .features import (
    FeatureSource,
    FlowField,
    FlowParams,
    optical_flow,
    spatial_saliency,
    temporal_saliency,
)
from .fusion import FusionStrategy, fuse, normalize
from .gaze import (
    GazeSample,
    GazeTrace,
    build_fixation_map,
    filter_saccades,
    ground_truth_saliency,
    packed_saliency,
    read_gaze_csv,
)
from .graph import (
    ConvergenceError,
    EquilibriumWeights,
    TransitionGraph,
    build_graph,
    equilibrium,
    fov_set,
    rearrange,
    transition_weight,
)
from .metrics import EvaluationReport, FrameMetrics, auc_judd, cc, kl_divergence, nss
from .pipeline import FrameResult, PipelineConfig, run_frame, run_video
from .sphere import (
    GOLDEN_ANGLE,
    BlockFeatureMap,
    BlockImage,
    SphereCoord,
    SphericalGaussian,
    ViewportSpec,
    extract_block,
    generate_targets,
    geodesic_distance,
    reproject_block,
    spherical_gaussian_filter,
)
