"""Deep feature export for the viewsal saliency pipeline.

Runs pretrained TorchScript networks over viewport blocks and writes
per-(frame, block) feature and flow files in the pipeline's interchange
format; the pipeline consumes them through its external-file feature
sources.
"""

__version__ = "0.1.0"

from .export import AdapterConfig, export_flow, export_spatial_features
from .networks import MissingWeightsError

__all__ = [
    "AdapterConfig",
    "export_flow",
    "export_spatial_features",
    "MissingWeightsError",
]
