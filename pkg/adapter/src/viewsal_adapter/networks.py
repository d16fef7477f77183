"""Loading and running the exported networks.

Networks are TorchScript modules treated as black boxes, so any
pretrained backbone can be dropped in as long as it honors the tensor
contract:

  spatial:  (1, 3, R, R) float32 in [0, 1]  ->  (1, 1, h, w)
  flow:     (1, 6, R, R) float32 in [0, 1]  ->  (1, 2, h, w),
            displacements in pixels at the network's output scale

Outputs are resized to the block resolution; spatial maps are rescaled
to [0, 1] (constant maps become zeros), flow values are scaled by the
resize factor so they stay in pixels per frame step.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

__all__ = ["MissingWeightsError", "load_network", "run_spatial", "run_flow"]


class MissingWeightsError(FileNotFoundError):
    """A configured network file is absent; exports never silently fall
    back to anything else."""


def load_network(path: str | Path, kind: str) -> torch.jit.ScriptModule:
    path = Path(path)
    if not path.is_file():
        raise MissingWeightsError(
            f"{kind} network weights not found at {path}; provide a TorchScript "
            f"module exported for the {kind} contract"
        )
    module = torch.jit.load(str(path), map_location="cpu")
    module.eval()
    return module


def _to_batch(blocks: np.ndarray) -> torch.Tensor:
    # (R, R, C) in 0-255 -> (1, C, R, R) in [0, 1]
    tensor = torch.from_numpy(np.ascontiguousarray(blocks)).float() / 255.0
    return tensor.permute(2, 0, 1).unsqueeze(0)


def run_spatial(
    module: torch.jit.ScriptModule, block: np.ndarray, resolution: int, device: str = "cpu"
) -> np.ndarray:
    """Single-channel [0, 1] map at block resolution for one block."""
    with torch.no_grad():
        out = module(_to_batch(block).to(device))
        if out.ndim != 4 or out.shape[1] != 1:
            raise ValueError(f"spatial network must return (1, 1, h, w), got {tuple(out.shape)}")
        out = F.interpolate(
            out, size=(resolution, resolution), mode="bilinear", align_corners=False
        )
    values = out[0, 0].cpu().numpy().astype(np.float64)
    vmin, vmax = values.min(), values.max()
    # a dynamic range at the float32 inference noise floor is a constant
    # map; stretching it to [0, 1] would amplify pure numerical jitter
    if vmax - vmin <= 1e-6 * max(1.0, abs(vmax), abs(vmin)):
        return np.zeros_like(values)
    return (values - vmin) / (vmax - vmin)


def run_flow(
    module: torch.jit.ScriptModule,
    prev_block: np.ndarray,
    next_block: np.ndarray,
    resolution: int,
    device: str = "cpu",
) -> np.ndarray:
    """(R, R, 2) displacement field in pixels per frame step."""
    pair = torch.cat([_to_batch(prev_block), _to_batch(next_block)], dim=1)
    with torch.no_grad():
        out = module(pair.to(device))
        if out.ndim != 4 or out.shape[1] != 2:
            raise ValueError(f"flow network must return (1, 2, h, w), got {tuple(out.shape)}")
        h_net, w_net = out.shape[2], out.shape[3]
        out = F.interpolate(
            out, size=(resolution, resolution), mode="bilinear", align_corners=False
        )
        # keep displacements in pixels after the spatial resize
        out[:, 0] *= resolution / w_net
        out[:, 1] *= resolution / h_net
    return out[0].permute(1, 2, 0).cpu().numpy().astype(np.float64)
