"""Command-line entry points.

Subcommands:
  targets    dump the evenly distributed viewport centers as CSV
  predict    frames (+ optional masks) -> saliency maps, heatmaps, manifest
  gaze       raw gaze CSV -> per-frame ground-truth maps
  evaluate   predicted maps + gaze CSV -> metrics report CSV

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numerical failure.
Angular flags take degrees; everything internal is radians.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .features import FeatureSource
from .formats import (
    FeatureMapError,
    atomic_write_bytes,
    parse_config_file,
    read_feature_map,
    read_frame_png,
    sha256_file,
    write_feature_map,
    write_manifest,
)
from .fusion import FusionStrategy
from .gaze import (
    build_fixation_map,
    filter_saccades,
    ground_truth_saliency,
    read_gaze_csv,
    traces_by_subject,
)
from .graph import ConvergenceError, build_graph
from .pipeline import PipelineConfig, evaluate_predictions, run_video
from .render import render_heatmap
from .sphere import generate_targets

_CONFIG_KEYS = {
    "n_targets": int,
    "fov": float,
    "block_resolution": int,
    "frame_stride": int,
    "fusion": str,
    "flow_between": str,
    "prior": str,
    "overlap_threshold": float,
    "phi_delta": float,
    "theta_delta": float,
    "sigma_dist": float,
    "rearrange_sigma": float,
    "gaze_sigma": float,
    "temporal_sigma_px": float,
    "smooth_per_block": lambda s: s.lower() in ("1", "true", "yes"),
    "enable_augmentation_weighting": lambda s: s.lower() in ("1", "true", "yes"),
    "enable_graph_weighting": lambda s: s.lower() in ("1", "true", "yes"),
    "spatial_source": str,
    "flow_source": str,
    "features_dir": str,
    "workers": int,
}


def _config_from_sources(config_path: str | None, overrides: dict) -> PipelineConfig:
    """Defaults, then config-file keys (radians), then CLI flags (degrees)."""
    values: dict = {}
    if config_path:
        raw = parse_config_file(config_path)
        unknown = set(raw) - set(_CONFIG_KEYS)
        if unknown:
            raise click.UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key, text in raw.items():
            values[key] = _CONFIG_KEYS[key](text)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "fusion" in values and isinstance(values["fusion"], str):
        values["fusion"] = FusionStrategy.from_string(values["fusion"])
    for key in ("spatial_source", "flow_source"):
        if key in values and isinstance(values[key], str):
            values[key] = FeatureSource(values[key])
    try:
        return PipelineConfig(**values)
    except ValueError as exc:
        raise click.UsageError(str(exc))


@click.group()
@click.version_option(__version__)
def cli():
    """Saliency prediction for augmented 360-degree video."""


@cli.command()
@click.option("--n", default=64, show_default=True, help="Number of target points.")
@click.option("--out", type=click.Path(), default=None, help="CSV path (default stdout).")
def targets(n: int, out: str | None):
    """Dump the target set as phi,theta CSV rows (radians)."""
    if n < 1:
        raise click.UsageError("--n must be >= 1")
    lines = [f"{t.phi:.17g},{t.theta:.17g}" for t in generate_targets(n)]
    text = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        atomic_write_bytes(out, text.encode())


@cli.command()
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True))
@click.option("--masks", "masks_dir", type=click.Path(exists=True), default=None)
@click.option("--gaze", "gaze_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--n-targets", type=int, default=None)
@click.option("--fov-deg", type=float, default=None)
@click.option("--block-resolution", type=int, default=None)
@click.option("--stride", type=int, default=None)
@click.option("--fusion", type=click.Choice([s.value for s in FusionStrategy]), default=None)
@click.option("--prior", type=click.Choice(["complementary", "adversarial"]), default=None)
@click.option("--phi-delta-deg", type=float, default=None)
@click.option("--theta-delta-deg", type=float, default=None)
@click.option("--sigma-dist-deg", type=float, default=None)
@click.option("--smooth-sigma-deg", type=float, default=None)
@click.option("--no-f4", is_flag=True, help="Disable augmentation weighting.")
@click.option("--no-f5", is_flag=True, help="Use uniform block weights instead of the graph.")
@click.option("--spatial-source", type=click.Choice(["builtin_spatial", "external_file"]), default=None)
@click.option("--flow-source", type=click.Choice(["builtin_flow", "external_file"]), default=None)
@click.option("--features-dir", type=click.Path(), default=None)
@click.option("--workers", type=int, default=None)
@click.option("--diagnostics", is_flag=True, help="Dump per-frame diagnostics JSON.")
@click.option("--heatmaps/--no-heatmaps", default=True, show_default=True)
@click.option("--dump-graph", is_flag=True, help="Dump transition matrix and weights as CSV.")
def predict(
    frames_dir,
    masks_dir,
    gaze_path,
    out_dir,
    config_path,
    n_targets,
    fov_deg,
    block_resolution,
    stride,
    fusion,
    prior,
    phi_delta_deg,
    theta_delta_deg,
    sigma_dist_deg,
    smooth_sigma_deg,
    no_f4,
    no_f5,
    spatial_source,
    flow_source,
    features_dir,
    workers,
    diagnostics,
    heatmaps,
    dump_graph,
):
    """Predict saliency maps for a numbered PNG frame sequence."""
    overrides = {
        "frames_dir": frames_dir,
        "masks_dir": masks_dir,
        "gaze_path": gaze_path,
        "n_targets": n_targets,
        "fov": math.radians(fov_deg) if fov_deg is not None else None,
        "block_resolution": block_resolution,
        "frame_stride": stride,
        "fusion": fusion,
        "prior": prior,
        "phi_delta": math.radians(phi_delta_deg) if phi_delta_deg is not None else None,
        "theta_delta": math.radians(theta_delta_deg) if theta_delta_deg is not None else None,
        "sigma_dist": math.radians(sigma_dist_deg) if sigma_dist_deg is not None else None,
        "rearrange_sigma": math.radians(smooth_sigma_deg) if smooth_sigma_deg is not None else None,
        "enable_augmentation_weighting": False if no_f4 else None,
        "enable_graph_weighting": False if no_f5 else None,
        "spatial_source": spatial_source,
        "flow_source": flow_source,
        "features_dir": features_dir,
        "workers": workers,
    }
    config = _config_from_sources(config_path, overrides)

    out = Path(out_dir)
    results, report = run_video(config, collect_diagnostics=diagnostics or dump_graph)

    outputs: dict[str, str] = {}
    for result in results:
        map_path = out / "maps" / f"frame_{result.frame_index:06d}.vbfm"
        write_feature_map(map_path, result.saliency.astype(np.float32))
        outputs[f"map:{result.frame_index}"] = str(map_path.relative_to(out))
        if heatmaps:
            frame = read_frame_png(Path(frames_dir) / f"frame_{result.frame_index:06d}.png")
            overlay = frame if frame.shape[:2] == result.saliency.shape else None
            png = render_heatmap(result.saliency, overlay)
            heat_path = out / "heatmaps" / f"frame_{result.frame_index:06d}.png"
            atomic_write_bytes(heat_path, png)
            outputs[f"heatmap:{result.frame_index}"] = str(heat_path.relative_to(out))
        if diagnostics and result.diagnostics is not None:
            diag_path = out / "reports" / f"diagnostics_{result.frame_index:06d}.json"
            atomic_write_bytes(
                diag_path, (json.dumps(result.diagnostics, indent=2, sort_keys=True) + "\n").encode()
            )
            outputs[f"diagnostics:{result.frame_index}"] = str(diag_path.relative_to(out))
        if dump_graph and result.diagnostics is not None:
            alpha_path = out / "reports" / f"alpha_{result.frame_index:06d}.csv"
            alpha_text = "\n".join(f"{a:.17g}" for a in result.diagnostics["alpha"]) + "\n"
            atomic_write_bytes(alpha_path, alpha_text.encode())
            outputs[f"alpha:{result.frame_index}"] = str(alpha_path.relative_to(out))
            # the graph is a pure function of the diagnostics, so rebuild
            # it rather than carrying an NxN matrix through every result
            graph = build_graph(
                generate_targets(config.n_targets),
                np.array(result.diagnostics["block_means"]),
                config.phi_delta,
                config.theta_delta,
                config.sigma_dist,
            )
            matrix_path = out / "reports" / f"transitions_{result.frame_index:06d}.csv"
            matrix_text = "\n".join(
                ",".join(f"{w:.17g}" for w in row) for row in graph.weights
            ) + "\n"
            atomic_write_bytes(matrix_path, matrix_text.encode())
            outputs[f"transitions:{result.frame_index}"] = str(matrix_path.relative_to(out))

    if report is not None:
        report_path = out / "reports" / "evaluation.csv"
        report_path.parent.mkdir(parents=True, exist_ok=True)
        report.write_csv(report_path)
        outputs["evaluation"] = str(report_path.relative_to(out))

    checksums = {}
    n_frames = 0
    while (Path(frames_dir) / f"frame_{n_frames:06d}.png").exists():
        rel = f"frames/frame_{n_frames:06d}.png"
        checksums[rel] = sha256_file(Path(frames_dir) / f"frame_{n_frames:06d}.png")
        n_frames += 1
    if masks_dir:
        for idx in range(0, n_frames, config.frame_stride):
            path = Path(masks_dir) / f"mask_{idx:06d}.png"
            if path.exists():
                checksums[f"masks/mask_{idx:06d}.png"] = sha256_file(path)
    if gaze_path:
        checksums["gaze.csv"] = sha256_file(gaze_path)

    config_snapshot = {
        key: (value.value if hasattr(value, "value") else value)
        for key, value in vars(config).items()
        if not key.startswith("_") and key != "flow"
    }
    config_snapshot["flow"] = vars(config.flow)
    write_manifest(out / "manifest.json", config_snapshot, checksums, outputs, __version__)
    click.echo(f"wrote {len(results)} frame maps to {out / 'maps'}")


@cli.command("gaze")
@click.option("--gaze", "gaze_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--width", default=512, show_default=True)
@click.option("--height", default=256, show_default=True)
@click.option("--sigma-deg", default=2.0, show_default=True)
@click.option("--heatmaps/--no-heatmaps", default=False, show_default=True)
def gaze_command(gaze_path, out_dir, width, height, sigma_deg, heatmaps):
    """Build per-frame ground-truth saliency maps from a gaze log."""
    if width < 2 or height < 2:
        raise click.UsageError("--width and --height must be >= 2")
    if sigma_deg <= 0:
        raise click.UsageError("--sigma-deg must be positive")
    samples = read_gaze_csv(gaze_path)
    filtered = [
        s
        for trace in traces_by_subject(samples).values()
        for s in filter_saccades(trace).samples
    ]
    by_frame: dict[int, list] = {}
    for sample in filtered:
        by_frame.setdefault(sample.frame_index, []).append(sample)

    out = Path(out_dir)
    for frame_index in sorted(by_frame):
        fixmap = build_fixation_map(by_frame[frame_index], (height, width))
        gt = ground_truth_saliency(fixmap, math.radians(sigma_deg))
        write_feature_map(out / "maps" / f"frame_{frame_index:06d}.vbfm", gt.astype(np.float32))
        if heatmaps:
            png = render_heatmap(gt)
            atomic_write_bytes(out / "heatmaps" / f"frame_{frame_index:06d}.png", png)
    click.echo(f"wrote {len(by_frame)} ground-truth maps to {out / 'maps'}")


@cli.command()
@click.option("--maps", "maps_dir", required=True, type=click.Path(exists=True))
@click.option("--gaze", "gaze_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--sigma-deg", default=2.0, show_default=True)
def evaluate(maps_dir, gaze_path, out_path, sigma_deg):
    """Score predicted maps against gaze-derived ground truth."""
    predictions = {}
    for path in sorted(Path(maps_dir).glob("frame_*.vbfm")):
        frame_index = int(path.stem.split("_")[1])
        predictions[frame_index] = read_feature_map(path, expect="feature")
    if not predictions:
        raise FileNotFoundError(f"no frame_*.vbfm files under {maps_dir}")
    report = evaluate_predictions(predictions, gaze_path, math.radians(sigma_deg))
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    report.write_csv(out_path)
    click.echo(f"wrote evaluation for {len(report.frames)} frames to {out_path}")


def cli_main(argv: list[str] | None = None) -> int:
    """Run the CLI, mapping failures onto the documented exit codes."""
    try:
        cli.main(args=argv, prog_name="viewsal", standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except (FileNotFoundError, IsADirectoryError, PermissionError, FeatureMapError) as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return 2
    except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


def main():  # console-script entry point
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
