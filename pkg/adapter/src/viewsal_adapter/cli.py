"""Standalone export CLI.

Typical use, with targets dumped by the prediction pipeline first:

    viewsal targets --n 64 --out targets.csv
    viewsal-adapter export-spatial --frames frames/ --targets targets.csv \\
        --model spatial.pt --out features/
    viewsal-adapter export-flow --frames frames/ --targets targets.csv \\
        --model flow.pt --out features/
"""

from __future__ import annotations

import math
import sys

import click

from .export import AdapterConfig, export_flow, export_spatial_features
from .networks import MissingWeightsError


def _shared_options(command):
    options = [
        click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True)),
        click.option("--targets", "targets_csv", required=True, type=click.Path(exists=True)),
        click.option("--out", "out_dir", required=True, type=click.Path()),
        click.option("--model", "model_path", required=True, type=click.Path()),
        click.option("--block-resolution", default=224, show_default=True),
        click.option("--fov-deg", default=60.0, show_default=True),
        click.option("--stride", default=5, show_default=True),
        click.option("--device", default="cpu", show_default=True),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _config(kind, frames_dir, targets_csv, out_dir, model_path, block_resolution, fov_deg, stride, device):
    return AdapterConfig(
        frames_dir=frames_dir,
        targets_csv=targets_csv,
        out_dir=out_dir,
        spatial_model=model_path if kind == "spatial" else None,
        flow_model=model_path if kind == "flow" else None,
        block_resolution=block_resolution,
        fov=math.radians(fov_deg),
        frame_stride=stride,
        device=device,
    )


@click.group()
def cli():
    """Export deep per-block features for the saliency pipeline."""


@cli.command("export-spatial")
@_shared_options
def export_spatial_cmd(frames_dir, targets_csv, out_dir, model_path, block_resolution, fov_deg, stride, device):
    """Run the spatial network over every (frame, block) pair."""
    written = export_spatial_features(
        _config("spatial", frames_dir, targets_csv, out_dir, model_path,
                block_resolution, fov_deg, stride, device)
    )
    click.echo(f"wrote {len(written)} spatial feature files")


@cli.command("export-flow")
@_shared_options
def export_flow_cmd(frames_dir, targets_csv, out_dir, model_path, block_resolution, fov_deg, stride, device):
    """Run the flow network over consecutive sampled frame pairs."""
    written = export_flow(
        _config("flow", frames_dir, targets_csv, out_dir, model_path,
                block_resolution, fov_deg, stride, device)
    )
    click.echo(f"wrote {len(written)} flow files")


def cli_main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="viewsal-adapter", standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except MissingWeightsError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (FileNotFoundError, OSError) as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return 2
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
