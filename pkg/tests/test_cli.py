import json
import math

import numpy as np
import pytest

from viewsal.cli import cli_main
from viewsal.formats import read_feature_map
from viewsal.sphere import GOLDEN_ANGLE

from conftest import disk_center_at, write_video


def run_cli(*args):
    return cli_main(list(args))


@pytest.fixture(scope="module")
def video(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_video")
    frames_dir, masks_dir = write_video(root, 10, noisy=True, mask_stride=5)
    return root, frames_dir, masks_dir


@pytest.fixture(scope="module")
def gaze_setup(tmp_path_factory):
    root = tmp_path_factory.mktemp("gaze_eval")
    frames_dir, _ = write_video(root, 10)
    rng = np.random.default_rng(0)
    rows = ["subject_id,frame_index,lat_rad,lon_rad"]
    for subject in ("s1", "s2", "s3"):
        for frame in range(10):
            disk_phi, disk_theta = disk_center_at(frame)
            for _ in range(20):
                phi = np.clip(disk_phi + rng.normal(0, 0.06), 0.01, math.pi - 0.01)
                theta = (disk_theta + rng.normal(0, 0.06)) % (2 * math.pi)
                rows.append(f"{subject},{frame},{phi},{theta}")
    gaze_path = root / "gaze.csv"
    gaze_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return root, frames_dir, gaze_path


class TestTargetsCommand:
    def test_csv_output(self, tmp_path, capsys):
        assert run_cli("targets", "--n", "64") == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 64
        phi, theta = map(float, lines[0].split(","))
        assert theta == pytest.approx(GOLDEN_ANGLE % (2 * math.pi))
        assert phi == pytest.approx(math.acos(1 - 2 / 64))

    def test_file_output(self, tmp_path):
        out = tmp_path / "targets.csv"
        assert run_cli("targets", "--n", "8", "--out", str(out)) == 0
        assert len(out.read_text().strip().splitlines()) == 8

    def test_bad_count_is_usage_error(self):
        assert run_cli("targets", "--n", "0") == 1


class TestUsageErrors:
    def test_unknown_flag(self, capsys):
        assert run_cli("predict", "--frames", ".", "--out", ".", "--no-such-flag") == 1

    def test_unknown_command(self):
        assert run_cli("frobnicate") == 1

    def test_missing_input_dir_is_usage_error(self, tmp_path):
        assert (
            run_cli("predict", "--frames", str(tmp_path / "nope"), "--out", str(tmp_path))
            == 1
        )


class TestPredictCommand:
    def _predict_args(self, frames_dir, out_dir, *extra):
        return [
            "predict",
            "--frames",
            str(frames_dir),
            "--out",
            str(out_dir),
            "--n-targets",
            "12",
            "--block-resolution",
            "48",
            "--stride",
            "5",
            "--smooth-sigma-deg",
            "4",
            *extra,
        ]

    def test_predict_writes_maps_heatmaps_manifest(self, video, tmp_path):
        _, frames_dir, _ = video
        out = tmp_path / "out"
        assert cli_main(self._predict_args(frames_dir, out, "--diagnostics")) == 0
        maps = sorted((out / "maps").glob("*.vbfm"))
        assert [m.name for m in maps] == ["frame_000000.vbfm", "frame_000005.vbfm"]
        heat = sorted((out / "heatmaps").glob("*.png"))
        assert len(heat) == 2
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["tool_version"]
        assert manifest["config"]["n_targets"] == 12
        assert "frames/frame_000000.png" in manifest["inputs"]
        diag = json.loads((out / "reports" / "diagnostics_000005.json").read_text())
        assert len(diag["alpha"]) == 12

    def test_heatmap_peak_tracks_disk(self, video, tmp_path):
        _, frames_dir, _ = video
        out = tmp_path / "out"
        assert cli_main(self._predict_args(frames_dir, out)) == 0
        saliency = read_feature_map(out / "maps" / "frame_000005.vbfm")
        height, width = saliency.shape
        row, col = np.unravel_index(np.argmax(saliency), saliency.shape)
        phi = (row + 0.5) * math.pi / height
        theta = (col + 0.5) * 2 * math.pi / width
        disk_phi, disk_theta = disk_center_at(5)
        from viewsal.sphere import geodesic_distance_arrays

        d = float(geodesic_distance_arrays(phi, theta, disk_phi, disk_theta))
        assert d < math.radians(15.0)

    def test_rerun_is_byte_identical(self, video, tmp_path):
        _, frames_dir, _ = video
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert cli_main(self._predict_args(frames_dir, out_a)) == 0
        assert cli_main(self._predict_args(frames_dir, out_b)) == 0
        map_a = (out_a / "maps" / "frame_000005.vbfm").read_bytes()
        map_b = (out_b / "maps" / "frame_000005.vbfm").read_bytes()
        assert map_a == map_b
        assert (out_a / "manifest.json").read_bytes() == (out_b / "manifest.json").read_bytes()

    def test_config_file_with_flag_override(self, video, tmp_path):
        _, frames_dir, _ = video
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n_targets = 10\nblock_resolution = 48\nframe_stride = 9\n")
        out = tmp_path / "out"
        code = cli_main(
            [
                "predict",
                "--frames",
                str(frames_dir),
                "--out",
                str(out),
                "--config",
                str(cfg),
                "--stride",
                "5",  # flag wins over the config file
                "--smooth-sigma-deg",
                "4",
            ]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["n_targets"] == 10
        assert manifest["config"]["frame_stride"] == 5

    def test_no_f4_flag_equals_zero_mask_run(self, video, tmp_path):
        _, frames_dir, masks_dir = video
        with_flag = tmp_path / "flag"
        no_mask = tmp_path / "nomask"
        args = self._predict_args(frames_dir, with_flag, "--masks", str(masks_dir), "--no-f4")
        assert cli_main(args) == 0
        assert cli_main(self._predict_args(frames_dir, no_mask)) == 0
        for name in ("frame_000000.vbfm", "frame_000005.vbfm"):
            assert (with_flag / "maps" / name).read_bytes() == (
                no_mask / "maps" / name
            ).read_bytes()

    def test_no_f5_flag_equals_uniform_alpha(self, video, tmp_path):
        import math as _math

        from viewsal.formats import read_frame_png
        from viewsal.pipeline import PipelineConfig, run_frame

        _, frames_dir, _ = video
        out = tmp_path / "flag"
        assert cli_main(self._predict_args(frames_dir, out, "--no-f5")) == 0
        frame = read_frame_png(frames_dir / "frame_000000.png")
        reference = run_frame(
            frame,
            None,
            None,
            PipelineConfig(
                n_targets=12,
                block_resolution=48,
                rearrange_sigma=_math.radians(4),
                enable_graph_weighting=False,
            ),
        )
        written = read_feature_map(out / "maps" / "frame_000000.vbfm")
        np.testing.assert_array_equal(
            written, reference.saliency.astype(np.float32).astype(float)
        )

    def test_dump_graph_writes_matrix_and_alpha(self, video, tmp_path):
        _, frames_dir, _ = video
        out = tmp_path / "out"
        assert cli_main(self._predict_args(frames_dir, out, "--dump-graph")) == 0
        alpha_lines = (out / "reports" / "alpha_000000.csv").read_text().strip().splitlines()
        assert len(alpha_lines) == 12
        matrix_lines = (
            (out / "reports" / "transitions_000000.csv").read_text().strip().splitlines()
        )
        assert len(matrix_lines) == 12
        row = [float(x) for x in matrix_lines[0].split(",")]
        assert len(row) == 12
        assert sum(row) == pytest.approx(1.0, abs=1e-12)
        assert row[0] == 0.0  # no self-loop

    def test_unknown_config_key_is_usage_error(self, video, tmp_path):
        _, frames_dir, _ = video
        cfg = tmp_path / "run.cfg"
        cfg.write_text("targets = 10\n")
        assert (
            cli_main(
                ["predict", "--frames", str(frames_dir), "--out", str(tmp_path / "o"),
                 "--config", str(cfg)]
            )
            == 1
        )


class TestGazeAndEvaluate:
    def test_gaze_command_builds_ground_truth(self, gaze_setup, tmp_path):
        _, _, gaze_path = gaze_setup
        out = tmp_path / "gt"
        code = cli_main(
            ["gaze", "--gaze", str(gaze_path), "--out", str(out),
             "--width", "128", "--height", "64", "--sigma-deg", "3"]
        )
        assert code == 0
        maps = sorted((out / "maps").glob("*.vbfm"))
        assert len(maps) == 10
        gt = read_feature_map(maps[0])
        assert gt.shape == (64, 128)
        assert gt.max() == pytest.approx(1.0)

    def test_predict_then_evaluate(self, gaze_setup, tmp_path):
        _, frames_dir, gaze_path = gaze_setup
        out = tmp_path / "out"
        code = cli_main(
            [
                "predict", "--frames", str(frames_dir), "--out", str(out),
                "--n-targets", "12", "--block-resolution", "48",
                "--stride", "5", "--smooth-sigma-deg", "4",
                "--gaze", str(gaze_path),
            ]
        )
        assert code == 0
        report = (out / "reports" / "evaluation.csv").read_text().strip().splitlines()
        assert report[0] == "frame_index,auc_judd,nss,kl,cc"
        # 2 frame rows + mean + std + packed
        assert len(report) == 6
        frame0 = dict(zip(report[0].split(","), report[1].split(",")))
        assert float(frame0["auc_judd"]) > 0.6  # prediction tracks the disk

    def test_evaluate_command(self, gaze_setup, tmp_path):
        _, frames_dir, gaze_path = gaze_setup
        out = tmp_path / "out"
        assert cli_main(
            ["predict", "--frames", str(frames_dir), "--out", str(out),
             "--n-targets", "12", "--block-resolution", "48",
             "--stride", "5", "--smooth-sigma-deg", "4"]
        ) == 0
        report_path = tmp_path / "report.csv"
        code = cli_main(
            ["evaluate", "--maps", str(out / "maps"), "--gaze", str(gaze_path),
             "--out", str(report_path), "--sigma-deg", "3"]
        )
        assert code == 0
        assert report_path.exists()
