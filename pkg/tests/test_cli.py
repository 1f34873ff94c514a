"""End-to-end command-line checks (in-process, file-based)."""

import numpy as np
import pytest

from fastray.calib import bundled_rig, save_calibration
from fastray.cli import cli
from fastray.lut import load_lut
from fastray.tensorio import load_tensor, save_tensor


@pytest.fixture()
def calib_path(tmp_path):
    # scaled-down copy of the bundled rig keeps feature tensors small
    from fastray.bench import resize_rig

    rig, frames = bundled_rig()
    path = tmp_path / "calib.json"
    save_calibration(path, resize_rig(rig, 64, 36), frames)
    return path


def make_features(tmp_path, seed=0, n=6, c=3, h=18, w=32):
    rng = np.random.default_rng(seed)
    path = tmp_path / "features.bin"
    save_tensor(path, rng.uniform(-1, 1, (n, c, h, w)).astype(np.float32))
    return path


GRID = "28x28x2"
RANGES = "-40:40,-40:40,-4:2"


class TestBuildLutCommand:
    def test_writes_a_loadable_table(self, tmp_path, calib_path):
        out = tmp_path / "table.lut"
        code = cli([
            "build-lut", "--calib", str(calib_path), "--grid", GRID,
            "--range=" + RANGES, "--out", str(out),
        ])
        assert code == 0
        lut = load_lut(out)
        assert (lut.grid.nx, lut.grid.ny, lut.grid.nz) == (28, 28, 2)
        assert lut.n_cameras == 6

    def test_missing_calibration_is_usage_error(self, tmp_path):
        code = cli([
            "build-lut", "--calib", str(tmp_path / "nope.json"), "--grid", GRID,
            "--out", str(tmp_path / "t.lut"),
        ])
        assert code == 2

    def test_deterministic_across_thread_counts(self, tmp_path, calib_path):
        blobs = []
        for threads in (1, 4, 8):
            out = tmp_path / f"t{threads}.lut"
            assert cli([
                "build-lut", "--calib", str(calib_path), "--grid", GRID,
                "--range=" + RANGES, "--out", str(out), "--threads", str(threads),
            ]) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1] == blobs[2]


class TestTransformCommand:
    def test_fast_and_naive_outputs_are_byte_identical(self, tmp_path, calib_path):
        lut_path = tmp_path / "table.lut"
        assert cli([
            "build-lut", "--calib", str(calib_path), "--grid", GRID,
            "--range=" + RANGES, "--out", str(lut_path),
        ]) == 0
        # feature dims must cover every pixel address stored in the table
        from fastray.calib import load_calibration

        rig, _ = load_calibration(calib_path)
        feats = make_features(
            tmp_path, c=2, h=rig[0].intrinsics.height, w=rig[0].intrinsics.width
        )
        fast_out = tmp_path / "fast.bin"
        naive_out = tmp_path / "naive.bin"
        assert cli([
            "transform", "--lut", str(lut_path), "--features", str(feats),
            "--out", str(fast_out), "--method", "fast",
        ]) == 0
        assert cli([
            "transform", "--lut", str(lut_path), "--features", str(feats),
            "--out", str(naive_out), "--method", "naive", "--calib", str(calib_path),
            "--range=" + RANGES,
        ]) == 0
        assert fast_out.read_bytes() == naive_out.read_bytes()

    def test_lss_method_runs(self, tmp_path, calib_path):
        lut_path = tmp_path / "table.lut"
        assert cli([
            "build-lut", "--calib", str(calib_path), "--grid", GRID,
            "--range=" + RANGES, "--out", str(lut_path),
        ]) == 0
        from fastray.calib import load_calibration

        rig, _ = load_calibration(calib_path)
        feats = make_features(
            tmp_path, c=2, h=rig[0].intrinsics.height, w=rig[0].intrinsics.width
        )
        out = tmp_path / "lss.bin"
        assert cli([
            "transform", "--lut", str(lut_path), "--features", str(feats),
            "--out", str(out), "--method", "lss", "--calib", str(calib_path),
            "--range=" + RANGES, "--depth-bins", "4",
        ]) == 0
        assert load_tensor(out).shape == (28, 28, 2, 2)

    def test_naive_without_calib_is_usage_error(self, tmp_path, calib_path):
        lut_path = tmp_path / "table.lut"
        assert cli([
            "build-lut", "--calib", str(calib_path), "--grid", GRID,
            "--range=" + RANGES, "--out", str(lut_path),
        ]) == 0
        feats = make_features(tmp_path)
        assert cli([
            "transform", "--lut", str(lut_path), "--features", str(feats),
            "--out", str(tmp_path / "x.bin"), "--method", "naive",
        ]) == 2

    def test_corrupt_lut_is_usage_error(self, tmp_path):
        bad = tmp_path / "bad.lut"
        bad.write_bytes(b"garbage bytes here")
        feats = make_features(tmp_path)
        assert cli([
            "transform", "--lut", str(bad), "--features", str(feats),
            "--out", str(tmp_path / "x.bin"),
        ]) == 2


class TestBenchCommand:
    def test_config_run_writes_csv_with_one_row_per_method(self, tmp_path, calib_path):
        csv_path = tmp_path / "out.csv"
        code = cli([
            "bench", "--config", str(_tiny_bench_config(tmp_path)),
            "--csv", str(csv_path), "--calib", str(calib_path),
        ])
        assert code == 0
        lines = csv_path.read_text().strip().splitlines()
        assert len(lines) == 4
        methods = [line.split(",")[2] for line in lines[1:]]
        assert methods == ["fast_ray", "naive", "lss_reference"]

    def test_suite_entry_runs_with_bundled_rig(self, tmp_path):
        csv_path = tmp_path / "s1.csv"
        assert cli(["bench", "--suite", "s1", "--csv", str(csv_path), "--threads", "1"]) == 0
        assert len(csv_path.read_text().strip().splitlines()) == 4

    def test_unknown_suite_is_usage_error(self, tmp_path):
        assert cli(["bench", "--suite", "s9", "--csv", str(tmp_path / "x.csv")]) == 2


def _tiny_bench_config(tmp_path):
    import json

    path = tmp_path / "bench.json"
    path.write_text(json.dumps({
        "name": "tiny", "channels": 4, "height": 8, "width": 22,
        "bev_channels": 4, "bev_x": 24, "bev_y": 24, "bev_z": 1,
        "repetitions": 3, "warmup": 1, "threads": 1, "depth_bins": 3, "seed": 0,
    }))
    return path


class TestValidateCommand:
    def test_bundled_fixture_passes(self, capsys):
        code = cli(["validate", "--grid", "20x20x2", "--seed", "3"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.count("PASS") >= 7
        assert "FAIL" not in out

    def test_run_config_augment_ranges_are_honored(self, tmp_path, capsys):
        import json

        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "augment": {
                "image": {"flip_prob": 1.0, "resize_range": [0.8, 1.2]},
                "bev": {"yaw_range_rad": [-0.5, 0.5], "scale_range": [0.9, 1.1]},
            }
        }))
        code = cli(["validate", "--grid", "16x16x2", "--seed", "5", "--config", str(cfg)])
        out = capsys.readouterr().out
        assert code == 0
        assert "FAIL" not in out


class TestFuseCommand:
    def test_fuses_three_history_frames(self, tmp_path, calib_path):
        rng = np.random.default_rng(9)
        paths = []
        for i in range(4):
            p = tmp_path / f"bev{i}.bin"
            save_tensor(p, rng.uniform(-1, 1, (24, 24, 5)).astype(np.float32))
            paths.append(str(p))
        out = tmp_path / "fused.bin"
        code = cli([
            "fuse", "--frames", *paths, "--poses", str(calib_path),
            "--out", str(out), "--range=" + RANGES,
        ])
        assert code == 0
        assert load_tensor(out).shape == (24, 24, 20)

    def test_too_few_poses_is_usage_error(self, tmp_path):
        rig, frames = bundled_rig()
        short = tmp_path / "short.json"
        save_calibration(short, rig, frames[:1])
        paths = []
        rng = np.random.default_rng(11)
        for i in range(2):
            p = tmp_path / f"bev{i}.bin"
            save_tensor(p, rng.uniform(-1, 1, (8, 8, 2)).astype(np.float32))
            paths.append(str(p))
        assert cli([
            "fuse", "--frames", *paths, "--poses", str(short),
            "--out", str(tmp_path / "f.bin"),
        ]) == 2


class TestUsage:
    def test_unknown_flag_exits_2(self, capsys):
        assert cli(["build-lut", "--nonsense"]) == 2

    def test_unknown_command_exits_2(self, capsys):
        assert cli(["frobnicate"]) == 2

    def test_no_command_exits_2(self, capsys):
        assert cli([]) == 2
