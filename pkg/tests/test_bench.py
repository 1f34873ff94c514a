"""Benchmark harness: synthesis determinism, timing bookkeeping, CSV."""

import numpy as np
import pytest

from fastray.bench import (
    BenchConfig,
    MethodStats,
    SUITE,
    config_grid,
    dumps_csv,
    loads_csv,
    read_csv,
    run_benchmark,
    suite_config,
    synth_depth,
    synth_features,
    write_csv,
)
from fastray.calib import bundled_rig


def tiny_config(**overrides) -> BenchConfig:
    base = dict(
        name="tiny", channels=4, height=8, width=22, bev_channels=4,
        bev_x=24, bev_y=24, bev_z=1, repetitions=3, warmup=1, threads=1,
        depth_bins=3, seed=0,
    )
    base.update(overrides)
    return BenchConfig(**base)


class TestSynth:
    def test_same_seed_is_bit_identical(self):
        cfg = tiny_config()
        a = synth_features(cfg)
        b = synth_features(cfg)
        assert a.data.tobytes() == b.data.tobytes()

    def test_different_seed_differs(self):
        cfg = tiny_config()
        assert not np.array_equal(synth_features(cfg, seed=1).data, synth_features(cfg).data)

    def test_value_range(self):
        data = synth_features(tiny_config()).data
        assert data.min() >= -1.0 and data.max() <= 1.0

    def test_shape_matches_config(self):
        cfg = tiny_config()
        assert synth_features(cfg).data.shape == (6, 4, 8, 22)

    def test_depth_weights_are_valid(self):
        cfg = tiny_config()
        depth = synth_depth(cfg, config_grid(cfg))
        assert depth.data.shape == (6, 3, 8, 22)
        assert depth.data.min() >= 0.0
        assert np.all(np.diff(depth.bin_depths) > 0)


class TestConfig:
    def test_suite_covers_s1_to_s6(self):
        assert sorted(SUITE) == [f"s{i}" for i in range(1, 7)]
        s1 = suite_config("s1")
        assert (s1.channels, s1.height, s1.width) == (64, 16, 44)
        assert (s1.bev_x, s1.bev_y, s1.bev_z) == (128, 128, 1)
        s6 = suite_config("s6")
        assert (s6.channels, s6.height, s6.width) == (128, 64, 176)
        assert (s6.bev_x, s6.bev_y, s6.bev_z) == (256, 256, 1)

    def test_dims_ramp_monotonically(self):
        rows = [SUITE[f"s{i}"] for i in range(1, 7)]
        for a, b in zip(rows, rows[1:]):
            assert all(x <= y for x, y in zip(a, b))

    def test_rejects_too_few_repetitions(self):
        with pytest.raises(ValueError, match="repetitions"):
            tiny_config(repetitions=2)

    def test_unknown_suite(self):
        with pytest.raises(ValueError, match="unknown suite"):
            suite_config("s9")


class TestRunBenchmark:
    def test_sample_counts_and_report_fields(self):
        rig, _ = bundled_rig()
        report = run_benchmark(tiny_config(), rig)
        for method in ("fast_ray", "naive", "lss_reference"):
            stats = report.methods[method]
            assert len(stats.samples) == 3
            assert stats.median >= stats.min > 0.0
        assert report.lut_build_s > 0.0
        assert len(report.fast_alloc_excl.samples) == 3
        assert report.env["threads"] == "1"

    def test_fast_beats_naive_on_small_suite_configs(self):
        rig, _ = bundled_rig()
        for name in ("s1", "s2"):
            cfg = suite_config(name, repetitions=3, warmup=1, threads=1)
            report = run_benchmark(cfg, rig)
            assert report.methods["fast_ray"].median < report.methods["naive"].median

    def test_apply_profile_contains_no_projection_code(self):
        rig, _ = bundled_rig()
        report = run_benchmark(tiny_config(), rig)
        assert report.projection_free
        assert report.fast_call_graph
        assert not any("geometry" in f or "project" in f for f in report.fast_call_graph)


class TestCsv:
    def test_round_trip_is_string_exact(self, tmp_path):
        rig, _ = bundled_rig()
        report = run_benchmark(tiny_config(), rig)
        path = tmp_path / "report.csv"
        write_csv(path, [report])
        text = path.read_text()
        again = read_csv(path)
        assert dumps_csv(again) == text

    def test_one_row_per_method(self):
        rig, _ = bundled_rig()
        text = dumps_csv([run_benchmark(tiny_config(), rig)])
        lines = text.strip().splitlines()
        assert len(lines) == 1 + 3
        assert lines[0].startswith("schema_version,name,method")

    def test_schema_mismatch_rejected(self):
        with pytest.raises(ValueError, match="schema"):
            loads_csv("bogus,columns\n1,2\n")

    def test_multi_report_round_trip(self):
        rig, _ = bundled_rig()
        reports = [
            run_benchmark(tiny_config(name="a", seed=0), rig),
            run_benchmark(tiny_config(name="b", seed=1), rig),
        ]
        text = dumps_csv(reports)
        again = loads_csv(text)
        assert len(again) == 2
        assert dumps_csv(again) == text


class TestMethodStats:
    def test_stats_summaries(self):
        stats = MethodStats((3.0, 1.0, 2.0))
        assert stats.min == 1.0
        assert stats.median == 2.0
        assert stats.mean == pytest.approx(2.0)
        assert stats.p95 == pytest.approx(2.9)

    def test_rejects_non_positive_times(self):
        with pytest.raises(ValueError, match="positive"):
            MethodStats((1.0, 0.0))
