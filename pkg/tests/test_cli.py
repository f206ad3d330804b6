"""End-to-end CLI behavior on a miniature scenario (4 stations, 1 satellite,
4 hours); artifact structure, stage composition, and exit codes."""
import filecmp

import numpy as np
import pytest

from tidwatch import cli
from tidwatch.fpm import read_grid_csv

TINY = [
    "--set", "stations=4",
    "--set", "satellites=1",
    "--set", "duration_min=240",
    "--set", "tid_duration_min=30",
    "--set", "tid_period_min=12",
    "--image-size", "32",
    "--set", "max_epochs=2",
    "--set", "batch_size=32",
    "--quorum", "2",
    "--seed", "13",
]

ARTIFACTS = [
    "checkpoint.tidm", "manifest.csv", "history.csv",
    "grid.csv", "votes.csv", "grid_fpm.csv", "metrics.csv",
]


@pytest.fixture(scope="module")
def staged_dir(tmp_path_factory):
    """Run synth/train/detect/fpm/eval as separate invocations."""
    out = tmp_path_factory.mktemp("staged")
    base = ["--out-dir", str(out), *TINY]
    assert cli.main(["synth", *base]) == 0
    data = ["--data", str(out / "data"), "--labels", str(out / "data" / "labels.csv")]
    assert cli.main(["train", *base, *data]) == 0
    assert cli.main(["detect", *base, "--data", str(out / "data")]) == 0
    assert cli.main(["fpm", *base]) == 0
    assert cli.main(["eval", *base]) == 0
    return out


class TestSynth:
    def test_default_config_writes_16_streams_and_labels(self, tmp_path):
        out = tmp_path / "synthout"
        assert cli.main(["synth", "--out-dir", str(out), "--seed", "3"]) == 0
        streams = sorted((out / "data").glob("stec_*.csv"))
        assert len(streams) == 16
        assert (out / "data" / "labels.csv").exists()

    def test_seed_changes_content_not_file_count(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out, seed in ((out_a, "1"), (out_b, "2")):
            assert cli.main(["synth", "--out-dir", str(out), *TINY[:-1], seed]) == 0
        files_a = sorted(p.name for p in (out_a / "data").glob("*.csv"))
        files_b = sorted(p.name for p in (out_b / "data").glob("*.csv"))
        assert files_a == files_b
        sample = files_a[0]
        assert (out_a / "data" / sample).read_bytes() != (out_b / "data" / sample).read_bytes()

    def test_invalid_period_is_config_error(self, tmp_path):
        code = cli.main(
            ["synth", "--out-dir", str(tmp_path), "--set", "tid_period_min=45"]
        )
        assert code == 1


class TestStages:
    def test_all_artifacts_written(self, staged_dir):
        for name in ARTIFACTS:
            assert (staged_dir / name).exists(), name

    def test_detect_grid_dimensions(self, staged_dir):
        (grid,) = read_grid_csv(staged_dir / "grid.csv")
        assert len(grid.station_ids) == 4
        # 240-minute streams, 60-minute windows -> 181 classified minutes
        assert grid.n_minutes == 181
        assert grid.start_epoch == 59 * 60

    def test_metrics_has_raw_and_fpm_rows(self, staged_dir):
        lines = (staged_dir / "metrics.csv").read_text().splitlines()
        assert lines[0].startswith("stage,")
        assert [line.split(",")[0] for line in lines[1:]] == ["raw", "fpm"]

    def test_votes_echo_threshold(self, staged_dir):
        first = (staged_dir / "votes.csv").read_text().splitlines()[0]
        assert first.startswith("# threshold=0.75")

    def test_threshold_one_alerts_nothing(self, staged_dir, tmp_path):
        out = tmp_path / "strict"
        code = cli.main(
            ["fpm", "--out-dir", str(out), "--grid", str(staged_dir / "grid.csv"),
             "--threshold", "1.0", "--quorum", "2"]
        )
        assert code == 0
        rows = (out / "votes.csv").read_text().splitlines()[2:]
        assert rows and all(row.endswith(",0") for row in rows)

    def test_threshold_zero_alerts_every_detected_minute(self, staged_dir, tmp_path):
        out = tmp_path / "loose"
        assert cli.main(
            ["fpm", "--out-dir", str(out), "--grid", str(staged_dir / "grid.csv"),
             "--threshold", "0.0", "--quorum", "1"]
        ) == 0
        (grid,) = read_grid_csv(staged_dir / "grid.csv")
        detected_minutes = (grid.states == 1).any(axis=0)
        rows = (out / "votes.csv").read_text().splitlines()[2:]
        alerts = np.array([row.endswith(",1") for row in rows])
        assert np.array_equal(alerts, detected_minutes)

    def test_image_size_mismatch_is_data_error(self, staged_dir, tmp_path):
        code = cli.main(
            ["detect", "--out-dir", str(tmp_path), "--data", str(staged_dir / "data"),
             "--checkpoint", str(staged_dir / "checkpoint.tidm"), "--image-size", "64"]
        )
        assert code == 2


class TestComposition:
    def test_run_e2e_matches_staged_pipeline(self, staged_dir, tmp_path):
        out = tmp_path / "e2e"
        assert cli.main(["run-e2e", "--out-dir", str(out), *TINY]) == 0
        for name in ARTIFACTS:
            assert filecmp.cmp(staged_dir / name, out / name, shallow=False), name
        staged_data = sorted(p.name for p in (staged_dir / "data").iterdir())
        e2e_data = sorted(p.name for p in (out / "data").iterdir())
        assert staged_data == e2e_data
        for name in staged_data:
            assert filecmp.cmp(staged_dir / "data" / name, out / "data" / name, shallow=False)


class TestErrors:
    def test_missing_label_file_names_path(self, tmp_path, capsys):
        code = cli.main(
            ["train", "--out-dir", str(tmp_path), "--data", str(tmp_path),
             "--labels", str(tmp_path / "nope.csv")]
        )
        assert code == 2
        assert "nope.csv" in capsys.readouterr().err

    def test_missing_data_dir(self, tmp_path):
        code = cli.main(
            ["detect", "--out-dir", str(tmp_path), "--data", str(tmp_path / "void")]
        )
        assert code == 2

    def test_unknown_config_key_rejected(self, tmp_path):
        assert cli.main(["synth", "--out-dir", str(tmp_path), "--set", "nope=1"]) == 1

    def test_label_grid_satellite_mismatch(self, staged_dir, tmp_path, capsys):
        rogue = tmp_path / "rogue_labels.csv"
        rogue.write_text(
            "satellite,station,start_epoch_utc_s,end_epoch_utc_s\nG09,*,0,600\n"
        )
        code = cli.main(
            ["eval", "--out-dir", str(tmp_path), "--grid", str(staged_dir / "grid.csv"),
             "--labels", str(rogue)]
        )
        assert code == 2
        assert "G09" in capsys.readouterr().err

    def test_usage_error_exits_one(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["definitely-not-a-command"])
        assert err.value.code == 1

    def test_config_file_and_overrides(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("stations = 3\nnoise_std = 0.05\n# comment\n")
        out = tmp_path / "out"
        assert cli.main(
            ["synth", "--config", str(cfg), "--out-dir", str(out),
             "--set", "satellites=1", "--seed", "2"]
        ) == 0
        assert len(list((out / "data").glob("stec_*.csv"))) == 3

    def test_bad_config_file_line(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("stations 3\n")
        assert cli.main(["synth", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 1
