import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from polarcp.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, main

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--n", "3000", "--seed", "7", "--out", str(out)]) == EXIT_OK
    return out / "data.csv"


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    assert main(["synth", "--n", "600", "--seed", "7", "--out", str(out)]) == EXIT_OK
    return out / "data.csv"


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestSynth:
    def test_rows_and_header(self, dataset):
        lines = dataset.read_text().splitlines()
        assert lines[1] == "id,f0,f1,f2,f3,f4,f5,f6,f7,gt_angle,gt_mag,pred_angle,pred_mag"
        assert len(lines) == 2 + 3000

    def test_byte_identical(self, dataset, tmp_path):
        assert main(["synth", "--n", "3000", "--seed", "7", "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "data.csv").read_bytes() == dataset.read_bytes()

    def test_manifest(self, dataset):
        doc = json.loads((dataset.parent / "data.manifest.json").read_text())
        assert doc["command"] == "synth"
        assert doc["parameters"] == {"n": 3000, "seed": 7, "feature_dim": 8, "out": str(dataset.parent)}
        assert doc["outputs"] == ["data.csv"]


class TestEvaluate:
    def test_grid(self, dataset, tmp_path, capsys):
        rc = main(["evaluate", "--data", str(dataset), "--alpha", "0.3,0.4", "--n-trials", "20",
                   "--n-cal", "500", "--seed", "0", "--out", str(tmp_path)])
        assert rc == EXIT_OK
        rows = _rows(tmp_path / "results.csv")
        assert len(rows) == 16
        cp_angle = next(r for r in rows if (r["method"], r["correction"], r["alpha"]) == ("cp", "none", "0.300000"))
        assert 0.67 <= float(cp_angle["mean_cov_angle"]) <= 0.76
        out = capsys.readouterr().out
        assert "bonferroni" in out and "maxrank" in out

    def test_single_cell(self, dataset, tmp_path):
        rc = main(["evaluate", "--data", str(dataset), "--method", "cp", "--correction", "sidak",
                   "--alpha", "0.3", "--n-trials", "2", "--out", str(tmp_path)])
        assert rc == EXIT_OK
        assert len(_rows(tmp_path / "results.csv")) == 1

    def test_config_file_and_override(self, dataset, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"data": str(dataset), "method": "cp", "correction": ["none"],
                                   "alpha": [0.2], "n_trials": 2, "n-cal": 300}))
        rc = main(["evaluate", "--config", str(cfg), "--alpha", "0.5", "--out", str(tmp_path)])
        assert rc == EXIT_OK
        doc = json.loads((tmp_path / "results.manifest.json").read_text())
        assert doc["parameters"]["alpha"] == [0.5]
        assert doc["parameters"]["n_cal"] == 300
        assert doc["parameters"]["method"] == ["cp"]

    def test_malformed_dataset(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("id,f0,gt_angle,gt_mag,pred_angle,pred_mag\n0,1,2,3,4,5\n1,2,3\n")
        assert main(["evaluate", "--data", str(bad), "--method", "cp", "--out", str(tmp_path)]) == EXIT_INVALID
        assert "line 3" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["evaluate", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == EXIT_IO

    @pytest.mark.parametrize(
        "extra,field",
        [
            (["--alpha", "1.2"], "alpha"),
            (["--correction", "simes"], "correction"),
            (["--method", "knn"], "method"),
            (["--n-trials", "0"], "n_trials"),
            (["--n-cal", "abc"], "n_cal"),
        ],
    )
    def test_validation_names_field(self, dataset, tmp_path, capsys, extra, field):
        assert main(["evaluate", "--data", str(dataset), "--out", str(tmp_path), *extra]) == EXIT_INVALID
        assert field in capsys.readouterr().err

    def test_unknown_flag(self, tmp_path):
        assert main(["evaluate", "--bogus", "1"]) == EXIT_INVALID

    def test_unknown_config_field(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"data": str(dataset), "colour": "blue"}))
        assert main(["evaluate", "--config", str(cfg)]) == EXIT_INVALID
        assert "colour" in capsys.readouterr().err


class TestTrainCalibrate:
    def test_train_then_calibrate(self, small_dataset, tmp_path):
        assert main(["train", "--data", str(small_dataset), "--alpha", "0.3", "--epochs", "20",
                     "--out", str(tmp_path)]) == EXIT_OK
        heads = tmp_path / "heads.json"
        assert json.loads(heads.read_text())["alpha_trained"] == 0.3
        assert main(["calibrate", "--data", str(small_dataset), "--method", "cqr", "--heads", str(heads),
                     "--correction", "sidak", "--n-cal", "300", "--out", str(tmp_path)]) == EXIT_OK
        doc = json.loads((tmp_path / "calibrator.json").read_text())
        assert (doc["method"], doc["correction"], doc["n_cal"]) == ("cqr", "sidak", 300)

    def test_cqr_needs_heads(self, small_dataset, tmp_path, capsys):
        assert main(["calibrate", "--data", str(small_dataset), "--method", "cqr", "--out", str(tmp_path)]) == EXIT_INVALID
        assert "heads" in capsys.readouterr().err

    def test_single_alpha(self, small_dataset, tmp_path):
        assert main(["train", "--data", str(small_dataset), "--alpha", "0.3,0.4", "--out", str(tmp_path)]) == EXIT_INVALID


class TestHeatmap:
    def _run(self, data, out, correction, *extra):
        return main(["heatmap", "--data", str(data), "--sample-id", "5", "--method", "cp",
                     "--correction", correction, "--n-cal", "400", "--size", "64", "--seed", "3",
                     "--out", str(out), *extra])

    def test_default_ladder_legend(self, small_dataset, tmp_path):
        assert self._run(small_dataset, tmp_path, "sidak") == EXIT_OK
        legend = json.loads((tmp_path / "heatmap_cp_sidak_5.json").read_text())
        assert len(legend) == 8

    def test_matches_goldens(self, small_dataset, tmp_path):
        for corr in ("none", "sidak"):
            assert self._run(small_dataset, tmp_path, corr) == EXIT_OK
            produced = (tmp_path / f"heatmap_cp_{corr}_5.pgm").read_bytes()
            assert produced == (GOLDEN / f"heatmap_cp_{corr}_5.pgm").read_bytes()
        assert (GOLDEN / "heatmap_cp_none_5.pgm").read_bytes() != (GOLDEN / "heatmap_cp_sidak_5.pgm").read_bytes()

    def test_deterministic_cqr(self, small_dataset, tmp_path):
        for sub in ("a", "b"):
            assert main(["heatmap", "--data", str(small_dataset), "--sample-id", "9", "--method", "cqr",
                         "--n-train", "200", "--epochs", "30", "--n-cal", "300", "--size", "48",
                         "--out", str(tmp_path / sub)]) == EXIT_OK
        name = "heatmap_cqr_sidak_9.pgm"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_angle_only(self, small_dataset, tmp_path):
        assert self._run(small_dataset, tmp_path, "none", "--angle-only") == EXIT_OK
        assert (tmp_path / "heatmap_cp_angle_5.pgm").exists()

    def test_missing_sample(self, small_dataset, tmp_path, capsys):
        rc = main(["heatmap", "--data", str(small_dataset), "--sample-id", "99999", "--out", str(tmp_path)])
        assert rc == EXIT_INVALID
        assert "sample_id" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "polarcp.cli", "synth", "--n", "5", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "data.csv").exists()
