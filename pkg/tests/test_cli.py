import csv
import json
import os

import numpy as np
import pytest

import wconv.cli as cli
from wconv.cli import dispatch, emit_report
from wconv.density import DensityVector
from wconv.experiments import OuterResult
from wconv.spectral import PropertyCheck
from wconv.tensors import tensor_read


MICRO_DATA = ["--n-images", "4", "--rows", "12", "--cols", "12"]
MICRO_MODEL = ["--channels", "2", "--epochs", "2", "--kernel", "3"]
MICRO_DIRECT = ["--max-evals", "6", "--max-iters", "4"]


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = dispatch(["--out-dir", str(out), *argv])
    return code, out


def read_text(path):
    with open(path, "rb") as fh:
        return fh.read()


class TestUsageErrors:
    def test_unknown_flag_exits_2(self, tmp_path, capsys):
        code, _ = run(tmp_path, "gen-data", "--bogus", "1")
        assert code == 2

    def test_missing_kernel_on_optimize_exits_2(self, tmp_path):
        code, _ = run(tmp_path, "optimize-density", *MICRO_DATA)
        assert code == 2

    def test_zero_epochs_rejected(self, tmp_path, capsys):
        code, _ = run(tmp_path, "train", *MICRO_DATA, "--kernel", "3",
                      "--epochs", "0")
        assert code == 2
        assert "epochs" in capsys.readouterr().err

    def test_threads_must_be_positive(self, tmp_path):
        assert dispatch(["--threads", "0", "verify"]) == 2


class TestGenData:
    def test_writes_pairs_and_manifest(self, tmp_path):
        code, out = run(tmp_path, "gen-data", *MICRO_DATA)
        assert code == 0
        noisy = sorted(out.glob("noisy_*.wct"))
        clean = sorted(out.glob("clean_*.wct"))
        assert len(noisy) == len(clean) == 4
        img = tensor_read(noisy[0])
        assert img.shape == (12, 12)
        manifest = json.loads((out / "dataset.json").read_text())
        assert manifest["n_images"] == 4 and manifest["rows"] == 12

    def test_byte_identical_across_runs(self, tmp_path):
        _, a = run(tmp_path, "--seed", "5", "gen-data", *MICRO_DATA, name="a")
        _, b = run(tmp_path, "--seed", "5", "gen-data", *MICRO_DATA, name="b")
        for fa in sorted(a.iterdir()):
            fb = b / fa.name
            assert read_text(fa) == read_text(fb)


class TestTrain:
    def test_report_files_written(self, tmp_path):
        code, out = run(tmp_path, "train", *MICRO_DATA, *MICRO_MODEL)
        assert code == 0
        with open(out / "train_report.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert set(rows[0]) == {"seed", "kernel", "alpha", "epochs", "lr",
                                "stride", "channels", "final_loss"}
        assert float(rows[0]["final_loss"]) > 0
        with open(out / "losses.csv", newline="") as fh:
            losses = list(csv.DictReader(fh))
        assert len(losses) == 2

    def test_density_flag_variants(self, tmp_path):
        code, out = run(tmp_path, "train", *MICRO_DATA, *MICRO_MODEL,
                        "--alpha", "0.42", name="alpha")
        assert code == 0
        code2, _ = run(tmp_path, "train", *MICRO_DATA, *MICRO_MODEL,
                       "--density-family", "gaussian", name="family")
        assert code2 == 0
        with pytest.raises(SystemExit):
            # argparse rejects unknown family before dispatch returns
            cli.build_parser().parse_args(["train", "--density-family", "bad"])

    def test_conflicting_density_flags_rejected(self, tmp_path):
        code, _ = run(tmp_path, "train", *MICRO_DATA, *MICRO_MODEL,
                      "--alpha", "0.4", "--density-family", "uniform")
        assert code == 2

    def test_train_from_data_dir(self, tmp_path):
        _, data = run(tmp_path, "gen-data", *MICRO_DATA, name="data")
        code, out = run(tmp_path, "train", *MICRO_MODEL, "--data-dir",
                        str(data), name="trained")
        assert code == 0
        assert (out / "train_report.csv").exists()

    def test_missing_data_dir_exits_1(self, tmp_path):
        code, _ = run(tmp_path, "train", *MICRO_MODEL, "--data-dir",
                      str(tmp_path / "nowhere"))
        assert code == 1

    def test_byte_identical_across_runs(self, tmp_path):
        _, a = run(tmp_path, "train", *MICRO_DATA, *MICRO_MODEL, name="a")
        _, b = run(tmp_path, "train", *MICRO_DATA, *MICRO_MODEL, name="b")
        assert read_text(a / "train_report.csv") == read_text(b / "train_report.csv")
        assert read_text(a / "losses.csv") == read_text(b / "losses.csv")


class TestOptimizeDensity:
    def test_outputs(self, tmp_path):
        code, out = run(tmp_path, "optimize-density", *MICRO_DATA, *MICRO_MODEL,
                        *MICRO_DIRECT, "--format", "text")
        assert code == 0
        with open(out / "outer_result.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert "alpha_1" in rows[0]
        assert float(rows[0]["improvement"]) >= 0.0
        with open(out / "trace.csv", newline="") as fh:
            trace = list(csv.DictReader(fh))
        assert trace and set(trace[0]) == {"iter", "evals", "best_value",
                                           "alpha_1"}
        record = json.loads((out / "optimal_density.json").read_text())
        assert record["K"] == 3
        summary = (out / "summary.txt").read_text()
        assert "improvement" in summary and "%" in summary

    def test_byte_identical_across_runs(self, tmp_path):
        _, a = run(tmp_path, "optimize-density", *MICRO_DATA, *MICRO_MODEL,
                   *MICRO_DIRECT, name="a")
        _, b = run(tmp_path, "optimize-density", *MICRO_DATA, *MICRO_MODEL,
                   *MICRO_DIRECT, name="b")
        for fname in ("outer_result.csv", "trace.csv", "optimal_density.json"):
            assert read_text(a / fname) == read_text(b / fname)


class TestSweep:
    def test_sweep_csv(self, tmp_path):
        code, out = run(tmp_path, "sweep", "--axis", "epochs", "--values",
                        "1,2", *MICRO_DATA, *MICRO_MODEL, *MICRO_DIRECT)
        assert code == 0
        with open(out / "sweep_epochs.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["axis_value"] for r in rows] == ["1", "2"]
        assert all(r["error"] == "" for r in rows)


class TestCompare:
    def test_compare_csv_all_families(self, tmp_path):
        code, out = run(tmp_path, "compare-densities", *MICRO_DATA,
                        *MICRO_MODEL, *MICRO_DIRECT)
        assert code == 0
        with open(out / "compare.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["family"] for r in rows] == ["uniform", "linear", "gaussian",
                                               "cubic", "optimal"]
        assert (out / "optimal_density.json").exists()


class TestBench:
    def test_bench_csv(self, tmp_path):
        code, out = run(tmp_path, "bench", "--kernels", "3", "--out-channels",
                        "1", "--image-shape", "1,1,32,32", "--repeats", "10")
        assert code == 0
        with open(out / "bench.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert float(rows[0]["ratio"]) > 0


class TestVerify:
    def test_seven_pass_lines_exit_zero(self, tmp_path, capsys):
        code, out = run(tmp_path, "verify", "--instances", "3", "--sizes",
                        "8", "--young-triples", "10")
        lines = [l for l in capsys.readouterr().out.splitlines() if "PASS" in l]
        assert code == 0
        assert len(lines) == 7
        with open(out / "verify.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 7 and all(r["result"] == "PASS" for r in rows)

    def test_failing_property_exits_one(self, tmp_path, monkeypatch):
        fake = [PropertyCheck("convolution_theorem", 1, 1.0, 1e-9, False)]
        monkeypatch.setattr(cli, "run_verification",
                            lambda *a, **k: fake)
        code, _ = run(tmp_path, "verify")
        assert code == 1


class TestConfigFile:
    def test_config_supplies_defaults_flags_override(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({
            "dataset": {"n_images": 4, "rows": 12, "cols": 12},
            "model": {"channels": 2, "epochs": 5, "kernel": 3},
        }))
        code, out = run(tmp_path, "--config", str(cfg_file), "train",
                        "--epochs", "2")
        assert code == 0
        with open(out / "train_report.csv", newline="") as fh:
            row = next(csv.DictReader(fh))
        assert row["epochs"] == "2"
        assert row["channels"] == "2"


class TestOutDirDiscipline:
    def test_env_var_default(self, tmp_path, monkeypatch):
        target = tmp_path / "from-env"
        monkeypatch.setenv("WCONV_OUT_DIR", str(target))
        monkeypatch.chdir(tmp_path)
        assert dispatch(["gen-data", *MICRO_DATA]) == 0
        assert (target / "dataset.json").exists()

    def test_nothing_written_outside_out_dir(self, tmp_path, monkeypatch):
        scratch = tmp_path / "cwd"
        scratch.mkdir()
        monkeypatch.chdir(scratch)
        before = set(os.listdir(scratch))
        code, out = run(tmp_path, "train", *MICRO_DATA, *MICRO_MODEL)
        assert code == 0
        assert set(os.listdir(scratch)) == before


class TestEmitReport:
    def make_result(self):
        return OuterResult(alpha=DensityVector(np.array([0.42, 1.0, 0.42])),
                           objective=0.044, baseline=0.05, improvement=0.12,
                           evals=40, iterations=20, trace=[], bounds=(0.0, 2.0))

    def test_csv_schema(self, tmp_path):
        path = tmp_path / "r.csv"
        emit_report(self.make_result(), "csv", str(path))
        with open(path, newline="") as fh:
            row = next(csv.DictReader(fh))
        assert row["alpha_1"] == "0.42"
        assert float(row["improvement"]) == 0.12

    def test_text_includes_percentage(self, tmp_path):
        path = tmp_path / "r.txt"
        emit_report(self.make_result(), "text", str(path))
        text = path.read_text()
        assert "12.0%" in text

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report(self.make_result(), "yaml", str(tmp_path / "r"))
