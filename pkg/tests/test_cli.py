import json

import numpy as np
import pytest

from relulasso.cli import main
from relulasso.dataio import emit_csv, ingest_csv, load_model, synthetic_ecg


@pytest.fixture
def demo_files(tmp_path):
    data = tmp_path / "data.csv"
    labels = tmp_path / "labels.csv"
    data.write_text("2,2\n3,3\n1,0\n")
    labels.write_text("1\n2\n3\n")
    return str(data), str(labels)


def run(*argv):
    return main([str(a) for a in argv])


class TestArrangements:
    def test_exact_json(self, demo_files, tmp_path):
        data, _ = demo_files
        out = tmp_path / "patterns.json"
        assert run("arrangements", "--data", data, "--exact", "--out", out) == 0
        obj = json.loads(out.read_text())
        assert obj == {"n": 3, "patterns": ["001", "110", "111"]}

    def test_sampled_json_deterministic(self, demo_files, tmp_path, capsys):
        data, _ = demo_files
        out1, out2 = tmp_path / "p1.json", tmp_path / "p2.json"
        run("arrangements", "--data", data, "--samples", 200, "--seed", 4, "--out", out1)
        run("arrangements", "--data", data, "--samples", 200, "--seed", 4, "--out", out2)
        assert out1.read_bytes() == out2.read_bytes()
        assert "seed 4" in capsys.readouterr().out


class TestTrainPredictEval:
    def test_round_trip(self, demo_files, tmp_path, capsys):
        data, labels = demo_files
        model = tmp_path / "model.json"
        assert run("train", "--data", data, "--labels", labels, "--beta", 0.1,
                   "--exact", "--tol", 1e-8, "--out", model) == 0
        printed = capsys.readouterr().out
        assert "objective:" in printed and "gap:" in printed
        train_mse_line = [l for l in printed.splitlines() if "train_mse:" in l][0]
        train_mse = float(train_mse_line.split("train_mse:")[1])
        yhat = tmp_path / "yhat.csv"
        assert run("predict", "--model", model, "--data", data, "--out", yhat) == 0
        capsys.readouterr()
        assert run("eval", "--model", model, "--data", data, "--labels", labels) == 0
        mse_line = capsys.readouterr().out.strip()
        mse = float(mse_line.split("mse:")[1])
        preds = ingest_csv(str(yhat)).entries[0]
        y = np.array([1.0, 2.0, 3.0])
        assert mse == pytest.approx(float(np.mean((preds - y) ** 2)), abs=1e-12)
        assert mse == pytest.approx(train_mse, abs=1e-10)

    def test_zero_width_predicts_zero(self, demo_files, tmp_path):
        data, labels = demo_files
        model = tmp_path / "model.json"
        run("train", "--data", data, "--labels", labels, "--beta", 1000.0,
            "--exact", "--out", model)
        assert load_model(str(model)).m == 0
        yhat = tmp_path / "yhat.csv"
        run("predict", "--model", model, "--data", data, "--out", yhat)
        assert np.array_equal(ingest_csv(str(yhat)).entries[0], np.zeros(3))

    def test_train_certify_exit_codes(self, demo_files, tmp_path, capsys):
        data, labels = demo_files
        model = tmp_path / "model.json"
        run("train", "--data", data, "--labels", labels, "--beta", 0.1,
            "--exact", "--tol", 1e-8, "--out", model)
        capsys.readouterr()
        code = run("certify", "--model", model, "--data", data, "--labels", labels,
                   "--beta", 0.1, "--exact", "--tol", 1e-6)
        assert code == 0
        out = capsys.readouterr().out
        gap = float([l for l in out.splitlines() if l.startswith("gap:")][0].split(":")[1])
        assert gap <= 1e-6
        # a deliberately bad model fails certification
        code = run("certify", "--model", model, "--data", data, "--labels", labels,
                   "--beta", 10.0, "--exact", "--tol", 1e-6)
        assert code == 1

    def test_missing_file_errors(self, tmp_path, capsys):
        code = run("predict", "--model", tmp_path / "nope.json",
                   "--data", tmp_path / "nope.csv", "--out", tmp_path / "o.csv")
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestSgdAndPath:
    def test_train_sgd_writes_model_and_trace(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        data = tmp_path / "d.csv"
        labels = tmp_path / "y.csv"
        emit_csv(str(data), rng.standard_normal((12, 2)))
        emit_csv(str(labels), rng.standard_normal(12))
        model = tmp_path / "m.json"
        trace = tmp_path / "t.csv"
        assert run("train-sgd", "--data", data, "--labels", labels, "--width", 4,
                   "--lr", 0.01, "--epochs", 20, "--restarts", 2, "--seed", 3,
                   "--weight-decay", 0.05, "--out", model, "--trace-out", trace) == 0
        assert "seed: 3" in capsys.readouterr().out
        lines = trace.read_text().splitlines()
        assert lines[0] == "epoch,objective"
        assert len(lines) == 22
        assert load_model(str(model)).m == 4

    def test_path_csv(self, demo_files, tmp_path):
        data, labels = demo_files
        out = tmp_path / "path.csv"
        assert run("path", "--data", data, "--labels", labels,
                   "--betas", "14,1,0.1", "--exact", "--tol", 1e-7,
                   "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "beta,objective,gap,active_groups,train_mse"
        assert len(lines) == 4
        first = lines[1].split(",")
        assert float(first[0]) == 14.0  # beta_max for this instance is ~13.6
        assert int(first[3]) == 0

    def test_path_single_threshold_row(self, demo_files, tmp_path):
        data, labels = demo_files
        out = tmp_path / "path1.csv"
        # beta above the zero-solution threshold: one row, no active groups
        run("path", "--data", data, "--labels", labels, "--betas", "13.7014705",
            "--exact", "--out", out)
        row = out.read_text().splitlines()[1].split(",")
        assert int(row[3]) == 0


class TestSeriesCommands:
    def test_ar_emits_four_csvs(self, tmp_path):
        series = tmp_path / "s.csv"
        emit_csv(str(series), synthetic_ecg(64, seed=2))
        assert run("ar", "--series", series, "--lags", 3, "--split", 0.8,
                   "--out-prefix", tmp_path / "ar") == 0
        Xtr = ingest_csv(str(tmp_path / "ar_X_train.csv"))
        ytr = ingest_csv(str(tmp_path / "ar_y_train.csv"))
        Xte = ingest_csv(str(tmp_path / "ar_X_test.csv"))
        assert Xtr.d == 3 and Xtr.n == int(np.floor(0.8 * 61))
        assert ytr.n == Xtr.n
        assert Xte.n == 61 - Xtr.n

    def test_train_1d(self, tmp_path, capsys):
        series = tmp_path / "s.csv"
        emit_csv(str(series), synthetic_ecg(40, seed=5))
        model = tmp_path / "m1d.json"
        dico = tmp_path / "dico.csv"
        assert run("train-1d", "--series", series, "--beta", 0.05, "--activation",
                   "relu", "--intercept", "--out", model, "--dict-out", dico) == 0
        out = capsys.readouterr().out
        assert "objective:" in out and "intercept:" in out
        net = load_model(str(model))
        assert net.bias is not None
        assert len(dico.read_text().splitlines()) == 40  # header + 39 rows

    def test_wedge_command(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        data = tmp_path / "d.csv"
        labels = tmp_path / "y.csv"
        emit_csv(str(data), rng.standard_normal((6, 2)))
        emit_csv(str(labels), rng.standard_normal(6))
        dico = tmp_path / "wd.csv"
        assert run("wedge", "--data", data, "--labels", labels, "--beta", 0.2,
                   "--p", 2, "--dict-out", dico) == 0
        out = capsys.readouterr().out
        assert "objective:" in out and "support:" in out
        header = dico.read_text().splitlines()[0]
        assert header.split(",") == [str(j) for j in range(6)]


class TestDeterminism:
    def test_train_byte_identical_modulo_timestamp(self, demo_files, tmp_path):
        data, labels = demo_files
        m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
        run("train", "--data", data, "--labels", labels, "--beta", 0.1,
            "--exact", "--tol", 1e-7, "--out", m1)
        run("train", "--data", data, "--labels", labels, "--beta", 0.1,
            "--exact", "--tol", 1e-7, "--out", m2)
        a = json.loads(m1.read_text())
        b = json.loads(m2.read_text())
        a["provenance"].pop("created_at")
        b["provenance"].pop("created_at")
        assert a == b
