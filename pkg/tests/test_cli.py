"""CLI commands, exit codes, and output formats."""

import json

import numpy as np
import pytest

from gpnam import cli, data, model, rff
from gpnam.solvers import sigmoid


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def synth_csv(tmp_path, capsys):
    path = tmp_path / "synth.csv"
    code, _, _ = run(capsys, "synth", "--out", str(path), "--n", "800", "--d", "2",
                     "--noise-sd", "0.1", "--seed", "3")
    assert code == 0
    return str(path)


@pytest.fixture
def clf_csv(tmp_path):
    rng = np.random.default_rng(8)
    X = rng.uniform(-2, 2, (900, 2))
    logit = 1.5 * np.tanh(2 * X[:, 0]) - X[:, 1]
    y = (rng.uniform(size=900) < sigmoid(logit)).astype(int)
    lines = ["a,b,y"] + [f"{float(X[i, 0])!r},{float(X[i, 1])!r},{y[i]}"
                         for i in range(900)]
    path = tmp_path / "clf.csv"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestSynth:
    def test_deterministic_output(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            code, _, _ = run(capsys, "synth", "--out", str(p), "--n", "50",
                             "--d", "3", "--seed", "4")
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_requires_out(self, capsys):
        code, _, err = run(capsys, "synth", "--n", "10")
        assert code == 1

    def test_header(self, synth_csv):
        with open(synth_csv) as fh:
            assert fh.readline().strip() == "x1,x2,y"


class TestTrain:
    def test_regression_end_to_end(self, tmp_path, synth_csv, capsys):
        mpath = tmp_path / "m.json"
        code, out, _ = run(capsys, "train", "--data", synth_csv, "--target", "y",
                           "--task", "reg", "--model", str(mpath), "--S", "32")
        assert code == 0
        doc = json.loads(out)
        assert doc["solver"]["converged"]
        assert doc["validation"][0]["metric"] == "rmse"
        assert doc["config"]["backend"] in ("numba", "numpy")
        assert mpath.exists()

    def test_classification_end_to_end(self, tmp_path, clf_csv, capsys):
        mpath = tmp_path / "mc.json"
        code, out, _ = run(capsys, "train", "--data", clf_csv, "--target", "y",
                           "--task", "clf", "--model", str(mpath), "--S", "16",
                           "--sgd-epochs", "300", "--sgd-lr", "0.5")
        assert code == 0  # early stopping on validation counts as success
        doc = json.loads(out)
        assert doc["solver"]["converged"] or doc["solver"]["stopped_early"]
        metrics_by_name = {m["metric"]: m["value"] for m in doc["validation"]}
        assert 0.6 <= metrics_by_name["auc"] <= 1.0
        m = model.load(mpath)
        assert m.task == "binary_classification"

    def test_undertrained_run_flags_not_converged(self, tmp_path, clf_csv, capsys):
        code, out, _ = run(capsys, "train", "--data", clf_csv, "--target", "y",
                           "--task", "clf", "--model", str(tmp_path / "m.json"),
                           "--S", "16", "--sgd-epochs", "3")
        assert code == 3
        assert (tmp_path / "m.json").exists()  # model still saved, flagged

    @pytest.mark.parametrize("mode", ["grid", "mc"])
    def test_byte_identical_reruns(self, tmp_path, synth_csv, capsys, mode):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for p in (a, b):
            code, _, _ = run(capsys, "train", "--data", synth_csv, "--target", "y",
                             "--task", "reg", "--model", str(p), "--S", "32",
                             "--mode", mode, "--seed", "1")
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_auto_bandwidth_reaches_noise_floor(self, tmp_path, capsys):
        csv = tmp_path / "nf.csv"
        code, _, _ = run(capsys, "synth", "--out", str(csv), "--n", "5000",
                         "--d", "3", "--noise-sd", "0.1", "--seed", "2")
        assert code == 0
        code, out, _ = run(capsys, "train", "--data", str(csv), "--target", "y",
                           "--task", "reg", "--model", str(tmp_path / "m.json"),
                           "--bandwidth-scale", "auto", "--seed", "0")
        assert code == 0
        doc = json.loads(out)
        rmse_val = next(m["value"] for m in doc["validation"] if m["metric"] == "rmse")
        assert rmse_val <= 1.2 * 0.1

    def test_auto_bandwidth_recorded(self, tmp_path, synth_csv, capsys):
        mpath = tmp_path / "m.json"
        code, out, _ = run(capsys, "train", "--data", synth_csv, "--target", "y",
                           "--task", "reg", "--model", str(mpath), "--S", "32",
                           "--bandwidth-scale", "auto")
        assert code == 0
        doc = json.loads(out)
        assert doc["chosen_bandwidth_scale"] in cli.BANDWIDTH_GRID
        assert len(doc["bandwidth_search"]) == len(cli.BANDWIDTH_GRID)
        assert model.load(mpath).bandwidth_scale == doc["chosen_bandwidth_scale"]

    def test_zero_basis_size_is_usage_error(self, tmp_path, synth_csv, capsys):
        code, _, err = run(capsys, "train", "--data", synth_csv, "--target", "y",
                           "--task", "reg", "--model", str(tmp_path / "m.json"),
                           "--S", "0")
        assert code == 1

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        code, _, _ = run(capsys, "train", "--data", str(tmp_path / "nope.csv"),
                         "--target", "y", "--task", "reg",
                         "--model", str(tmp_path / "m.json"))
        assert code == 2

    def test_interactions_accepted(self, tmp_path, synth_csv, capsys):
        mpath = tmp_path / "mi.json"
        code, _, _ = run(capsys, "train", "--data", synth_csv, "--target", "y",
                         "--task", "reg", "--model", str(mpath), "--S", "8",
                         "--interactions", "0:1")
        assert code == 0
        m = model.load(mpath)
        assert [(i, j) for (i, j, _) in m.interactions] == [(0, 1)]
        assert m.basis.pair_z is not None


class TestPredict:
    def _zero_weight_model(self, tmp_path, w0=0.25, d=2):
        basis = rff.build_basis(8, "grid", 0)
        m = model.GPNAMModel(basis=basis, feature_names=[f"x{i+1}" for i in range(d)],
                             task="regression", w0=w0, W=np.zeros((d, 8)),
                             b=np.ones(d), standardization=(np.zeros(d), np.ones(d)),
                             centering_offsets=np.zeros(d))
        path = tmp_path / "zero.json"
        model.save(m, path)
        return str(path)

    def test_constant_prediction(self, tmp_path, synth_csv, capsys):
        mpath = self._zero_weight_model(tmp_path)
        out_csv = tmp_path / "p.csv"
        code, _, _ = run(capsys, "predict", "--data", synth_csv, "--model", mpath,
                         "--out", str(out_csv))
        assert code == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "row_id,prediction"
        values = {float(line.split(",")[1]) for line in lines[1:]}
        assert values == {0.25}

    def test_missing_feature_column(self, tmp_path, capsys):
        mpath = self._zero_weight_model(tmp_path, d=3)
        bad = tmp_path / "bad.csv"
        bad.write_text("x1,x2\n1,2\n")
        code, _, _ = run(capsys, "predict", "--data", str(bad), "--model", mpath,
                         "--out", str(tmp_path / "p.csv"))
        assert code == 2

    def test_round_trip_matches_in_process(self, tmp_path, synth_csv, capsys):
        mpath = tmp_path / "m.json"
        code, _, _ = run(capsys, "train", "--data", synth_csv, "--target", "y",
                         "--task", "reg", "--model", str(mpath), "--S", "16")
        assert code == 0
        out_csv = tmp_path / "p.csv"
        code, _, _ = run(capsys, "predict", "--data", synth_csv, "--model",
                         str(mpath), "--out", str(out_csv))
        assert code == 0
        got = np.array([float(l.split(",")[1])
                        for l in out_csv.read_text().strip().splitlines()[1:]])
        m = model.load(mpath)
        X, _, _, _ = data.load_features(synth_csv, m.feature_names,
                                        [{"kind": "numeric"}] * 2)
        want = model.predict(m, X)
        assert np.max(np.abs(got - want)) < 1e-12


class TestEvaluate:
    def test_metric_objects(self, tmp_path, synth_csv, capsys):
        mpath = tmp_path / "m.json"
        run(capsys, "train", "--data", synth_csv, "--target", "y", "--task", "reg",
            "--model", str(mpath), "--S", "16")
        code, out, _ = run(capsys, "evaluate", "--data", synth_csv, "--target", "y",
                           "--model", str(mpath))
        assert code == 0
        doc = json.loads(out)
        names = {m["metric"] for m in doc["metrics"]}
        assert names == {"mse", "rmse"}
        for row in doc["metrics"]:
            assert set(row) == {"metric", "value", "n", "dataset", "model"}


class TestShapes:
    def test_zero_weight_model(self, tmp_path, synth_csv, capsys):
        basis = rff.build_basis(8, "grid", 0)
        m = model.GPNAMModel(basis=basis, feature_names=["x1", "x2"],
                             task="regression", w0=1.0, W=np.zeros((2, 8)),
                             b=np.ones(2), standardization=(np.zeros(2), np.ones(2)),
                             centering_offsets=np.zeros(2),
                             feature_ranges=(np.array([-2.0, -2.0]),
                                             np.array([2.0, 2.0])))
        mpath = tmp_path / "m.json"
        model.save(m, mpath)
        out_csv = tmp_path / "shapes.csv"
        code, _, _ = run(capsys, "shapes", "--model", str(mpath), "--out",
                         str(out_csv), "--grid-points", "16")
        assert code == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "feature,x,f"
        assert len(lines) == 1 + 2 * 16
        assert all(float(l.split(",")[2]) == 0.0 for l in lines[1:])

    def test_density_written_with_data(self, tmp_path, synth_csv, capsys):
        mpath = tmp_path / "m.json"
        run(capsys, "train", "--data", synth_csv, "--target", "y", "--task", "reg",
            "--model", str(mpath), "--S", "8")
        out_csv = tmp_path / "shapes.csv"
        code, _, _ = run(capsys, "shapes", "--model", str(mpath), "--out",
                         str(out_csv), "--data", synth_csv)
        assert code == 0
        dens = tmp_path / "shapes_density.csv"
        assert dens.exists()
        lines = dens.read_text().strip().splitlines()
        assert lines[0] == "feature,bin_left,bin_right,count"
        counts = [int(l.split(",")[3]) for l in lines[1:]]
        assert sum(counts) == 2 * 800  # every row lands in a bin, per feature

    def test_exported_values_match_shape_function(self, tmp_path, synth_csv, capsys):
        mpath = tmp_path / "m.json"
        run(capsys, "train", "--data", synth_csv, "--target", "y", "--task", "reg",
            "--model", str(mpath), "--S", "16")
        out_csv = tmp_path / "shapes.csv"
        code, _, _ = run(capsys, "shapes", "--model", str(mpath), "--out",
                         str(out_csv), "--grid-points", "32")
        assert code == 0
        m = model.load(mpath)
        mins, maxs = m.feature_ranges
        rows = [l.split(",") for l in out_csv.read_text().strip().splitlines()[1:]]
        for i, name in enumerate(m.feature_names):
            got = np.array([float(r[2]) for r in rows if r[0] == name])
            table = model.shape_function(m, i, np.linspace(mins[i], maxs[i], 32))
            want = np.array([float(f"{v:.9g}") for v in table.values])
            assert np.array_equal(got, want)

    def test_too_few_grid_points(self, tmp_path, synth_csv, capsys):
        mpath = tmp_path / "m.json"
        run(capsys, "train", "--data", synth_csv, "--target", "y", "--task", "reg",
            "--model", str(mpath), "--S", "8")
        code, _, _ = run(capsys, "shapes", "--model", str(mpath), "--out",
                         str(tmp_path / "s.csv"), "--grid-points", "1")
        assert code == 1


class TestKernelCheck:
    def test_report_schema_and_bounds(self, tmp_path, capsys):
        out = tmp_path / "kc.json"
        code, _, _ = run(capsys, "kernel-check", "--seed", "0", "--out", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        assert set(doc) >= {"probes", "approximation", "grid_self_consistency",
                            "integral_identity", "config"}
        assert {row["S"] for row in doc["approximation"]} == set(cli.KERNEL_CHECK_SIZES)
        for row in doc["grid_self_consistency"]:
            assert row["max_abs_err"] <= 1e-10
        med = {(r["S"], r["mode"]): r["median_abs_err"] for r in doc["approximation"]}
        assert med[(2000, "monte_carlo")] < med[(50, "monte_carlo")]
        assert med[(2000, "grid")] < med[(50, "grid")]
        for row in doc["integral_identity"]:
            assert row["abs_err"] <= 0.02


class TestConfigFile:
    def test_flags_override_config(self, tmp_path, synth_csv, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"S": 8, "seed": 5}))
        mpath = tmp_path / "m.json"
        code, out, _ = run(capsys, "train", "--data", synth_csv, "--target", "y",
                           "--task", "reg", "--model", str(mpath),
                           "--config", str(cfg), "--S", "16")
        assert code == 0
        doc = json.loads(out)
        assert doc["config"]["S"] == 16
        assert doc["config"]["seed"] == 5
        assert model.load(mpath).S == 16

    def test_unknown_key_rejected(self, tmp_path, synth_csv, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"wibble": 1}))
        code, _, _ = run(capsys, "train", "--data", synth_csv, "--target", "y",
                         "--task", "reg", "--model", str(tmp_path / "m.json"),
                         "--config", str(cfg))
        assert code == 1


class TestUsage:
    def test_predict_without_model(self, capsys, tmp_path):
        d = tmp_path / "d.csv"
        d.write_text("a\n1\n")
        code, _, _ = run(capsys, "predict", "--data", str(d))
        assert code == 1

    def test_unknown_command(self, capsys):
        assert cli.main(["nonsense"]) == 1

    def test_no_command(self, capsys):
        assert cli.main([]) == 1

    def test_unparseable_flag_value(self, capsys):
        assert cli.main(["train", "--S", "abc"]) == 1

    def test_bad_mode_in_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"mode": "quasi"}))
        assert cli.main(["kernel-check", "--config", str(cfg)]) == 1
