import csv
import io
import json

import pytest

from dibias.cli import main
from dibias.process_model import TransitionModel, copy_model


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_sample_model_round_trip(capsys, tmp_path):
    path = tmp_path / "m.json"
    code, _, _ = run(capsys, "sample-model", "--structure", "s3", "--seed", "4", "--out", str(path))
    assert code == 0
    m = TransitionModel.from_json(path)
    assert m.template.name == "S3" and m.seed == 4


def test_simulate_and_estimate(capsys, tmp_path):
    seq = tmp_path / "seq.csv"
    assert run(capsys, "simulate", "--seed", "1", "--n", "2000", "--out", str(seq))[0] == 0
    rows = list(csv.reader(seq.open()))
    assert rows[0] == ["t", "x", "y", "z"] and len(rows) == 2001
    code, out, _ = run(capsys, "estimate", "--sequence", str(seq), "--k", "1", "--kind", "plugin")
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["n"] == "2000" and row["kind"] == "plugin" and float(row["tdi_hat_bits"]) >= 0


def test_exact_copy_model(capsys, tmp_path):
    path = tmp_path / "copy.json"
    copy_model().to_json(path)
    code, out, _ = run(capsys, "exact", "--model", str(path), "--k", "1", "--format", "json")
    assert code == 0
    (row,) = json.loads(out)
    assert row["tdi_bits"] == pytest.approx(1.0) and row["pdi_bits"] == pytest.approx(1.0)
    assert row["di_proxy_bits"] == pytest.approx(1.0)


def test_exact_csv_columns(capsys):
    code, out, _ = run(capsys, "exact", "--structure", "S2", "--seed", "9")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["k"] for r in rows] == ["1", "2", "3"]
    assert list(rows[0]) == ["model_id", "structure", "seed", "k", "tdi_bits", "pdi_bits", "di_proxy_bits"]


def test_dsep(capsys, tmp_path):
    dot = tmp_path / "net.dot"
    code, out, _ = run(
        capsys, "dsep", "--structure", "S2", "--a", "X_10", "--b", "X_12", "--c", "X_11", "--dot", str(dot)
    )
    assert code == 0
    result = json.loads(out)
    assert result["d_separated"] is False
    assert result["witness_path"][0] == "X_10" and result["witness_path"][-1] == "X_12"
    assert dot.read_text().startswith("digraph")


def test_certify(capsys):
    code, out, _ = run(capsys, "certify", "--structure", "S1", "--seed", "2")
    assert code == 0
    cert = json.loads(out)
    assert cert["verdict"] == "NotDSeparated" and cert["l"] == 2
    assert cert["theorem1_condition"] is False


def test_experiment(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"structure": "S1", "trials": 2, "n": 3000, "kind": "plugin"}))
    code, out, _ = run(capsys, "experiment", "--config", str(cfg), "--k", "1,2", "--out", str(tmp_path / "r"))
    assert code == 0
    files = out.split()
    assert files[0].endswith("r_trials.csv") and files[1].endswith("r_summary.csv")
    assert len(list(csv.reader(open(files[1])))) == 5


def test_usage_errors(capsys):
    assert run(capsys, "exact", "--structure", "S9")[0] == 1
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys, "dsep", "--a", "Q_1", "--b", "X_2")[0] == 1
    assert main([]) == 1
    assert main(["--help"]) == 0


def test_validation_failure_exit_code(capsys, tmp_path):
    path = tmp_path / "bad.json"
    data = copy_model().to_dict()
    data["kernels"]["x"][0][0][0] = [0.9, 0.9]
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "exact", "--model", str(path))
    assert code == 2 and "NormalizationError" in err


def test_horizon_failure_exit_code(capsys):
    code, _, err = run(capsys, "certify", "--structure", "S1", "--horizon", "5")
    assert code == 2 and "HorizonError" in err
