import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from omnisim.cli import LINKS, WEIGHT_STREAM, main
from omnisim.data_io import philox
from omnisim.learners import MultiIndexModel


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture
def realizable(tmp_path):
    out = tmp_path / "gen"
    assert main(["--seed", "7", "--out", str(out), "generate", "--model", "realizable", "--d", "5",
                 "--n", "10000"]) == 0
    return out


def test_generate_writes_two_identical_files(tmp_path, realizable):
    assert sorted(p.name for p in realizable.iterdir()) == ["data.csv", "data.json"]
    again = tmp_path / "again"
    assert main(["--seed", "7", "--out", str(again), "generate", "--model", "realizable", "--d", "5",
                 "--n", "10000"]) == 0
    for name in ("data.csv", "data.json"):
        assert (realizable / name).read_bytes() == (again / name).read_bytes()


def test_generate_agnostic(tmp_path):
    assert main(["--out", str(tmp_path), "generate", "--model", "agnostic", "--preset", "xor2d", "--d", "2",
                 "--n", "50", "--name", "x"]) == 0
    assert json.loads((tmp_path / "x.json").read_text())["generator"] == "agnostic-xor2d"
    assert main(["--out", str(tmp_path), "generate", "--model", "agnostic", "--preset", "xor2d", "--d", "1",
                 "--n", "50"]) == 2


def test_usage_errors(tmp_path):
    assert main(["generate", "--bogus"]) == 2
    assert main(["--out", str(tmp_path), "repro", "nope"]) == 2
    assert main(["train", "--algo", "pav"]) == 2


def test_missing_data_is_io_error(tmp_path):
    assert main(["--out", str(tmp_path), "train", "--algo", "pav", "--data", str(tmp_path / "none.csv")]) == 3


def test_console_script_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "omnisim.cli", "generate", "--bogus"], capture_output=True)
    assert proc.returncode == 2


def test_train_pav_and_eval(tmp_path):
    assert main(["--seed", "1", "--out", str(tmp_path), "generate", "--model", "agnostic", "--d", "1",
                 "--n", "500"]) == 0
    data = str(tmp_path / "data.csv")
    assert main(["--out", str(tmp_path), "train", "--algo", "pav", "--data", data]) == 0
    model = json.loads((tmp_path / "model.json").read_text())
    assert model["direction"] == "inc" and len(model["values"]) == len(model["thresholds"]) + 1
    assert main(["--out", str(tmp_path), "eval-omnigap", "--model", str(tmp_path / "model.json"), "--data", data,
                 "--grid-eps", "0.1", "--grid-cap", "13"]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["max_omnigap"] <= 1e-9
    assert set(summary) == {"max_omnigap", "argmax_omnigap", "max_pl_gap", "argmax_pl_gap", "n_links",
                            "n_weights", "grid_eps", "grid_cap", "n"}
    rows = read_csv(tmp_path / "eval.csv")
    assert rows[0] == ["link_id", "weight_id", "omnigap", "pl_gap"]
    assert len(rows) - 1 == summary["n_links"] * summary["n_weights"]


def test_pav_rejects_multifeature_data(tmp_path, realizable):
    assert main(["--out", str(tmp_path), "train", "--algo", "pav", "--data", str(realizable / "data.csv")]) == 2


def test_isotron_trace_rows(tmp_path):
    assert main(["--out", str(tmp_path), "generate", "--d", "3", "--n", "300"]) == 0
    assert main(["--out", str(tmp_path), "train", "--algo", "isotron", "--data", str(tmp_path / "data.csv"),
                 "--T", "12"]) == 0
    rows = read_csv(tmp_path / "trace.csv")
    assert rows[0] == ["t", "sq_loss", "grad_norm"] and len(rows) - 1 == 13
    MultiIndexModel.from_json((tmp_path / "model.json").read_text())


def test_omnitron_stream_exhausted(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "generate", "--d", "2", "--n", "20"]) == 0
    code = main(["--out", str(tmp_path), "train", "--algo", "omnitron", "--data", str(tmp_path / "data.csv"),
                 "--T", "50"])
    assert code == 1
    assert "T = 50" in capsys.readouterr().err


def test_ideal_omnitron_train_and_eval_deterministic(tmp_path):
    assert main(["--out", str(tmp_path), "generate", "--model", "agnostic", "--d", "2", "--n", "200"]) == 0
    data = str(tmp_path / "data.csv")
    outs = []
    for k in range(2):
        run = tmp_path / f"run{k}"
        assert main(["--out", str(run), "train", "--algo", "ideal-omnitron", "--data", data, "--T", "10"]) == 0
        assert main(["--out", str(run), "eval-omnigap", "--model", str(run / "model.json"), "--data", data,
                     "--grid-eps", "0.25", "--grid-cap", "8"]) == 0
        outs.append([(run / f).read_bytes() for f in ("model.json", "trace.csv", "eval.csv", "summary.json")])
    assert outs[0] == outs[1]


def test_eval_bayes_optimal_model(tmp_path, realizable):
    w = philox(7, WEIGHT_STREAM).standard_normal(5)
    w /= np.linalg.norm(w)
    model = MultiIndexModel([(LINKS["logistic"](1.0), w)], R=1.0, L=1.0)
    (tmp_path / "bayes.json").write_text(model.to_json())
    assert main(["--out", str(tmp_path), "eval-omnigap", "--model", str(tmp_path / "bayes.json"), "--data",
                 str(realizable / "data.csv"), "--grid-eps", "0.1", "--grid-cap", "6"]) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["max_omnigap"] <= 1e-10


def test_eval_shape_mismatch(tmp_path, realizable):
    model = MultiIndexModel([(LINKS["affine"](1.0), [0.5, 0.5])], R=1.0, L=1.0)
    (tmp_path / "m.json").write_text(model.to_json())
    assert main(["--out", str(tmp_path), "eval-omnigap", "--model", str(tmp_path / "m.json"), "--data",
                 str(realizable / "data.csv")]) == 2


def test_bench_bir(tmp_path):
    assert main(["--out", str(tmp_path), "bench-bir", "--sizes", "200,1000,3000", "--trials", "2",
                 "--reference-max", "1000"]) == 0
    rows = read_csv(tmp_path / "bench.csv")
    assert rows[0] == ["n", "time_ms", "algo", "objective"]
    body = rows[1:]
    assert sum(r[2] == "exact" for r in body) == 6 and sum(r[2] == "reference" for r in body) == 4
    for k, row in enumerate(body):
        if row[2] == "reference":
            exact = body[k - 1]
            assert exact[2] == "exact" and exact[0] == row[0] and int(row[0]) <= 1000
            assert float(exact[3]) == pytest.approx(float(row[3]), abs=1e-9)
    root = ET.parse(tmp_path / "bench.svg").getroot()
    assert root.tag.endswith("svg")


@pytest.mark.parametrize("target", ["counterexample", "pav-omnigap"])
def test_repro_targets(target, capsys):
    assert main(["repro", target]) == 0
    out = capsys.readouterr().out
    assert f"{target}: PASS" in out
