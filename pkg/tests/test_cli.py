import json

import pytest

from mosr.cli import main

SIM = ["--set", "synthetic.n_users=3", "--set", "synthetic.n_days=15",
       "--set", "synthetic.n_colleagues=6", "--set", "synthetic.n_outsiders=8"]


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--seed", "7", "--out", str(d / "s.csv"), *SIM]) == 0
    return d


def inputs(sim):
    return ["--input", str(sim / "s.csv"), "--directory", str(sim / "s.directory.csv")]


def test_simulate_is_deterministic(sim, tmp_path):
    assert main(["simulate", "--seed", "7", "--out", str(tmp_path / "again.csv"), *SIM]) == 0
    assert (tmp_path / "again.csv").read_bytes() == (sim / "s.csv").read_bytes()
    manifest = json.loads((sim / "s.manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["config"]["synthetic.seed"] == "7"


def test_run_writes_series_and_manifest(sim, tmp_path):
    out = tmp_path / "run"
    assert main(["run", *inputs(sim), "--out", str(out), "--config", str(sim / "s.manifest.json")]) == 0
    assert (out / "series.csv").read_text().startswith("date,user,ranker,loss,ndcg")
    assert (out / "weights.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["inputs"]) == {"input", "directory", "config"}
    assert len(manifest["inputs"]["input"]["sha256"]) == 64
    # replaying from the manifest alone reproduces the series
    out2 = tmp_path / "run2"
    assert main(["run", *inputs(sim), "--out", str(out2), "--config", str(out / "manifest.json")]) == 0
    assert (out2 / "series.csv").read_bytes() == (out / "series.csv").read_bytes()


def test_sweep_writes_sixteen_rows(sim, tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", *inputs(sim), "--out", str(out),
                 "--grid", "lambda=0.5,0.8,0.9,0.99", "delta_d=0,10,50,99"])
    assert code == 0
    lines = (out / "tuning.csv").read_text().splitlines()
    assert lines[0].startswith("lambda,delta_d,owa:0.5") and len(lines) == 17


def test_tau_and_robustness_outputs(sim, tmp_path):
    assert main(["tau", *inputs(sim), "--out", str(tmp_path / "t"),
                 "--window-a", "2000-01-01/2000-01-08", "--window-b", "2000-01-08/2000-01-15"]) == 0
    assert (tmp_path / "t" / "tau.csv").read_text().startswith("user,window_a,window_b,tau,stable")
    assert main(["robustness", *inputs(sim), "--out", str(tmp_path / "r"),
                 "--samples", "2", "--threads", "1", "--seed", "3"]) == 0
    rows = (tmp_path / "r" / "robustness.csv").read_text().splitlines()
    assert rows[0] == "sample,ranker,avg_loss" and len(rows) == 1 + 2 * 9


def test_validate(sim, tmp_path, capsys):
    assert main(["validate", *inputs(sim)]) == 0
    bad = tmp_path / "bad.csv"
    bad.write_text("sender,recipients,timestamp,token_count,stopword_count\na,b,x,1,0\n")
    assert main(["validate", "--input", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().out


def test_preprocess(tmp_path):
    raw = tmp_path / "raw.csv"
    raw.write_text('sender,recipients,timestamp,body\na,b,10,"the meeting is at noon"\n')
    assert main(["preprocess", "--input", str(raw), "--out", str(tmp_path / "events.csv")]) == 0
    assert (tmp_path / "events.csv").read_text().splitlines()[1] == "a,b,10,5,3"


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--bogus"],
        ["frobnicate"],
        [],
        ["sweep", "--input", "x", "--directory", "y", "--out", "z"],
        ["tau", "--input", "x", "--directory", "y", "--out", "z", "--window-a", "2000-01-02/2000-01-01",
         "--window-b", "2000-01-01/2000-01-02"],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_data_and_config_errors_exit_2(sim, tmp_path, capsys):
    assert main(["run", "--input", str(tmp_path / "missing.csv"), "--directory", "d", "--out", str(tmp_path)]) == 2
    assert "missing.csv" in capsys.readouterr().err
    assert main(["run", *inputs(sim), "--out", str(tmp_path / "o"), "--set", "mrac.nonsense=1"]) == 2
    assert main(["run", *inputs(sim), "--out", str(tmp_path / "o"), "--set", "mrac.lambda"]) == 2


def test_inputs_not_mutated(sim, tmp_path):
    before = (sim / "s.csv").read_bytes(), (sim / "s.directory.csv").read_bytes()
    main(["run", *inputs(sim), "--out", str(tmp_path / "o")])
    assert ((sim / "s.csv").read_bytes(), (sim / "s.directory.csv").read_bytes()) == before
