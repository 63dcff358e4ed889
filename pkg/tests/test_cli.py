import csv
import io
import json
import math

import numpy as np
import pytest

from csober import cli
from csober.bench import runner
from csober.bench.runner import CSV_COLUMNS, read_csv, record_from_json, record_to_json, write_csv
from csober.errors import ConfigError, NumericalFailure, OracleError
from csober.optimizer import RunRecord

FAST = ["--candidates", "300", "--nystrom", "60"]


def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_rows_and_summary(capsys):
    code, out, err = run_cli(["run", "--problem", "hartmann6", "--method", "csober", "--batch", "5",
                              "--iters", "3", "--seed", "0", *FAST], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == CSV_COLUMNS
    assert rows[0] == ("iteration,best_feasible,log_regret,eps_lp,est_rejection,realised_rejection,"
                       "batch_logdet,wce,batch_size,elapsed_seconds,seed").split(",")
    assert len(rows) == 4
    summary = json.loads(err.strip().splitlines()[-1])
    assert summary["method"] == "csober" and summary["total_queries"] == 15


def test_run_json(capsys, tmp_path):
    path = tmp_path / "out.json"
    code, _, _ = run_cli(["run", "--method", "random", "--iters", "2", "--format", "json", "--out", str(path)],
                         capsys)
    assert code == 0
    doc = json.loads(path.read_text())
    assert len(doc["records"]) == 2 and doc["summary"]["method"] == "random"


@pytest.mark.parametrize("args", [["run", "--method", "nosuch"], ["run", "--problem", "nosuch"],
                                  ["run", "--tolerance", "sometimes"], ["sweep", "--seed", "a,b"],
                                  ["run", "--batch", "2"], ["frobnicate"]])
def test_config_errors_exit_2(args, capsys):
    code, _, err = run_cli(args, capsys)
    assert code == 2
    assert "config error" in err


def test_numerical_failure_exit_3(capsys, monkeypatch):
    def boom(cell):
        raise NumericalFailure("singular")

    monkeypatch.setattr(cli, "run_cell", boom)
    assert run_cli(["run"], capsys)[0] == 3


def test_oracle_failure_exit_1_with_partial_records(capsys, monkeypatch):
    rec = RunRecord(1, 0.5, -1.0, 1e-8, 0.1, 0.0, -3.0, 0.01, 5, 0.2, 0)

    def fail(cell):
        exc = OracleError("lab offline")
        exc.records = [rec]
        raise exc

    monkeypatch.setattr(cli, "run_cell", fail)
    code, out, err = run_cli(["run"], capsys)
    assert code == 1
    assert len(out.strip().splitlines()) == 2
    assert "oracle failure" in err


def test_sweep_groups(capsys):
    code, out, _ = run_cli(["sweep", "--problem", "hartmann6", "--method", "random", "--iters", "2",
                            "--tolerance", "fixed:1e-3,fixed:1e-1,adaptive", "--seed", "0,1"], capsys)
    assert code == 0
    pairs = read_csv(io.StringIO(out))
    groups = {g for g, _ in pairs}
    assert groups == {"random|fixed:0.001", "random|fixed:0.1", "random|adaptive"}
    assert len(pairs) == 3 * 2 * 2


def test_sweep_json(capsys):
    code, out, _ = run_cli(["sweep", "--method", "random,cts", "--iters", "1", "--format", "json"], capsys)
    assert code == 0
    assert set(json.loads(out)["groups"]) == {"random|adaptive", "cts|adaptive"}


def test_config_file(tmp_path, capsys):
    path = tmp_path / "cfg.yaml"
    path.write_text("problem: hartmann6\nmethod: random\niters: 2\nbatch: 4\n")
    code, out, _ = run_cli(["run", "--config", str(path)], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 2 and rows[0]["batch_size"] == "4"
    # explicit flags win over the file
    code, out, _ = run_cli(["run", "--config", str(path), "--iters", "1"], capsys)
    assert len(out.strip().splitlines()) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("colour: blue\n")
    assert run_cli(["run", "--config", str(bad)], capsys)[0] == 2


def test_verify_prop1_cli(capsys):
    code, out, _ = run_cli(["verify-prop1", "--trials", "200", "--N", "60", "--M", "20", "--n", "6"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["lp1_violations"] == 0 and doc["lp2_violations"] == 0
    assert len(doc["instances"][0]["lp2_margins"]) == 10


def test_list(capsys):
    code, out, _ = run_cli(["list"], capsys)
    assert code == 0 and "hartmann6" in out and "csober" in out


def test_csv_round_trip():
    recs = [RunRecord(1, 0.1 + 0.2, -math.inf, 1e-8, 0.25, 0.2, -12.345678901234567, math.nan, 5, 0.75, 3),
            RunRecord(2, -3.5, 0.1, 0.3, math.nan, 0.0, math.inf, 1e-300, 7, 1.5, 3)]
    buf = io.StringIO()
    write_csv(recs, buf, group="g")
    back = [r for _, r in read_csv(io.StringIO(buf.getvalue()))]
    for a, b in zip(recs, back):
        for k in CSV_COLUMNS:
            x, y = getattr(a, k), getattr(b, k)
            assert (x == y) or (isinstance(x, float) and math.isnan(x) and math.isnan(y))
    for a in recs:
        b = record_from_json(json.loads(json.dumps(record_to_json(a))))
        assert np.allclose([getattr(a, k) for k in CSV_COLUMNS], [getattr(b, k) for k in CSV_COLUMNS],
                           equal_nan=True, rtol=0, atol=0)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("CSOBER_THREADS", "3")
    assert runner.worker_count(10) == 3
    assert runner.worker_count(2) == 2
    monkeypatch.setenv("CSOBER_THREADS", "many")
    with pytest.raises(ConfigError):
        runner.worker_count(4)
