import csv
import io
import json

import numpy as np
import pytest

from randcontract import cli, experiments
from randcontract.exceptions import InvalidParameterError, NumericalFailureError
from randcontract.experiments import ExperimentSpec, run, run_density, run_entropy, run_moments

SMALL = ["--n", "24", "--realizations", "3", "--quiet"]


def read_csv(path):
    text = open(path, encoding="utf-8").read()
    header, body = text.split("\n", 1)
    assert header.startswith("# ")
    meta = json.loads(header[2:])
    rows = list(csv.reader(io.StringIO(body)))
    return meta, rows[0], rows[1:]


def test_moments_csv(tmp_path):
    out = tmp_path / "m.csv"
    assert cli.main(["moments", "--tau", "1", "--p-max", "5", "--out", str(out), *SMALL]) == 0
    meta, columns, rows = read_csv(out)
    assert columns == ["p", "mean", "se", "analytic", "recursion"]
    assert [int(r[0]) for r in rows] == [1, 2, 3, 4, 5]
    assert meta["resolved"]["chain_length"] == 23 and meta["resolved"]["tau"] == 1.0
    assert meta["request"]["seed"] == 0 and "version" in meta["request"]
    values = np.array([[float(v) for v in r[1:]] for r in rows])
    assert np.all((values[:, [0, 2, 3]] >= 0) & (values[:, [0, 2, 3]] <= 1))


def test_json_mirrors_csv(tmp_path):
    out = tmp_path / "m.json"
    assert cli.main(["kaczmarz", "--p-max", "3", "--format", "json", "--out", str(out), *SMALL]) == 0
    payload = json.loads(out.read_text())
    assert payload["columns"] == ["p", "mean", "se", "analytic", "chisq"]
    assert len(payload["rows"]) == 3 and payload["meta"]["request"]["command"] == "kaczmarz"


def test_stdout_and_all_commands(capsys):
    for argv in (
        ["analytic", "--tau", "2", "--alpha", "2", "--p-max", "4"],
        ["recursion", "--n", "40", "--chain-length", "5", "--p-max", "3"],
        ["entropy", "--n", "20", "--tau", "0.2", "0.5", "--realizations", "1"],
        ["density", "--n", "20", "--tau", "2", "--realizations", "2", "--bins", "12"],
    ):
        assert cli.main(argv + ["--quiet"]) == 0
        text = capsys.readouterr().out
        assert text.startswith("# {")


def test_progress_goes_to_stderr(capsys):
    assert cli.main(["moments", "--n", "12", "--tau", "1", "--realizations", "2", "--p-max", "2"]) == 0
    captured = capsys.readouterr()
    assert "moments" in captured.err and not captured.out.startswith("INFO")


@pytest.mark.parametrize(
    "argv",
    [
        ["moments", "--n", "4", "--delta-n", "4"],
        ["moments", "--n", "0"],
        ["moments", "--tau", "-1"],
        ["moments", "--tau", "1", "2"],
        ["density", "--bins", "5"],
        ["moments", "--realizations", "0"],
        ["moments", "--workers", "0"],
    ],
)
def test_invalid_config_exit_code(argv):
    assert cli.main(argv + ["--quiet"]) == 2


def test_argparse_errors_exit_two():
    with pytest.raises(SystemExit) as info:
        cli.main(["moments", "--tau", "1", "--chain-length", "3"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["moments", "--group", "symplectic"])
    assert info.value.code == 2


def test_numerical_failure_exit_code(monkeypatch, capsys, tmp_path):
    def boom(spec):
        raise NumericalFailureError("did not converge", {"condition_1norm": 1e18})

    monkeypatch.setattr(cli, "run", boom)
    out = tmp_path / "never.csv"
    assert cli.main(["moments", "--out", str(out), "--quiet"]) == 3
    err = capsys.readouterr().err
    assert "condition_1norm" in err
    assert not out.exists()


def test_rerun_is_byte_identical(tmp_path):
    paths = [tmp_path / f"r{i}.csv" for i in range(2)]
    for path in paths:
        assert cli.main(["density", "--tau", "0.5", "--bins", "10", "--out", str(path), *SMALL]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_worker_independence(tmp_path):
    outs = []
    for workers in ("1", "2"):
        path = tmp_path / f"w{workers}.json"
        argv = ["moments", "--tau", "1", "--format", "json", "--workers", workers, "--out", str(path), *SMALL]
        assert cli.main(argv) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_spec_validation():
    with pytest.raises(InvalidParameterError):
        ExperimentSpec("plot")
    with pytest.raises(InvalidParameterError):
        ExperimentSpec("moments", output_format="xml")
    with pytest.raises(InvalidParameterError):
        ExperimentSpec("moments", tau=1.0, chain_length=3)
    spec = ExperimentSpec("moments", tau=0.5, n=30, delta_n=2)
    assert spec.config().chain_length == 7
    assert "out" not in spec.to_dict()


def test_density_histogram_normalized():
    report = run_density(ExperimentSpec("density", n=30, tau=0.5, realizations=3, bins=15))
    kind = [r[0] for r in report.rows]
    assert kind[0] == "atom" and kind[-1] == "overflow" and kind.count("bin") == 15
    freq = report.column("frequency")
    width = report.column("lambda_hi")[1:-1] - report.column("lambda_lo")[1:-1]
    assert freq[0] + np.sum(freq[1:-1] * width) + freq[-1] == pytest.approx(1, abs=1e-12)
    assert np.all(report.column("se")[1:-1] > 0)
    assert report.meta["underflow_values"] >= 0


def test_entropy_rows():
    report = run_entropy(ExperimentSpec("entropy", n=30, chain_length=2, realizations=1))
    assert report.column("chain_length").tolist() == [0, 1, 2]
    assert report.column("entropy")[0] == pytest.approx(np.log(30))
    assert report.column("analytic")[0] == pytest.approx(np.log(30))
    assert np.isnan(report.column("se")).all()
    multi = run_entropy(ExperimentSpec("entropy", n=30, tau=[1.0], realizations=3))
    assert multi.column("analytic")[0] == pytest.approx(np.log(30) - 0.5772156649, abs=1e-9)
    assert np.all(multi.column("se") > 0)


def test_moments_recursion_column_beyond_cap():
    report = run_moments(ExperimentSpec("moments", n=20, tau=1.0, realizations=2, p_max=26))
    rec = report.column("recursion")
    assert np.isfinite(rec[:24]).all() and np.isnan(rec[24:]).all()
    assert "null" in report.to_json()


def test_run_dispatch():
    report = run(ExperimentSpec("analytic", tau=1.0, p_max=3))
    assert report.meta["vn_entropy_offset"] == pytest.approx(-0.5772156649, abs=1e-9)
    assert experiments.RUNNERS.keys() == set(experiments.COMMANDS)
