import csv
import json
import math

import numpy as np
import pytest

from slnwitness.cli import EXIT_NUMERICAL, EXIT_USAGE, dumps, format_float, main
from slnwitness.cases import CASES
from slnwitness.witness import evaluate


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_float_format():
    assert format_float(0.1) == "0.10000000000000001"
    assert json.loads(dumps({"x": [0.1, 2, None, True]})) == {"x": [0.1, 2, None, True]}


def test_table1_published_lambda(capsys):
    code, out, _ = run(capsys, "table1", "B", "--published-lambda")
    assert code == 0
    data = json.loads(out)
    assert data["case"] == "B" and data["lambda_source"] == "published"
    assert data["report"]["v_coeff"] == pytest.approx(evaluate(CASES["B"].lam, CASES["B"].params).v_coeff)


def test_table1_search_with_estimate(capsys):
    code, out, _ = run(capsys, "table1", "c", "--n", "100000", "--seed", "3")
    data = json.loads(out)
    assert code == 0 and data["verdict"] == "sln"
    assert data["report"]["v_coeff"] >= 1.2e-2 * 0.75
    assert set(data["estimate"]) == {"theta_star", "epsilon_hat", "v_hat", "n", "seed"}


def test_report_round_trip(tmp_path, capsys):
    path = tmp_path / "rep.json"
    assert main(["search", "--case", "A", "--out", str(path)]) == 0
    first = json.loads(path.read_text())["report"]
    code, out, _ = run(capsys, "search", "--case", "A", "--report", str(path))
    again = json.loads(out)["report"]
    assert code == 0
    assert again["lhs"] == pytest.approx(first["lhs"], abs=1e-12)
    assert again["rhs"] == pytest.approx(first["rhs"], abs=1e-12)


def test_search_explicit_params(capsys):
    code, out, _ = run(
        capsys, "search", "--r", "0", "--eta-a", "0.5", "--eta-b", "0.5", "--gamma1", "0.2", "--gamma2", "0.9"
    )
    assert code == 0 and json.loads(out)["report"] is None


def test_gamma_min_scan(capsys):
    code, out, _ = run(capsys, "gamma-min-scan", "--r", "0.6", "--eta-a", "0.9", "--eta-b-steps", "20")
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0 and len(rows) == 20
    g = np.array([float(r["gamma_min"]) for r in rows])
    eta = np.array([float(r["eta_b"]) for r in rows])
    assert np.all(np.abs(np.diff(g)) < 10 * np.diff(eta))
    at = json.loads(run(capsys, "gamma-min-scan", "--r", "0.6", "--eta-a", "0.9", "--eta-b-min", "0.75",
                        "--eta-b-max", "0.75", "--eta-b-steps", "1", "--format", "json")[1])
    assert at["rows"][0]["gamma_min"] <= 0.54


def test_gamma_min_scan_vacuum(capsys):
    _, out, _ = run(capsys, "gamma-min-scan", "--r", "0", "--eta-a", "0.9", "--eta-b-steps", "5")
    assert all(float(r["gamma_min"]) == 0.0 for r in csv.DictReader(out.splitlines()))


@pytest.mark.parametrize("probs, margin, classical", [("1,0,0", 0.0, True), ("0,1,0", -1.0, False)])
def test_check_classical(capsys, probs, margin, classical):
    code, out, _ = run(capsys, "check-classical", probs)
    data = json.loads(out)
    assert code == 0 and data["margin"] == margin and data["classical"] is classical


def test_simulate_then_estimate(tmp_path, capsys):
    events = tmp_path / "ev.csv"
    n = 10**6
    assert main(["simulate", "--case", "A", "--n", str(n), "--seed", "42", "--out", str(events)]) == 0
    assert events.read_text().startswith("setting,n_a,n_b\n")
    code, out, _ = run(capsys, "estimate", "--events", str(events), "--case", "A", "--seed", "42")
    data = json.loads(out)
    assert code == 0 and data["n"] == n and data["seed"] == 42
    target = evaluate(CASES["A"].lam, CASES["A"].params).v_coeff * math.sqrt(n)
    assert abs(data["v_hat"] - target) <= 5


def test_simulate_deterministic(capsys):
    _, a, _ = run(capsys, "simulate", "--case", "B", "--n", "50", "--seed", "1")
    _, b, _ = run(capsys, "simulate", "--case", "B", "--n", "50", "--seed", "1")
    assert a == b and len(a.splitlines()) == 101


def test_optimize_csv(capsys):
    code, out, _ = run(capsys, "optimize", "--r", "1", "--eta-a", "0.8", "--eta-b", "0.3",
                       "--gamma-hi", "1.0", "--step", "0.2", "--format", "csv")
    rows = list(csv.reader(out.splitlines()))
    assert code == 0 and rows[0] == ["gamma1", "gamma2", "v_coeff"] and len(rows) > 5


@pytest.mark.parametrize(
    "argv",
    [
        ["check-classical", "1,0"],
        ["search", "--r", "0.5"],
        ["search", "--r", "0.5", "--eta-a", "0", "--eta-b", "0.5", "--gamma1", "0", "--gamma2", "1"],
        ["search", "--case", "A", "--lambda", "1,2,x"],
        ["estimate", "--case", "A"],
        ["gamma-min-scan", "--r", "0.5"],
    ],
)
def test_usage_errors(capsys, argv):
    assert main(argv) == EXIT_USAGE


def test_argparse_errors():
    with pytest.raises(SystemExit) as exc:
        main(["table1", "D"])
    assert exc.value.code == EXIT_USAGE


def test_numerical_error(capsys):
    code = main(["optimize", "--r", "1", "--eta-a", "0.8", "--eta-b", "0.3", "--gamma-hi", "0.05"])
    assert code == EXIT_NUMERICAL
    assert EXIT_NUMERICAL != EXIT_USAGE
