import json

import pytest
from typer.testing import CliRunner

from app.config.config import settings
from app.main import app

runner = CliRunner()


@pytest.fixture
def unit_binding(tmp_path):
    path = tmp_path / "unit.bind"
    path.write_text("a1 = 1\n")
    return path


def test_eval_prints_csv():
    result = runner.invoke(app, ["eval", "--phi", "1/10*n", "--n", "6", "--mode", "exact"])

    assert result.exit_code == 0
    assert "n,phi,frac" in result.output
    assert "6,3/5,-2/5" in result.output


def test_eval_writes_to_a_file(tmp_path):
    out = tmp_path / "values.csv"

    result = runner.invoke(app, ["--verbose", "eval", "--phi", "1/2*n", "--n", "2", "--out", str(out)])
    assert result.exit_code == 0
    assert out.read_text() == "n,phi,frac\n1,0.5,0.5\n2,1.0,0.0\n"


def test_gowers_of_the_indicator(tmp_path):
    out = tmp_path / "norm.json"

    result = runner.invoke(app, ["gowers", "--n", "10", "--k", "2", "--out", str(out)])
    assert result.exit_code == 0
    report = json.loads(out.read_text())
    assert report["norm"] == pytest.approx(1.0, abs=1e-12)
    assert report["Ntilde"] == 64


def test_gowers_rejects_an_unknown_method():
    result = runner.invoke(app, ["gowers", "--n", "10", "--k", "2", "--method", "magic"])

    assert result.exit_code == 2


def test_gowers_budget_applies_to_one_run():
    before = (settings.GOWERS_DIRECT_BUDGET, settings.GOWERS_RECURSIVE_BUDGET)

    result = runner.invoke(app, ["gowers", "--n", "10", "--k", "2", "--budget", "10"])
    assert result.exit_code == 1
    assert (settings.GOWERS_DIRECT_BUDGET, settings.GOWERS_RECURSIVE_BUDGET) == before

    result = runner.invoke(app, ["gowers", "--n", "10", "--k", "2"])
    assert result.exit_code == 0


def test_malformed_form_is_a_usage_error():
    result = runner.invoke(app, ["eval", "--phi", "{a1*n", "--n", "3"])

    assert result.exit_code == 2


def test_missing_binding_is_a_usage_error():
    result = runner.invoke(app, ["eval", "--phi", "{a1*n}", "--n", "3"])

    assert result.exit_code == 2


def test_irrational_binding_in_exact_mode(tmp_path):
    bind = tmp_path / "pi.bind"
    bind.write_text("a1 = pi\n")

    result = runner.invoke(app, ["eval", "--phi", "{a1*n}", "--n", "3", "--bind", str(bind), "--mode", "exact"])
    assert result.exit_code == 2


def test_recur_check_reports_the_overflow(tmp_path, unit_binding):
    out = tmp_path / "check.json"
    args = [
        "recur", "check",
        "--phi", "a1*{1/10*n}", "--bind", str(unit_binding), "--mode", "exact",
        "--k", "2", "--n", "30",
        "--nu", "1/10*n - 1/20", "--interval", "1/5,1/2",
        "--check", "strong", "--out", str(out),
    ]

    result = runner.invoke(app, args)
    assert result.exit_code == 1
    witness = json.loads(out.read_text())["witness"]
    assert (witness["n"], witness["hs"], witness["derivative_exact"]) == (6, [-1, -1], "-1")


def test_recur_check_passes_for_a_polynomial(tmp_path, unit_binding):
    out = tmp_path / "check.json"

    result = runner.invoke(app, ["recur", "check", "--phi", "a1*n^2", "--bind", str(unit_binding),
                                 "--k", "3", "--n", "20", "--out", str(out)])
    assert result.exit_code == 0
    assert json.loads(out.read_text())["ok"]


def test_recur_check_over_budget(unit_binding):
    result = runner.invoke(app, ["recur", "check", "--phi", "a1*n^2", "--bind", str(unit_binding),
                                 "--k", "3", "--n", "50", "--budget", "100"])

    assert result.exit_code == 1


def test_recur_density(tmp_path):
    out = tmp_path / "density.json"

    result = runner.invoke(app, ["recur", "density", "--nu", "1/4*n", "--interval", "0.3", "--n", "100",
                                 "--n", "8", "--mode", "exact", "--out", str(out)])
    assert result.exit_code == 0
    rows = json.loads(out.read_text())["rows"]
    assert [(row["N"], row["density"]) for row in rows] == [(100, 0.75), (8, 0.75)]


def test_recur_density_needs_matching_intervals():
    result = runner.invoke(app, ["recur", "density", "--nu", "1/4*n", "--nu", "1/3*n",
                                 "--interval", "0.3", "--interval", "0.2", "--interval", "0.1", "--n", "10"])

    assert result.exit_code == 2


def test_recur_linear(tmp_path):
    out = tmp_path / "linear.csv"

    result = runner.invoke(app, ["recur", "linear", "--alpha", "1/3", "--delta", "1/5", "--n", "30",
                                 "--mode", "exact", "--out", str(out)])
    assert result.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n"
    assert [int(m) for m in lines[1:]] == list(range(3, 30, 3))


def test_nil_heisenberg(tmp_path):
    out = tmp_path / "heisenberg.json"

    result = runner.invoke(app, ["nil", "heisenberg", "--alpha", "1/2", "--beta", "1/3", "--n", "40",
                                 "--mode", "exact", "--out", str(out)])
    assert result.exit_code == 0
    assert json.loads(out.read_text())["passed"]


def test_nil_orbit(tmp_path):
    out = tmp_path / "orbit.csv"

    result = runner.invoke(app, ["nil", "orbit", "--alpha", "sqrt2", "--beta", "sqrt3", "--n", "4",
                                 "--basis", "Y", "--out", str(out)])
    assert result.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,chi1,chi2,chi3"
    assert len(lines) == 5


def test_nil_discrepancy(tmp_path):
    out = tmp_path / "discrepancy.json"
    bind = tmp_path / "sqrt2.bind"
    bind.write_text("a1 = sqrt2\n")

    result = runner.invoke(app, ["nil", "discrepancy", "--phi", "a1*n", "--n", "10000", "--bind", str(bind),
                                 "--out", str(out)])
    assert result.exit_code == 0
    assert json.loads(out.read_text())["discrepancy"] < 0.02


def test_nil_inverse(tmp_path):
    out = tmp_path / "inverse.json"

    result = runner.invoke(app, ["nil", "inverse", "--p", "2", "--k", "2", "--seed", "1", "--out", str(out)])
    assert result.exit_code == 0
    report = json.loads(out.read_text())
    assert report["product_is_identity"]
    assert report["mapping"]["p"] == 2


def test_nil_inverse_of_a_mapping_file(tmp_path):
    mapping = tmp_path / "mapping.json"
    mapping.write_text(json.dumps({"p": 1, "r": 1, "entries": [
        {"block": 0, "row": 0, "col": 1, "coefficients": ["0", "1/2", "3"]}]}))
    out = tmp_path / "inverse.json"

    result = runner.invoke(app, ["nil", "inverse", "--mapping", str(mapping), "--depth", "--out", str(out)])
    assert result.exit_code == 0
    report = json.loads(out.read_text())
    assert report["inverse"]["entries"][0]["coefficients"] == ["0", "-1/2", "-3"]
    assert report["triviality_depth"] == 2


def test_nil_inverse_rejects_a_broken_mapping_file(tmp_path):
    mapping = tmp_path / "mapping.json"
    mapping.write_text("{not json")

    result = runner.invoke(app, ["nil", "inverse", "--mapping", str(mapping)])
    assert result.exit_code == 2


def test_unknown_experiment_is_a_usage_error():
    result = runner.invoke(app, ["repro", "appendixZ"])

    assert result.exit_code == 2


def test_repro_uk_floor(tmp_path, floors_file):
    out = tmp_path / "report.csv"

    result = runner.invoke(app, ["repro", "uk-floor", "--k", "2", "--n", "64", "--format", "csv", "--out", str(out)])
    assert result.exit_code == 0
    assert out.read_text().splitlines()[1].startswith("k2-N64,2,64,")
