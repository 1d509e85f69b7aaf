import json

import pandas as pd
import pytest

import app
from app import EXIT_INFEASIBLE, EXIT_OK, EXIT_PARSE, main
from core.geometry import Geometry
from core.sampling import random_convex_polygon


@pytest.fixture
def square_file(tmp_path, unit_square):
    path = tmp_path / "square.json"
    path.write_text(json.dumps(unit_square.to_dict()))
    return str(path)


def _report(path):
    with open(path) as f:
        return json.load(f)


def test_verify_square(square_file, tmp_path):
    out = tmp_path / "report.json"
    assert main(["verify", square_file, "--output", str(out)]) == EXIT_OK
    report = _report(out)
    assert report["quotient_dimensions"] == [1]
    assert report["passed"]
    assert report["geometry"] == "E2"


def test_verify_random_polygons_to_stdout(capsys):
    assert main(["verify", "--geometry", "S2", "--n", "5", "--count", "5", "--seed", "11"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["instances"] == 5
    assert report["quotient_dimensions"] == [2]
    assert report["min_product"] > 0
    assert report["seed"] == 11


def test_malformed_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"geometry": "S2", "vertices": [[1, 0, 0],')
    assert main(["verify", str(bad)]) == EXIT_PARSE


@pytest.mark.parametrize("doc", [
    {"geometry": "S2", "vertices": [[1, 0, 0], [0, 2, 0], [0, 0, 1]]},
    {"geometry": "E2", "vertices": [[0, 0], [1, 0, 0], [0, 1]]},
])
def test_unusable_polygon_file(tmp_path, doc):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["verify", str(bad)]) == EXIT_PARSE


def test_stray_value_error_is_a_parse_failure(monkeypatch):
    def broken(args):
        raise ValueError("could not convert string to float")

    monkeypatch.setitem(app.COMMANDS, "trig", broken)
    assert main(["trig"]) == EXIT_PARSE


def test_missing_file(tmp_path):
    assert main(["verify", str(tmp_path / "absent.json")]) == EXIT_PARSE


def test_unknown_command():
    assert main(["flatten"]) == EXIT_PARSE


def test_maxarea(tmp_path):
    out = tmp_path / "maxarea.json"
    table = tmp_path / "samples.csv"
    chart = tmp_path / "samples.html"
    code = main(["maxarea", "--geometry", "H2", "--lengths", "1,1,1,1", "--samples", "5",
                 "--output", str(out), "--csv", str(table), "--html", str(chart)])
    assert code == EXIT_OK
    report = _report(out)
    assert report["solution"]["locus"] == "Circle"
    assert report["criticality"]["critical"]
    assert report["violations"] == 0
    assert len(pd.read_csv(table)) == 5
    assert chart.exists()


def test_maxarea_from_lengths_file(tmp_path):
    doc = tmp_path / "lengths.json"
    doc.write_text(json.dumps({"geometry": "H2", "lengths": [5.5, 2.0, 2.0, 2.0]}))
    out = tmp_path / "maxarea.json"
    assert main(["maxarea", str(doc), "--samples", "3", "--output", str(out)]) == EXIT_OK
    assert _report(out)["solution"]["locus"] == "Equidistant"


def test_maxarea_infeasible():
    assert main(["maxarea", "--geometry", "S2", "--lengths", "10,0.1,0.1"]) == EXIT_INFEASIBLE


def test_maxarea_needs_lengths():
    assert main(["maxarea"]) == EXIT_PARSE


def test_rigidity_cube(tmp_path):
    out = tmp_path / "rigidity.json"
    assert main(["rigidity", "--solid", "cube", "--output", str(out)]) == EXIT_OK
    report = _report(out)
    assert report["verdict"] == "RIGID"
    assert report["quotient_dim"] == 0


def test_rigidity_random_hulls(tmp_path):
    out = tmp_path / "rigidity.json"
    assert main(["rigidity", "--count", "2", "--output", str(out)]) == EXIT_OK
    report = _report(out)
    assert len(report["results"]) == 2
    assert report["flexible"] == []


def test_metric(tmp_path, rng):
    doc = tmp_path / "pentagon.json"
    doc.write_text(json.dumps(random_convex_polygon(Geometry.S2, 5, rng).to_dict()))
    out = tmp_path / "metric.json"
    chart = tmp_path / "metric.html"
    assert main(["metric", str(doc), "--kind", "C_v", "--output", str(out), "--html", str(chart)]) == EXIT_OK
    report = _report(out)
    assert report["passed"]
    assert report["kind"] == "C_v"
    assert len(report["eigenvalues"]) == 2
    assert chart.exists()


def test_metric_needs_a_polygon():
    assert main(["metric"]) == EXIT_PARSE


def test_converge_table(tmp_path):
    out = tmp_path / "converge.json"
    table = tmp_path / "converge.csv"
    assert main(["converge", "--kmax", "8", "--output", str(out), "--csv", str(table)]) == EXIT_OK
    frame = pd.read_csv(table)
    assert list(frame.columns) == ["k", "a_k", "discrepancy", "quotient_dimension"]
    assert frame["k"].tolist() == [4, 8]
    assert len(_report(out)["rows"]) == 2


def test_converge_default_kmax(tmp_path):
    out = tmp_path / "converge.json"
    assert main(["converge", "--output", str(out)]) == EXIT_OK
    report = _report(out)
    assert [row["k"] for row in report["rows"]] == [4, 8, 16, 32, 64]
    assert report["non_monotone_steps"] <= 1


@pytest.mark.parametrize("argv, code", [
    (["converge", "--angles", "regularX"], EXIT_PARSE),
    (["converge", "--kmax", "2"], EXIT_PARSE),
    (["converge", "--angles", "regular4", "--kmax", "4"], EXIT_INFEASIBLE),
])
def test_converge_errors(argv, code):
    assert main(argv) == code


def test_trig(tmp_path):
    out = tmp_path / "trig.json"
    assert main(["trig", "--geometry", "S2", "--count", "20", "--output", str(out)]) == EXIT_OK
    assert _report(out)["max_residual"] < 1e-10


def test_trig_desitter_cases(tmp_path):
    out = tmp_path / "trig.json"
    assert main(["trig", "--geometry", "DS2", "--count", "40", "--output", str(out)]) == EXIT_OK
    report = _report(out)
    assert report["max_residual"] < 1e-10
    assert sorted(report["cases"].values()) == [10, 10, 10, 10]


def test_reports_are_deterministic(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["verify", "--geometry", "H2", "--n", "6", "--count", "4", "--seed", "5"]
    assert main(argv + ["--output", str(first)]) == EXIT_OK
    assert main(argv + ["--output", str(second)]) == EXIT_OK
    assert first.read_text() == second.read_text()
