import csv
import json
import time

import pytest

from mesoeig import cli
from mesoeig.errors import SingularSystem
from mesoeig.geometry import DATA_DIR

N8 = str(DATA_DIR / "table1_N8.json")


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_json(path):
    return json.loads(path.read_text())


def test_solve_table1_row(tmp_path):
    assert run("solve", N8, "--out", tmp_path) == 0
    rep = read_json(tmp_path / "report.json")
    assert rep["Lambda1"] == pytest.approx(9.641886682490723e-4, rel=1e-12)
    assert rep["constraint_satisfied"] is False
    assert rep["residual_diagnostics"]["max_inclusion_residual"] < 1e-2


def test_solve_higher(tmp_path):
    assert run("solve", N8, "--higher", "--out", tmp_path) == 0
    rep = read_json(tmp_path / "report.json")
    assert rep["lambda"] == pytest.approx(rep["Lambda1"] + rep["Lambda2"], rel=1e-15)
    header = next(csv.reader(open(tmp_path / "coefficients.csv")))
    assert header == ["index", "x", "y", "z", "radius", "C", "A", "Bx", "By", "Bz"]


def test_empty_config(tmp_path):
    cfg = tmp_path / "empty.json"
    cfg.write_text(json.dumps({"domain": {"type": "ball", "radius": 7.0}, "inclusions": []}))
    assert run("solve", cfg, "--out", tmp_path / "o") == 0
    assert read_json(tmp_path / "o" / "report.json")["Lambda1"] == 0
    assert run("field", cfg, "--grid", "plane=z,offset=0,nx=2,ny=1,u=-1:1,v=0:0", "--out", tmp_path / "f") == 0
    rows = list(csv.DictReader(open(tmp_path / "f" / "field.csv")))
    assert [float(r["u"]) for r in rows] == [1.0, 1.0]


def test_overlap_exit_code(tmp_path, capsys):
    cfg = tmp_path / "ov.json"
    cfg.write_text(json.dumps({"domain": {"type": "ball", "radius": 7.0},
                               "inclusions": [{"center": [0, 0, 0], "radius": 0.1},
                                              {"center": [0.15, 0, 0], "radius": 0.1}]}))
    assert run("solve", cfg, "--out", tmp_path / "o") == 2
    assert "(0, 1)" in capsys.readouterr().err


def test_malformed_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert run("solve", cfg, "--out", tmp_path / "o") == 2
    assert run("solve", tmp_path / "missing.json", "--out", tmp_path / "o") == 2


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise SingularSystem("injected")

    monkeypatch.setattr(cli, "solve_cluster", boom)
    assert run("solve", N8, "--out", tmp_path) == 3


def test_validate_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "run_validation", lambda *a, **k: ([], {"slope_ok": False, "higher_not_worse": True,
                                                                      "passed": False, "fit_slope_L1": 1.0}))
    assert run("validate", "--quick", "--out", tmp_path) == 1


def test_validate_quick(tmp_path):
    t0 = time.perf_counter()
    assert run("validate", "--quick", "--out", tmp_path) == 0
    assert time.perf_counter() - t0 < 10
    rows = list(csv.DictReader(open(tmp_path / "validate.csv")))
    assert [float(r["a"]) for r in rows] == [0.04, 0.02, 0.01]
    assert all(float(r["err_L1L2"]) <= float(r["err_L1"]) for r in rows)


def test_validate_seed_only_changes_mc(tmp_path):
    run("validate", "--quick", "--seed", "1", "--samples", "20000", "--out", tmp_path / "a")
    run("validate", "--quick", "--seed", "2", "--samples", "20000", "--out", tmp_path / "b")
    ra = list(csv.DictReader(open(tmp_path / "a" / "validate.csv")))
    rb = list(csv.DictReader(open(tmp_path / "b" / "validate.csv")))
    for x, y in zip(ra, rb):
        for col in ("lambda_oracle", "lambda_L1", "lambda_L1L2", "err_L1", "err_L1L2"):
            assert x[col] == y[col]
        assert x["I00_mc"] != y["I00_mc"]


def test_determinism_and_manifest(tmp_path):
    grid = "plane=z,offset=-0.5,nx=9,ny=9,u=-1:1,v=-1:1"
    for d in ("a", "b"):
        assert run("field", N8, "--grid", grid, "--out", tmp_path / d) == 0
        assert run("solve", N8, "--higher", "--out", tmp_path / d) == 0
    for name in ("field.csv", "report.json", "coefficients.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    out = tmp_path / "c"
    run("validate", "--quick", "--out", out)
    manifest = read_json(out / "manifest.json")
    listed = set(manifest["outputs"]) | {"manifest.json"}
    assert {p.name for p in out.iterdir()} == listed
    assert manifest["seeds"]["seed"] == 0


def test_field_outside_domain_rows(tmp_path):
    assert run("field", N8, "--grid", "plane=x,offset=0,nx=2,ny=2,u=6:8,v=0:0.1", "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "field.csv")))
    assert [r["region"] for r in rows] == ["interior", "interior", "outside-domain", "outside-domain"]
    assert rows[2]["u"] == ""


def test_field_lattice_64_plane(tmp_path):
    cfg = DATA_DIR / "lattice_64.json"
    assert run("field", cfg, "--grid", "plane=z,offset=0.25,nx=13,ny=13,u=-0.5:2.5,v=-0.5:2.5", "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "field.csv")))
    assert len(rows) == 169


def test_field_json_grid(tmp_path):
    spec = json.dumps({"plane": {"axis": "x3", "offset": 0.5, "nx": 3, "ny": 2, "extent": [[-1, 1], [-1, 1]]}})
    assert run("field", N8, "--grid", spec, "--out", tmp_path) == 0
    assert len(list(csv.DictReader(open(tmp_path / "field.csv")))) == 6
    assert run("field", N8, "--grid", "plane=q", "--out", tmp_path) == 2


def test_homogenize(tmp_path):
    assert run("homogenize", "--R", 7, "--r", 1, "--mu", 0.09, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "profile.csv")))
    u = [float(r["u"]) for r in rows]
    assert u[0] < u[len(u) // 7] < u[-1]
    rep = read_json(tmp_path / "homogenized.json")
    assert rep["residuals"]["normalization_error"] < 1e-6
    assert run("homogenize", "--R", 7, "--r", 8, "--out", tmp_path / "x") == 2


def test_homogenize_lattice(tmp_path):
    assert run("homogenize", "--lattice", DATA_DIR / "lattice_64.json", "--out", tmp_path) == 0
    comp = read_json(tmp_path / "homogenized.json")["comparison"]
    assert comp["n_inclusions"] == 64


def test_table1(tmp_path):
    assert run("table1", "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "table1.csv")))
    assert [int(r["N"]) for r in rows] == [8, 9, 10]
    assert all(abs(float(r["rel_diff"])) < 2e-3 for r in rows)


def test_json_numbers_have_17_digits():
    text = cli.dumps_json({"a": 0.1, "b": float("nan"), "c": [1, 2.5]})
    assert '"a": 0.10000000000000001' in text
    assert '"b": null' in text
    assert json.loads(text)["c"] == [1, 2.5]
