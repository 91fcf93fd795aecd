import csv
import json
import math

import numpy as np
import pytest

from affsurf.atlas import load_atlas
from affsurf.cli import EXIT_FAIL, EXIT_INVALID, EXIT_OK, main


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def build(tmp_path, capsys):
    def run(spec, name="atlas.json"):
        out = tmp_path / name
        assert main(["build", "--spec", write(tmp_path / f"{name}.spec", spec), "--out", str(out)]) == EXIT_OK
        return str(out), capsys.readouterr().out.strip()
    return run


def test_build_summaries(build):
    _, text = build({"orientable": True, "genus": 1, "boundary": 0})
    assert text == "n=1, holes=2, gluings=1, truncations=0, χ=0"
    _, text = build({"orientable": True, "genus": 0, "boundary": 0}, "s.json")
    assert text == "n=0, holes=1, gluings=0, caps=1(disk), truncations=0, χ=2"
    _, text = build({"orientable": False, "genus": 2, "boundary": 0}, "k.json")
    assert "caps=2(mobius)" in text and text.endswith("χ=0")


@pytest.mark.parametrize("spec", [
    {"orientable": True, "genus": -1, "boundary": 0},
    {"orientable": False, "genus": 0, "boundary": 0},
    {"orientable": True, "genus": 1},
    {"orientable": True, "genus": 1, "boundary": 0, "colour": "red"},
    {"orientable": True, "genus": 1, "boundary": 0, "tolerances": {"flow": -1}},
    {"orientable": True, "genus": 1, "boundary": 0, "hole_params": {"p0": 0}},
    [1, 2, 3],
])
def test_build_rejects_bad_specs(tmp_path, spec):
    assert main(["build", "--spec", write(tmp_path / "bad.json", spec), "--out", str(tmp_path / "o")]) == EXIT_INVALID


def test_missing_and_malformed_files(tmp_path):
    assert main(["verify", "--atlas", str(tmp_path / "none.json"), "--report", str(tmp_path / "r")]) == EXIT_INVALID
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["verify", "--atlas", str(tmp_path / "junk.json"), "--report", str(tmp_path / "r")]) == EXIT_INVALID
    assert main(["frobnicate"]) == EXIT_INVALID


def test_act(build, capsys):
    path, _ = build({"orientable": True, "genus": 0, "boundary": 1})
    assert main(["act", "--atlas", path, "--a", "2", "--b", "0.5", "--chart", "plane", "--coords", "0.3,-0.2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["chart"] == "plane"
    np.testing.assert_allclose(out["coords"], [1.1, -0.4], atol=1e-12)
    assert main(["act", "--atlas", path, "--a", str(math.e), "--b", "7", "--chart", "inf", "--coords", "0.5,0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["chart"] == "inf"
    np.testing.assert_allclose(out["coords"], [0.5, 1.0], atol=1e-12)


@pytest.mark.parametrize("args", [
    ["--a", "0", "--b", "1", "--chart", "plane", "--coords", "0,0"],
    ["--a", "1", "--b", "1", "--chart", "moon", "--coords", "0,0"],
    ["--a", "1", "--b", "1", "--chart", "plane", "--coords", "zero"],
    ["--a", "1", "--b", "1", "--chart", "inf", "--coords", "9,0"],
])
def test_act_rejects_bad_input(build, args):
    path, _ = build({"orientable": True, "genus": 0, "boundary": 1})
    assert main(["act", "--atlas", path] + args) == EXIT_INVALID


def test_verify_writes_report(build, tmp_path, capsys):
    path, _ = build({"orientable": True, "genus": 0, "boundary": 0, "seed": 3})
    rep = tmp_path / "report.json"
    assert main(["verify", "--atlas", path, "--report", str(rep), "--grid", "60"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "pass"
    doc = json.loads(rep.read_text())
    assert doc["pass"] and doc["seed"] == 3 and doc["config"]["grid"] == 60


def test_verify_flags_fault(build, tmp_path, capsys):
    path, _ = build({"orientable": True, "genus": 0, "boundary": 0})
    doc = json.loads(open(path).read())
    doc["faults"] = {"flip_param": {"hole": "cap0.inf"}}
    bad = write(tmp_path / "bad_atlas.json", doc)
    rep = tmp_path / "report.json"
    assert main(["verify", "--atlas", bad, "--report", str(rep), "--grid", "60"]) == EXIT_FAIL
    out = capsys.readouterr().out
    assert out.startswith("FAIL:") and "transition_compat" in out
    failed = [r["name"] for r in json.loads(rep.read_text())["records"] if r["status"] == "fail"]
    assert "transition_compat" in failed


def test_export_grid_round_trip(build, tmp_path):
    path, _ = build({"orientable": True, "genus": 0, "boundary": 0})
    out = tmp_path / "grid"
    assert main(["export", "--atlas", path, "--out", str(out)]) == EXIT_OK
    files = sorted(p.name for p in out.glob("*.csv"))
    assert files == ["cap0.inf.csv", "cap0.plane.csv", "inf.csv", "plane.csv"]
    atlas = load_atlas(open(path).read())
    with (out / "inf.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    p = np.array([[float(r["c1"]), float(r["c2"])] for r in rows])
    X, Y = atlas.charts["inf"].values(p)
    got = np.array([[float(r[k]) for k in ("X1", "X2", "Y1", "Y2")] for r in rows])
    np.testing.assert_allclose(got, np.concatenate([X, Y], 1), atol=1e-12)
    assert "disclaimer" in json.loads((out / "export.json").read_text())


def test_export_mesh(build, tmp_path):
    path, _ = build({"orientable": False, "genus": 1, "boundary": 0})
    out = tmp_path / "mesh"
    assert main(["export", "--atlas", path, "--out", str(out), "--what", "mesh"]) == EXIT_OK
    text = (out / "surface.obj").read_text()
    assert text.startswith("# ") and "o mob0.strip" in text and "\nf " in text
