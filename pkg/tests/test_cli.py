import csv
import json

import numpy as np
import pytest

from bexdep.cli import main, write_matrix_csv
from bexdep.kl import CurveSet, functional_independence_test, write_curves_csv

from curves import GRID, planted, second_component_pair


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_xy(path, M):
    M = np.atleast_2d(np.asarray(M, dtype=float).T).T
    write_matrix_csv(path, [f"c{j}" for j in range(M.shape[1])], [[repr(float(v)) for v in row] for row in M])


@pytest.fixture
def xy(tmp_path, rng):
    X = rng.normal(size=(128, 2))
    x, y = tmp_path / "x.csv", tmp_path / "y.csv"
    write_xy(x, X)
    write_xy(y, X)
    return x, y


def test_identical_files_reject(capsys, xy):
    code, out, _ = run(capsys, "test", *xy)
    rep = json.loads(out)
    assert code == 0 and rep["rejected"] is True
    assert rep["schema_version"] == 1 and rep["method"] == "multifit"
    assert rep["config"]["r_max"] == 4 and "wall_time_s" not in rep


def test_independent_files_and_methods(capsys, tmp_path, rng):
    x, y = tmp_path / "x.csv", tmp_path / "y.csv"
    write_xy(x, rng.normal(size=(100, 2)))
    write_xy(y, rng.normal(size=(100, 1)))
    for method in ("multifit", "beret"):
        code, out, _ = run(capsys, "test", x, y, "--method", method, "--timing")
        rep = json.loads(out)
        assert code == 0 and rep["method"] == method and rep["wall_time_s"] >= 0
    code, _, err = run(capsys, "test", x, y, "--method", "bet")
    assert code == 2 and "univariate" in err


def test_points_out(capsys, tmp_path, rng):
    x, y = tmp_path / "x.csv", tmp_path / "y.csv"
    v = rng.normal(size=64)
    write_xy(x, v)
    write_xy(y, v**2)
    pts = tmp_path / "pts.csv"
    code, out, _ = run(capsys, "test", x, y, "--method", "bet", "--points-out", pts)
    assert code == 0
    rows = list(csv.reader(open(pts)))
    assert rows[0] == ["s_x", "t_y", "region"] and len(rows) == 65


def test_malformed_row(capsys, tmp_path, xy):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n3\n")
    code, _, err = run(capsys, "test", bad, xy[1])
    assert code == 2 and "row 3" in err
    bad.write_text("a,b\n1,2\n3,oops\n")
    code, _, err = run(capsys, "test", bad, xy[1])
    assert code == 2 and "row 3" in err and "non-numeric" in err


def test_missing_file(capsys, tmp_path, xy):
    code, _, err = run(capsys, "test", tmp_path / "nope.csv", xy[1])
    assert code == 2 and "cannot read" in err


def test_config_file(capsys, tmp_path, xy):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nr_max = 2\nalpha = 0.01\n")
    code, out, _ = run(capsys, "test", *xy, "--config", cfg, "--alpha", "0.02")
    rep = json.loads(out)
    assert code == 0 and rep["config"]["r_max"] == 2 and rep["alpha"] == 0.02
    cfg.write_text("r_max = 2\nbogus = 1\n")
    code, _, err = run(capsys, "test", *xy, "--config", cfg)
    assert code == 2 and "unknown config key 'bogus'" in err and "line 2" in err


def test_invalid_config_value(capsys, xy):
    code, _, err = run(capsys, "test", *xy, "--alpha", "1.5")
    assert code == 2 and "alpha" in err


def test_simulate_shape_and_determinism(capsys, tmp_path):
    outs = []
    for i in range(2):
        out_dir = tmp_path / f"run{i}"
        code, out, _ = run(
            capsys, "simulate", "--scenario", "circular", "--placement", "marginal",
            "--methods", "multifit,beret", "--reps", 3, "--n", 32, "--out", out_dir,
            "--r-max", 2, "--m", 2, "--d-max", 2,
        )
        assert code == 0
        files = json.loads(out)["files"]
        assert len(files) == 2
        for f in files:
            rows = list(csv.reader(open(f)))
            assert len(rows) == 21
        outs.append([open(f, "rb").read() for f in files])
    assert outs[0] == outs[1]


def test_simulate_unknown_scenario(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--scenario", "spiral", "--out", tmp_path)
    assert code == 2 and "spiral" in err


def test_klproject_rank2(capsys, tmp_path, rng):
    cs, _, _ = planted(40, rng, scales=(1.0, 0.3))
    path = tmp_path / "curves.csv"
    write_curves_csv(path, cs)
    code, out, _ = run(capsys, "klproject", path, "--k", 2, "--out", tmp_path / "kl")
    summary = json.loads(out)
    assert code == 0 and summary["k"] == 2
    assert abs(summary["energy_fraction"] - 1.0) <= 1e-8
    rows = list(csv.reader(open(tmp_path / "kl" / "scores.csv")))
    assert rows[0] == ["Z1", "Z2"] and len(rows) == 41
    code, _, err = run(capsys, "klproject", path, "--k", 3, "--out", tmp_path / "kl")
    assert code == 2 and "attainable rank is 2" in err


def test_klproject_energy_on_noise(capsys, tmp_path, rng):
    path = tmp_path / "noise.csv"
    write_curves_csv(path, CurveSet(GRID, rng.standard_normal((30, len(GRID)))))
    code, out, _ = run(capsys, "klproject", path, "--energy", 0.95, "--out", tmp_path / "kl")
    assert code == 0 and json.loads(out)["k"] >= 1
    code, _, err = run(capsys, "klproject", path, "--out", tmp_path / "kl")
    assert code == 2


def test_klproject_constant(capsys, tmp_path):
    path = tmp_path / "flat.csv"
    write_curves_csv(path, CurveSet(GRID, np.ones((10, len(GRID)))))
    code, _, err = run(capsys, "klproject", path, "--k", 1, "--out", tmp_path / "kl")
    assert code == 2 and "zero variance" in err


def test_klproject_scores_round_trip(capsys, tmp_path, rng):
    cs, y = second_component_pair(128, rng)
    cpath, ypath = tmp_path / "curves.csv", tmp_path / "y.csv"
    write_curves_csv(cpath, cs)
    write_xy(ypath, y)
    assert run(capsys, "klproject", cpath, "--k", 2, "--out", tmp_path / "kl")[0] == 0
    code, out, _ = run(capsys, "test", tmp_path / "kl" / "scores.csv", ypath, "--r-max", 3)
    direct = functional_independence_test(cs, y, k=2, r_max=3)
    assert code == 0 and abs(json.loads(out)["global_p"] - direct.global_p) <= 1e-12
    code, out, _ = run(capsys, "test", cpath, ypath, "--functional-x", "--kl-k", 2, "--r-max", 3)
    rep = json.loads(out)
    assert rep["global_p"] == direct.global_p and rep["kl"]["k_x"] == 2
