import csv
import os
import subprocess
import sys

import numpy as np
import pytest

from aennm.cli import main
from aennm.emitter import BranchKind, ClosedFormSolution, max_relative_difference, bind_coefficients
from aennm.pipeline import aligned_point, family_free_symbols
from aennm.textio import read_families, read_solution

from conftest import data_path, load_family

PDE = {k: data_path("pde", f"{k}.pde") for k in ("evolution", "kdv_burgers", "boussinesq_2d")}
NET = {k: data_path("networks", f"{k}.net") for k in ("2221_phi_phi2", "2221_phi_phi", "3221_squares")}


@pytest.fixture(scope="module")
def ex1_runs(tmp_path_factory):
    outs = []
    for k in range(2):
        out = tmp_path_factory.mktemp(f"derive{k}")
        code = main(["derive", "--pde", PDE["evolution"], "--network", NET["2221_phi_phi2"],
                     "--seed", "0", "--out", str(out)])
        outs.append((code, out))
    return outs


def _tree(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            p = os.path.join(dirpath, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = fh.read()
    return out


def test_derive_example_one(ex1_runs):
    code, out = ex1_runs[0]
    assert code == 0
    summary = (out / "summary.txt").read_text()
    assert "non-degenerate verified:" in summary
    ref_expr, vars_, _, _ = read_solution(data_path("solutions", "evolution_sech2.sol"))
    ref = load_family("evolution_s1")
    rng = np.random.default_rng(0)
    from conftest import load_system, load_trial
    syms = load_system("evolution", "2221_phi_phi2").symbols | set(load_trial("2221_phi_phi2").spec.all_symbols())
    syms |= {load_trial("2221_phi_phi2").ctx.b}
    matched = False
    for path in sorted((out / "solutions").glob("*_tanh.sol")):
        expr, _, _, fam = read_solution(str(path))
        point = aligned_point(fam, ref, syms, rng)
        if point is None:
            continue
        if max_relative_difference(expr, ref_expr, point, vars_) <= 1e-8:
            matched = True
            break
    assert matched


def test_derive_is_byte_identical(ex1_runs):
    (c1, a), (c2, b) = ex1_runs
    assert c1 == c2 == 0
    assert _tree(a) == _tree(b)


def test_derive_writes_reports(ex1_runs):
    import json
    _, out = ex1_runs[0]
    reports = sorted((out / "reports").glob("*.json"))
    assert reports
    rec = json.loads(reports[0].read_text())
    assert {"family_id", "verdict", "branches"} <= rec.keys()


def test_inconsistent_pde(tmp_path):
    pde = tmp_path / "bad.pde"
    pde.write_text("u(x,t); u_x - u_x + 1 = 0\n")
    net = tmp_path / "n.net"
    net.write_text("inputs [x, t]\nlayer1 [phi]\nlayer2 [arg]\noutput [u]\n")
    assert main(["derive", "--pde", str(pde), "--network", str(net), "--out", str(tmp_path / "o")]) == 2


def test_malformed_network(tmp_path, capsys):
    net = tmp_path / "n.net"
    net.write_text("inputs [x, t]\nlayer1 [relu]\n")
    assert main(["derive", "--pde", PDE["evolution"], "--network", str(net)]) == 1
    assert "unknown activation" in capsys.readouterr().err


def test_missing_file():
    assert main(["derive", "--pde", "/nonexistent.pde", "--network", NET["2221_phi_phi"]]) == 1


def test_bad_seed():
    assert main(["verify", data_path("families", "evolution_s1.fam"), "--pde", PDE["evolution"],
                 "--network", NET["2221_phi_phi2"], "--seed", str(2 ** 64)]) == 1


def test_verify_passes():
    assert main(["verify", data_path("families", "kdv_burgers_s2_corrected.fam"),
                 "--pde", PDE["kdv_burgers"], "--network", NET["2221_phi_phi"]]) == 0


def test_verify_verbatim_family_fails(capsys):
    code = main(["verify", data_path("families", "kdv_burgers_s2.fam"),
                 "--pde", PDE["kdv_burgers"], "--network", NET["2221_phi_phi"]])
    assert code == 3
    assert "equation" in capsys.readouterr().out


def test_verify_corrupted(tmp_path, capsys):
    text = open(data_path("families", "evolution_s1.fam")).read().replace("b_4 = -b*w_24", "b_4 = b*w_24")
    fam = tmp_path / "bad.fam"
    fam.write_text(text)
    code = main(["verify", str(fam), "--pde", PDE["evolution"], "--network", NET["2221_phi_phi2"]])
    assert code == 3
    assert "nonzero" in capsys.readouterr().out


def test_verify_empty_family_empty_system(tmp_path):
    pde = tmp_path / "z.pde"
    pde.write_text("u(x,t); u_t - u_t = 0\n")
    fam = tmp_path / "e.fam"
    fam.write_text("{\n}\n")
    assert main(["verify", str(fam), "--pde", str(pde), "--network", NET["2221_phi_phi"],
                 "--trials", "5"]) == 0


def test_verify_env_seed(monkeypatch, tmp_path):
    monkeypatch.setenv("AENNM_SEED", "11")
    main(["verify", data_path("families", "evolution_s1.fam"), "--pde", PDE["evolution"],
          "--network", NET["2221_phi_phi2"], "--trials", "5", "--out", str(tmp_path)])
    assert "seed=11" in (tmp_path / "verify.txt").read_text()


def _plot(tmp_path, sol, coef, grid, fix=None):
    out = tmp_path / "g.csv"
    argv = ["plot", data_path("solutions", f"{sol}.sol"), "--coeffs", data_path("coeffs", f"{coef}.coef"),
            "--grid", grid, "--out", str(out)]
    if fix:
        argv += ["--fix", fix]
    code = main(argv)
    return code, (list(csv.reader(open(out))) if out.exists() else None)


def test_plot_sech_square(tmp_path):
    code, rows = _plot(tmp_path, "evolution_sech2", "evolution_sech2", "x=-30:30:201,t=-30:30:201")
    assert code == 0 and rows[0] == ["x", "t", "u"] and len(rows) == 201 * 201 + 1


def test_plot_masks_pole_lines(tmp_path):
    code, rows = _plot(tmp_path, "boussinesq_tan_pair", "boussinesq_tan_pair",
                       "x=-5:5:201,y=-5:5:201", "t=1")
    assert code == 0 and rows[0] == ["x", "y", "t", "u"]
    assert any(r[3] == "" for r in rows[1:])


def test_plot_single_point(tmp_path):
    code, rows = _plot(tmp_path, "evolution_sech2", "evolution_sech2", "x=0:0:1", "t=0")
    assert code == 0 and len(rows) == 2


def test_plot_everywhere_singular(tmp_path):
    sol = tmp_path / "s.sol"
    sol.write_text("vars x, t\nu = x*coth(c)\n")
    coef = tmp_path / "c.coef"
    coef.write_text("c = 0\n")
    assert main(["plot", str(sol), "--coeffs", str(coef), "--grid", "x=0:1:3,t=0:1:3"]) == 4


def test_plot_bad_grid():
    assert main(["plot", data_path("solutions", "evolution_sech2.sol"), "--grid", "x=0:1"]) == 1


def test_plot_unknown_variable():
    assert main(["plot", data_path("solutions", "evolution_sech2.sol"),
                 "--coeffs", data_path("coeffs", "evolution_sech2.coef"), "--grid", "z=0:1:2"]) == 1


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "aennm.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "derive" in r.stdout
