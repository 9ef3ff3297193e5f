import json
import os
import subprocess
import sys

import numpy as np
import pytest

from pseudocurve import cli, congruence as cg
from pseudocurve.chart import CurveField
from pseudocurve.errors import NoConvergence
from pseudocurve.grassmann import PluckerPoint


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def _run(capsys, *argv):
    code = cli.run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path):
    e = np.eye(4)
    return {
        "constant": _write(tmp_path, "constant.json", {"kind": "constant", "center": [1, 0, 0]}),
        "riemann": _write(tmp_path, "riemann.json", cg.riemann_sphere(cg.STANDARD_J).to_json()),
        "perturbed": _write(tmp_path, "perturbed.json",
                            {"kind": "builtin", "name": "perturbed", "params": {"seed": 4}}),
        "e12": _write(tmp_path, "e12.json", {"basis": [e[0].tolist(), e[1].tolist()]}),
        "e13": _write(tmp_path, "e13.json", {"basis": [e[0].tolist(), e[2].tolist()]}),
        "darboux2": _write(tmp_path, "darboux2.json", {"builtin": "darboux2"}),
        "flat": _write(tmp_path, "flat.json", {"builtin": "flat"}),
        "zero": _write(tmp_path, "zero.json", 0),
        "zb": _write(tmp_path, "zb.json", '"zb"'),
        "case3": _write(tmp_path, "case3.json", {"P": [[0, 0], [1, 0]], "w0": [0.1, 0], "f": [[1, 0]]}),
        "base": _write(tmp_path, "base.json", {"z0": [0, 0], "w0": [0.1, 0]}),
        "cr": _write(tmp_path, "cr.json", {"df1": [[1, 0], [0, -1]], "df2": [[0, 1], [1, 0]]}),
        "tmp": tmp_path,
    }


def test_elliptic_check_constant(capsys, files):
    code, out, _ = _run(capsys, "elliptic-check", "--congruence", files["constant"])
    assert code == 0
    assert json.loads(out) == {"elliptic": True, "margin": 1.0}


def test_solve_darboux2(capsys, files, darboux2_json):
    out = files["tmp"] / "field.csv"
    code, _, _ = _run(capsys, "solve", "--chart", files["darboux2"], "--data", darboux2_json,
                      "--n", 64, "--radius", 0.2, "--out", out)
    assert code == 0
    field = CurveField.from_csv(out.read_text())
    assert field.residual < 1e-6
    code, text, _ = _run(capsys, "residual", "--chart", files["darboux2"], "--data", out)
    assert code == 0 and json.loads(text)["residual"] == pytest.approx(field.residual, rel=1e-6)


def test_dual_check_zero(capsys, files):
    code, out, _ = _run(capsys, "dual-check", "--F", files["zero"])
    assert code == 0 and json.loads(out)["misfit"] < 1e-8


def test_domain_error_exit(capsys, files):
    code, _, err = _run(capsys, "coframe", "--F", files["zb"])
    assert code == 2 and "ConstraintViolated" in err


def test_convergence_error_exit(capsys, files, darboux2_json, monkeypatch):
    def stall(*a, **k):
        raise NoConvergence("stalled", best=None, history=None)
    monkeypatch.setattr(cli.solver, "solve_curve", stall)
    code, _, err = _run(capsys, "solve", "--chart", files["darboux2"], "--data", darboux2_json)
    assert code == 3 and "NoConvergence" in err


def test_malformed_json_location(capsys, files):
    bad = _write(files["tmp"], "bad.json", '{"kind": "constant",\n  center: [1, 0, 0]}')
    code, _, err = _run(capsys, "elliptic-check", "--congruence", bad)
    assert code == 1 and "bad.json:2:3" in err


def test_schema_mismatch(capsys, files):
    bad = _write(files["tmp"], "wrong.json", {"kind": "constant"})
    code, _, err = _run(capsys, "elliptic-check", "--congruence", bad)
    assert code == 1 and "schema" in err


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["solve", "--tol.solve", "-1"],
    ["solve", "--tol.nope=1e-3"],
    ["elliptic-check"],
    ["plucker", "--plane", "x.json", "--format", "svg"],
])
def test_bad_arguments(capsys, argv):
    code, _, _ = _run(capsys, *argv)
    assert code == 1


def test_plucker_and_incidence_round_trip(capsys, files):
    code, out, _ = _run(capsys, "plucker", "--plane", files["e12"])
    assert code == 0
    pt = PluckerPoint.from_json(json.loads(out))
    np.testing.assert_allclose(pt.X, [1, 0, 0]) and np.testing.assert_allclose(pt.Y, [1, 0, 0])
    klein = _write(files["tmp"], "klein.json", json.loads(out))
    code, out, _ = _run(capsys, "incidence", "--plane", klein, "--plane", files["e13"])
    assert json.loads(out) == {"incidence": "MeetInLine"}


def test_osculate_both_modes(capsys, files):
    code, out, _ = _run(capsys, "osculate", "--congruence", files["riemann"], "--vector", "1,0,0,0")
    assert code == 0
    np.testing.assert_allclose(json.loads(out)["Jv"], [0, 1, 0, 0], atol=1e-7)
    code, out, _ = _run(capsys, "osculate", "--congruence", files["riemann"], "--vector", "0,0,-1")
    J = np.array(json.loads(out)["J"])
    np.testing.assert_allclose(J @ J, -np.eye(4), atol=1e-9)


@pytest.mark.parametrize("fmt", ["csv", "json", "svg"])
def test_real_points_formats(capsys, files, fmt):
    code, out, _ = _run(capsys, "real-points", "--congruence", files["riemann"], "--plane", files["e13"],
                        "--format", fmt)
    assert code == 0
    if fmt == "json":
        obj = json.loads(out)
        assert obj["closed"] and obj["components"] == 1
    elif fmt == "svg":
        assert out.startswith("<svg") and "polyline" in out
    else:
        assert out.splitlines()[0] == "Y1,Y2,Y3"


def test_tame_and_deform(capsys, files):
    code, out, _ = _run(capsys, "tame", "--congruence", files["perturbed"])
    assert code == 0 and json.loads(out)["min_value"] > 0
    code, out, _ = _run(capsys, "deform", "--congruence", files["perturbed"], "--t", 0.5)
    obj = json.loads(out)
    assert obj["elliptic"]
    again = _write(files["tmp"], "deformed.json", obj["congruence"])
    code, _, _ = _run(capsys, "elliptic-check", "--congruence", again)
    assert code == 0


def test_pde_and_fiber(capsys, files):
    code, out, _ = _run(capsys, "pde-elliptic", "--data", files["cr"])
    assert code == 0 and json.loads(out)["elliptic"] is True
    code, out, _ = _run(capsys, "fiber", "--chart", files["flat"], "--data", files["base"])
    obj = json.loads(out)
    assert obj["is_graph"] and obj["elliptic_at_p0"]


def test_case3_commands(capsys, files):
    code, out, _ = _run(capsys, "darboux-integrate", "--data", files["case3"], "--format", "json")
    assert code == 0
    obj = json.loads(out)
    assert obj["residual"] < 1e-7 and set(obj["closure"]) == {"ideal", "closure"}
    code, out, _ = _run(capsys, "symmetry", "--data", files["case3"], "--format", "json")
    assert code == 0 and set(json.loads(out)) == {"residual_before", "residual_after"}


def test_coframe_feeds_structure_fit(capsys, files):
    code, out, _ = _run(capsys, "coframe", "--F", files["zero"])
    assert code == 0
    cf = _write(files["tmp"], "cf.json", json.loads(out))
    code, out, _ = _run(capsys, "structure-fit", "--data", cf, "--format", "json")
    obj = json.loads(out)
    assert obj["residual"] < 1e-7
    assert max(obj["max_abs"][k] for k in ("U2", "U3", "V2", "V3")) < 1e-8


def test_invariants_and_balance(capsys, files):
    code, out, _ = _run(capsys, "invariants", "--congruence", files["riemann"], "--n", 1, "--format", "json")
    obj = json.loads(out)
    assert obj["max_f"] < 1e-6 and obj["max_g"] < 1e-6
    code, out, _ = _run(capsys, "balance", "--congruence", files["constant"], "--n", 1)
    obj = json.loads(out)
    assert abs(obj["If"]) < 1e-12 and abs(obj["Ig"]) < 1e-12


def test_seeded_runs_are_byte_identical(capsys, files):
    outs = []
    for k in range(2):
        path = files["tmp"] / f"fit{k}.csv"
        assert _run(capsys, "structure-fit", "--F", files["zero"], "--seed", 7, "--out", path)[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    other = files["tmp"] / "fit_other.csv"
    _run(capsys, "structure-fit", "--F", files["zero"], "--seed", 8, "--out", other)
    assert other.read_bytes() != outs[0]


def test_out_is_written_atomically(capsys, files):
    path = files["tmp"] / "res.json"
    assert _run(capsys, "elliptic-check", "--congruence", files["constant"], "--out", path)[0] == 0
    assert json.loads(path.read_text())["elliptic"]
    assert not [p for p in os.listdir(files["tmp"]) if p.startswith(".pseudocurve-")]


def test_console_script(files):
    env = dict(os.environ, PSEUDOCURVE_THREADS="1")
    proc = subprocess.run([sys.executable, "-m", "pseudocurve.cli", "elliptic-check",
                           "--congruence", files["constant"]], capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["elliptic"] is True
