import json
import os
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

import tinysocp

ROOT = Path(__file__).resolve().parents[2]

A_DI = [[1.0, 0.1], [0.0, 1.0]]
B_DI = [[0.005], [0.1]]


def find_cli():
    candidates = [os.environ.get("TINYSOCP_CLI"), ROOT / "build" / "tools" / "tinysocp",
                  shutil.which("tinysocp")]
    for c in candidates:
        if c and Path(c).is_file():
            return str(c)
    return None


def point_mass(dt=0.05, g=9.81):
    A = np.eye(6)
    A[:3, 3:] = dt * np.eye(3)
    B = np.vstack([0.5 * dt * dt * np.eye(3), dt * np.eye(3)])
    c = np.zeros(6)
    c[2] = -0.5 * dt * dt * g
    c[5] = -dt * g
    return A, B, c


def problem_json(N, A, B, c, Q, R, constraints=None, settings=None):
    doc = {
        "schema": "tinysocp-problem-v1",
        "dims": {"n": len(A), "m": len(B[0]), "N": N},
        "dynamics": {"A": np.asarray(A).tolist(), "B": np.asarray(B).tolist(),
                     "c": np.asarray(c).tolist()},
        "cost": {"Q": np.asarray(Q).tolist(), "R": np.asarray(R).tolist()},
    }
    if constraints:
        doc["constraints"] = constraints
    if settings:
        doc["settings"] = settings
    return doc


def shared_problems():
    """Five problem files shared with the CLI: (name, doc, x0, xref rows or None)."""
    A, B, c = point_mass()
    out = [
        ("box_input", problem_json(20, A_DI, B_DI, [0, 0], np.eye(2), [[0.1]],
                                   {"u_min": [-0.5], "u_max": [0.5]}, {"max_iter": 2000}),
         [2.0, 0.0], None),
        ("box_state", problem_json(15, A_DI, B_DI, [0, 0], 10 * np.eye(2), [[1.0]],
                                   {"x_min": [-3, -0.4], "x_max": [3, 0.4]}, {"rho": 5.0}),
         [1.0, -0.3], None),
        ("unconstrained", problem_json(12, A_DI, B_DI, [0, 0], np.eye(2), [[0.01]],
                                       None, {"rho": 0.1, "max_iter": 50}),
         [0.3, 0.2], None),
        ("thrust_cone", problem_json(16, A, B, c, np.diag([10, 10, 10, 1, 1, 1]), 0.1 * np.eye(3),
                                     {"input_cones": [{"start": 0, "len": 3}]},
                                     {"rho": 10.0, "max_iter": 500}),
         [2.0, -1.0, 4.0, 0.5, 0.0, -1.0], None),
        ("tracking", problem_json(6, A_DI, B_DI, [0, 0], np.eye(2), [[0.1]],
                                  {"u_min": [-2], "u_max": [2]}, {"abs_pri_tol": 1e-6,
                                                                  "abs_dua_tol": 1e-6,
                                                                  "max_iter": 20000}),
         [0.0, 0.0], [[1.0, 0.0]] * 6),
    ]
    return out


def read_table(path, n, m):
    rows = Path(path).read_text().splitlines()
    assert rows[0] == "k," + ",".join(f"x{i}" for i in range(n)) + "," + ",".join(
        f"u{i}" for i in range(m))
    x, u = [], []
    for row in rows[1:]:
        cells = row.split(",")[1:]
        x.append([float(v) for v in cells[:n]])
        if cells[n]:
            u.append([float(v) for v in cells[n:]])
    return np.array(x), np.array(u)


def test_calls_before_setup_raise_lifecycle_error(tmp_path):
    t = tinysocp.TinySocp()
    assert not t.is_setup
    for call in (t.solve, lambda: t.set_x0([0, 0]), t.get_u, lambda: t.codegen(tmp_path)):
        with pytest.raises(tinysocp.LifecycleError) as info:
            call()
        assert info.value.name == "NotSetUp"


@pytest.mark.parametrize("kwargs, name", [
    (dict(R=[[-1.0]]), "RNotPositiveDefinite"),
    (dict(Q=[[1.0, 2.0], [0.0, 1.0]]), "NotSymmetric"),
    (dict(bounds={"u_min": [1.0], "u_max": [-1.0]}), "BoundsInverted"),
    (dict(settings={"rho": -1.0}), "InvalidSettings"),
    (dict(N=1), "InvalidDimensions"),
])
def test_validation_errors_carry_native_names(kwargs, name):
    args = dict(N=10, A=A_DI, B=B_DI, c=None, Q=np.eye(2), R=[[0.1]])
    args.update(kwargs)
    with pytest.raises(tinysocp.ValidationError) as info:
        tinysocp.TinySocp().setup(**args)
    assert info.value.name == name


def test_bad_shapes_are_rejected():
    t = tinysocp.TinySocp().setup(10, A_DI, B_DI, None, np.eye(2), [[0.1]])
    with pytest.raises(ValueError):
        t.set_x0([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        t.set_xref(np.zeros((2, 10)))
    with pytest.raises(KeyError):
        tinysocp.TinySocp().setup(10, A_DI, B_DI, None, np.eye(2), [[0.1]],
                                  settings={"rhoo": 1.0})


def test_malformed_file_names_the_key(tmp_path):
    doc = problem_json(5, A_DI, B_DI, [0, 0], np.eye(2), [[0.1]])
    doc["cost"]["R"] = "heavy"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(tinysocp.ProblemFileError) as info:
        tinysocp.TinySocp().setup_file(path)
    assert info.value.key == "cost.R"


def test_zero_xref_matches_default():
    def run(with_ref):
        t = tinysocp.TinySocp().setup(20, A_DI, B_DI, None, np.eye(2), [[0.1]],
                                      {"u_min": [-0.5], "u_max": [0.5]})
        t.set_x0([2.0, 0.0])
        if with_ref:
            t.set_xref(np.zeros((20, 2)))
            t.set_uref(np.zeros((19, 1)))
        report = t.solve()
        return report, t.get_u(full=True)

    (r0, u0), (r1, u1) = run(False), run(True)
    assert r0 == r1
    assert np.array_equal(u0, u1)


def test_setup_matches_setup_file(tmp_path):
    name, doc, x0, _ = shared_problems()[3]
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc))
    a = tinysocp.TinySocp().setup_file(path)
    cons = doc["constraints"]
    b = tinysocp.TinySocp().setup(doc["dims"]["N"], doc["dynamics"]["A"], doc["dynamics"]["B"],
                                  doc["dynamics"]["c"], doc["cost"]["Q"], doc["cost"]["R"],
                                  socs={"input": [(c["start"], c["len"]) for c in
                                                  cons["input_cones"]]},
                                  settings=doc["settings"])
    for t in (a, b):
        t.set_x0(x0)
        t.solve()
    assert np.array_equal(a.get_u(full=True), b.get_u(full=True))
    assert np.array_equal(a.get_x(), b.get_x())


@pytest.mark.skipif(find_cli() is None, reason="tinysocp CLI not built")
@pytest.mark.parametrize("case", shared_problems(), ids=lambda c: c[0])
def test_round_trip_matches_cli(tmp_path, case):
    name, doc, x0, xref = case
    problem = tmp_path / f"{name}.json"
    problem.write_text(json.dumps(doc))
    table = tmp_path / f"{name}.csv"
    cmd = [find_cli(), "solve", "--problem", str(problem), "--x0",
           ",".join(repr(v) for v in x0), "--out", str(table)]
    t = tinysocp.TinySocp().setup_file(problem)
    t.set_x0(x0)
    if xref is not None:
        ref_path = tmp_path / f"{name}.xref.csv"
        ref_path.write_text("\n".join(",".join(repr(v) for v in row) for row in xref) + "\n")
        cmd += ["--xref", str(ref_path)]
        t.set_xref(xref)
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode in (0, 2), proc.stdout + proc.stderr
    report = t.solve()
    assert proc.stdout.strip().split(",")[:2] == [report["status"], str(report["iterations"])]

    n, m = doc["dims"]["n"], doc["dims"]["m"]
    x_cli, u_cli = read_table(table, n, m)
    np.testing.assert_allclose(t.get_u(full=True), u_cli, rtol=0, atol=1e-12)
    np.testing.assert_allclose(t.get_x(), x_cli, rtol=0, atol=1e-12)
    np.testing.assert_allclose(t.get_u(), u_cli[0], rtol=0, atol=1e-12)


def test_setup_codegen_then_mpc_loop(tmp_path):
    # Setup, generate code, then run an MPC loop through the same handle.
    A, B, c = point_mass()
    N = 16
    Q = np.diag([10.0, 10.0, 10.0, 1.0, 1.0, 1.0])
    R = 0.1 * np.eye(3)
    bounds = {"x_min": [-np.inf, -np.inf, 0.0, -np.inf, -np.inf, -np.inf]}
    socs = {"input": [(0, 3)]}
    settings = {"rho": 10.0, "max_iter": 100, "abs_pri_tol": 1e-2, "abs_dua_tol": 1e-2}

    tiny = tinysocp.TinySocp()
    tiny.setup(N, A, B, c, Q, R, bounds, socs, settings)
    manifest = tiny.codegen(tmp_path / "out", precision="f32")
    assert "precision: f32" in manifest
    assert (tmp_path / "out" / "solver" / "tiny_solver.cpp").is_file()

    x = np.array([2.0, -1.0, 4.0, 0.5, 0.0, -1.0])
    tiny.set_xref(np.zeros((N, 6)))
    for _ in range(40):
        tiny.set_x0(x)
        report = tiny.solve()
        assert report["status"] in ("Solved", "MaxIters")
        u = tiny.get_u()
        assert u.shape == (3,)
        x = np.asarray(A) @ x + np.asarray(B) @ u + c
        tiny.warm_start_shift()
    assert np.linalg.norm(x[:3]) < 4.0


def test_codegen_rejects_bad_precision(tmp_path):
    t = tinysocp.TinySocp().setup(5, A_DI, B_DI, None, np.eye(2), [[0.1]])
    with pytest.raises(ValueError):
        t.codegen(tmp_path, precision="f16")


def test_handles_are_independent():
    a = tinysocp.TinySocp().setup(10, A_DI, B_DI, None, np.eye(2), [[0.1]])
    b = tinysocp.TinySocp().setup(10, A_DI, B_DI, None, np.eye(2), [[0.1]])
    a.set_x0([1.0, 0.0])
    b.set_x0([-1.0, 0.0])
    a.solve()
    b.solve()
    np.testing.assert_array_equal(a.get_u(), -b.get_u())
