import json
import math
import os

import pytest

_kktrace = pytest.importorskip("_kktrace")

SU2_FUND = [0.7071067811865476]

FLAT_U1 = json.dumps({
    "schema_version": 1,
    "group": "U1",
    "lambda0": [4],
    "level": 1,
})


def test_weyl_dimension():
    assert _kktrace.weyl_dimension("U1", [3.0], 7) == 1
    for m in range(1, 9):
        assert _kktrace.weyl_dimension("SU2", SU2_FUND, m) == m + 1


def test_casimir():
    assert _kktrace.casimir_eigenvalue("U1", [2.0], 3) == pytest.approx(36.0)
    assert _kktrace.casimir_eigenvalue("SU2", SU2_FUND, 4) == pytest.approx(12.0)


def test_character():
    val = _kktrace.character("SU2", SU2_FUND, 3, [0.9])
    expect = math.sin(4 * 0.9) / math.sin(0.9)
    assert abs(val - expect) < 1e-10


def test_hamiltonian_and_null_defect():
    model = _kktrace.ModelSpec.from_json(FLAT_U1)
    H = _kktrace.hamiltonian(model, 0.0, 3.0, [4.0])
    assert H == pytest.approx(5.0)
    assert abs(_kktrace.null_defect(model, -H, 0.0, 3.0, [4.0])) < 1e-12


def test_integrate_conserves():
    model = _kktrace.ModelSpec.from_json(FLAT_U1)
    out = _kktrace.integrate(model, 0.0, 3.0, [4.0], 25.0, 1e-11)
    assert out["energy_drift"] < 1e-8
    assert out["charge_drift"] < 1e-10


def test_flat_spectrum_values():
    eigs = _kktrace.flat_spectrum("U1", [2.0], 0.0, 0.0, 2, -5.5, 5.5)
    lam = [e[0] for e in eigs]
    assert any(abs(v - 5.0) < 1e-12 for v in lam)
    assert any(abs(v + 5.0) < 1e-12 for v in lam)


def test_run_scenario(tmp_path):
    sdir = os.environ.get("KKTRACE_SCENARIO_DIR", "scenarios")
    path = os.path.join(sdir, "08_poincare_synthetic.json")
    result = _kktrace.run_scenario(path, str(tmp_path))
    assert result["exit_code"] == 0
    assert result["pass"]


def test_bad_schema_is_an_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 99, "kind": "holonomy", "seed": 1}))
    result = _kktrace.run_scenario(str(bad), str(tmp_path))
    assert result["error"]
    assert result["exit_code"] == 1

    with pytest.raises(_kktrace.KktraceError):
        _kktrace.ModelSpec.from_json(json.dumps({"group": "U1", "lambda0": [1]}))


def test_deterministic_rerun(tmp_path):
    sdir = os.environ.get("KKTRACE_SCENARIO_DIR", "scenarios")
    path = os.path.join(sdir, "06_holonomy_flux.json")
    a = _kktrace.run_scenario(path, str(tmp_path / "a"))
    b = _kktrace.run_scenario(path, str(tmp_path / "b"))
    assert a["pass"] and b["pass"]
    name = a["name"]
    for artifact in ("series.csv", "peaks.csv", "atlas.json"):
        fa = tmp_path / "a" / name / artifact
        fb = tmp_path / "b" / name / artifact
        assert fa.read_bytes() == fb.read_bytes()
