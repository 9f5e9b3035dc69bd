import math
import os
import pathlib

import pytest

import refplan

ROOT = pathlib.Path(__file__).resolve().parents[2]
DEMO = ROOT / "data" / "demo"


@pytest.fixture(scope="module")
def demo():
    return refplan.load_instance(DEMO)


def test_instance_summary(demo):
    s = demo.summary()
    assert s["periods"] == len(demo.periods) == 2
    assert s["units"] == len(demo.units)
    assert "CDU1" in demo.units
    assert demo.units["CDU1"] == "CDU"
    assert not any(d.startswith("error") for d in demo.diagnostics())


def test_model_statistics(demo):
    full = refplan.build_model(demo)
    fixed = refplan.build_model(demo, delta_base=False)
    one = refplan.build_model(demo, horizon=1)
    assert not full.is_linear
    assert full.statistics()["variables"] == full.num_variables
    assert fixed.num_variables < full.num_variables
    assert one.num_variables < full.num_variables
    assert refplan.build_model(demo, inventory_binaries=False).statistics()["binaries"] == 0


def test_relaxation_bounds_plan(demo):
    model = refplan.build_model(demo, inventory_binaries=False)
    relaxed = refplan.relax(model)
    assert relaxed.is_linear
    bound = refplan.solve_lp(relaxed)
    assert bound["status"] == "optimal"
    result = refplan.solve(demo, method="slp")
    assert result["report"]["feasible"]
    assert result["objective"] <= bound["objective"] * (1 + 1e-9)


def test_plan_round_trip_and_check(demo, tmp_path):
    result = refplan.solve(demo, method="slp")
    plan = result["plan"]
    path = tmp_path / "plan.csv"
    plan.write(path)
    back = refplan.read_solution(path)
    assert back.items() == plan.items()
    report = refplan.check_solution(demo, back)
    assert report["feasible"]
    assert math.isclose(report["profit"], result["objective"], rel_tol=1e-6)
    key, value = back.items()[0]
    back[key] = value + 100.0
    assert not refplan.check_solution(demo, back)["feasible"]
    assert refplan.calibrate(demo, plan)


def test_export_and_errors(demo, tmp_path):
    relaxed = refplan.relax(refplan.build_model(demo))
    out = tmp_path / "m.mps"
    refplan.export_model(relaxed, out)
    assert out.read_text().startswith("NAME")
    assert (tmp_path / "m.mps.names.csv").exists()
    with pytest.raises(refplan.ParseError):
        refplan.load_instance(tmp_path)
    with pytest.raises(refplan.ModelError):
        refplan.solve_lp(refplan.build_model(demo))
    with pytest.raises(refplan.MissingVariableError):
        refplan.Plan()[("FVI", ("NOPE",), "P1")]
    with pytest.raises(ValueError):
        refplan.relax(relaxed, mode="exact")
