import math
import os

import pytest

import horizonlab as hl

LN2 = math.log(2.0)


def l1_grid(T, h=0.01):
    return hl.GridSpec([-3.0], [3.0], h, h, T)


def test_registry_and_problem():
    assert set(hl.builtin_problem_names()) == {"linear-l1", "capital-stock", "double-integrator"}
    p = hl.problem("linear-l1")
    assert p.name == "linear-l1"
    assert p.state_dim == 1
    assert p.dynamics(0.0, [1.0], [0.5]) == [0.0]
    assert p.running_cost(0.0, [1.0], [-0.5]) == pytest.approx(-1.5)


def test_bad_inputs_raise():
    with pytest.raises(KeyError):
        hl.problem("no-such-problem")
    with pytest.raises(ValueError):
        hl.GridSpec([-1.0], [1.0], -0.1, 0.1, 1.0)


def test_value_grid_closed_form():
    # V^T(0, b) = b e^{-T} - 1/2 - b + ln2/2 for T > ln 2
    grid = hl.solve_finite_horizon(hl.problem("linear-l1"), l1_grid(2.0))
    for b in (-1.0, 0.0, 1.0):
        assert grid.evaluate(0.0, [b]) == pytest.approx(b * math.exp(-2.0) - 0.5 - b + LN2 / 2, abs=2e-2)
    assert grid.num_layers == 201


def test_value_csv_round_trip(tmp_path):
    grid = hl.solve_finite_horizon(hl.problem("linear-l1"), l1_grid(0.5, 0.05))
    csv, side = str(tmp_path / "v.csv"), str(tmp_path / "v.json")
    grid.write_csv(csv, side)
    back = hl.read_value_csv(csv, side)
    assert back.evaluate(0.1, [0.3]) == grid.evaluate(0.1, [0.3])


def test_limits():
    p = hl.problem("linear-l1")
    v_all = hl.estimate_v_all(p, l1_grid(2.0), 0.0)
    assert v_all["limit"] == pytest.approx((LN2 - 1) / 2, abs=2e-2)
    v_inf = hl.estimate_v_inf(p, 1.0)
    assert v_inf["limit"] == pytest.approx(-1.0, abs=2e-2)


def test_certificate():
    p = hl.problem("linear-l1")
    V = hl.solve_finite_horizon(p, l1_grid(16.0))
    rep = hl.pmp_certificate(p, V, hl.constant_control(0.0), [2, 4, 8, 16], l1_grid(2.0))
    assert rep["verdict"] == "certificate"
    # seed 1 - e^{-16} drifts by e^t over [0, 10]
    assert abs(rep["psi0"][0] - 1.0) < 1e-6
    assert max(abs(psi[0] - 1.0) for psi in rep["arc_psi"]) < 1e-2
    spoiler = hl.pmp_certificate(p, V, hl.constant_control(0.5), [2, 4, 8, 16], l1_grid(2.0))
    assert spoiler["verdict"] == "no certificate"


def test_frechet_and_min_time():
    assert hl.frechet_super_test(lambda x: -abs(x[0]), [0.0], [0.5])
    assert not hl.frechet_super_test(lambda x: abs(x[0]), [0.0], [0.0])
    assert hl.unit_speed_min_time([0.0], [0.7]) == pytest.approx(0.7, abs=0.02)


def test_run_and_manifest(tmp_path):
    out = tmp_path / "run"
    code, msg, outputs, summary = hl.run(
        {"task": "value", "grid": {"h": 0.05, "dt": 0.1, "T": 0.1}, "out": str(out)}
    )
    assert code == 0, msg
    assert summary["results"]["value"]["values_at_points"][1]["V0"] == pytest.approx(-0.15)
    assert "manifest.json" in outputs
    for f in outputs:
        assert os.path.exists(out / f)
    code, msg, _, _ = hl.run({"task": "nope", "out": str(out)})
    assert code == 2
    assert "valid tasks" in msg
