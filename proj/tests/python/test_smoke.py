import math

import numpy as np
import pytest

import svlab


def test_simulate_shapes_and_determinism():
    a = svlab.simulate("double-pendulum", 50, seed=3)
    b = svlab.simulate("double-pendulum", 50, seed=3)
    assert a["states"].shape == (50, 4)
    assert a["aux"].shape[0] == 50
    assert np.array_equal(a["states"], b["states"])


def test_leapfrog_energy_drift_small():
    out = svlab.simulate("single-pendulum", 600, initial=[0.5, 0.0])
    h = [svlab.hamiltonian("single-pendulum", s) for s in out["states"]]
    assert abs(h[-1] - h[0]) / abs(h[0]) < 1e-3


def test_small_angle_period():
    spec = svlab.system_defaults("single-pendulum")
    out = svlab.simulate("single-pendulum", 400, initial=[0.01, 0.0], dt_frame=0.01, substeps=20)
    q = out["states"][:, 0]
    ups = [i for i in range(1, len(q)) if q[i - 1] < 0 <= q[i]]
    period = (ups[1] - ups[0]) * 0.01
    assert period == pytest.approx(2 * math.pi * math.sqrt(spec["l1"] / spec["g"]), rel=0.01)


def test_mle_id_line_segment():
    rng = np.random.default_rng(0)
    t = rng.uniform(size=(2000, 1))
    pts = np.hstack([t, 2 * t, -t])
    est = svlab.mle_id(pts)
    assert 0.9 <= est["value"] <= 1.1
    assert svlab.dof_round(5.34) == 6


def test_count_active_dims():
    count, mask = svlab.count_active_dims([0.8, 0.5, 0.009, 1e-4], 0.01)
    assert count == 2
    assert mask == [True, True, False, False]


def test_config_validation():
    cfg = svlab.default_config()
    cfg["train"]["betta"] = 1
    with pytest.raises(svlab.Error, match="train.betta"):
        svlab.validate_config(cfg)
    with pytest.raises(svlab.ContractError):
        svlab.desk_config("single-pendulum", "no-such-variant")


def test_train_tiny_run(tmp_path):
    cfg = svlab.desk_config("single-pendulum", "pi-vae", seed=1)
    cfg["data"]["trajectories"] = 12
    cfg["data"]["frames"] = 20
    cfg["train"]["epochs"] = 2
    report = svlab.train(cfg, tmp_path / "run")
    assert report["dof"]["variant"] == "pi-vae"
    assert len(report["train"]["history"]) == 2
    assert (tmp_path / "run" / "report.json").exists()
