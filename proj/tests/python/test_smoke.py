import math

import numpy as np
import pytest

import gflm


def test_brownian_eigenvalues_grow_like_sixth_power():
    rho = gflm.brownian_eigenvalues(2, 5)
    assert rho.shape == (5,)
    assert np.all(np.diff(rho) > 0)
    shift = rho ** (1.0 / 6.0) / math.pi - np.arange(1, 6)
    assert shift == pytest.approx(np.full(5, 5.0 / 6.0), abs=3e-3)


def test_simulate_shapes_and_determinism():
    a = gflm.simulate("1", 60, B=1.0, seed=7, T=201)
    b = gflm.simulate("1", 60, B=1.0, seed=7, T=201)
    assert a["curves"].shape == (60, 201)
    assert a["y"].shape == (60,)
    assert a["t"][0] == 0.0 and a["t"][-1] == 1.0
    np.testing.assert_array_equal(a["curves"], b["curves"])
    np.testing.assert_array_equal(a["y"], b["y"])


def test_setting4_responses_are_binary():
    s = gflm.simulate("4", 40, alt=False, seed=1, T=201)
    assert set(np.unique(s["y"])) <= {0.0, 1.0}


def test_plrt_rejects_strong_signal():
    s = gflm.simulate("1", 200, B=1.0, seed=3)
    r = gflm.plrt(s["curves"], s["y"])
    assert r["lambda"] > 0
    assert 0.0 <= r["p_value"] < 1e-3
    assert r["reject_at"][0.05]


def test_fit_gcv_returns_slope_on_grid():
    s = gflm.simulate("1", 100, B=1.0, seed=5, T=201)
    f = gflm.fit_gcv(s["curves"], s["y"])
    assert f["beta"].shape == (201,)
    assert f["lambda"] > 0


def test_adaptive_test_pure_noise_is_calibrated_output():
    s = gflm.simulate("1", 100, B=0.0, seed=11)
    r = gflm.adaptive_test(s["curves"], s["y"], reps=500, seed=2)
    assert r["k_n"] == 2
    assert r["tau"].shape == (2,)
    assert 0.0 <= r["p_value"] <= 1.0


def test_schedule_and_bn():
    assert gflm.lambda_schedule(100, 1, 1.0) > gflm.lambda_schedule(1000, 1, 1.0)
    bn = gflm.solve_Bn(10)
    assert 2 * math.pi * bn**2 * math.exp(bn**2) == pytest.approx(100.0, rel=1e-10)


def test_run_table_csv():
    csv = gflm.run_table("1", 50, 1.0, ["plrt"], trials=100, seed=1)
    lines = csv.strip().splitlines()
    assert len(lines) == 2
    assert "plrt" in lines[1]
    assert csv == gflm.run_table("1", 50, 1.0, ["plrt"], trials=100, seed=1, threads=2)


def test_errors_surface_as_exceptions():
    with pytest.raises(gflm.GflmError):
        gflm.simulate("7", 10)
    with pytest.raises(gflm.GflmError):
        gflm.run_table("1", 50, 1.0, ["nope"], trials=100)
