import math

import numpy as np
import pytest

import confdyn


def test_registry():
    names = confdyn.models()
    assert "circle-linear" in names
    assert "alpha" in confdyn.model_parameters("circle-linear")


def test_vector_field_circle_linear():
    # X = (sin 2 pi theta, -alpha r - 2 pi r cos 2 pi theta)
    x = np.array([0.1, 0.7])
    got = confdyn.vector_field("circle-linear", x, {"alpha": [0.5]})
    want = [math.sin(2 * math.pi * 0.1), -0.5 * 0.7 - 2 * math.pi * 0.7 * math.cos(2 * math.pi * 0.1)]
    assert np.allclose(got, want, rtol=0, atol=1e-14)


def test_simulate_blowup_time():
    out = confdyn.simulate("circle-quadratic", np.array([0.0, -1.0]), 2.0, 3, {"alpha": [1.0]})
    assert out["status"] == "blow-up"
    assert abs(out["t_escape"] - math.log(2 * math.pi / (2 * math.pi - 1))) < 1e-6


def test_simulate_shape():
    out = confdyn.simulate("damped-mechanical", np.array([0.2, 0.0]), 1.0, 11, method="splitting", h=0.01)
    assert out["states"].shape == (11, 2)
    assert out["times"][0] == 0.0 and out["times"][-1] == 1.0


def test_conformality_ratio():
    r = confdyn.conformality_ratio("nonexact-linear", np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]))
    assert abs(r - (7 - 3 * math.sqrt(5)) / 2) < 1e-12


def test_errors_are_raised():
    with pytest.raises(confdyn.ConfdynError):
        confdyn.vector_field("no-such-model", np.zeros(2))
    with pytest.raises(confdyn.ConfdynError):
        confdyn.verify("unknown-scope")


def test_verify_geometry():
    report = confdyn.verify("geometry")
    assert report["all_passed"]
    assert report["total"] == 3


def test_run_config(tmp_path):
    code, log, err = confdyn.run_config(
        "operation = simulate\nmodel = circle-linear\n[run]\nt = 1\nx0 = (0.25, 1)\n", str(tmp_path)
    )
    assert code == 0, err
    assert (tmp_path / "trajectory.csv").read_text().splitlines()[1] == "0,0.25,1"
