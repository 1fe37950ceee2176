import numpy as np
import pytest

from elastinv.calibration import CalibrationError, boundary_force, calibrate, load_calibration, save_calibration
from elastinv.container import ContainerError, write_container
from elastinv.fields import FieldError, ScalarGrid, StressField


def _stress(sxx, h=1.0):
    sxx = np.asarray(sxx, dtype=float)
    z = np.zeros_like(sxx)
    return StressField.from_arrays(sxx, z, z, h=h)


def test_boundary_force_examples():
    assert boundary_force(_stress(np.ones((10, 4)))) == pytest.approx(10.0)
    col = np.zeros((3, 2))
    col[:, -1] = [1, 2, 3]
    assert boundary_force(_stress(col, h=0.5)) == pytest.approx(3.0)
    assert boundary_force(_stress(col), h=1.0) == pytest.approx(6.0)


def test_calibration_recovers_scale_and_is_equivariant():
    rng = np.random.default_rng(0)
    E = ScalarGrid(rng.uniform(0.5, 2.0, size=(6, 6)))
    sig = _stress(rng.uniform(0.1, 1.0, size=(6, 6)))
    base = calibrate(E, sig, 3.0)
    assert base.c_hat * base.boundary_force_predicted == pytest.approx(3.0)
    k = 7.0
    scaled = calibrate(E.like(E.values / k), sig.scaled(1 / k), 3.0)
    assert scaled.c_hat == pytest.approx(k * base.c_hat, rel=1e-14)
    np.testing.assert_allclose(scaled.E_absolute.values, base.E_absolute.values, rtol=1e-14)


def test_calibration_errors():
    E = ScalarGrid(np.ones((3, 3)))
    with pytest.raises(CalibrationError, match="uncalibratable"):
        calibrate(E, _stress(-np.ones((3, 3))), 1.0)
    with pytest.raises(CalibrationError):
        calibrate(E, _stress(np.ones((3, 3))), 0.0)
    with pytest.raises(FieldError):
        calibrate(ScalarGrid(np.ones((2, 3))), _stress(np.ones((3, 3))), 1.0)


def test_calibration_file_round_trip(tmp_path):
    res = calibrate(ScalarGrid(np.full((4, 4), 0.25)), _stress(np.full((4, 4), 0.0025)), 0.04)
    save_calibration(res, tmp_path / "c.efd")
    back = load_calibration(tmp_path / "c.efd")
    assert back.c_hat == res.c_hat
    np.testing.assert_array_equal(back.E_absolute.values, res.E_absolute.values)
    write_container(tmp_path / "bad.efd", {"format": "efd-dataset"}, {})
    with pytest.raises(ContainerError):
        load_calibration(tmp_path / "bad.efd")
