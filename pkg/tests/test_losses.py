import numpy as np
import pytest

import oracles
from elastinv import kernels
from elastinv import losses as L
from elastinv.dataset import Dataset
from elastinv.fields import DisplacementField, FieldError, ScalarGrid, StrainField
from elastinv.training import ModelConfig, init_state


def test_hand_computed_terms():
    meas = DisplacementField.from_arrays(np.zeros((2, 2)), np.zeros((2, 2)))
    pred = DisplacementField.from_arrays(np.array([[1.0, -1.0], [0.0, 2.0]]), np.full((2, 2), 0.5))
    # (1 + 1 + 0 + 2 + 4 * 0.5) / 4 nodes
    assert L.loss_displacement(pred, meas) == pytest.approx(1.5)
    a = StrainField.from_arrays(np.ones((1, 1)), np.zeros((1, 1)), np.full((1, 1), -2.0))
    b = StrainField.from_arrays(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
    assert L.loss_strain(a, b) == pytest.approx(3.0)
    assert L.loss_mean_modulus(ScalarGrid(np.array([[0.2, 0.4]])), 0.25) == pytest.approx(0.1)


def test_residual_term_normalised_by_local_sum():
    res = kernels.ResidualField(ScalarGrid(np.array([[0.9]])), ScalarGrid(np.array([[-0.9]])))
    E = ScalarGrid(np.full((3, 3), 2.0))
    assert L.loss_residual(res, E) == pytest.approx(1.8 / 18.0)


def test_l1_subgradient_is_zero_at_zero():
    v, g = L.l1_mean(np.array([-2.0, 0.0, 3.0]), 3)
    assert v == pytest.approx(5 / 3)
    np.testing.assert_array_equal(g, [-1 / 3, 0.0, 1 / 3])


def test_breakdown_weights():
    bd = L.LossBreakdown.combine(1.0, 1.0, 1.0, 1.0, L.LossWeights())
    assert bd.total == pytest.approx(6.02)
    assert L.LossWeights().masked(r=False, E=False) == L.LossWeights(2.0, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        L.LossWeights(lambda_r=-1)


def test_input_validation():
    with pytest.raises(ValueError):
        L.loss_mean_modulus(ScalarGrid(np.ones((2, 2))), 0.0)
    with pytest.raises(FieldError):
        L.residual_term(np.ones((2, 1, 1)), np.zeros((1, 1)))
    tiny = Dataset(DisplacementField.from_arrays(np.ones((3, 3)), np.ones((3, 3))), calibration_capable=False)
    model = ModelConfig(depth=1, width=2)
    with pytest.raises(FieldError, match="4x4"):
        L.Problem.from_dataset(tiny, model.networks())


@pytest.fixture(scope="module")
def small_problem():
    rng = np.random.default_rng(3)
    ds = Dataset(DisplacementField.from_arrays(*rng.normal(scale=0.1, size=(2, 5, 6))), calibration_capable=False)
    model = ModelConfig(depth=2, width=6)
    nets = model.networks()
    params = init_state(nets, 0).params
    return ds, nets, params


def test_total_loss_agrees_with_long_double_reference(small_problem):
    ds, nets, params = small_problem
    bd = L.total_loss(nets, params, ds)
    ref = oracles.objective_ld(np.stack([ds.measured.ux.values, ds.measured.uy.values]))(params)
    assert bd.total == pytest.approx(float(ref), rel=1e-12)


def test_field_level_losses_agree_with_evaluate(small_problem):
    ds, nets, params = small_problem
    problem = L.Problem.from_dataset(ds, nets)
    ev = L.evaluate(problem, nets, params, L.LossWeights(), 0.3)
    ny, nx = ds.shape
    U = ev.outputs["displacement"].T.reshape(2, ny, nx)
    pred_u = DisplacementField.from_arrays(*U)
    eps_hat = StrainField.from_arrays(*ev.outputs["strain"].T.reshape(3, ny - 1, nx - 1))
    E = ScalarGrid(ev.outputs["elasticity"][:, 0].reshape(ny - 1, nx - 1))
    nu = ev.outputs["elasticity"][:, 1].reshape(ny - 1, nx - 1)
    assert ev.breakdown.L_u == pytest.approx(L.loss_displacement(pred_u, ds.measured), rel=1e-14)
    assert ev.breakdown.L_eps == pytest.approx(
        L.loss_strain(eps_hat, kernels.strain_from_displacement(pred_u)), rel=1e-14)
    sig = kernels.stress_array(eps_hat.stack(), E.values, nu)
    rx, ry = kernels.residual_array(sig)
    res = kernels.ResidualField(ScalarGrid(rx), ScalarGrid(ry))
    assert ev.breakdown.L_r == pytest.approx(L.loss_residual(res, E), rel=1e-14)
    assert ev.breakdown.L_E == pytest.approx(L.loss_mean_modulus(E, 0.3), rel=1e-14)


def test_masked_objective_and_partial_gradients(small_problem):
    ds, nets, params = small_problem
    problem = L.Problem.from_dataset(ds, nets)
    w = L.LossWeights()
    ow = w.masked(eps=False, r=False, E=False)
    ev = L.evaluate(problem, nets, params, w, 0.25, ow, grad_for=("displacement",))
    assert ev.objective == pytest.approx(2.0 * ev.breakdown.L_u)
    assert set(ev.grads) == {"displacement"}
    full = L.evaluate(problem, nets, params, w, 0.25, grad_for=L.NETS)
    assert set(full.grads) == set(L.NETS)
    assert full.objective == pytest.approx(full.breakdown.total)
