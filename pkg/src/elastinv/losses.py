"""The four training losses and the weighted objective.

Array-level helpers return the loss together with its gradient so the
objective can be pulled back through the stencils and into the networks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dataset import Dataset, cell_coordinates, node_coordinates
from .fields import DisplacementField, FieldError, ScalarGrid, StrainField
from .kernels import ResidualField
from .networks import CoordinateNet, NetworkParameters, NonFiniteError, forward_with_pullback

NETS = ("displacement", "strain", "elasticity")


@dataclass(frozen=True)
class LossWeights:
    lambda_u: float = 2.0
    lambda_eps: float = 1.0
    lambda_r: float = 3.0
    lambda_E: float = 0.02

    def __post_init__(self):
        for name in ("lambda_u", "lambda_eps", "lambda_r", "lambda_E"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def masked(self, u=True, eps=True, r=True, E=True) -> "LossWeights":
        return LossWeights(
            self.lambda_u if u else 0.0,
            self.lambda_eps if eps else 0.0,
            self.lambda_r if r else 0.0,
            self.lambda_E if E else 0.0,
        )


@dataclass(frozen=True)
class LossBreakdown:
    L_u: float
    L_eps: float
    L_r: float
    L_E: float
    total: float

    @classmethod
    def combine(cls, L_u, L_eps, L_r, L_E, weights: LossWeights) -> "LossBreakdown":
        total = (
            weights.lambda_u * L_u
            + weights.lambda_eps * L_eps
            + weights.lambda_r * L_r
            + weights.lambda_E * L_E
        )
        return cls(float(L_u), float(L_eps), float(L_r), float(L_E), float(total))


# array-level terms: each returns (value, gradient w.r.t. the first argument(s))

def l1_mean(diff: np.ndarray, count: int):
    """``sum(|diff|) / count`` and its subgradient (0 at exact zeros)."""
    return float(np.abs(diff).sum() / count), np.sign(diff) / count


def residual_term(res: np.ndarray, E_sum: np.ndarray):
    """Mean of ``(|rx| + |ry|) / E_sum`` with gradients w.r.t. ``res`` and ``E_sum``."""
    if not np.all(E_sum > 0):
        raise FieldError("local modulus sum must be strictly positive")
    count = E_sum.size
    mag = np.abs(res).sum(axis=0)
    value = float((mag / E_sum).sum() / count)
    g_res = np.sign(res) / E_sum / count
    g_Esum = -mag / (E_sum * E_sum) / count
    return value, g_res, g_Esum


# field-level losses

def loss_displacement(pred: DisplacementField, measured: DisplacementField) -> float:
    if not pred.ux.same_lattice(measured.ux):
        raise FieldError(f"lattice mismatch: {pred.shape} vs {measured.shape}")
    d = np.stack([pred.ux.values - measured.ux.values, pred.uy.values - measured.uy.values])
    return l1_mean(d, pred.ux.values.size)[0]


def loss_strain(pred: StrainField, derived: StrainField) -> float:
    if pred.shape != derived.shape:
        raise FieldError(f"lattice mismatch: {pred.shape} vs {derived.shape}")
    return l1_mean(pred.stack() - derived.stack(), pred.exx.values.size)[0]


def loss_residual(res: ResidualField, E_pred: ScalarGrid) -> float:
    E_sum = kernels.local_modulus_sum(E_pred)
    if E_sum.shape != res.shape:
        raise FieldError(f"lattice mismatch: residual {res.shape} vs modulus sum {E_sum.shape}")
    return residual_term(np.stack([res.rx.values, res.ry.values]), E_sum.values)[0]


def loss_mean_modulus(E_pred: ScalarGrid, E_c: float) -> float:
    if not E_c > 0:
        raise ValueError(f"E_c must be positive, got {E_c}")
    return l1_mean(E_pred.values - E_c, E_pred.values.size)[0]


# network-level objective

@dataclass
class Problem:
    """Everything about a dataset that stays fixed during training."""

    measured: np.ndarray  # (2, ny, nx)
    h: float
    t: float
    node_features: dict = field(default_factory=dict)
    cell_features: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.measured.shape[1:]

    @classmethod
    def from_dataset(cls, dataset: Dataset, nets: dict) -> "Problem":
        ny, nx = dataset.shape
        if ny < 4 or nx < 4:
            raise FieldError(f"training needs at least a 4x4 displacement grid, got {ny}x{nx}")
        m = dataset.measured
        nodes, cells = node_coordinates(ny, nx), cell_coordinates(ny, nx)
        return cls(
            measured=np.stack([m.ux.values, m.uy.values]),
            h=dataset.h,
            t=dataset.t,
            node_features={"displacement": nets["displacement"].features(nodes)},
            cell_features={k: nets[k].features(cells) for k in ("strain", "elasticity")},
        )


@dataclass
class Evaluation:
    breakdown: LossBreakdown
    objective: float
    grads: dict  # network name -> NetworkParameters (only requested networks)
    outputs: dict  # raw network outputs on the lattice


def evaluate(
    problem: Problem,
    nets: dict,
    params: dict,
    weights: LossWeights,
    E_c: float,
    objective_weights: LossWeights | None = None,
    grad_for=(),
    frozen_outputs: dict | None = None,
) -> Evaluation:
    """Full loss breakdown plus the gradient of a (possibly masked) objective.

    ``objective_weights`` defaults to ``weights``. Gradients are returned only
    for networks named in ``grad_for``. ``frozen_outputs`` may carry
    precomputed outputs of networks that are not being trained.
    """
    if not E_c > 0:
        raise ValueError(f"E_c must be positive, got {E_c}")
    ow = weights if objective_weights is None else objective_weights
    ny, nx = problem.shape
    frozen = frozen_outputs or {}
    outs, pulls = {}, {}
    for name in NETS:
        feats = problem.node_features[name] if name == "displacement" else problem.cell_features[name]
        if name in grad_for:
            outs[name], pulls[name] = forward_with_pullback(params[name], feats, nets[name].net)
        elif name in frozen:
            outs[name] = frozen[name]
        else:
            outs[name] = forward_with_pullback(params[name], feats, nets[name].net)[0]

    U = outs["displacement"].T.reshape(2, ny, nx)
    eps_hat = outs["strain"].T.reshape(3, ny - 1, nx - 1)
    E = outs["elasticity"][:, 0].reshape(ny - 1, nx - 1)
    nu = outs["elasticity"][:, 1].reshape(ny - 1, nx - 1)

    L_u, gU = l1_mean(U - problem.measured, ny * nx)
    eps_d = kernels.strain_array(U[0], U[1])
    n_cells = (ny - 1) * (nx - 1)
    L_eps, g_diff = l1_mean(eps_hat - eps_d, n_cells)
    sig = kernels.stress_array(eps_hat, E, nu)
    res = kernels.residual_array(sig, problem.h, problem.t)
    E_sum = kernels.local_sum_array(E)
    L_r, g_res, g_Esum = residual_term(res, E_sum)
    L_E, g_Ec = l1_mean(E - E_c, n_cells)

    bd = LossBreakdown.combine(L_u, L_eps, L_r, L_E, weights)
    objective = ow.lambda_u * L_u + ow.lambda_eps * L_eps + ow.lambda_r * L_r + ow.lambda_E * L_E
    if not np.isfinite(bd.total) or not np.isfinite(objective):
        raise NonFiniteError(f"non-finite loss: {bd}")

    grads = {}
    if grad_for:
        g_U = ow.lambda_u * gU
        gux, guy = kernels.strain_vjp(-ow.lambda_eps * g_diff)
        g_U = g_U + np.stack([gux, guy])
        g_eps = ow.lambda_eps * g_diff
        g_E = ow.lambda_E * g_Ec
        g_nu = np.zeros_like(nu)
        if ow.lambda_r != 0.0:
            g_sig = kernels.residual_vjp(ow.lambda_r * g_res, problem.h, problem.t)
            ge, gE, gnu = kernels.stress_vjp(g_sig, eps_hat, E, nu)
            g_eps = g_eps + ge
            g_E = g_E + gE + kernels.local_sum_vjp(ow.lambda_r * g_Esum)
            g_nu = g_nu + gnu
        cot = {
            "displacement": g_U.reshape(2, -1).T,
            "strain": g_eps.reshape(3, -1).T,
            "elasticity": np.column_stack([g_E.ravel(), g_nu.ravel()]),
        }
        for name in grad_for:
            grads[name] = pulls[name](cot[name])
    return Evaluation(bd, float(objective), grads, outs)


def total_loss(
    nets: dict,
    params: dict,
    dataset: Dataset,
    weights: LossWeights = LossWeights(),
    E_c: float = 0.25,
) -> LossBreakdown:
    problem = Problem.from_dataset(dataset, nets)
    return evaluate(problem, nets, params, weights, E_c).breakdown


def objective_evaluator(problem: Problem, nets: dict, weights: LossWeights, E_c: float, grad_for=NETS):
    """Adapter for :func:`elastinv.networks.parameter_gradients`: maps a
    parameter dict to ``(objective, pullback)``."""

    def evaluator(params):
        ev = evaluate(problem, nets, params, weights, E_c, grad_for=grad_for)

        def pullback(g):
            return {k: v.map(lambda a: g * a) for k, v in ev.grads.items()}

        return ev.objective, pullback

    return evaluator


def params_subset(params: dict, names) -> dict[str, NetworkParameters]:
    return {k: params[k] for k in names}
