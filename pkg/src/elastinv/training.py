"""Staged Adam training of the three coordinate networks.

Stage A fits the displacement network alone, stage B adds the strain
network and the strain-discrepancy loss, stage C trains everything on the
full objective. With ``pretrain=False`` the same total number of
iterations is spent on the full objective from the start.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import kernels
from .container import ContainerError, read_container, write_container
from .dataset import Dataset
from .fields import DisplacementField, ElasticityField, ScalarGrid, StrainField, StressField
from .kernels import ResidualField
from .losses import NETS, LossBreakdown, LossWeights, Problem, evaluate
from .networks import (
    CoordinateNet,
    EncodingConfig,
    NetworkParameters,
    NonFiniteError,
    displacement_net,
    elasticity_net,
    forward,
    strain_net,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture shared by the three networks."""

    depth: int = 16
    width: int = 128
    sine_scale: float = 30.0
    f_min: float = 1e-4
    omega: int = 64

    def networks(self) -> dict[str, CoordinateNet]:
        enc = EncodingConfig(self.f_min, self.omega)
        return {
            "displacement": displacement_net(self.depth, self.width, enc, self.sine_scale),
            "strain": strain_net(self.depth, self.width, enc, self.sine_scale),
            "elasticity": elasticity_net(self.depth, self.width, enc, self.sine_scale),
        }


@dataclass(frozen=True)
class TrainingSchedule:
    stage_a_iters: int = 50_000
    stage_b_iters: int = 100_000
    stage_c_iters: int = 50_000
    learning_rate: float = 1e-4
    seed: int = 0
    desk_scale_factor: float = 1.0
    pretrain: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if min(self.stage_a_iters, self.stage_b_iters, self.stage_c_iters) < 0:
            raise ValueError("stage iteration counts must be non-negative")
        if not 0 < self.desk_scale_factor <= 1:
            raise ValueError(f"desk_scale_factor must lie in (0, 1], got {self.desk_scale_factor}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def stages(self) -> list[tuple[str, int]]:
        """``(stage name, iterations)`` after desk scaling."""
        f = self.desk_scale_factor
        a, b, c = (int(round(n * f)) for n in (self.stage_a_iters, self.stage_b_iters, self.stage_c_iters))
        if self.pretrain:
            return [("A", a), ("B", b), ("C", c)]
        return [("joint", a + b + c)]

    @property
    def total_iters(self) -> int:
        return sum(n for _, n in self.stages())


# which networks train, and which loss terms drive them, in each stage
STAGE_NETS = {
    "A": ("displacement",),
    "B": ("displacement", "strain"),
    "C": NETS,
    "joint": NETS,
}


def stage_weights(stage: str, weights: LossWeights) -> LossWeights:
    if stage == "A":
        return weights.masked(eps=False, r=False, E=False)
    if stage == "B":
        return weights.masked(r=False, E=False)
    return weights


@dataclass
class AdamMoments:
    m: NetworkParameters
    v: NetworkParameters
    step: int = 0


class HistoryEntry(NamedTuple):
    iteration: int  # number of parameter updates applied so far
    stage: str  # stage that produced these parameters ("init" for none)
    losses: LossBreakdown
    objective: float  # value of the producing stage's objective


@dataclass
class TrainingState:
    params: dict[str, NetworkParameters]
    moments: dict[str, AdamMoments]
    iteration: int = 0
    stage: str = "init"
    history: list[HistoryEntry] = field(default_factory=list)

    def copy(self) -> "TrainingState":
        return TrainingState(
            params={k: v.copy() for k, v in self.params.items()},
            moments={k: AdamMoments(m.m.copy(), m.v.copy(), m.step) for k, m in self.moments.items()},
            iteration=self.iteration,
            stage=self.stage,
            history=list(self.history),
        )


class TrainingError(RuntimeError):
    """Training hit a non-finite loss; ``state`` holds the last finite snapshot."""

    def __init__(self, message, state: TrainingState):
        super().__init__(message)
        self.state = state


def init_state(nets: dict[str, CoordinateNet], seed: int) -> TrainingState:
    params = {}
    for k, name in enumerate(NETS):
        params[name] = nets[name].init(np.random.default_rng([seed, k]))
    moments = {k: AdamMoments(p.zeros_like(), p.zeros_like()) for k, p in params.items()}
    return TrainingState(params, moments)


def adam_update(p: NetworkParameters, g: NetworkParameters, mom: AdamMoments, lr, b1, b2, eps):
    mom.step += 1
    c1 = 1.0 - b1 ** mom.step
    c2 = 1.0 - b2 ** mom.step
    for arr, grad, m, v in zip(p.tensors(), g.tensors(), mom.m.tensors(), mom.v.tensors()):
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        arr -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def train(
    dataset: Dataset,
    schedule: TrainingSchedule = TrainingSchedule(),
    weights: LossWeights = LossWeights(),
    E_c: float = 0.25,
    model: ModelConfig = ModelConfig(),
    state: TrainingState | None = None,
    checkpoint_path=None,
    log_every: int = 0,
) -> TrainingState:
    """Run the schedule and return the final state.

    The history gets one entry per parameter set visited: entry ``n`` holds
    the full loss breakdown after ``n`` updates.
    """
    nets = model.networks()
    problem = Problem.from_dataset(dataset, nets)
    state = init_state(nets, schedule.seed) if state is None else state
    total = schedule.total_iters
    every = max(1, total // 100)
    lr, b1, b2, eps = schedule.learning_rate, schedule.beta1, schedule.beta2, schedule.adam_eps

    def record(ev, producing_stage):
        state.history.append(HistoryEntry(state.iteration, producing_stage, ev.breakdown, ev.objective))

    for stage, n_iter in schedule.stages():
        if n_iter == 0:
            continue
        active = STAGE_NETS[stage]
        ow = stage_weights(stage, weights)
        frozen = {}
        snapshot = state.copy()
        try:
            for name in NETS:
                if name not in active:
                    feats = (problem.node_features if name == "displacement" else problem.cell_features)[name]
                    frozen[name] = forward(state.params[name], feats, nets[name].net)
            for _ in range(n_iter):
                ev = evaluate(problem, nets, state.params, weights, E_c, ow, active, frozen)
                if not state.history or state.history[-1].iteration != state.iteration:
                    record(ev, state.stage)
                for name in active:
                    adam_update(state.params[name], ev.grads[name], state.moments[name], lr, b1, b2, eps)
                    if not state.params[name].is_finite():
                        raise NonFiniteError(f"{name} parameters became non-finite")
                state.iteration += 1
                state.stage = stage
                if log_every and state.iteration % log_every == 0:
                    log.info("iter %d stage %s total %.6g", state.iteration, stage, ev.breakdown.total)
                if checkpoint_path is not None and state.iteration % every == 0:
                    save_checkpoint(state, model, checkpoint_path)
                if state.iteration % every == 0:
                    snapshot = state.copy()
            ev = evaluate(problem, nets, state.params, weights, E_c, ow, (), frozen)
            record(ev, stage)
        except NonFiniteError as exc:
            raise TrainingError(
                f"non-finite loss at iteration {state.iteration} (stage {stage}): {exc}", snapshot
            ) from exc
    if not state.history:
        ev = evaluate(problem, nets, state.params, weights, E_c)
        record(ev, state.stage)
    if checkpoint_path is not None:
        save_checkpoint(state, model, checkpoint_path)
    return state


class PredictedFields(NamedTuple):
    displacement: DisplacementField
    strain: StrainField
    stress: StressField
    elasticity: ElasticityField
    residual: ResidualField


def predict_fields(state: TrainingState, dataset: Dataset, model: ModelConfig = ModelConfig()) -> PredictedFields:
    nets = model.networks()
    problem = Problem.from_dataset(dataset, nets)
    ny, nx = problem.shape
    h, t = problem.h, problem.t
    U = forward(state.params["displacement"], problem.node_features["displacement"], nets["displacement"].net)
    S = forward(state.params["strain"], problem.cell_features["strain"], nets["strain"].net)
    EN = forward(state.params["elasticity"], problem.cell_features["elasticity"], nets["elasticity"].net)
    disp = DisplacementField.from_arrays(U[:, 0].reshape(ny, nx), U[:, 1].reshape(ny, nx), h, t)
    eps = StrainField.from_arrays(*S.T.reshape(3, ny - 1, nx - 1), h=h, t=t)
    elas = ElasticityField.predicted(EN[:, 0].reshape(ny - 1, nx - 1), EN[:, 1].reshape(ny - 1, nx - 1), h, t)
    sig = kernels.stress_from_strain(eps, elas)
    res = kernels.pde_residual(sig, h, t)
    return PredictedFields(disp, eps, sig, elas, res)


# checkpoints (.npk)

def save_checkpoint(state: TrainingState, model: ModelConfig, path) -> None:
    header = {
        "format": "npk",
        "version": 1,
        "iteration": state.iteration,
        "stage": state.stage,
        "depth": model.depth,
        "width": model.width,
        "sine_scale": float(model.sine_scale),
        "f_min": float(model.f_min),
        "omega": model.omega,
    }
    blocks = {}
    for name in NETS:
        for k, arr in enumerate(state.params[name].tensors()):
            blocks[f"{name}.{k}"] = arr
        mom = state.moments[name]
        header[f"{name}.adam_step"] = mom.step
        for k, arr in enumerate(mom.m.tensors()):
            blocks[f"{name}.m.{k}"] = arr
        for k, arr in enumerate(mom.v.tensors()):
            blocks[f"{name}.v.{k}"] = arr
    tmp = Path(str(path) + ".tmp")
    write_container(tmp, header, blocks, comment="network parameter pack")
    tmp.replace(path)


def load_checkpoint(path) -> tuple[TrainingState, ModelConfig]:
    header, blocks = read_container(path)
    if header.get("format") != "npk":
        raise ContainerError(f"{path}: not a parameter pack")
    try:
        model = ModelConfig(
            depth=int(header["depth"]),
            width=int(header["width"]),
            sine_scale=float(header["sine_scale"]),
            f_min=float(header["f_min"]),
            omega=int(header["omega"]),
        )
    except KeyError as exc:
        raise ContainerError(f"{path}: missing header field {exc}") from None
    n = 2 * (model.depth + 1)

    def tensors(prefix):
        try:
            return [blocks[f"{prefix}.{k}"] for k in range(n)]
        except KeyError as exc:
            raise ContainerError(f"{path}: missing block {exc}") from None

    params, moments = {}, {}
    for name in NETS:
        params[name] = NetworkParameters.from_tensors(tensors(name))
        moments[name] = AdamMoments(
            NetworkParameters.from_tensors(tensors(f"{name}.m")),
            NetworkParameters.from_tensors(tensors(f"{name}.v")),
            int(header.get(f"{name}.adam_step", 0)),
        )
    nets = model.networks()
    for name in NETS:
        want = nets[name].init(np.random.default_rng(0)).shapes()
        if params[name].shapes() != want:
            raise ContainerError(f"{path}: {name} tensor shapes do not match the declared architecture")
    state = TrainingState(params, moments, int(header.get("iteration", 0)), header.get("stage", "init"))
    return state, model


def write_history_csv(history: list[HistoryEntry], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "L_u", "L_eps", "L_r", "L_E", "total", "stage", "objective"])
        for e in history:
            b = e.losses
            w.writerow([e.iteration] + [format(x, ".17g") for x in (b.L_u, b.L_eps, b.L_r, b.L_E, b.total)]
                       + [e.stage, format(e.objective, ".17g")])


def read_history_csv(path) -> list[HistoryEntry]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            b = LossBreakdown(*(float(row[k]) for k in ("L_u", "L_eps", "L_r", "L_E", "total")))
            out.append(HistoryEntry(int(row["iteration"]), row["stage"], b, float(row["objective"])))
    return out


_PRED_BLOCKS = {
    "ux": ("displacement", "ux"), "uy": ("displacement", "uy"),
    "exx": ("strain", "exx"), "eyy": ("strain", "eyy"), "gxy": ("strain", "gxy"),
    "sxx": ("stress", "sxx"), "syy": ("stress", "syy"), "txy": ("stress", "txy"),
    "E": ("elasticity", "E"), "nu": ("elasticity", "nu"),
    "rx": ("residual", "rx"), "ry": ("residual", "ry"),
}


def save_predictions(pred: PredictedFields, path) -> None:
    ny, nx = pred.displacement.shape
    g = pred.displacement.ux
    header = {"format": "efd-prediction", "version": 1, "ny": ny, "nx": nx, "h": g.h, "t": g.t}
    blocks = {name: getattr(getattr(pred, group), attr).values for name, (group, attr) in _PRED_BLOCKS.items()}
    write_container(path, header, blocks, comment="predicted fields")


def load_predictions(path) -> PredictedFields:
    header, blocks = read_container(path)
    if header.get("format") != "efd-prediction":
        raise ContainerError(f"{path}: not a prediction file")
    missing = sorted(set(_PRED_BLOCKS) - set(blocks))
    if missing:
        raise ContainerError(f"{path}: missing blocks {missing}")
    h, t = float(header["h"]), float(header["t"])
    b = blocks
    eps = StrainField.from_arrays(b["exx"], b["eyy"], b["gxy"], h, t)
    elas = ElasticityField.predicted(b["E"], b["nu"], h, t)
    return PredictedFields(
        DisplacementField.from_arrays(b["ux"], b["uy"], h, t),
        eps,
        StressField.from_arrays(b["sxx"], b["syy"], b["txy"], h, t),
        elas,
        ResidualField(ScalarGrid(b["rx"], h, t), ScalarGrid(b["ry"], h, t)),
    )
