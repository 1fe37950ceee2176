"""Dataset container and its ``.efd`` file format."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import ContainerError, parse_bool, read_container, write_container
from .fields import DisplacementField, ElasticityField, FieldError, ScalarGrid


class DatasetError(ValueError):
    """Invalid dataset contents or file."""


@dataclass(frozen=True)
class Dataset:
    measured: DisplacementField
    truth_elasticity: ElasticityField | None = None
    truth_displacement: DisplacementField | None = None
    applied_force: float | None = None
    snr: float | None = None
    rng_seed: int | None = None
    calibration_capable: bool = True

    def __post_init__(self):
        if self.truth_displacement is not None:
            if not self.truth_displacement.ux.same_lattice(self.measured.ux):
                raise DatasetError(
                    f"truth displacement {self.truth_displacement.shape} does not match "
                    f"measured {self.measured.shape}"
                )
        if self.truth_elasticity is not None:
            ny, nx = self.measured.shape
            if self.truth_elasticity.shape != (ny - 1, nx - 1):
                raise DatasetError(
                    f"truth elasticity {self.truth_elasticity.shape} is not on the cell "
                    f"lattice {(ny - 1, nx - 1)} of the measurement"
                )
        if self.calibration_capable:
            if self.applied_force is None:
                raise DatasetError("calibration-capable dataset is missing applied_force")
            if not self.applied_force > 0:
                raise DatasetError(f"applied_force must be positive, got {self.applied_force}")
        if self.snr is not None and not self.snr > 0:
            raise DatasetError(f"snr must be positive, got {self.snr}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.measured.shape

    @property
    def h(self) -> float:
        return self.measured.ux.h

    @property
    def t(self) -> float:
        return self.measured.ux.t


_FORMAT = "efd-dataset"


def save_dataset(dataset: Dataset, path) -> None:
    m = dataset.measured
    header = {
        "format": _FORMAT,
        "version": 1,
        "ny": m.ux.ny,
        "nx": m.ux.nx,
        "h": m.ux.h,
        "t": m.ux.t,
        "snr": None if dataset.snr is None else float(dataset.snr),
        "applied_force": None if dataset.applied_force is None else float(dataset.applied_force),
        "seed": dataset.rng_seed,
        "calibration_capable": dataset.calibration_capable,
    }
    blocks = {"measured_ux": m.ux.values, "measured_uy": m.uy.values}
    if dataset.truth_displacement is not None:
        blocks["truth_ux"] = dataset.truth_displacement.ux.values
        blocks["truth_uy"] = dataset.truth_displacement.uy.values
    if dataset.truth_elasticity is not None:
        blocks["truth_E"] = dataset.truth_elasticity.E.values
        blocks["truth_nu"] = dataset.truth_elasticity.nu.values
    write_container(path, header, blocks, comment="elasticity field data")


def _required(header, key, cast):
    if key not in header:
        raise DatasetError(f"missing mandatory header field {key!r}")
    try:
        return cast(header[key])
    except ValueError:
        raise DatasetError(f"malformed header value {key} = {header[key]!r}") from None


def _optional(header, key, cast):
    if key not in header:
        return None
    try:
        return cast(header[key])
    except ValueError:
        raise DatasetError(f"malformed header value {key} = {header[key]!r}") from None


def load_dataset(path) -> Dataset:
    try:
        header, blocks = read_container(path)
    except ContainerError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    if header.get("format") != _FORMAT:
        raise DatasetError(f"{path}: not an elasticity dataset (format = {header.get('format')!r})")
    ny = _required(header, "ny", int)
    nx = _required(header, "nx", int)
    h = _required(header, "h", float)
    t = _required(header, "t", float)
    snr = _optional(header, "snr", float)
    force = _optional(header, "applied_force", float)
    seed = _optional(header, "seed", int)
    try:
        capable = parse_bool(header.get("calibration_capable", "true"))
    except ContainerError as exc:
        raise DatasetError(str(exc)) from None

    def block(name, shape, required=True):
        if name not in blocks:
            if required:
                raise DatasetError(f"{path}: missing mandatory block {name!r}")
            return None
        arr = blocks[name]
        if arr.shape != shape:
            raise DatasetError(
                f"{path}: dimension mismatch, block {name!r} has shape {arr.shape}, expected {shape}"
            )
        return arr

    try:
        measured = DisplacementField(
            ScalarGrid(block("measured_ux", (ny, nx)), h, t),
            ScalarGrid(block("measured_uy", (ny, nx)), h, t),
        )
        truth_u = None
        tux = block("truth_ux", (ny, nx), required=False)
        tuy = block("truth_uy", (ny, nx), required=False)
        if (tux is None) != (tuy is None):
            raise DatasetError(f"{path}: truth displacement needs both truth_ux and truth_uy")
        if tux is not None:
            truth_u = DisplacementField(ScalarGrid(tux, h, t), ScalarGrid(tuy, h, t))
        truth_e = None
        tE = block("truth_E", (ny - 1, nx - 1), required=False)
        tnu = block("truth_nu", (ny - 1, nx - 1), required=False)
        if (tE is None) != (tnu is None):
            raise DatasetError(f"{path}: truth elasticity needs both truth_E and truth_nu")
        if tE is not None:
            truth_e = ElasticityField(ScalarGrid(tE, h, t), ScalarGrid(tnu, h, t))
        return Dataset(
            measured=measured,
            truth_elasticity=truth_e,
            truth_displacement=truth_u,
            applied_force=force,
            snr=snr,
            rng_seed=seed,
            calibration_capable=capable,
        )
    except FieldError as exc:
        raise DatasetError(f"{path}: {exc}") from None


def node_coordinates(ny: int, nx: int) -> np.ndarray:
    """Node lattice mapped to the unit square, shape ``(ny*nx, 2)`` as (x, y)."""
    jj, ii = np.meshgrid(np.arange(nx), np.arange(ny))
    return np.column_stack([jj.ravel() / (nx - 1), ii.ravel() / (ny - 1)])


def cell_coordinates(ny: int, nx: int) -> np.ndarray:
    """Cell centres of a ``ny x nx`` node lattice on the same unit-square map,
    shape ``((ny-1)*(nx-1), 2)``."""
    jj, ii = np.meshgrid(np.arange(nx - 1) + 0.5, np.arange(ny - 1) + 0.5)
    return np.column_stack([jj.ravel() / (nx - 1), ii.ravel() / (ny - 1)])
