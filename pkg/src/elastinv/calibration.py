"""Absolute-scale calibration of a relative modulus field.

Phase-1 training fixes the modulus only up to a positive factor. The
factor follows from the applied force on the loaded (right) edge: the
predicted normal stress there, integrated with the rectangle rule, must
reproduce it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import ContainerError, read_container, write_container
from .fields import FieldError, ScalarGrid, StressField


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationResult:
    c_hat: float
    boundary_force_predicted: float
    E_absolute: ScalarGrid
    applied_force: float


def boundary_force(sig: StressField, h: float | None = None) -> float:
    """Rectangle-rule sum of ``sigma_xx`` down the rightmost stress column."""
    if sig.sxx.values.size == 0:
        raise FieldError("empty stress lattice")
    h = sig.sxx.h if h is None else h
    return float(sig.sxx.values[:, -1].sum() * h)


def calibrate(
    E_relative: ScalarGrid, sig_relative: StressField, F_applied: float, h: float | None = None
) -> CalibrationResult:
    if not F_applied > 0:
        raise CalibrationError(f"applied force must be positive, got {F_applied}")
    if E_relative.shape != sig_relative.shape:
        raise FieldError(f"lattice mismatch: E {E_relative.shape} vs stress {sig_relative.shape}")
    F_pred = boundary_force(sig_relative, h)
    if not F_pred > 0 or not np.isfinite(F_pred):
        raise CalibrationError(
            f"uncalibratable: predicted boundary force {F_pred!r} is not positive like the applied force"
        )
    c_hat = F_applied / F_pred
    return CalibrationResult(c_hat, F_pred, E_relative.like(c_hat * E_relative.values), float(F_applied))


def save_calibration(result: CalibrationResult, path) -> None:
    E = result.E_absolute
    header = {
        "format": "efd-calibration",
        "version": 1,
        "ny": E.ny,
        "nx": E.nx,
        "h": E.h,
        "t": E.t,
        "c_hat": float(result.c_hat),
        "boundary_force_predicted": float(result.boundary_force_predicted),
        "applied_force": float(result.applied_force),
    }
    write_container(path, header, {"E_absolute": E.values}, comment="absolute modulus calibration")


def load_calibration(path) -> CalibrationResult:
    header, blocks = read_container(Path(path))
    if header.get("format") != "efd-calibration":
        raise ContainerError(f"{path}: not a calibration result")
    try:
        E = ScalarGrid(blocks["E_absolute"], float(header["h"]), float(header["t"]))
        return CalibrationResult(
            float(header["c_hat"]),
            float(header["boundary_force_predicted"]),
            E,
            float(header["applied_force"]),
        )
    except KeyError as exc:
        raise ContainerError(f"{path}: missing {exc}") from None
