"""Grid field types and measurement noise.

All fields live on a regular lattice. Row index ``i`` runs top to bottom
(decreasing physical y), column index ``j`` runs left to right (increasing
physical x). Displacements sit on the node lattice; strain, stress and
elasticity sit on the cell-centre lattice, one smaller per axis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class FieldError(ValueError):
    """Raised when a field violates its shape or value invariants."""


@dataclass(frozen=True)
class ScalarGrid:
    """A ``ny x nx`` array of finite samples with vertical spacing ``h`` and
    horizontal spacing ``t``."""

    values: np.ndarray
    h: float = 1.0
    t: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise FieldError(f"grid values must be a non-empty 2-D array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise FieldError("grid values must be finite")
        if not (0 < self.h < np.inf and 0 < self.t < np.inf):
            raise FieldError(f"grid spacing must be finite and positive, got h={self.h}, t={self.t}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "t", float(self.t))

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def like(self, values) -> "ScalarGrid":
        """New grid with the same spacing and different samples."""
        return ScalarGrid(values, self.h, self.t)

    def same_lattice(self, other: "ScalarGrid") -> bool:
        return self.shape == other.shape and self.h == other.h and self.t == other.t


def _check_shared(names, grids):
    first = grids[0]
    for name, g in zip(names[1:], grids[1:]):
        if not first.same_lattice(g):
            raise FieldError(
                f"dimension mismatch: {names[0]} is {first.shape} (h={first.h}, t={first.t}) "
                f"but {name} is {g.shape} (h={g.h}, t={g.t})"
            )


@dataclass(frozen=True)
class DisplacementField:
    ux: ScalarGrid
    uy: ScalarGrid

    def __post_init__(self):
        _check_shared(("ux", "uy"), (self.ux, self.uy))

    @classmethod
    def from_arrays(cls, ux, uy, h=1.0, t=1.0) -> "DisplacementField":
        return cls(ScalarGrid(ux, h, t), ScalarGrid(uy, h, t))

    @property
    def shape(self):
        return self.ux.shape


@dataclass(frozen=True)
class StrainField:
    exx: ScalarGrid
    eyy: ScalarGrid
    gxy: ScalarGrid

    def __post_init__(self):
        _check_shared(("exx", "eyy", "gxy"), (self.exx, self.eyy, self.gxy))

    @classmethod
    def from_arrays(cls, exx, eyy, gxy, h=1.0, t=1.0) -> "StrainField":
        return cls(ScalarGrid(exx, h, t), ScalarGrid(eyy, h, t), ScalarGrid(gxy, h, t))

    @property
    def shape(self):
        return self.exx.shape

    def stack(self) -> np.ndarray:
        return np.stack([self.exx.values, self.eyy.values, self.gxy.values])


@dataclass(frozen=True)
class StressField:
    sxx: ScalarGrid
    syy: ScalarGrid
    txy: ScalarGrid

    def __post_init__(self):
        _check_shared(("sxx", "syy", "txy"), (self.sxx, self.syy, self.txy))

    @classmethod
    def from_arrays(cls, sxx, syy, txy, h=1.0, t=1.0) -> "StressField":
        return cls(ScalarGrid(sxx, h, t), ScalarGrid(syy, h, t), ScalarGrid(txy, h, t))

    @property
    def shape(self):
        return self.sxx.shape

    def scaled(self, factor: float) -> "StressField":
        return StressField(
            self.sxx.like(factor * self.sxx.values),
            self.syy.like(factor * self.syy.values),
            self.txy.like(factor * self.txy.values),
        )


class PoissonRangeWarning(UserWarning):
    """A predicted Poisson's ratio left the physical interval (0, 0.5)."""


@dataclass(frozen=True)
class ElasticityField:
    """Young's modulus and Poisson's ratio on the cell lattice.

    ``E > 0`` and ``0 < nu < 0.5`` are enforced. Network predictions may
    exceed the physical upper bound on ``nu``; build those through
    :meth:`predicted`, which warns instead of raising.
    """

    E: ScalarGrid
    nu: ScalarGrid
    strict: bool = True

    def __post_init__(self):
        _check_shared(("E", "nu"), (self.E, self.nu))
        if not np.all(self.E.values > 0):
            raise FieldError("Young's modulus must be strictly positive everywhere")
        if not np.all(self.nu.values > 0):
            raise FieldError("Poisson's ratio must be strictly positive everywhere")
        above = int(np.count_nonzero(self.nu.values >= 0.5))
        if above:
            msg = f"Poisson's ratio >= 0.5 at {above} of {self.nu.values.size} cells"
            if self.strict:
                raise FieldError(msg)
            warnings.warn(msg, PoissonRangeWarning, stacklevel=3)

    @classmethod
    def from_arrays(cls, E, nu, h=1.0, t=1.0) -> "ElasticityField":
        return cls(ScalarGrid(E, h, t), ScalarGrid(nu, h, t))

    @classmethod
    def predicted(cls, E, nu, h=1.0, t=1.0) -> "ElasticityField":
        return cls(ScalarGrid(E, h, t), ScalarGrid(nu, h, t), strict=False)

    @property
    def shape(self):
        return self.E.shape


def add_noise(clean: DisplacementField, snr: float, seed: int) -> DisplacementField:
    """Add zero-mean Gaussian noise with ``sigma = |mean(u)| / snr``.

    The mean is pooled over both displacement channels, so one sigma is
    shared by ``ux`` and ``uy``.
    """
    if not (snr > 0) or not np.isfinite(snr):
        raise FieldError(f"snr must be a finite positive number, got {snr}")
    ux, uy = clean.ux.values, clean.uy.values
    u_bar = np.concatenate([ux.ravel(), uy.ravel()]).mean()
    if u_bar == 0:
        raise FieldError("degenerate signal mean: mean displacement is zero")
    sigma = abs(u_bar / snr)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=(2,) + ux.shape)
    return DisplacementField(clean.ux.like(ux + noise[0]), clean.uy.like(uy + noise[1]))


def noise_sigma(u: DisplacementField, snr: float) -> float:
    u_bar = np.concatenate([u.ux.values.ravel(), u.uy.values.ravel()]).mean()
    return abs(u_bar / snr)
