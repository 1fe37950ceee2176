"""Finite-difference stencils for plane-stress linear elasticity.

Every stencil is a "valid" cross-correlation: an ``a x b`` kernel shrinks
the lattice by ``a-1`` rows and ``b-1`` columns. Kernel row 0 is the top
row of the stencil, so ``(a, b)`` are (row, column) offsets.

The ``*_array`` functions work on raw numpy arrays and come with adjoints
(``*_vjp``) used by the training pullbacks; the field-level functions wrap
them with shape checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    DisplacementField,
    ElasticityField,
    FieldError,
    ScalarGrid,
    StrainField,
    StressField,
)


@dataclass(frozen=True)
class ResidualField:
    """Residual grids ``rx``, ``ry`` on the ``(ny-3) x (nx-3)`` node-derived lattice."""

    rx: ScalarGrid
    ry: ScalarGrid

    def __post_init__(self):
        if self.rx.shape != self.ry.shape:
            raise FieldError(f"residual channels differ in shape: {self.rx.shape} vs {self.ry.shape}")

    @property
    def shape(self):
        return self.rx.shape


# d/dx and d/dy on a 2x2 node patch (unscaled by spacing)
W_X = np.array([[-0.5, 0.5], [-0.5, 0.5]])
W_Y = np.array([[0.5, 0.5], [-0.5, -0.5]])

# 3x3 residual kernels; the sigma_yy kernel of r_x and sigma_xx kernel of r_y are zero
W_DX3 = np.array([[-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]])
W_DY3 = np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -1.0, -1.0]])
W_SUM3 = np.ones((3, 3))


def correlate_valid(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    ka, kb = kernel.shape
    m, n = x.shape[-2] - ka + 1, x.shape[-1] - kb + 1
    out = np.zeros(x.shape[:-2] + (m, n))
    for a in range(ka):
        for b in range(kb):
            w = kernel[a, b]
            if w != 0.0:
                out += w * x[..., a:a + m, b:b + n]
    return out


def correlate_valid_vjp(g: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`correlate_valid`: scatter ``g`` back onto the input lattice."""
    ka, kb = kernel.shape
    m, n = g.shape[-2], g.shape[-1]
    out = np.zeros(g.shape[:-2] + (m + ka - 1, n + kb - 1))
    for a in range(ka):
        for b in range(kb):
            w = kernel[a, b]
            if w != 0.0:
                out[..., a:a + m, b:b + n] += w * g
    return out


def strain_array(ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
    """Strain channels ``(exx, eyy, gxy)`` stacked on axis 0."""
    exx = correlate_valid(ux, W_X)
    eyy = correlate_valid(uy, W_Y)
    gxy = correlate_valid(ux, W_Y) + correlate_valid(uy, W_X)
    return np.stack([exx, eyy, gxy])


def strain_vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gux = correlate_valid_vjp(g[0], W_X) + correlate_valid_vjp(g[2], W_Y)
    guy = correlate_valid_vjp(g[1], W_Y) + correlate_valid_vjp(g[2], W_X)
    return gux, guy


def stress_array(eps: np.ndarray, E: np.ndarray, nu: np.ndarray) -> np.ndarray:
    exx, eyy, gxy = eps
    k = E / (1.0 - nu * nu)
    return np.stack([k * (exx + nu * eyy), k * (nu * exx + eyy), k * (0.5 * (1.0 - nu)) * gxy])


def stress_vjp(g: np.ndarray, eps: np.ndarray, E: np.ndarray, nu: np.ndarray):
    """Pull ``g`` (gradient w.r.t. stress) back to ``(g_eps, g_E, g_nu)``."""
    exx, eyy, gxy = eps
    gs, gt, gu = g
    d = 1.0 - nu * nu
    k = E / d
    shear = 0.5 * (1.0 - nu)
    a = exx + nu * eyy
    b = nu * exx + eyy
    g_eps = np.stack([k * (gs + nu * gt), k * (nu * gs + gt), k * shear * gu])
    g_E = (gs * a + gt * b + gu * shear * gxy) / d
    dk = 2.0 * E * nu / (d * d)
    # tau = E/(2(1+nu)) * gxy
    g_nu = (
        gs * (dk * a + k * eyy)
        + gt * (dk * b + k * exx)
        + gu * (-E / (2.0 * (1.0 + nu) ** 2)) * gxy
    )
    return g_eps, g_E, g_nu


def residual_array(sig: np.ndarray, h: float = 1.0, t: float = 1.0) -> np.ndarray:
    """Equilibrium residuals ``(rx, ry)`` stacked on axis 0."""
    sxx, syy, txy = sig
    ht = h * t
    rx = (correlate_valid(sxx, W_DX3) + correlate_valid(txy, W_DY3)) / ht
    ry = (correlate_valid(syy, W_DY3) + correlate_valid(txy, W_DX3)) / ht
    return np.stack([rx, ry])


def residual_vjp(g: np.ndarray, h: float = 1.0, t: float = 1.0) -> np.ndarray:
    ht = h * t
    gx, gy = g[0] / ht, g[1] / ht
    g_sxx = correlate_valid_vjp(gx, W_DX3)
    g_syy = correlate_valid_vjp(gy, W_DY3)
    g_txy = correlate_valid_vjp(gx, W_DY3) + correlate_valid_vjp(gy, W_DX3)
    return np.stack([g_sxx, g_syy, g_txy])


def local_sum_array(E: np.ndarray) -> np.ndarray:
    return correlate_valid(E, W_SUM3)


def local_sum_vjp(g: np.ndarray) -> np.ndarray:
    return correlate_valid_vjp(g, W_SUM3)


# field-level operations

def strain_from_displacement(u: DisplacementField) -> StrainField:
    ny, nx = u.shape
    if ny < 2 or nx < 2:
        raise FieldError(f"strain stencil needs at least a 2x2 grid, got {ny}x{nx}")
    eps = strain_array(u.ux.values, u.uy.values)
    return StrainField.from_arrays(*eps, h=u.ux.h, t=u.ux.t)


def stress_from_strain(eps: StrainField, elas: ElasticityField) -> StressField:
    if eps.shape != elas.shape:
        raise FieldError(f"lattice mismatch: strain {eps.shape} vs elasticity {elas.shape}")
    sig = stress_array(eps.stack(), elas.E.values, elas.nu.values)
    return StressField.from_arrays(*sig, h=eps.exx.h, t=eps.exx.t)


def pde_residual(sig: StressField, h: float | None = None, t: float | None = None) -> ResidualField:
    """Residual forces of the stress field; ``h``/``t`` default to the grid spacing."""
    ny, nx = sig.shape
    if ny < 3 or nx < 3:
        raise FieldError(f"residual stencil needs at least a 3x3 stress lattice, got {ny}x{nx}")
    h = sig.sxx.h if h is None else h
    t = sig.sxx.t if t is None else t
    arr = np.stack([sig.sxx.values, sig.syy.values, sig.txy.values])
    rx, ry = residual_array(arr, h, t)
    return ResidualField(ScalarGrid(rx, sig.sxx.h, sig.sxx.t), ScalarGrid(ry, sig.sxx.h, sig.sxx.t))


def local_modulus_sum(E: ScalarGrid) -> ScalarGrid:
    if E.ny < 3 or E.nx < 3:
        raise FieldError(f"3x3 modulus sum needs at least a 3x3 lattice, got {E.ny}x{E.nx}")
    return E.like(local_sum_array(E.values))
