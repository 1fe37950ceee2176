"""Plane-stress forward solver used to synthesise measurement datasets.

One bilinear quadrilateral per elasticity cell, 2x2 Gauss quadrature,
displacement-controlled stretch on the right edge. Node ``(i, j)`` sits at
``x = j*t``, ``y = (ny-1-i)*h`` so that row 0 is the top edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dataset import Dataset
from .fields import DisplacementField, ElasticityField, ScalarGrid, add_noise


class PhantomError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    r: float
    E: float
    nu: float

    def contains(self, x, y):
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 <= self.r ** 2

    def inside(self, nx, ny) -> bool:
        return (
            self.r > 0
            and self.cx - self.r >= 0 and self.cx + self.r <= nx
            and self.cy - self.r >= 0 and self.cy + self.r <= ny
        )


@dataclass(frozen=True)
class Rectangle:
    x0: float
    y0: float
    x1: float
    y1: float
    E: float
    nu: float

    def contains(self, x, y):
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)

    def inside(self, nx, ny) -> bool:
        return 0 <= self.x0 < self.x1 <= nx and 0 <= self.y0 < self.y1 <= ny


@dataclass(frozen=True)
class PhantomSpec:
    """Background material plus inclusions.

    Inclusion geometry is in cell units: ``x`` counts columns from the left
    edge, ``y`` counts rows from the top edge. Later inclusions win where
    they overlap.
    """

    E: float = 1.0
    nu: float = 0.3
    inclusions: tuple = field(default_factory=tuple)

    def __post_init__(self):
        for E, nu in [(self.E, self.nu)] + [(inc.E, inc.nu) for inc in self.inclusions]:
            if not E > 0:
                raise PhantomError(f"Young's modulus must be positive, got {E}")
            if not 0 < nu < 0.5:
                raise PhantomError(f"Poisson's ratio must lie in (0, 0.5), got {nu}")


def rasterize_phantom(spec: PhantomSpec, ny: int, nx: int, h: float = 1.0, t: float = 1.0) -> ElasticityField:
    """Elasticity on an ``ny x nx`` cell lattice; membership by cell-centre test."""
    E = np.full((ny, nx), float(spec.E))
    nu = np.full((ny, nx), float(spec.nu))
    xc, yc = np.meshgrid(np.arange(nx) + 0.5, np.arange(ny) + 0.5)
    for inc in spec.inclusions:
        if not inc.inside(nx, ny):
            raise PhantomError(f"inclusion {inc} lies outside the {ny}x{nx} domain")
        mask = inc.contains(xc, yc)
        E[mask] = inc.E
        nu[mask] = inc.nu
    return ElasticityField.from_arrays(E, nu, h, t)


def two_inclusion_phantom() -> PhantomSpec:
    """Reference phantom for the 32x32 node grid: two stiff disks in a soft matrix."""
    return PhantomSpec(
        E=1.0,
        nu=0.3,
        inclusions=(
            Disk(cx=10.0, cy=10.0, r=5.0, E=2.0, nu=0.4),
            Disk(cx=21.0, cy=21.0, r=5.0, E=2.0, nu=0.4),
        ),
    )


@dataclass(frozen=True)
class BoundaryCondition:
    """Left edge ``ux = 0``, bottom-left node ``uy = 0``, right edge
    ``ux = stretch * L``; top and bottom traction-free."""

    stretch: float = 0.01

    def __post_init__(self):
        if not self.stretch > 0:
            raise ValueError(f"stretch must be positive, got {self.stretch}")


_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)
# local node order: bottom-left, bottom-right, top-right, top-left
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])


def _base_stiffness(h: float, t: float):
    """Element stiffness split as ``K = E/(1-nu^2) * (K0 + nu*K1 + (1-nu)/2*K2)``."""
    A = [
        np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 0]]),
        np.array([[0, 1.0, 0], [1.0, 0, 0], [0, 0, 0]]),
        np.array([[0, 0, 0], [0, 0, 0], [0, 0, 1.0]]),
    ]
    K = [np.zeros((8, 8)) for _ in A]
    det = t * h / 4.0
    for xi in _GAUSS:
        for eta in _GAUSS:
            dN_dx = 0.25 * _XI * (1 + _ETA * eta) * (2.0 / t)
            dN_dy = 0.25 * _ETA * (1 + _XI * xi) * (2.0 / h)
            B = np.zeros((3, 8))
            B[0, 0::2] = dN_dx
            B[1, 1::2] = dN_dy
            B[2, 0::2] = dN_dy
            B[2, 1::2] = dN_dx
            for k, a in enumerate(A):
                K[k] += B.T @ a @ B * det
    return K


def assemble_stiffness(elas: ElasticityField) -> sp.csr_matrix:
    ncy, ncx = elas.shape
    ny, nx = ncy + 1, ncx + 1
    h, t = elas.E.h, elas.E.t
    K0, K1, K2 = _base_stiffness(h, t)
    E = elas.E.values.ravel()
    nu = elas.nu.values.ravel()
    c = E / (1 - nu ** 2)
    Ke = c[:, None, None] * (K0 + nu[:, None, None] * K1 + (0.5 * (1 - nu))[:, None, None] * K2)

    ii, jj = np.meshgrid(np.arange(ncy), np.arange(ncx), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    nodes = np.stack(
        [(ii + 1) * nx + jj, (ii + 1) * nx + jj + 1, ii * nx + jj + 1, ii * nx + jj], axis=1
    )
    dofs = np.empty((nodes.shape[0], 8), dtype=np.int64)
    dofs[:, 0::2] = 2 * nodes
    dofs[:, 1::2] = 2 * nodes + 1
    rows = np.repeat(dofs, 8, axis=1).ravel()
    cols = np.tile(dofs, (1, 8)).ravel()
    n = 2 * ny * nx
    return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


@dataclass(frozen=True)
class ForwardSolution:
    displacement: DisplacementField
    applied_force: float
    reactions: np.ndarray  # nodal force vector K u, shape (2, ny, nx)


def solve_forward(elas: ElasticityField, bc: BoundaryCondition = BoundaryCondition()) -> ForwardSolution:
    ncy, ncx = elas.shape
    if ncy < 3 or ncx < 3:
        raise SolverError(f"forward solve needs at least a 4x4 node grid, got {ncy + 1}x{ncx + 1}")
    ny, nx = ncy + 1, ncx + 1
    h, t = elas.E.h, elas.E.t
    K = assemble_stiffness(elas)
    n = K.shape[0]
    node = np.arange(ny * nx).reshape(ny, nx)
    left_x = 2 * node[:, 0]
    right_x = 2 * node[:, -1]
    pin_y = np.array([2 * node[-1, 0] + 1])
    fixed = np.concatenate([left_x, right_x, pin_y])
    u = np.zeros(n)
    u[right_x] = bc.stretch * (nx - 1) * t
    free = np.setdiff1d(np.arange(n), fixed)
    Kff = K[free][:, free].tocsc()
    rhs = -K[free][:, fixed] @ u[fixed]
    try:
        lu = spla.splu(Kff)
    except RuntimeError as exc:
        raise SolverError(f"stiffness matrix is singular: {exc}") from None
    uf = lu.solve(rhs)
    if not np.all(np.isfinite(uf)):
        raise SolverError("linear solve produced non-finite displacements")
    if np.linalg.norm(Kff @ uf - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        raise SolverError("linear solve did not converge")
    u[free] = uf
    f = K @ u
    applied = float(f[right_x].sum())
    uxy = u.reshape(ny, nx, 2)
    disp = DisplacementField(ScalarGrid(uxy[..., 0], h, t), ScalarGrid(uxy[..., 1], h, t))
    return ForwardSolution(disp, applied, np.moveaxis(f.reshape(ny, nx, 2), -1, 0))


def generate_dataset(
    spec: PhantomSpec,
    ny: int,
    nx: int,
    bc: BoundaryCondition = BoundaryCondition(),
    snr: float | None = None,
    seed: int | None = None,
    h: float = 1.0,
    t: float = 1.0,
) -> Dataset:
    """Rasterise ``spec`` onto an ``ny x nx`` *node* grid, solve, and optionally add noise."""
    elas = rasterize_phantom(spec, ny - 1, nx - 1, h, t)
    sol = solve_forward(elas, bc)
    measured = sol.displacement
    if snr is not None:
        if seed is None:
            raise ValueError("a seed is required when adding noise")
        measured = add_noise(sol.displacement, snr, seed)
    return Dataset(
        measured=measured,
        truth_elasticity=elas,
        truth_displacement=sol.displacement,
        applied_force=sol.applied_force,
        snr=snr,
        rng_seed=seed,
    )
