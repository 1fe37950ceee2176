"""Independent reference implementations used by the tests.

Everything here is written with explicit loops (or long-double arithmetic)
and deliberately shares no code with the package.
"""

from __future__ import annotations

import numpy as np

LD = np.longdouble


def strain_loops(ux, uy):
    ny, nx = ux.shape
    exx = np.zeros((ny - 1, nx - 1))
    eyy = np.zeros_like(exx)
    gxy = np.zeros_like(exx)
    for i in range(ny - 1):
        for j in range(nx - 1):
            # corners: a=(i,j) top-left, b=(i,j+1), c=(i+1,j), d=(i+1,j+1)
            exx[i, j] = 0.5 * ((ux[i, j + 1] - ux[i, j]) + (ux[i + 1, j + 1] - ux[i + 1, j]))
            eyy[i, j] = 0.5 * ((uy[i, j] - uy[i + 1, j]) + (uy[i, j + 1] - uy[i + 1, j + 1]))
            dux_dy = 0.5 * ((ux[i, j] - ux[i + 1, j]) + (ux[i, j + 1] - ux[i + 1, j + 1]))
            duy_dx = 0.5 * ((uy[i, j + 1] - uy[i, j]) + (uy[i + 1, j + 1] - uy[i + 1, j]))
            gxy[i, j] = dux_dy + duy_dx
    return exx, eyy, gxy


def stress_loops(exx, eyy, gxy, E, nu):
    sxx = np.zeros_like(exx)
    syy = np.zeros_like(exx)
    txy = np.zeros_like(exx)
    for i in range(exx.shape[0]):
        for j in range(exx.shape[1]):
            c = E[i, j] / (1.0 - nu[i, j] ** 2)
            sxx[i, j] = c * (exx[i, j] + nu[i, j] * eyy[i, j])
            syy[i, j] = c * (nu[i, j] * exx[i, j] + eyy[i, j])
            txy[i, j] = c * (1.0 - nu[i, j]) / 2.0 * gxy[i, j]
    return sxx, syy, txy


def residual_loops(sxx, syy, txy, h=1.0, t=1.0):
    ny, nx = sxx.shape
    rx = np.zeros((ny - 2, nx - 2))
    ry = np.zeros_like(rx)
    for i in range(ny - 2):
        for j in range(nx - 2):
            dsxx_dx = dtxy_dx = dsyy_dy = dtxy_dy = 0.0
            for a in range(3):
                dsxx_dx += sxx[i + a, j + 2] - sxx[i + a, j]
                dtxy_dx += txy[i + a, j + 2] - txy[i + a, j]
            for b in range(3):
                dsyy_dy += syy[i, j + b] - syy[i + 2, j + b]
                dtxy_dy += txy[i, j + b] - txy[i + 2, j + b]
            rx[i, j] = (dsxx_dx + dtxy_dy) / (h * t)
            ry[i, j] = (dsyy_dy + dtxy_dx) / (h * t)
    return rx, ry


def local_sum_loops(E):
    ny, nx = E.shape
    out = np.zeros((ny - 2, nx - 2))
    for i in range(ny - 2):
        for j in range(nx - 2):
            s = 0.0
            for a in range(3):
                for b in range(3):
                    s += E[i + a, j + b]
            out[i, j] = s
    return out


# long-double reference of the full training objective

def _mlp_ld(tensors, feats, scale, softplus):
    a = feats
    n = len(tensors) // 2
    for layer in range(n):
        z = a @ tensors[2 * layer].astype(LD) + tensors[2 * layer + 1].astype(LD)
        if layer < n - 1:
            a = np.sin(z * LD(scale)) if layer == 0 else np.sin(z)
        else:
            a = z
    return np.logaddexp(LD(0), a) if softplus else a


def objective_ld(measured, weights=(2.0, 1.0, 3.0, 0.02), E_c=0.25, scale=30.0, omega=64, f_min="1e-4"):
    """Return ``loss(params)`` evaluating the weighted objective in long double.

    ``params`` maps ``displacement``/``strain``/``elasticity`` to objects with
    a ``tensors()`` method listing ``W0, b0, W1, b1, ...``.
    """
    meas = np.asarray(measured, dtype=LD)
    ny, nx = meas.shape[1:]
    f = LD(f_min) ** (LD(2) * np.arange(1, omega + 1, dtype=LD) / LD(omega))

    def enc(pts):
        x = pts[:, :1] * f
        y = pts[:, 1:] * f
        return np.hstack([np.sin(x), np.cos(x), np.sin(y), np.cos(y)])

    nodes = np.array([[LD(j) / (nx - 1), LD(i) / (ny - 1)] for i in range(ny) for j in range(nx)], dtype=LD)
    cells = np.array(
        [[(LD(j) + LD("0.5")) / (nx - 1), (LD(i) + LD("0.5")) / (ny - 1)] for i in range(ny - 1) for j in range(nx - 1)],
        dtype=LD,
    )
    fn, fc = enc(nodes), enc(cells)

    def loss(params):
        U = _mlp_ld(params["displacement"].tensors(), fn, scale, False)
        S = _mlp_ld(params["strain"].tensors(), fc, scale, False)
        EN = _mlp_ld(params["elasticity"].tensors(), fc, scale, True)
        ux = U[:, 0].reshape(ny, nx)
        uy = U[:, 1].reshape(ny, nx)
        Lu = (abs(ux - meas[0]) + abs(uy - meas[1])).mean()
        exx = (ux[:-1, 1:] - ux[:-1, :-1] + ux[1:, 1:] - ux[1:, :-1]) / 2
        eyy = (uy[:-1, :-1] + uy[:-1, 1:] - uy[1:, :-1] - uy[1:, 1:]) / 2
        gxy = (ux[:-1, :-1] + ux[:-1, 1:] - ux[1:, :-1] - ux[1:, 1:]) / 2 + (
            uy[:-1, 1:] - uy[:-1, :-1] + uy[1:, 1:] - uy[1:, :-1]
        ) / 2
        p = S.T.reshape(3, ny - 1, nx - 1)
        Le = (abs(p[0] - exx) + abs(p[1] - eyy) + abs(p[2] - gxy)).mean()
        E = EN[:, 0].reshape(ny - 1, nx - 1)
        nu = EN[:, 1].reshape(ny - 1, nx - 1)
        LE = abs(E - LD(E_c)).mean()
        c = E / (1 - nu ** 2)
        sxx = c * (p[0] + nu * p[1])
        syy = c * (nu * p[0] + p[1])
        txy = c * (1 - nu) / 2 * p[2]
        m, n = ny - 3, nx - 3
        rx = sum(sxx[a:a + m, 2:2 + n] - sxx[a:a + m, 0:n] for a in range(3)) + sum(
            txy[0:m, b:b + n] - txy[2:2 + m, b:b + n] for b in range(3))
        ry = sum(txy[a:a + m, 2:2 + n] - txy[a:a + m, 0:n] for a in range(3)) + sum(
            syy[0:m, b:b + n] - syy[2:2 + m, b:b + n] for b in range(3))
        Es = sum(E[a:a + m, b:b + n] for a in range(3) for b in range(3))
        Lr = ((abs(rx) + abs(ry)) / Es).mean()
        w = [LD(x) for x in weights]
        return w[0] * Lu + w[1] * Le + w[2] * Lr + w[3] * LE

    return loss


def central_difference(loss, params, step=1e-5):
    """Yield ``(net, tensor index, element index, fd)`` for every parameter."""
    for net in ("displacement", "strain", "elasticity"):
        for ti, p in enumerate(params[net].tensors()):
            for idx in np.ndindex(p.shape):
                orig = p[idx]
                p[idx] = orig + step
                hi = p[idx]
                fp = loss(params)
                p[idx] = orig - step
                lo = p[idx]
                fm = loss(params)
                p[idx] = orig
                yield net, ti, idx, float((fp - fm) / (LD(hi) - LD(lo)))
