"""Explicit sparse assembly of the Pauli-Fierz matrix, independent of the matvec code."""
import math

import numpy as np
import scipy.sparse as sp

from pxclda.kohn_sham import external_potential


def _band(n, coeffs, scale):
    """Banded Toeplitz matrix with zero-Dirichlet truncation; coeffs maps offset -> value."""
    return sp.diags([np.full(n - abs(k), c * scale) for k, c in coeffs.items()], list(coeffs), shape=(n, n))


def d2_1d(n, h):
    return _band(n, {-2: -1, -1: 16, 0: -30, 1: 16, 2: -1}, 1 / (12 * h * h))


def d1_1d(n, h):
    return _band(n, {-2: 1, -1: -8, 1: 8, 2: -1}, 1 / (12 * h))


def along(axis_op, axis, shape):
    """Lift a 1D operator on array axis ``axis`` of a C-ordered (nz, ny, nx) array."""
    mats = [sp.identity(n, format="csr") for n in shape]
    mats[axis] = axis_op
    return sp.kron(sp.kron(mats[0], mats[1]), mats[2], format="csr")


def assemble(cfg):
    grid = cfg.spec.grid
    shape = grid.shape
    h = grid.spacing
    v = cfg.potential.values if cfg.potential is not None else external_potential(cfg.spec).values
    lap = sum(along(d2_1d(n, h), ax, shape) for ax, n in enumerate(shape))
    h_el = -0.5 * lap + sp.diags(v.ravel())
    ex, ey, ez = cfg.mode.epsilon.components
    mom = sum(c * along(d1_1d(shape[ax], h), ax, shape) for ax, c in ((2, ex), (1, ey), (0, ez)) if c)
    mom = -1j * mom
    nb = cfg.n_max + 1
    a = sp.diags(np.sqrt(np.arange(1, nb)), 1, shape=(nb, nb))
    num = sp.diags(np.arange(nb) + 0.5)
    w = cfg.mode.omega_tilde
    g = cfg.mode.lambda_tilde / math.sqrt(2 * w)
    eye_e = sp.identity(grid.size)
    H = sp.kron(sp.identity(nb), h_el) + w * sp.kron(num, eye_e)
    if g:
        H = H + g * sp.kron(a + a.T, mom)
    return H.tocsr().astype(complex)
