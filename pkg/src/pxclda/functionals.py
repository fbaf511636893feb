"""Exchange-correlation potentials: electron LDA and the photon-free pxcLDA.

The electron-photon potential is defined through a Poisson equation whose
source is a directional second derivative of ``(3 rho / 8 pi)**(2/3)``::

    laplacian(v_pxc) = -eta_c * sum_modes (2 pi^2 lambda~^2 / omega~^2)
                       * (eps~ . grad)^2 (3 rho / 8 pi)^(2/3)

``eta_c = 1`` gives the exchange-only pxLDA potential.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cavity import DressedMode
from .fields import ScalarField, directional_second_derivative_array
from .poisson import PoissonSolver

# Perdew-Zunger 1981, unpolarized
PZ_GAMMA = -0.1423
PZ_BETA1 = 1.0529
PZ_BETA2 = 0.3334
PZ_A = 0.0311
PZ_B = -0.048
PZ_C = 0.0020
PZ_D = -0.0116


class XcChoice(str, enum.Enum):
    NONE = "none"
    SLATER = "slater_exchange_only"
    PZ81 = "lda_pz81"


@dataclass(frozen=True)
class PxcParams:
    eta_c: float = 1.0
    density_floor: float = 1e-12
    enabled: bool = True

    def __post_init__(self):
        if not self.eta_c >= 0:
            raise ValueError(f"eta_c must be non-negative, got {self.eta_c}")
        if not self.density_floor >= 0:
            raise ValueError("density_floor must be non-negative")


def slater_exchange_potential(rho: np.ndarray) -> np.ndarray:
    return -np.cbrt(3.0 * np.clip(rho, 0.0, None) / math.pi)


def pz81_correlation_potential(rho: np.ndarray) -> np.ndarray:
    """PZ81 correlation potential; exactly zero where ``rho <= 0``."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    pos = rho > 0
    rs = np.cbrt(3.0 / (4.0 * math.pi * rho[pos]))
    vc = np.empty_like(rs)
    lo = rs >= 1.0
    r = rs[lo]
    sq = np.sqrt(r)
    denom = 1.0 + PZ_BETA1 * sq + PZ_BETA2 * r
    ec = PZ_GAMMA / denom
    vc[lo] = ec * (1.0 + 7.0 / 6.0 * PZ_BETA1 * sq + 4.0 / 3.0 * PZ_BETA2 * r) / denom
    r = rs[~lo]
    ln = np.log(r)
    vc[~lo] = (PZ_A * ln + (PZ_B - PZ_A / 3.0)
               + 2.0 / 3.0 * PZ_C * r * ln + (2.0 * PZ_D - PZ_C) / 3.0 * r)
    out[pos] = vc
    return out


def lda_xc_potential(rho: ScalarField, choice: XcChoice | str = XcChoice.PZ81) -> ScalarField:
    """Pointwise electron xc potential for the selected LDA flavour."""
    choice = XcChoice(choice)
    if choice is XcChoice.NONE:
        return ScalarField.zeros(rho.grid)
    v = slater_exchange_potential(rho.values)
    if choice is XcChoice.PZ81:
        v = v + pz81_correlation_potential(rho.values)
    return ScalarField(rho.grid, v)


def _is_inactive(modes: Sequence[DressedMode], params: PxcParams) -> bool:
    return (not params.enabled or params.eta_c == 0.0
            or all(m.lambda_tilde == 0.0 for m in modes))


def pxc_source(rho: ScalarField, modes: Sequence[DressedMode], params: PxcParams) -> ScalarField:
    """Right-hand side of the pxcLDA Poisson equation."""
    if _is_inactive(modes, params):
        return ScalarField.zeros(rho.grid)
    dens = np.where(rho.values < params.density_floor, 0.0, rho.values)
    s = np.cbrt(3.0 * dens / (8.0 * math.pi)) ** 2
    h = rho.grid.spacing
    src = np.zeros(rho.grid.shape)
    for m in modes:
        if m.lambda_tilde == 0.0:
            continue
        pref = 2.0 * math.pi**2 * m.lambda_tilde**2 / m.omega_tilde**2
        src -= pref * directional_second_derivative_array(s, m.epsilon, h)
    src *= params.eta_c
    return ScalarField(rho.grid, src)


def pxc_potential(rho: ScalarField, modes: Sequence[DressedMode], params: PxcParams,
                  solver: PoissonSolver | None = None) -> ScalarField:
    """pxcLDA potential (pxLDA when ``eta_c == 1``)."""
    if _is_inactive(modes, params):
        return ScalarField.zeros(rho.grid)
    solver = solver or PoissonSolver(rho.grid)
    return solver.solve(pxc_source(rho, modes, params))
