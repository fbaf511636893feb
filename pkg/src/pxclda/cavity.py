"""Cavity modes, the dressing transform and coupling diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .fields import Direction

HARTREE_EV = 27.211386245988


def ev_to_hartree(e_ev: float) -> float:
    return e_ev / HARTREE_EV


@dataclass(frozen=True)
class BareMode:
    """Undressed cavity mode: frequency ``omega`` (Ha), strength ``lam`` (a.u.)."""

    omega: float
    lam: float
    epsilon: Direction

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"mode frequency must be positive, got {self.omega}")
        if not self.lam >= 0:
            raise ValueError(f"mode strength must be non-negative, got {self.lam}")
        if not isinstance(self.epsilon, Direction):
            object.__setattr__(self, "epsilon", Direction.from_vector(self.epsilon))


@dataclass(frozen=True)
class DressedMode:
    """Mode after absorbing the diamagnetic term."""

    omega_tilde: float
    lambda_tilde: float
    epsilon: Direction

    @property
    def coupling_ratio(self) -> float:
        """``lambda_tilde**2 / omega_tilde**2``."""
        return self.lambda_tilde**2 / self.omega_tilde**2


def dress(mode: BareMode, n_electrons: int) -> DressedMode:
    """Single-mode dressing: ``omega_tilde**2 = omega**2 + N_e * lambda**2``."""
    if n_electrons < 1:
        raise ValueError("dressing needs at least one electron")
    omega_t = math.sqrt(mode.omega**2 + n_electrons * mode.lam**2)
    return DressedMode(omega_t, mode.lam, mode.epsilon)


def dress_all(modes, n_electrons: int) -> list[DressedMode]:
    """Dress each mode independently with the same electron count."""
    return [dress(m, n_electrons) for m in modes]


def collective_coupling(mode: DressedMode, n_electrons: int) -> float:
    """Effective collective coupling ``N_e * lambda_tilde**2 / omega_tilde**2``.

    The physical quantity is only defined up to a proportionality constant;
    this diagnostic takes the constant as one.
    """
    return n_electrons * mode.lambda_tilde**2 / mode.omega_tilde**2
