"""Exact one-electron Pauli-Fierz ground state on a grid x Fock basis.

The dressed single-mode Hamiltonian in velocity gauge,

    H = -1/2 lap + v_ext + w~ (a^+ a + 1/2) + g (a^+ + a) (eps . -i grad),
    g = lambda~ / sqrt(2 w~),

is applied matrix-free to a wavefunction stored photon-major: the flat
vector holds the grid block for photon number 0, then 1, ..., ``n_max``.
The first-derivative stencil is the antisymmetric 4th-order one, so the
coupling block is exactly Hermitian on the grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .cavity import BareMode, DressedMode, dress
from .compare import i_metric
from .eigensolvers import lanczos_ground_state
from .fields import AXES, ScalarField
from .kohn_sham import SystemSpec, external_potential

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PFConfig:
    spec: SystemSpec
    mode: DressedMode
    n_max: int = 4
    eig_tol: float = 1e-8
    seed: int = 1
    krylov_dim: int = 60
    # overrides the softened-nucleus potential of ``spec`` (e.g. a model trap)
    potential: ScalarField | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.spec.n_electrons != 1:
            raise ValueError(
                f"the Pauli-Fierz oracle is one-electron only (got n_electrons={self.spec.n_electrons})"
            )
        if self.spec.interactions_enabled:
            raise ValueError("the Pauli-Fierz oracle needs interactions disabled")
        if self.n_max < 1:
            raise ValueError("Fock truncation n_max must be at least 1")
        if self.potential is not None and not self.potential.grid.same_as(self.spec.grid):
            raise ValueError("potential override must live on the oracle grid")

    @classmethod
    def from_bare(cls, spec: SystemSpec, mode: BareMode, **kw) -> "PFConfig":
        return cls(spec, dress(mode, 1), **kw)

    @property
    def coupling(self) -> float:
        return self.mode.lambda_tilde / math.sqrt(2.0 * self.mode.omega_tilde)

    @property
    def dimension(self) -> int:
        return self.spec.grid.size * (self.n_max + 1)


class PauliFierzOperator:
    """Matrix-free Hamiltonian for one ``PFConfig`` (external potential cached)."""

    def __init__(self, cfg: PFConfig):
        self.cfg = cfg
        self.grid = cfg.spec.grid
        v = cfg.potential if cfg.potential is not None else external_potential(cfg.spec)
        self.v = np.ascontiguousarray(v.values)
        self.nb = cfg.n_max + 1
        self.g = cfg.coupling
        self.omega = cfg.mode.omega_tilde
        self._dirs = [(AXES[a], c) for a, c in zip("xyz", cfg.mode.epsilon.components) if c != 0.0]

    def _momentum(self, block: np.ndarray) -> np.ndarray:
        """``(eps . -i grad) block``."""
        h = self.grid.spacing
        out = np.zeros_like(block)
        for axis, c in self._dirs:
            out += c * kernels.first_diff(block, axis, h)
        return -1j * out

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        shape = self.grid.shape
        if psi.shape != (self.cfg.dimension,):
            raise ValueError(f"wavefunction length {psi.shape} != {self.cfg.dimension}")
        blocks = psi.reshape((self.nb,) + shape)
        out = np.empty((self.nb,) + shape, dtype=complex)
        h = self.grid.spacing
        for n in range(self.nb):
            b = np.ascontiguousarray(blocks[n], dtype=complex)
            out[n] = kernels.kinetic_plus_potential(b, self.v, h) + self.omega * (n + 0.5) * b
        if self.g != 0.0:
            mom = [self._momentum(np.ascontiguousarray(blocks[n], dtype=complex)) for n in range(self.nb)]
            for n in range(self.nb):
                if n > 0:
                    out[n] += self.g * math.sqrt(n) * mom[n - 1]
                if n + 1 < self.nb:
                    out[n] += self.g * math.sqrt(n + 1) * mom[n + 1]
        return out.ravel()

    __call__ = matvec


def pf_matvec(psi: np.ndarray, cfg: PFConfig) -> np.ndarray:
    return PauliFierzOperator(cfg).matvec(psi)


@dataclass
class PFGroundState:
    energy: float
    wavefunction: np.ndarray
    electron_density: ScalarField
    residual: float
    matvecs: int

    @property
    def photon_number(self) -> float:
        """Expectation value of ``a^+ a``."""
        h3 = self.electron_density.grid.cell_volume
        weights = np.sum(np.abs(self.wavefunction) ** 2, axis=1) * h3
        return float(np.arange(len(weights)) @ weights)


def start_vector(cfg: PFConfig) -> np.ndarray:
    """Seeded pseudo-random start vector, damped away from the nuclei and at high photon number."""
    rng = np.random.default_rng(cfg.seed)
    grid = cfg.spec.grid
    env = np.zeros(grid.shape)
    for nuc in cfg.spec.nuclei:
        env += np.exp(-grid.radius(nuc.position) ** 2 / 8.0)
    nb = cfg.n_max + 1
    noise = rng.standard_normal((nb,) + grid.shape) + 1j * rng.standard_normal((nb,) + grid.shape)
    weights = 0.3 ** np.arange(nb)
    return (noise * env[None] * weights[:, None, None, None]).ravel()


def pf_ground_state(cfg: PFConfig) -> PFGroundState:
    """Lowest eigenstate of the Pauli-Fierz operator and its electron density."""
    op = PauliFierzOperator(cfg)
    res = lanczos_ground_state(op, start_vector(cfg), tol=cfg.eig_tol, krylov_dim=cfg.krylov_dim)
    grid = cfg.spec.grid
    x = res.vector
    # fix the global phase: largest entry real and positive
    idx = int(np.argmax(np.abs(x)))
    x = x * (abs(x[idx]) / x[idx])
    psi = (x / grid.spacing**1.5).reshape(cfg.n_max + 1, grid.size)
    rho = np.sum(np.abs(psi) ** 2, axis=0).reshape(grid.shape)
    log.info("PF ground state E0=%.12f residual=%.2e matvecs=%d", res.eigenvalue, res.residual, res.matvecs)
    return PFGroundState(res.eigenvalue, psi, ScalarField(grid, rho, "density"), res.residual, res.matvecs)


@dataclass
class FockRow:
    n_max: int
    energy: float
    i_vs_prev: float
    photon_number: float


def fock_convergence(cfg: PFConfig, n_max_list) -> list[FockRow]:
    """Ground state for each truncation; ``i_vs_prev`` compares consecutive densities."""
    n_max_list = list(n_max_list)
    if any(b <= a for a, b in zip(n_max_list, n_max_list[1:])):
        raise ValueError("n_max_list must be strictly ascending")
    rows: list[FockRow] = []
    prev = None
    for n_max in n_max_list:
        c = PFConfig(cfg.spec, cfg.mode, n_max, cfg.eig_tol, cfg.seed, cfg.krylov_dim, cfg.potential)
        gs = pf_ground_state(c)
        i_prev = math.nan if prev is None else i_metric(prev, gs.electron_density)
        rows.append(FockRow(n_max, gs.energy, i_prev, gs.photon_number))
        prev = gs.electron_density
    return rows
