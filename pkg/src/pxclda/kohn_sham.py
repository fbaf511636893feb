"""Kohn-Sham Hamiltonian with external, Hartree, xc and pxc potentials, and SCF.

Nuclei are error-function softened point charges,
``v_ext(r) = -sum Z erf(|r - R| / a) / |r - R|``. Closed shells carry two
electrons per orbital; a single electron is allowed when Hartree and xc are
switched off, which makes the KS problem exact for one electron.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy.special import erf

from ._backend import kernels
from .cavity import BareMode, DressedMode, dress_all
from .eigensolvers import lobpcg
from .fields import Grid, GridMismatchError, ScalarField
from .functionals import PxcParams, XcChoice, lda_xc_potential, pxc_potential
from .poisson import PoissonSolver, hartree_potential

log = logging.getLogger(__name__)

MAX_STATES = 32


@dataclass(frozen=True)
class Nucleus:
    position: tuple[float, float, float]
    charge: float
    softening: float

    def __post_init__(self):
        if not self.softening > 0:
            raise ValueError(f"softening length must be positive, got {self.softening}")
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))


@dataclass(frozen=True)
class SystemSpec:
    nuclei: tuple[Nucleus, ...]
    n_electrons: int
    grid: Grid
    interactions_enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "nuclei", tuple(self.nuclei))
        n = self.n_electrons
        if n < 1:
            raise ValueError("need at least one electron")
        if n == 1:
            if self.interactions_enabled:
                raise ValueError("a one-electron system must run with interactions disabled")
        elif n % 2:
            raise ValueError(f"closed-shell runs need an even electron count, got {n}")

    @property
    def n_occupied(self) -> int:
        return 1 if self.n_electrons == 1 else self.n_electrons // 2

    @property
    def occupations(self) -> list[float]:
        return [1.0] if self.n_electrons == 1 else [2.0] * (self.n_electrons // 2)

    def with_grid(self, grid: Grid) -> "SystemSpec":
        return SystemSpec(self.nuclei, self.n_electrons, grid, self.interactions_enabled)


def soft_atom(charge: float, softening: float, grid: Grid, n_electrons: int,
              interactions: bool | None = None) -> SystemSpec:
    """Single softened nucleus at the origin."""
    if interactions is None:
        interactions = n_electrons > 1
    return SystemSpec((Nucleus((0.0, 0.0, 0.0), charge, softening),), n_electrons, grid, interactions)


def external_potential(spec: SystemSpec) -> ScalarField:
    grid = spec.grid
    v = np.zeros(grid.shape)
    for nuc in spec.nuclei:
        r = grid.radius(nuc.position)
        a = nuc.softening
        small = r < 1e-12
        rs = np.where(small, 1.0, r)
        v -= np.where(small, nuc.charge * 2.0 / (a * math.sqrt(math.pi)),
                      nuc.charge * erf(rs / a) / rs)
    return ScalarField(grid, v)


def apply_hamiltonian(phi: ScalarField, v: ScalarField) -> ScalarField:
    """``-0.5 * laplacian(phi) + v * phi``."""
    if not phi.grid.same_as(v.grid):
        raise GridMismatchError(f"orbital grid {phi.grid.describe()} vs potential grid {v.grid.describe()}")
    return ScalarField(phi.grid, kernels.kinetic_plus_potential(phi.values, v.values, phi.grid.spacing))


def box_kinetic_symbol(grid: Grid) -> np.ndarray:
    """Eigenvalues of ``-0.5 * laplacian`` in the sine basis of the box.

    Exact for the 2nd..(n-1)th rows of the 4th-order stencil; used only as a
    preconditioner, where the boundary-row mismatch is harmless.
    """
    parts = []
    for n in grid.shape:
        theta = math.pi * np.arange(1, n + 1) / (n + 1)
        parts.append((30.0 - 32.0 * np.cos(theta) + 2.0 * np.cos(2.0 * theta)) / (12.0 * grid.spacing**2))
    kz, ky, kx = parts
    return 0.5 * (kz[:, None, None] + ky[None, :, None] + kx[None, None, :])


class KineticPreconditioner:
    """``(T + shift)^-1`` applied with type-I sine transforms."""

    def __init__(self, grid: Grid, shift: float = 1.0):
        self.grid = grid
        self._inv = 1.0 / (box_kinetic_symbol(grid) + shift)

    def __call__(self, block: np.ndarray) -> np.ndarray:
        out = np.empty_like(block)
        for c in range(block.shape[1]):
            f = block[:, c].reshape(self.grid.shape)
            out[:, c] = sfft.idstn(sfft.dstn(f, type=1) * self._inv, type=1).ravel()
        return out


def initial_guess(grid: Grid, k: int, center=(0.0, 0.0, 0.0), width: float = 1.5) -> np.ndarray:
    """Deterministic starting block: Gaussians times low-order monomials.

    Each column has definite parity under reflections through ``center``, so
    symmetric potentials keep their symmetry through the eigensolver.
    """
    x, y, z = grid.coords()
    x, y, z = x - center[0], y - center[1], z - center[2]
    g = np.exp(-(x**2 + y**2 + z**2) / (2.0 * width**2))
    monomials = [1, z, x, y, z * z, x * x, y * y, x * y, x * z, y * z, x * y * z,
                 z**3, x**3, y**3, x * x * z, y * y * z, z * z * x, z * z * y, x * x * y, y * y * x]
    if k > len(monomials):
        raise ValueError(f"at most {len(monomials)} guess orbitals available")
    cols = [np.broadcast_to(m * g, grid.shape).ravel() for m in monomials[:k]]
    return np.stack(cols, axis=1)


def lowest_eigenpairs(v: ScalarField, k: int, guess: np.ndarray | None = None,
                      tol: float = 1e-8, max_iter: int = 1000,
                      precond: KineticPreconditioner | None = None,
                      center=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, list[ScalarField]]:
    """Lowest ``k`` eigenpairs of ``-0.5 laplacian + v``.

    Orbitals are normalized so that ``integrate(phi**2) == 1``; the residual
    ``||H phi - e phi||`` in that norm is below ``tol`` for every pair.
    ``guess`` may be an (npts, k) array of starting vectors.
    """
    if not 1 <= k <= MAX_STATES:
        raise ValueError(f"number of states must be in [1, {MAX_STATES}], got {k}")
    grid = v.grid
    vv = np.ascontiguousarray(v.values)
    h = grid.spacing
    shape = grid.shape

    def apply_h(block):
        out = np.empty_like(block)
        for c in range(block.shape[1]):
            out[:, c] = kernels.kinetic_plus_potential(
                np.ascontiguousarray(block[:, c].reshape(shape)), vv, h).ravel()
        return out

    x0 = initial_guess(grid, k, center) if guess is None else guess
    precond = precond or KineticPreconditioner(grid)
    # unit 2-norm vectors u = phi * h^1.5 share residual norms with the h^3-weighted phi
    res = lobpcg(apply_h, x0, precond, tol=tol, max_iter=max_iter)
    scale = h ** -1.5
    orbitals = []
    for c in range(k):
        u = res.vectors[:, c]
        # fix the sign convention: largest-magnitude entry positive
        if u[np.argmax(np.abs(u))] < 0:
            u = -u
        orbitals.append(ScalarField(grid, (u * scale).reshape(shape)))
    return res.eigenvalues.copy(), orbitals


@dataclass
class PotentialSet:
    v_ext: ScalarField
    v_h: ScalarField
    v_xc: ScalarField
    v_pxc: ScalarField

    @property
    def v_ks(self) -> ScalarField:
        return self.v_ext + self.v_h + self.v_xc + self.v_pxc


@dataclass
class SCFRecord:
    iteration: int
    density_change: float
    eig_drift: float


@dataclass
class SCFOptions:
    mixing: str = "linear"
    alpha: float = 0.3
    max_iter: int = 200
    tol_density: float = 1e-7
    tol_eig: float = 1e-7
    pulay_depth: int = 5
    eig_tol: float = 1e-8
    force_poisson: bool = False

    def __post_init__(self):
        if self.mixing not in ("linear", "pulay"):
            raise ValueError(f"unknown mixing scheme {self.mixing!r}")
        if not 0 < self.alpha <= 1:
            raise ValueError("mixing alpha must lie in (0, 1]")


@dataclass
class KSState:
    orbitals: list[ScalarField]
    occupations: list[float]
    density: ScalarField
    potentials: PotentialSet
    eigenvalues: np.ndarray
    scf_history: list[SCFRecord]
    modes: list[DressedMode] = field(default_factory=list)
    converged: bool = True


class SCFConvergenceError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def density_from_orbitals(orbitals: Sequence[ScalarField], occupations: Sequence[float]) -> ScalarField:
    rho = np.zeros(orbitals[0].grid.shape)
    for phi, occ in zip(orbitals, occupations):
        rho += occ * phi.values**2
    return ScalarField(orbitals[0].grid, rho, "density")


class _PulayMixer:
    def __init__(self, alpha, depth):
        self.alpha = alpha
        self.depth = depth
        self.inputs: list[np.ndarray] = []
        self.residuals: list[np.ndarray] = []

    def __call__(self, rho_in, residual):
        self.inputs.append(rho_in.ravel().copy())
        self.residuals.append(residual.ravel().copy())
        self.inputs = self.inputs[-self.depth:]
        self.residuals = self.residuals[-self.depth:]
        m = len(self.residuals)
        R = np.array(self.residuals)
        B = np.empty((m + 1, m + 1))
        B[:m, :m] = R @ R.T
        B[m, :m] = B[:m, m] = -1.0
        B[m, m] = 0.0
        rhs = np.zeros(m + 1)
        rhs[m] = -1.0
        try:
            coef = np.linalg.solve(B, rhs)[:m]
        except np.linalg.LinAlgError:
            coef = np.zeros(m)
            coef[-1] = 1.0
        mixed = sum(c * (x + self.alpha * r) for c, x, r in zip(coef, self.inputs, self.residuals))
        return mixed.reshape(rho_in.shape)


class KSRunner:
    """Reusable SCF driver for one system (external potential, solvers cached)."""

    def __init__(self, spec: SystemSpec, xc: XcChoice | str = XcChoice.PZ81,
                 opts: SCFOptions | None = None):
        self.spec = spec
        self.xc = XcChoice(xc)
        self.opts = opts or SCFOptions()
        self.v_ext = external_potential(spec)
        self.poisson = PoissonSolver(spec.grid, force=self.opts.force_poisson)
        self.precond = KineticPreconditioner(spec.grid)
        charges = np.array([n.charge for n in spec.nuclei])
        pos = np.array([n.position for n in spec.nuclei])
        self.center = tuple(charges @ pos / charges.sum()) if charges.sum() > 0 else (0.0, 0.0, 0.0)

    def potentials(self, rho: ScalarField, modes: Sequence[DressedMode], pxc: PxcParams) -> PotentialSet:
        grid = self.spec.grid
        if self.spec.interactions_enabled:
            v_h = hartree_potential(rho, self.poisson)
            v_xc = lda_xc_potential(rho, self.xc)
        else:
            v_h = ScalarField.zeros(grid)
            v_xc = ScalarField.zeros(grid)
        v_pxc = pxc_potential(rho, modes, pxc, self.poisson)
        return PotentialSet(self.v_ext, v_h, v_xc, v_pxc)

    def solve_orbitals(self, v: ScalarField, guess=None):
        return lowest_eigenpairs(v, self.spec.n_occupied, guess=guess, tol=self.opts.eig_tol,
                                 precond=self.precond, center=self.center)

    def run(self, modes: Sequence[BareMode] = (), pxc: PxcParams | None = None) -> KSState:
        spec, opts = self.spec, self.opts
        pxc = pxc or PxcParams()
        dressed = dress_all(modes, spec.n_electrons)
        occ = spec.occupations
        h15 = spec.grid.spacing**1.5

        eigs, orbitals = self.solve_orbitals(self.v_ext)
        rho_in = density_from_orbitals(orbitals, occ)
        history = [SCFRecord(1, math.inf, math.inf)]
        mixer = _PulayMixer(opts.alpha, opts.pulay_depth) if opts.mixing == "pulay" else None
        for it in range(2, opts.max_iter + 1):
            pots = self.potentials(rho_in, dressed, pxc)
            guess = np.stack([phi.flat() * h15 for phi in orbitals], axis=1)
            new_eigs, orbitals = self.solve_orbitals(pots.v_ks, guess)
            rho_out = density_from_orbitals(orbitals, occ)
            residual = rho_out.values - rho_in.values
            d_rho = float(np.max(np.abs(residual)))
            d_eig = float(np.max(np.abs(new_eigs - eigs)))
            eigs = new_eigs
            history.append(SCFRecord(it, d_rho, d_eig))
            log.debug("scf %3d  drho=%.3e  deig=%.3e  e0=%.10f", it, d_rho, d_eig, eigs[0])
            if d_rho < opts.tol_density and d_eig < opts.tol_eig:
                return KSState(orbitals, occ, rho_out, pots, eigs, history, dressed)
            if mixer is None:
                mixed = rho_in.values + opts.alpha * residual
            else:
                mixed = mixer(rho_in.values, residual)
                mixed = np.clip(mixed, 0.0, None)
                mixed *= spec.n_electrons / (mixed.sum() * spec.grid.cell_volume)
            rho_in = ScalarField(spec.grid, mixed, "density")
        raise SCFConvergenceError(
            f"SCF not converged in {opts.max_iter} iterations "
            f"(last drho={history[-1].density_change:.3e}, deig={history[-1].eig_drift:.3e})",
            history,
        )


def scf(spec: SystemSpec, modes: Sequence[BareMode] = (), pxc: PxcParams | None = None,
        xc: XcChoice | str = XcChoice.PZ81, opts: SCFOptions | None = None) -> KSState:
    """Self-consistent Kohn-Sham ground state with an optional pxcLDA cavity term."""
    return KSRunner(spec, xc, opts).run(modes, pxc)
