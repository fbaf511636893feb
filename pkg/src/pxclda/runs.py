"""Glue that turns solvers into eta_c calibration runners and references."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .cavity import BareMode
from .compare import DensityPair
from .fields import Grid, ScalarField, restrict
from .functionals import PxcParams, XcChoice
from .kohn_sham import KSRunner, SCFOptions, SystemSpec
from .oracle import PFConfig, pf_ground_state

log = logging.getLogger(__name__)


@dataclass
class KSCalibrationRunner:
    """Callable ``eta -> DensityPair`` of in-cavity vs cavity-free KS densities.

    The cavity-free density is computed once. When ``target_grid`` is given,
    both densities are restricted to it (it must be commensurate).
    """

    spec: SystemSpec
    modes: Sequence[BareMode]
    xc: XcChoice | str = XcChoice.PZ81
    opts: SCFOptions | None = None
    density_floor: float = 1e-12
    target_grid: Grid | None = None
    keep_results: bool = True
    results: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._runner = KSRunner(self.spec, self.xc, self.opts)
        self._free: ScalarField | None = None

    def _restrict(self, f: ScalarField) -> ScalarField:
        return f if self.target_grid is None else restrict(f, self.target_grid)

    @property
    def cavity_free(self) -> ScalarField:
        if self._free is None:
            state = self._runner.run((), PxcParams(enabled=False))
            self._free = self._restrict(state.density)
        return self._free

    def density(self, eta: float) -> ScalarField:
        state = self._runner.run(self.modes, PxcParams(eta, self.density_floor))
        log.info("KS eta_c=%.6g converged in %d cycles", eta, len(state.scf_history))
        return self._restrict(state.density)

    def __call__(self, eta: float) -> DensityPair:
        pair = DensityPair(self.density(eta), self.cavity_free)
        if self.keep_results:
            self.results[eta] = pair
        return pair


def oracle_reference(spec: SystemSpec, mode: BareMode, cavity_free: ScalarField,
                     n_max: int = 4, eig_tol: float = 1e-8, seed: int = 1,
                     krylov_dim: int = 60) -> DensityPair:
    """Reference pair: exact in-cavity density vs the given cavity-free density.

    For one electron without a cavity the KS density is exact, so the
    cavity-free half of the pair is shared with the KS runner.
    """
    cfg = PFConfig.from_bare(spec, mode, n_max=n_max, eig_tol=eig_tol, seed=seed, krylov_dim=krylov_dim)
    gs = pf_ground_state(cfg)
    return DensityPair(gs.electron_density, cavity_free)
