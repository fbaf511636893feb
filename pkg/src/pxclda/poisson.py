"""Free-space Poisson solver (Hockney zero-padded FFT convolution).

Solves ``laplacian(v) = f`` with ``v -> 0`` at infinity by convolving ``f``
with the Green's function ``-1 / (4 pi |r - r'|)`` on a grid padded to at
least twice the box size per axis, so the cyclic convolution never wraps.
The self-cell kernel entry is the exact cell average of the Green's function.

The kernel is applied directly, not obtained by inverting a discrete
Laplacian, so ``fields.laplacian(solve(f))`` reproduces ``f`` only up to the
4th-order stencil's truncation error plus the kernel quadrature error.
"""
from __future__ import annotations

import logging
import math
import time
import warnings

import numpy as np
from scipy import fft as sfft

from .fields import Grid, GridMismatchError, ScalarField

log = logging.getLogger(__name__)

# integral of 1/|r| over the unit cube centred on the origin
UNIT_CUBE_INV_R = 3.0 * math.log(2.0 + math.sqrt(3.0)) - math.pi / 2.0


class PoissonBoundaryError(RuntimeError):
    """The source does not decay towards the box boundary."""


class PoissonBoundaryWarning(UserWarning):
    pass


def boundary_ratio(values: np.ndarray) -> float:
    """max |f| on the six box faces divided by max |f| overall (0 for f = 0)."""
    a = np.abs(values)
    peak = a.max()
    if peak == 0.0:
        return 0.0
    faces = max(
        a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max(), a[:, :, 0].max(), a[:, :, -1].max()
    )
    return float(faces / peak)


class PoissonSolver:
    """Reusable free-space solver bound to a single grid.

    Args:
        grid: the grid all sources must live on.
        padding: padding factor per axis (>= 2 avoids wrap-around).
        warn_ratio: boundary/interior ratio above which a warning is issued.
        fail_ratio: ratio above which the source counts as non-decaying and
            the solve is refused unless ``force`` is set.
        force: solve non-decaying sources anyway (with a warning).
    """

    def __init__(self, grid: Grid, padding: float = 2.0, warn_ratio: float = 1e-6,
                 fail_ratio: float = 1e-3, force: bool = False):
        if padding < 2.0:
            raise ValueError("padding factor must be at least 2")
        self.grid = grid
        self.padding = float(padding)
        self.warn_ratio = warn_ratio
        self.fail_ratio = fail_ratio
        self.force = force
        nz, ny, nx = grid.shape
        self._padded = tuple(
            sfft.next_fast_len(int(math.ceil(padding * n)), real=True) for n in (nz, ny, nx)
        )
        self._kernel_hat = self._build_kernel()
        self._kernel_hat.setflags(write=False)

    def _build_kernel(self) -> np.ndarray:
        h = self.grid.spacing
        axes = []
        for m in self._padded:
            idx = np.arange(m)
            axes.append(np.minimum(idx, m - idx).astype(float))
        kz, ky, kx = np.meshgrid(*axes, indexing="ij", sparse=True)
        dist = np.sqrt(kx**2 + ky**2 + kz**2)
        with np.errstate(divide="ignore"):
            kern = -(h * h) / (4.0 * math.pi * dist)
        kern[0, 0, 0] = -(h * h) * UNIT_CUBE_INV_R / (4.0 * math.pi)
        return sfft.rfftn(kern)

    def solve(self, f: ScalarField, force: bool | None = None) -> ScalarField:
        """Return v with laplacian(v) = f and v vanishing at infinity."""
        if not f.grid.same_as(self.grid):
            raise GridMismatchError(
                f"solver grid {self.grid.describe()} vs source grid {f.grid.describe()}"
            )
        force = self.force if force is None else force
        ratio = boundary_ratio(f.values)
        if ratio > self.fail_ratio:
            msg = f"source does not decay at the box boundary (boundary/max = {ratio:.3e})"
            if not force:
                raise PoissonBoundaryError(msg + "; enlarge the box or pass force")
            warnings.warn(msg, PoissonBoundaryWarning, stacklevel=2)
        elif ratio > self.warn_ratio:
            warnings.warn("Poisson source is not negligible at the box boundary",
                          PoissonBoundaryWarning, stacklevel=2)
        if not np.any(f.values):
            return ScalarField.zeros(self.grid)
        t0 = time.perf_counter()
        nz, ny, nx = self.grid.shape
        src_hat = sfft.rfftn(f.values, s=self._padded)
        v = sfft.irfftn(src_hat * self._kernel_hat, s=self._padded)[:nz, :ny, :nx]
        log.debug("poisson solve %.3fs boundary_ratio=%.3e", time.perf_counter() - t0, ratio)
        return ScalarField(self.grid, v)


def solve_free_space(f: ScalarField, solver: PoissonSolver | None = None, force: bool = False) -> ScalarField:
    """Convenience wrapper building a one-off solver when none is given."""
    solver = solver or PoissonSolver(f.grid, force=force)
    return solver.solve(f, force=force or None)


def hartree_potential(rho: ScalarField, solver: PoissonSolver | None = None) -> ScalarField:
    """Hartree potential ``v_H`` solving ``laplacian(v_H) = -4 pi rho``."""
    if rho.values.min() < -1e-12:
        raise ValueError(f"density has negative entries (min {rho.values.min()!r})")
    solver = solver or PoissonSolver(rho.grid)
    return solver.solve(ScalarField(rho.grid, -4.0 * math.pi * rho.values))
