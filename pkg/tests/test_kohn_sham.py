import math

import numpy as np
import pytest
from scipy.linalg import eigh

from pxclda.cavity import BareMode, ev_to_hartree
from pxclda.eigensolvers import EigensolverError
from pxclda.fields import Direction, Grid, GridMismatchError, ScalarField, inner, integrate
from pxclda.functionals import PxcParams
from pxclda.kohn_sham import (MAX_STATES, KSRunner, Nucleus, SCFConvergenceError, SCFOptions, SystemSpec,
                              apply_hamiltonian, density_from_orbitals, external_potential,
                              lowest_eigenpairs, scf, soft_atom)

Z = Direction.parse("z")
COARSE = Grid.cube(8.0, 0.4)


def stencil_1d(n, h):
    """Dense -0.5 * D2 matrix for the 4th-order stencil with zero-Dirichlet ends."""
    t = np.zeros((n, n))
    for off, c in ((0, -30), (1, 16), (2, -1)):
        t += np.diag(np.full(n - off, c), off)
        if off:
            t += np.diag(np.full(n - off, c), -off)
    return -0.5 * t / (12 * h * h)


@pytest.fixture(scope="module")
def he_free():
    spec = soft_atom(2.0, 0.5, COARSE, 2)
    return spec, scf(spec)


def test_external_potential_examples():
    g = Grid.cube(10.0, 0.5)
    v = external_potential(soft_atom(1.0, 0.5, g, 1))
    c = g.dims[0] // 2
    assert v.values[c, c, c] == pytest.approx(-2 / (0.5 * math.sqrt(math.pi)), rel=1e-14)
    assert abs(v.values[c, c, -1] + 0.1) < 1e-9
    two = SystemSpec((Nucleus((0, 0, 1.0), 1, 0.5), Nucleus((0, 0, -1.0), 1, 0.5)), 2, g)
    single = [external_potential(SystemSpec((n,), 2, g)).values for n in two.nuclei]
    assert np.allclose(external_potential(two).values, single[0] + single[1], atol=1e-14)


def test_system_spec_rules():
    with pytest.raises(ValueError):
        SystemSpec((Nucleus((0, 0, 0), 1, 0.5),), 3, COARSE)
    with pytest.raises(ValueError):
        SystemSpec((Nucleus((0, 0, 0), 1, 0.5),), 1, COARSE, True)
    with pytest.raises(ValueError):
        Nucleus((0, 0, 0), 1, 0.0)
    assert soft_atom(1, 0.5, COARSE, 1).occupations == [1.0]
    assert soft_atom(4, 0.5, COARSE, 4).occupations == [2.0, 2.0]


def test_apply_hamiltonian_box_mode():
    g = Grid((10, 11, 12), 0.5, (0.0, 0.0, 0.0))
    vecs = []
    e0 = 0.0
    for n in g.dims:
        w, v = eigh(stencil_1d(n, g.spacing))
        vecs.append(v[:, 0])
        e0 += w[0]
    phi = ScalarField(g, np.einsum("k,j,i->kji", vecs[2], vecs[1], vecs[0]))
    hphi = apply_hamiltonian(phi, ScalarField.zeros(g))
    assert np.abs(hphi.values - e0 * phi.values).max() < 1e-12
    assert not np.any(apply_hamiltonian(ScalarField.zeros(g), ScalarField.zeros(g)).values)
    with pytest.raises(GridMismatchError):
        apply_hamiltonian(phi, ScalarField.zeros(Grid.cube(2.0, 0.5)))


def test_apply_hamiltonian_symmetric():
    g = Grid.cube(2.0, 0.25)
    rng = np.random.default_rng(0)
    v = ScalarField(g, rng.standard_normal(g.shape))
    a = ScalarField(g, rng.standard_normal(g.shape))
    b = ScalarField(g, rng.standard_normal(g.shape))
    lhs, rhs = inner(a, apply_hamiltonian(b, v)), inner(apply_hamiltonian(a, v), b)
    assert abs(lhs - rhs) < 1e-10 * abs(lhs)


def test_lowest_eigenpairs_box():
    g = Grid((10, 10, 10), 0.5, (-2.25, -2.25, -2.25))
    w = eigh(stencil_1d(10, 0.5), eigvals_only=True)
    eps, orbs = lowest_eigenpairs(ScalarField.zeros(g), 4)
    assert eps[0] == pytest.approx(3 * w[0], abs=1e-10)
    assert eps[1] == pytest.approx(2 * w[0] + w[1], abs=1e-10)
    for i, a in enumerate(orbs):
        for j, b in enumerate(orbs):
            assert inner(a, b) == pytest.approx(float(i == j), abs=1e-8)


def test_lowest_eigenpairs_harmonic():
    g = Grid.cube(8.0, 0.25)
    v = ScalarField(g, 0.5 * g.radius() ** 2)
    eps, orbs = lowest_eigenpairs(v, 1)
    assert abs(eps[0] - 1.5) < 2e-3
    res = apply_hamiltonian(orbs[0], v) - orbs[0] * eps[0]
    assert math.sqrt(inner(res, res)) < 1e-8


def test_lowest_eigenpairs_soft_he_ordering():
    eps, _ = lowest_eigenpairs(external_potential(soft_atom(2, 0.5, COARSE, 2)), 4)
    assert eps[0] < eps[1]
    assert np.all(np.diff(eps) >= 0)
    assert eps[3] - eps[1] < 1e-6  # p-shell degeneracy


def test_lowest_eigenpairs_limits():
    with pytest.raises(ValueError):
        lowest_eigenpairs(ScalarField.zeros(COARSE), MAX_STATES + 1)
    with pytest.raises(EigensolverError):
        lowest_eigenpairs(external_potential(soft_atom(1, 0.5, COARSE, 1)), 2, max_iter=1)


def test_one_electron_scf():
    spec = soft_atom(1, 0.5, COARSE, 1)
    state = scf(spec, [BareMode(0.1, 0.0, Z)])
    assert len(state.scf_history) <= 2
    eps, orbs = lowest_eigenpairs(external_potential(spec), 1)
    assert np.abs(state.density.values - orbs[0].values ** 2).max() < 1e-8
    assert state.eigenvalues[0] == pytest.approx(eps[0], abs=1e-9)


def test_lambda_zero_equals_pxc_disabled():
    spec = soft_atom(1, 0.5, COARSE, 1)
    a = scf(spec, [BareMode(0.1, 0.0, Z)])
    b = scf(spec, [BareMode(0.1, 0.05, Z)], PxcParams(enabled=False))
    assert np.abs(a.density.values - b.density.values).max() < 1e-12
    assert np.array_equal(a.potentials.v_pxc.values, b.potentials.v_pxc.values)


def test_he_analogue_state_invariants(he_free):
    spec, state = he_free
    assert state.converged
    assert integrate(state.density) == pytest.approx(2.0, abs=1e-8)
    phi = state.orbitals[0]
    assert inner(phi, phi) == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(density_from_orbitals(state.orbitals, state.occupations).values,
                       state.density.values, atol=1e-14)
    p = state.potentials
    total = p.v_ext.values + p.v_h.values + p.v_xc.values + p.v_pxc.values
    assert np.abs(p.v_ks.values - total).max() < 1e-14
    last = state.scf_history[-1]
    assert last.density_change < 1e-7 and last.eig_drift < 1e-7


def test_he_analogue_self_consistency(he_free):
    spec, state = he_free
    runner = KSRunner(spec)
    pots = runner.potentials(state.density, [], PxcParams())
    eps, _ = runner.solve_orbitals(pots.v_ks)
    assert abs(eps[0] - state.eigenvalues[0]) < 1e-6


def test_pulay_mixing_converges_to_same_density(he_free):
    spec, state = he_free
    pulay = scf(spec, opts=SCFOptions(mixing="pulay"))
    assert len(pulay.scf_history) < len(state.scf_history)
    assert np.abs(pulay.density.values - state.density.values).max() < 1e-6


def test_pxlda_reduces_with_eta(he_free):
    spec, free = he_free
    mode = [BareMode(ev_to_hartree(2.0), 0.1, Z)]
    d1 = scf(spec, mode, PxcParams(1.0)).density - free.density
    d3 = scf(spec, mode, PxcParams(0.3)).density - free.density
    assert d3.max_abs() < d1.max_abs()


def test_scf_failure_carries_history():
    spec = soft_atom(2, 0.5, COARSE, 2)
    with pytest.raises(SCFConvergenceError) as info:
        scf(spec, opts=SCFOptions(max_iter=3))
    assert [r.iteration for r in info.value.history] == [1, 2, 3]
