"""Iterative eigensolvers for the lowest eigenpairs of matrix-free operators.

``lobpcg`` handles the real symmetric Kohn-Sham problem (a block of lowest
states, preconditioned). ``lanczos_ground_state`` handles the complex
Hermitian Pauli-Fierz problem, where only the ground state is wanted; it is a
thick-restart Lanczos with full (two-pass) reorthogonalization.

Both work with plain Euclidean inner products on flat vectors.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import blas, eigh

log = logging.getLogger(__name__)


class EigensolverError(RuntimeError):
    """Raised when an eigensolver stops before reaching its tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


def _svqb(S: np.ndarray, AS: np.ndarray, drop: float = 1e-14):
    """Orthonormalize the columns of S (carrying AS along); drop dependent ones."""
    G = S.T @ S
    d = np.sqrt(np.abs(np.diag(G)))
    keep = d > 0
    S, AS, G, d = S[:, keep], AS[:, keep], G[np.ix_(keep, keep)], d[keep]
    Gs = G / np.outer(d, d)
    lam, V = np.linalg.eigh(Gs)
    good = lam > drop * lam.max()
    T = (V[:, good] / np.sqrt(lam[good])) / d[:, None]
    return S @ T, AS @ T


def _orthonormalize(S, AS):
    Q, AQ = _svqb(S, AS)
    # second pass cleans up the rounding left by a poorly conditioned Gram matrix
    return _svqb(Q, AQ)


@dataclass
class LobpcgResult:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int


def lobpcg(apply_a: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
           precond: Callable[[np.ndarray], np.ndarray] | None = None,
           tol: float = 1e-8, max_iter: int = 1000) -> LobpcgResult:
    """Lowest ``k = x0.shape[1]`` eigenpairs of a real symmetric operator.

    ``apply_a`` and ``precond`` map an (n, m) block to an (n, m) block.
    Converged when every residual 2-norm ``||A x - theta x||`` is below
    ``tol`` (vectors have unit 2-norm).
    """
    X = np.array(x0, dtype=float, copy=True)
    if X.ndim == 1:
        X = X[:, None]
    k = X.shape[1]
    X, AX = _orthonormalize(X, apply_a(X))
    if X.shape[1] < k:
        raise EigensolverError("initial block is rank deficient")
    theta, C = np.linalg.eigh(0.5 * (X.T @ AX + AX.T @ X))
    X, AX = X @ C, AX @ C
    P = AP = None
    rnorm = None
    for it in range(1, max_iter + 1):
        R = AX - X * theta
        rnorm = np.linalg.norm(R, axis=0)
        if np.all(rnorm < tol):
            return LobpcgResult(theta, X, rnorm, it - 1)
        active = rnorm >= tol
        W = R[:, active]
        if precond is not None:
            W = precond(W)
        W = W - X @ (X.T @ W)
        W = W - X @ (X.T @ W)
        AW = apply_a(W)
        if P is None:
            S, AS = W, AW
        else:
            S, AS = np.hstack([W, P]), np.hstack([AW, AP])
        # search directions live in the complement of X; P comes from their
        # coefficients, never from a difference of nearly equal X blocks
        for _ in range(2):
            c = X.T @ S
            S, AS = S - X @ c, AS - AX @ c
            S, AS = _svqb(S, AS)
        Q, AQ = np.hstack([X, S]), np.hstack([AX, AS])
        Hs = Q.T @ AQ
        vals, Y = np.linalg.eigh(0.5 * (Hs + Hs.T))
        Yz = Y[k:, :k]
        P, AP = S @ Yz, AS @ Yz
        Xn, AXn = X @ Y[:k, :k] + P, AX @ Y[:k, :k] + AP
        pn = np.linalg.norm(P, axis=0)
        live = pn > 1e-300
        P, AP = P[:, live] / pn[live], AP[:, live] / pn[live]
        if P.shape[1] == 0:
            P = AP = None
        X, AX, theta = Xn, AXn, vals[:k]
    raise EigensolverError(
        f"LOBPCG did not converge in {max_iter} iterations (residuals {rnorm})", rnorm
    )


@dataclass
class LanczosResult:
    eigenvalue: float
    vector: np.ndarray
    residual: float
    matvecs: int
    restarts: int


def lanczos_ground_state(apply_a: Callable[[np.ndarray], np.ndarray], v0: np.ndarray,
                         tol: float = 1e-8, krylov_dim: int = 60, keep: int = 15,
                         max_restarts: int = 500) -> LanczosResult:
    """Lowest eigenpair of a complex Hermitian operator by thick-restart Lanczos.

    The Krylov basis is fully reorthogonalized (two classical Gram-Schmidt
    passes) at every step. After ``krylov_dim`` steps the ``keep`` lowest Ritz
    vectors and the residual vector seed the next cycle. Convergence is
    declared on the Ritz residual estimate and confirmed with an explicit
    ``||A x - theta x||`` evaluation.
    """
    n = v0.shape[0]
    m = max(2, min(krylov_dim, n))
    keep = max(1, min(keep, m - 1))
    V = np.zeros((n, m + 1), dtype=complex, order="F")
    T = np.zeros((m + 1, m + 1), dtype=complex)
    V[:, 0] = v0 / np.linalg.norm(v0)
    k = 0
    matvecs = 0
    est = np.inf
    for restart in range(max_restarts + 1):
        m_eff = m
        for j in range(k, m):
            w = apply_a(V[:, j]).astype(complex, copy=False)
            matvecs += 1
            basis = V[:, : j + 1]
            c = blas.zgemv(1.0, basis, w, trans=2)
            w = w - basis @ c
            c2 = blas.zgemv(1.0, basis, w, trans=2)
            w -= basis @ c2
            T[: j + 1, j] = c + c2
            beta = np.linalg.norm(w)
            T[j + 1, j] = beta
            if beta <= 1e-13 * max(1.0, abs(T[j, j])):
                m_eff = j + 1
                break
            V[:, j + 1] = w / beta
        Tm = T[:m_eff, :m_eff]
        Tm = 0.5 * (Tm + Tm.conj().T)
        theta, Y = eigh(Tm)
        beta_m = T[m_eff, m_eff - 1].real if m_eff == m else 0.0
        est = abs(beta_m * Y[m_eff - 1, 0])
        if est < tol:
            x = V[:, :m_eff] @ Y[:, 0]
            x /= np.linalg.norm(x)
            ax = apply_a(x)
            matvecs += 1
            lam = float(np.vdot(x, ax).real)
            res = float(np.linalg.norm(ax - lam * x))
            if res < tol:
                log.debug("lanczos converged: %d matvecs, %d restarts", matvecs, restart)
                return LanczosResult(lam, x, res, matvecs, restart)
            log.debug("lanczos estimate %.2e but explicit residual %.2e", est, res)
        p = min(keep, m_eff - 1) if m_eff == m else 1
        if m_eff < m:
            # exact invariant subspace without convergence: restart from best Ritz vector
            x = V[:, :m_eff] @ Y[:, 0]
            V[:, 0] = x / np.linalg.norm(x)
            T[:] = 0.0
            k = 0
            continue
        V[:, :p] = V[:, :m] @ Y[:, :p]
        V[:, p] = V[:, m]
        T[:] = 0.0
        T[np.arange(p), np.arange(p)] = theta[:p]
        T[p, :p] = beta_m * Y[m - 1, :p]
        k = p
    raise EigensolverError(
        f"Lanczos did not converge after {max_restarts} restarts (residual estimate {est:.3e})",
        [est],
    )
