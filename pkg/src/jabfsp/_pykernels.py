"""Pure-NumPy implementation of the subspace-pursuit hot loop.

Mirrors ``_kernels.pyx`` function for function; ``kernels`` picks one at import.
All matrices are in the beam domain: ``B`` is K x Q, ``Y`` and residuals K x T,
signal estimates Q x T.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

BACKEND = "python"


def block_energies(B: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``||B[:, q]^H R||^2`` for every column q."""
    C = B.conj().T @ R
    return (C.real**2 + C.imag**2).sum(axis=1)


def find_top(values: np.ndarray, count: int) -> np.ndarray:
    """Sorted indices of the ``count`` largest values, ties to the lower index."""
    order = np.argsort(-np.asarray(values), kind="stable")
    return np.sort(order[:count])


def solve_support(B: np.ndarray, Y: np.ndarray, support: np.ndarray, rank_tol: float):
    """Least squares of ``Y`` on the columns ``support`` of ``B``.

    Returns the ``len(support) x T`` solution, or None when the Gram matrix of
    the selected columns is numerically singular.
    """
    A = B[:, support]
    gram = A.conj().T @ A
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        return None
    piv = np.real(np.diag(L)) ** 2
    if piv.size and piv.min() < rank_tol * piv.max():
        return None
    return sla.cho_solve((L, True), A.conj().T @ Y, check_finite=False)


def asp(B, Y, gamma_init, R_init, X_init, s: int, max_iter: int, rank_tol: float):
    """Adaptive subspace pursuit with fixed sparsity ``s``.

    Iterates support expansion, LS, pruning, LS re-estimation and residual
    update until the residual energy stops decreasing or ``max_iter`` passes
    are done. Returns ``(X, support, R, iterations, failed)`` for the last
    iterate that strictly lowered the residual energy (the initial state if
    none did). ``failed`` flags an LS breakdown before any accepted iterate.
    """
    Q = B.shape[1]
    X_best = X_init
    gamma = np.asarray(gamma_init, dtype=np.int64)
    R = R_init
    e_prev = float(np.vdot(R, R).real)
    accepted = 0
    failed = False
    it = 0
    while it < max_iter:
        it += 1
        lam = np.union1d(gamma, find_top(block_energies(B, R), s))
        W = solve_support(B, Y, lam, rank_tol)
        if W is None:
            failed = accepted == 0
            break
        energy = np.zeros(Q)
        energy[lam] = (W.real**2 + W.imag**2).sum(axis=1)
        new_gamma = find_top(energy, s)
        Xs = solve_support(B, Y, new_gamma, rank_tol)
        if Xs is None:
            failed = accepted == 0
            break
        Rn = Y - B[:, new_gamma] @ Xs
        e = float(np.vdot(Rn, Rn).real)
        if e >= e_prev:
            break
        X_best = np.zeros((Q, Y.shape[1]), dtype=complex)
        X_best[new_gamma] = Xs
        gamma, R, e_prev = new_gamma, Rn, e
        accepted += 1
    return X_best, gamma, R, it, failed
