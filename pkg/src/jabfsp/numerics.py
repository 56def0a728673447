"""Complex linear-algebra primitives shared by the receiver modules.

All routines are pure functions of their inputs. Pseudo-inverses are only
defined for full-column-rank matrices and are computed through a Cholesky
factorisation of the Gram matrix; anything numerically rank deficient raises
:class:`RankError` instead of returning a garbage result.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


@dataclass(frozen=True)
class Tolerances:
    # smallest/largest Cholesky pivot of a Gram matrix
    rank_ratio: float = 1e-12
    # max |R - R^H| relative to max |R|
    hermitian: float = 1e-10
    # |b^H a - 1| accepted for a beam weight
    constraint: float = 1e-10


TOL = Tolerances()


class RankError(np.linalg.LinAlgError):
    """Matrix expected to have full column rank is numerically rank deficient."""


class DimensionError(ValueError):
    """Operand shapes do not agree."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {A.shape}")
    return A


def gram_cholesky(A: np.ndarray, tol: float = TOL.rank_ratio) -> np.ndarray:
    """Lower Cholesky factor of ``A^H A``, raising RankError on tiny pivots."""
    A = _as_matrix(A)
    rows, cols = A.shape
    if cols > rows:
        raise RankError(f"{rows}x{cols} matrix cannot have full column rank")
    gram = A.conj().T @ A
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise RankError("Gram matrix is not positive definite") from exc
    pivots = np.real(np.diag(L)) ** 2
    if pivots.size and pivots.min() < tol * pivots.max():
        raise RankError(
            f"pivot ratio {pivots.min() / pivots.max():.3e} below {tol:.0e}"
        )
    return L


def pinv_full_col(A, tol: float = TOL.rank_ratio) -> np.ndarray:
    """Moore-Penrose inverse ``(A^H A)^{-1} A^H`` of a full-column-rank matrix.

    >>> pinv_full_col(np.array([[1.0], [1.0]])).real
    array([[0.5, 0.5]])
    """
    A = _as_matrix(A)
    L = gram_cholesky(A, tol)
    return sla.cho_solve((L, True), A.conj().T)


def block_pinv(A, B, tol: float = TOL.rank_ratio) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse of ``[A B]`` split into the rows acting on A and on B.

    Returns ``(top, bottom)`` with ``top = A^+ - F`` and ``bottom = W^H`` where

        U = B - A A^+ B,   W = U (U^H U)^{-1},   F = A^+ B W^H.

    Stacking ``top`` over ``bottom`` gives ``pinv_full_col(np.hstack([A, B]))``.
    Raises RankError when a column of B lies in the span of A.
    """
    parts = block_pinv_parts(A, B, tol)
    W_h = parts["W"].conj().T
    return parts["A_pinv"] - parts["F"], W_h


def block_pinv_parts(A, B, tol: float = TOL.rank_ratio) -> dict[str, np.ndarray]:
    """The intermediate matrices of :func:`block_pinv`, for error analysis."""
    A = _as_matrix(A)
    B = _as_matrix(B)
    if A.shape[0] != B.shape[0]:
        raise DimensionError(f"row mismatch: {A.shape} vs {B.shape}")
    A_pinv = pinv_full_col(A, tol)
    U = B - A @ (A_pinv @ B)
    # a column of B inside span(A) leaves only rounding noise in U
    kept = np.sum(np.abs(U) ** 2, axis=0)
    total = np.sum(np.abs(B) ** 2, axis=0)
    if np.any(kept <= tol * total):
        raise RankError("a column of B lies in the span of A")
    W_h = pinv_full_col(U, tol)  # (U^H U)^{-1} U^H
    F = A_pinv @ B @ W_h
    return {"A_pinv": A_pinv, "U": U, "W": W_h.conj().T, "F": F}


def loaded_solve(R, epsilon: float, a) -> np.ndarray:
    """Solve ``(R + epsilon I) x = a`` for Hermitian PSD ``R``.

    The result is unnormalised; beamformers apply the unit-gain scaling.
    """
    R = _as_matrix(R)
    a = np.asarray(a, dtype=complex)
    if R.shape[0] != R.shape[1] or R.shape[0] != a.shape[0]:
        raise DimensionError(f"R {R.shape} incompatible with a {a.shape}")
    if epsilon < 0:
        raise ContractError("diagonal loading must be non-negative")
    scale = max(np.abs(R).max(initial=0.0), 1.0)
    if np.abs(R - R.conj().T).max(initial=0.0) > TOL.hermitian * scale:
        raise ContractError("R is not Hermitian")
    Rl = R + epsilon * np.eye(R.shape[0])
    try:
        c = sla.cho_factor(Rl, lower=True)
    except np.linalg.LinAlgError as exc:
        raise RankError("R + epsilon I is not positive definite") from exc
    return sla.cho_solve(c, a)


def vec(X) -> np.ndarray:
    """Stack the columns of ``X`` into one vector."""
    X = np.asarray(X)
    if X.ndim == 1:
        return X.copy()
    return X.reshape(-1, order="F")


def unvec(c, T: int) -> np.ndarray:
    """Inverse of :func:`vec` producing a matrix with ``T`` rows."""
    c = np.asarray(c)
    if T <= 0 or c.size % T:
        raise DimensionError(f"length {c.size} is not divisible by {T}")
    return c.reshape(T, -1, order="F")


def combine_kron(Y, b, K: int) -> np.ndarray:
    """``(I_K kron b)^H Y`` without forming the Kronecker product.

    ``Y`` has ``M*K`` rows made of ``K`` stacked ``M``-row blocks; each block is
    combined with ``b^H``. Returns a ``K x cols`` matrix.
    """
    Y = _as_matrix(Y)
    b = np.asarray(b, dtype=complex).ravel()
    M = b.size
    if Y.shape[0] != M * K:
        raise DimensionError(f"Y has {Y.shape[0]} rows, expected M*K = {M * K}")
    return np.einsum("m,kmt->kt", b.conj(), Y.reshape(K, M, -1))
