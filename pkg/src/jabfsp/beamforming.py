"""Receive beamforming and measurement construction for one cluster.

Every weight is normalised to unit gain towards the cluster's average
steering vector, ``b^H abar = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import TOL, ContractError, DimensionError, combine_kron, loaded_solve, vec
from .spreading import EquivalentChannel


@dataclass(frozen=True)
class BeamWeight:
    cluster: int
    b: np.ndarray
    abar: np.ndarray

    @property
    def constraint_error(self) -> float:
        return float(abs(np.vdot(self.b, self.abar) - 1.0))


@dataclass(frozen=True)
class Measurement:
    """Beam-combined observations of one cluster.

    ``Y`` is the combined ``K x T`` matrix and ``B`` the ``K x Q`` beam-domain
    gain. The block parameter matrix ``B kron I_T`` is never formed; with the
    row-major vectorisation used here a block-``q`` correlation with a residual
    matrix ``R`` is ``B[:, q]^H R``.
    """

    cluster: int
    Y: np.ndarray
    B: np.ndarray

    @property
    def T(self) -> int:
        return self.Y.shape[1]

    @property
    def eta(self) -> np.ndarray:
        """``vec(Y^T)``."""
        return vec(self.Y.T)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """``D vec(X^T)`` returned as the K x T matrix ``B X``."""
        return self.B @ X

    def explicit_D(self) -> np.ndarray:
        return np.kron(self.B, np.eye(self.T))


def mvdr(R: np.ndarray, abar: np.ndarray, epsilon: float = 0.0) -> np.ndarray:
    """``(R + eps I)^{-1} abar / (abar^H (R + eps I)^{-1} abar)``."""
    x = loaded_solve(R, epsilon, abar)
    return x / np.vdot(abar, x)


def interference_covariance(eqch: EquivalentChannel, n: int, alpha, esnr_db: float) -> np.ndarray:
    """``sum_{l != n} alpha_l delta_e sum_k G_lk G_lk^H`` with unit noise power."""
    N, K, M, Q = eqch.shape
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (N,))
    delta = 10.0 ** (esnr_db / 10.0)
    Phi = np.zeros((M, M), dtype=complex)
    for l in range(N):
        if l == n:
            continue
        G = eqch.blocks[l]  # (K, M, Q)
        Phi += alpha[l] * delta * np.einsum("kmq,kpq->mp", G, G.conj())
    return Phi


def sbf_weight(
    eqch: EquivalentChannel,
    n: int,
    abar: np.ndarray,
    alpha=0.1,
    esnr_db: float = 13.0,
) -> BeamWeight:
    """Statistical beamformer from the other clusters' spread channels."""
    if not np.isfinite(esnr_db):
        raise ContractError("empirical SNR must be finite")
    K = eqch.shape[1]
    Phi = interference_covariance(eqch, n, alpha, esnr_db)
    # K * sigma_v^2 with sigma_v^2 normalised to one
    b = mvdr(Phi, abar, epsilon=float(K))
    return BeamWeight(n, b, abar)


def sbf_objective(eqch: EquivalentChannel, n: int, b, alpha=0.1, esnr_db: float = 13.0) -> float:
    K = eqch.shape[1]
    Phi = interference_covariance(eqch, n, alpha, esnr_db) + K * np.eye(eqch.shape[2])
    return float(np.real(np.vdot(b, Phi @ b)))


def zf_weights(abar_all: np.ndarray) -> list[BeamWeight]:
    """Zero-forcing towards the cluster centres: ``A (A^H A)^{-1}`` column-wise."""
    A = np.asarray(abar_all).T  # (M, N)
    W = A @ np.linalg.inv(A.conj().T @ A)
    return [BeamWeight(n, W[:, n].copy(), A[:, n].copy()) for n in range(A.shape[1])]


def sample_covariance(ipnc: np.ndarray) -> np.ndarray:
    """``1/(KT) sum i i^H`` over an ``(M, KT)`` or ``(K, M, T)`` sample array."""
    ipnc = np.asarray(ipnc)
    if ipnc.ndim == 3:
        ipnc = ipnc.transpose(1, 0, 2).reshape(ipnc.shape[1], -1)
    return ipnc @ ipnc.conj().T / ipnc.shape[1]


def default_loading(R: np.ndarray, noise_power: float | None, K: int) -> float:
    """``K * noise_power`` when known, else ``1e-3 tr(R) / M``.

    The trace-relative value also acts as a floor so that a vanishing noise
    power cannot leave ``R + eps I`` singular.
    """
    M = R.shape[0]
    floor = max(1e-3 * float(np.real(np.trace(R))) / M, 1e-12)
    if noise_power is not None and noise_power > 0:
        return max(K * noise_power, floor)
    return floor


def dbf_weight(
    ipnc: np.ndarray,
    abar: np.ndarray,
    epsilon: float,
    n: int = 0,
) -> BeamWeight:
    """Dynamic (least-squares) beamformer from IpNC samples."""
    R = sample_covariance(ipnc)
    return BeamWeight(n, mvdr(R, abar, epsilon), abar)


def estimate_ipnc(Y: np.ndarray, eqch: EquivalentChannel, n: int, Xhat: np.ndarray) -> np.ndarray:
    """Interference-plus-noise samples ``y_kt - G_nk x_t``, shape (K, M, T)."""
    _, K, M, Q = eqch.shape
    if Y.shape[0] != K * M or Xhat.shape != (Q, Y.shape[1]):
        raise DimensionError(f"Y {Y.shape} / Xhat {Xhat.shape} vs (K, M, Q) = {(K, M, Q)}")
    return Y.reshape(K, M, -1) - eqch.blocks[n] @ Xhat


def build_measurement(Y: np.ndarray, eqch: EquivalentChannel, weight: BeamWeight) -> Measurement:
    K = eqch.shape[1]
    G = eqch.stacked(weight.cluster)
    return Measurement(
        weight.cluster,
        combine_kron(Y, weight.b, K),
        combine_kron(G, weight.b, K),
    )


def check_constraint(weight: BeamWeight, tol: float = TOL.constraint) -> None:
    if weight.constraint_error > tol:
        raise ContractError(f"beam constraint violated by {weight.constraint_error:.2e}")


def beampattern(b: np.ndarray, theta_deg, spacing_ratio: float = 0.5) -> np.ndarray:
    """``|b^H a(theta)|^2`` on an angle grid."""
    from .scenario import steering_matrix

    A = steering_matrix(theta_deg, b.size, spacing_ratio)
    return np.abs(A @ b.conj()) ** 2
