"""Compressed-sensing receivers: adaptive subspace pursuit, joint beamforming +
subspace pursuit with a temporal-power-ratio sparsity decision, and the
interference-cancellation refinement stage.

Supports are sorted 0-based user indices. Signals are ``Q x T`` matrices whose
rows outside the support are exactly zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .beamforming import (
    BeamWeight,
    Measurement,
    build_measurement,
    dbf_weight,
    default_loading,
    estimate_ipnc,
    sample_covariance,
    sbf_weight,
    zf_weights,
)
from .numerics import TOL, DimensionError, RankError
from .spreading import EquivalentChannel


@dataclass(frozen=True)
class ReceiverConfig:
    """Constants of the detection and refinement loops.

    ``s_max`` of None means ``ceil(2 * alpha * Q)``. ``loading`` is ``"auto"``
    (``K * noise_power`` when the noise power is supplied, a trace-relative
    load otherwise), ``"trace"`` or a fixed number.
    """

    s_max: int | None = None
    theta1: float = 1e-3
    L1: int = 10
    L2: int = 3
    L3: int = 5
    max_beam_updates: int = 20
    tpr_threshold: float = 3.0
    esnr_db: float = 13.0
    alpha: float = 0.1
    loading: str | float = "auto"
    adaptive: bool = True
    initial_beam: str = "sbf"

    def sparsity_bound(self, Q: int) -> int:
        if self.s_max is not None:
            return self.s_max
        return max(1, math.ceil(2 * self.alpha * Q))


@dataclass
class AspResult:
    X: np.ndarray
    support: np.ndarray
    residual: np.ndarray  # K x T
    iterations: int
    failed: bool = False

    @property
    def residual_energy(self) -> float:
        return float(np.vdot(self.residual, self.residual).real)


@dataclass
class SparsityRecord:
    s: int
    residual_energy: float
    support: np.ndarray
    X: np.ndarray
    tpr: float
    weight: BeamWeight | None
    beam_updates: int = 0


@dataclass
class SparsitySearchState:
    records: dict[int, SparsityRecord] = field(default_factory=dict)

    def add(self, rec: SparsityRecord) -> None:
        self.records[rec.s] = rec

    @property
    def residuals(self) -> np.ndarray:
        return np.array([self.records[s].residual_energy for s in sorted(self.records)])

    @property
    def tprs(self) -> np.ndarray:
        return np.array([self.records[s].tpr for s in sorted(self.records)])


@dataclass
class RecoveryResult:
    cluster: int
    support: np.ndarray
    X: np.ndarray
    residual_energy: float
    weight: BeamWeight | None
    sparsity: int
    failed: bool = False
    fallback: bool = False
    search: SparsitySearchState | None = None


def find_top(values, zeta: int) -> np.ndarray:
    """Sorted indices of the ``zeta`` largest values; ties go to the lower index."""
    values = np.asarray(values, dtype=float)
    if zeta > values.size:
        raise DimensionError(f"cannot pick {zeta} of {values.size} values")
    return kernels.find_top(values, zeta)


def _as_residual(r, K: int, T: int) -> np.ndarray:
    r = np.asarray(r, dtype=complex)
    if r.ndim == 1:
        if r.size != K * T:
            raise DimensionError(f"residual of length {r.size}, expected {K * T}")
        # vec(R^T) is the row-major flattening of R
        return r.reshape(K, T)
    return r


def ls_on_support(meas: Measurement, support) -> np.ndarray:
    """Block least squares of the measurement restricted to ``support``.

    Because the support is common to every slot, the ``KT x sT`` block system
    splits into one ``K x s`` problem per slot, all sharing one factorisation.
    """
    support = np.asarray(support, dtype=np.int64)
    Q = meas.B.shape[1]
    X = np.zeros((Q, meas.T), dtype=complex)
    if support.size == 0:
        return X
    Xs = kernels.solve_support(meas.B, meas.Y, support, TOL.rank_ratio)
    if Xs is None:
        raise RankError(f"selected columns {support.tolist()} are rank deficient")
    X[support] = Xs
    return X


def asp(
    meas: Measurement,
    gamma_init,
    r_init,
    s: int,
    L1: int = 10,
    X_init: np.ndarray | None = None,
) -> AspResult:
    """Adaptive subspace pursuit for block sparsity ``s``.

    Stops once the residual energy fails to decrease or after ``L1`` passes and
    returns the last iterate that decreased it. ``X_init`` is the estimate
    paired with ``r_init``; zeros if omitted.
    """
    K, Q = meas.B.shape
    T = meas.T
    if s < 1 or s * T > K * T:
        raise DimensionError(f"sparsity {s} not in [1, {K}]")
    R0 = _as_residual(r_init, K, T)
    if X_init is None:
        X_init = np.zeros((Q, T), dtype=complex)
    gamma = np.asarray(gamma_init, dtype=np.int64)
    X, sup, R, it, failed = kernels.asp(
        meas.B, meas.Y, gamma, R0, X_init, int(s), int(L1), TOL.rank_ratio
    )
    return AspResult(X, np.asarray(sup, dtype=np.int64), R, int(it), bool(failed))


def tpr(X: np.ndarray, support) -> float:
    """Max over min temporal energy of the supported rows; inf on a zero row."""
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        return math.inf
    energy = np.sum(np.abs(X[support]) ** 2, axis=1)
    lo = energy.min()
    if lo <= 0:
        return math.inf
    return float(energy.max() / lo)


def decide_sparsity(state: SparsitySearchState, threshold: float) -> tuple[int, bool]:
    """Smallest-residual sparsity among those with TPR at most ``threshold``.

    Returns ``(s, fallback)``; when no sparsity passes the TPR gate the
    smallest residual over all of them is used and ``fallback`` is True.
    """
    levels = sorted(state.records)
    candidates = [s for s in levels if state.records[s].tpr <= threshold]
    fallback = not candidates
    pool = levels if fallback else candidates
    # min() keeps the first (smallest) s on ties
    best = min(pool, key=lambda s: state.records[s].residual_energy)
    return best, fallback


def _loading(cfg: ReceiverConfig, R: np.ndarray, noise_power: float | None, K: int) -> float:
    if cfg.loading == "auto":
        return default_loading(R, noise_power, K)
    if cfg.loading == "trace":
        return default_loading(R, None, K)
    return float(cfg.loading)


def adapt_weight(
    Y: np.ndarray,
    eqch: EquivalentChannel,
    n: int,
    abar: np.ndarray,
    Xhat: np.ndarray,
    cfg: ReceiverConfig,
    noise_power: float | None,
) -> BeamWeight:
    """DBF update from the IpNC left after removing the cluster's estimate."""
    ipnc = estimate_ipnc(Y, eqch, n, Xhat)
    R = sample_covariance(ipnc)
    eps = _loading(cfg, R, noise_power, eqch.shape[1])
    return dbf_weight(ipnc, abar, eps, n)


def initial_weights(eqch: EquivalentChannel, abar: np.ndarray, cfg: ReceiverConfig) -> list[BeamWeight]:
    N = eqch.shape[0]
    if cfg.initial_beam == "sbf":
        return [sbf_weight(eqch, n, abar[n], cfg.alpha, cfg.esnr_db) for n in range(N)]
    if cfg.initial_beam == "zf":
        return zf_weights(abar)
    raise ValueError(f"unknown initial beam {cfg.initial_beam!r}")


def _sparsity_level(
    Y, eqch, n, abar, meas0: Measurement, w0: BeamWeight, gamma_prev, s, cfg, noise_power
) -> SparsityRecord:
    # z = 1 state: SBF measurement, residual = measurement, warm-started support
    Q = meas0.B.shape[1]
    meas, weight = meas0, w0
    hist = [(np.zeros((Q, meas0.T), dtype=complex), np.asarray(gamma_prev, dtype=np.int64),
             meas0.Y, w0)]
    updates = 0
    while True:
        X_prev, g_prev, r_prev, _ = hist[-1]
        res = asp(meas, g_prev, r_prev, s, cfg.L1, X_init=X_prev)
        if res.failed:
            return SparsityRecord(s, math.inf, res.support, res.X, math.inf, weight, updates)
        hist.append((res.X, res.support, res.residual, weight))
        e_new = res.residual_energy
        e_old = float(np.vdot(r_prev, r_prev).real)
        if not cfg.adaptive:
            break
        weight = adapt_weight(Y, eqch, n, abar, res.X, cfg, noise_power)
        meas = build_measurement(Y, eqch, weight)
        updates += 1
        if e_old == 0 or abs(e_new - e_old) / e_old < cfg.theta1:
            break
        if updates >= cfg.max_beam_updates:
            break
    # keep the state before the last (converged) pass; the z = 1 entry has no estimate
    X, sup, r, w = hist[-2] if len(hist) > 2 else hist[-1]
    e = float(np.vdot(r, r).real)
    return SparsityRecord(s, e, sup, X, tpr(X, sup), w, updates)


def detect_cluster(
    Y: np.ndarray,
    eqch: EquivalentChannel,
    n: int,
    abar: np.ndarray,
    cfg: ReceiverConfig,
    w0: BeamWeight,
    noise_power: float | None = None,
) -> RecoveryResult:
    """Joint adaptive beamforming + subspace pursuit user detection for cluster ``n``."""
    Q = eqch.shape[3]
    s_max = cfg.sparsity_bound(Q)
    meas0 = build_measurement(Y, eqch, w0)
    state = SparsitySearchState()
    gamma = np.zeros(0, dtype=np.int64)
    for s in range(1, s_max + 1):
        rec = _sparsity_level(Y, eqch, n, abar[n], meas0, w0, gamma, s, cfg, noise_power)
        state.add(rec)
        if np.isfinite(rec.residual_energy):
            gamma = rec.support
    if all(not np.isfinite(r.residual_energy) for r in state.records.values()):
        return RecoveryResult(n, np.zeros(0, dtype=np.int64), np.zeros((Q, Y.shape[1]), dtype=complex),
                              math.inf, w0, 0, failed=True, search=state)
    s_o, fallback = decide_sparsity(state, cfg.tpr_threshold)
    rec = state.records[s_o]
    return RecoveryResult(n, rec.support, rec.X, rec.residual_energy, rec.weight, s_o,
                          fallback=fallback, search=state)


def jabfsp(
    Y: np.ndarray,
    eqch: EquivalentChannel,
    abar: np.ndarray,
    cfg: ReceiverConfig = ReceiverConfig(),
    noise_power: float | None = None,
) -> list[RecoveryResult]:
    """Detection for every cluster; clusters are processed independently."""
    weights = initial_weights(eqch, abar, cfg)
    return [
        detect_cluster(Y, eqch, n, abar, cfg, weights[n], noise_power)
        for n in range(eqch.shape[0])
    ]


def jabfsp_ic(
    Y: np.ndarray,
    eqch: EquivalentChannel,
    abar: np.ndarray,
    init: list[RecoveryResult],
    cfg: ReceiverConfig = ReceiverConfig(),
    noise_power: float | None = None,
) -> list[np.ndarray]:
    """Interference-cancellation refinement on the detected supports.

    Rounds are synchronised: every cluster cancels the interference rebuilt
    from the previous round's estimates of all other clusters.
    """
    N = eqch.shape[0]
    X_hat = [r.X.copy() for r in init]
    supports = [np.asarray(r.support, dtype=np.int64) for r in init]
    if cfg.adaptive:
        weights = [adapt_weight(Y, eqch, n, abar[n], X_hat[n], cfg, noise_power) for n in range(N)]
    else:
        weights = [r.weight for r in init]
    err = [r.residual_energy for r in init]
    contrib = [eqch.stacked(n) @ X_hat[n] for n in range(N)]
    for _ in range(cfg.L2):
        total = sum(contrib)
        X_next = []
        for n in range(N):
            Yc = Y - (total - contrib[n])
            e_prev = err[n]
            for it in range(1, cfg.L3 + 1):
                meas = build_measurement(Yc, eqch, weights[n])
                try:
                    X = ls_on_support(meas, supports[n])
                except RankError:
                    break
                R = meas.Y - meas.apply(X)
                e_new = float(np.vdot(R, R).real)
                if e_new < e_prev and it < cfg.L3:
                    X_hat[n] = X
                    if cfg.adaptive:
                        weights[n] = adapt_weight(Y, eqch, n, abar[n], X, cfg, noise_power)
                    e_prev = e_new
                else:
                    break
            err[n] = e_prev
            X_next.append(X_hat[n])
        contrib = [eqch.stacked(n) @ X_next[n] for n in range(N)]
    return X_hat


def single_antenna_measurement(Y: np.ndarray, eqch: EquivalentChannel, n: int, antenna: int = 0) -> Measurement:
    M = eqch.shape[2]
    b = np.zeros(M, dtype=complex)
    b[antenna] = 1.0
    return build_measurement(Y, eqch, BeamWeight(n, b, b))


def oracle_blocksp_baseline(
    Y: np.ndarray,
    eqch: EquivalentChannel,
    n: int,
    s_true: int,
    antenna: int = 0,
    L1: int = 10,
) -> RecoveryResult:
    """Known-sparsity block SP on a single antenna, no beamforming."""
    meas = single_antenna_measurement(Y, eqch, n, antenna)
    Q = meas.B.shape[1]
    if s_true == 0:
        return RecoveryResult(n, np.zeros(0, dtype=np.int64), np.zeros((Q, meas.T), dtype=complex),
                              float(np.vdot(meas.Y, meas.Y).real), None, 0)
    res = asp(meas, np.zeros(0, dtype=np.int64), meas.Y, s_true, L1)
    return RecoveryResult(n, res.support, res.X, res.residual_energy, None, s_true, failed=res.failed)
