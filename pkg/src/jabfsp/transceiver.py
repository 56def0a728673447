"""Frame synthesis: block-sparse activity, modulated symbols, received signal."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import ContractError, DimensionError
from .scenario import complex_normal
from .spreading import EquivalentChannel

CONSTELLATIONS = ("BPSK", "QPSK", "16QAM")


@lru_cache(maxsize=None)
def _unit_points(name: str) -> np.ndarray:
    if name == "BPSK":
        pts = np.array([1.0, -1.0], dtype=complex)
    elif name == "QPSK":
        pts = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2)
    elif name == "16QAM":
        # Gray-mapped levels: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
        levels = np.array([-3.0, -1.0, 3.0, 1.0])
        pts = np.array([i + 1j * q for i in levels for q in levels]) / np.sqrt(10.0)
    else:
        raise ContractError(f"unknown constellation {name!r}; expected one of {CONSTELLATIONS}")
    pts.setflags(write=False)
    return pts


def constellation(name: str, power: float = 1.0) -> np.ndarray:
    """Constellation points scaled to the given average symbol power."""
    return _unit_points(name.upper()) * np.sqrt(power)


def demodulate(X, name: str, power: float = 1.0) -> np.ndarray:
    """Indices of the nearest constellation points (hard decision)."""
    pts = constellation(name, power)
    X = np.asarray(X)
    return np.argmin(np.abs(X[..., None] - pts), axis=-1)


def draw_activity(
    Q: int,
    rng: np.random.Generator,
    s_o: int | None = None,
    alpha: float | None = None,
) -> np.ndarray:
    """Sorted 0-based indices of the active users of one frame.

    Exactly ``s_o`` users by default; with ``alpha`` each user is active
    independently with that probability.
    """
    if s_o is not None:
        if not 0 <= s_o <= Q:
            raise ContractError(f"s_o={s_o} outside [0, {Q}]")
        return np.sort(rng.choice(Q, size=s_o, replace=False))
    if alpha is None or not 0 <= alpha <= 1:
        raise ContractError("either s_o or an activity rate in [0, 1] is required")
    return np.flatnonzero(rng.random(Q) < alpha)


def modulate(
    support,
    Q: int,
    T: int,
    rng: np.random.Generator,
    name: str = "16QAM",
    power: float = 1.0,
) -> np.ndarray:
    pts = constellation(name, power)
    X = np.zeros((Q, T), dtype=complex)
    support = np.asarray(support, dtype=int)
    X[support] = pts[rng.integers(0, pts.size, size=(support.size, T))]
    return X


@dataclass(frozen=True)
class FrameTruth:
    supports: list[np.ndarray]
    symbols: list[np.ndarray]  # each (Q, T)
    constellation: str
    powers: np.ndarray  # per-cluster symbol power


@dataclass(frozen=True)
class ReceivedFrame:
    Y: np.ndarray  # (K*M, T)
    noise_power: float
    snr_db: np.ndarray

    @property
    def T(self) -> int:
        return self.Y.shape[1]


def noise_and_powers(snr_db) -> tuple[float, np.ndarray]:
    """Noise power and per-cluster symbol powers for a per-cluster SNR list.

    The weakest cluster transmits at unit power; with equal SNRs every cluster
    has ``sigma^2 = 1`` and ``sigma_v^2 = 10^(-SNR/10)``.
    """
    snr_db = np.atleast_1d(np.asarray(snr_db, dtype=float))
    ref = snr_db.min()
    return 10.0 ** (-ref / 10.0), 10.0 ** ((snr_db - ref) / 10.0)


def superpose(eqch: EquivalentChannel, symbols) -> np.ndarray:
    """Noiseless ``sum_n G_n X_n``."""
    N, K, M, Q = eqch.shape
    if len(symbols) != N:
        raise DimensionError(f"{len(symbols)} symbol matrices for {N} clusters")
    T = symbols[0].shape[1]
    Y = np.zeros((K * M, T), dtype=complex)
    for n, X in enumerate(symbols):
        if X.shape != (Q, T):
            raise DimensionError(f"cluster {n} symbols have shape {X.shape}, expected {(Q, T)}")
        Y += eqch.stacked(n) @ X
    return Y


def synthesize_received(
    eqch: EquivalentChannel,
    truth: FrameTruth,
    noise_power: float,
    rng: np.random.Generator,
    snr_db=None,
) -> ReceivedFrame:
    Y = superpose(eqch, truth.symbols)
    if noise_power > 0:
        Y = Y + complex_normal(rng, Y.shape, noise_power)
    snr = np.asarray([] if snr_db is None else snr_db, dtype=float)
    return ReceivedFrame(Y, float(noise_power), snr)


def make_truth(
    Q: int,
    T: int,
    rng: np.random.Generator,
    sparsity,
    powers,
    name: str = "16QAM",
    alpha=None,
) -> FrameTruth:
    """Draw supports and symbols for every cluster.

    ``sparsity`` is a per-cluster list of active-user counts; entries may be
    ``None`` when the matching ``alpha`` entry drives Bernoulli activity.
    """
    powers = np.asarray(powers, dtype=float)
    N = powers.size
    sparsity = list(sparsity) if sparsity is not None else [None] * N
    alpha = list(alpha) if alpha is not None else [None] * N
    supports, symbols = [], []
    for n in range(N):
        sup = draw_activity(Q, rng, s_o=sparsity[n], alpha=alpha[n])
        supports.append(sup)
        symbols.append(modulate(sup, Q, T, rng, name, powers[n]))
    return FrameTruth(supports, symbols, name.upper(), powers)
