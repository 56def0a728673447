"""Detection and symbol error rates per cluster."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..transceiver import demodulate


@dataclass(frozen=True)
class Metrics:
    der: float
    ser: float
    false_detections: int
    missed_detections: int
    symbol_errors: int


def compute_der(est, truth, Q: int) -> tuple[float, int, int]:
    """``((f + m) / Q, f, m)`` for estimated and true active sets."""
    est = set(np.asarray(est, dtype=int).tolist())
    truth = set(np.asarray(truth, dtype=int).tolist())
    f = len(est - truth)
    m = len(truth - est)
    return (f + m) / Q, f, m


def compute_ser(
    Xhat,
    Xtrue,
    est,
    truth,
    constellation: str,
    Q: int,
    T: int,
    power: float = 1.0,
) -> tuple[float, int]:
    """``(p_d + S_e / (Q T), S_e)`` with symbol errors counted on detected actives."""
    p_d, _, _ = compute_der(est, truth, Q)
    hits = sorted(set(np.asarray(est, dtype=int).tolist()) & set(np.asarray(truth, dtype=int).tolist()))
    if not hits:
        return p_d, 0
    Xhat = np.asarray(Xhat)
    Xtrue = np.asarray(Xtrue)
    got = demodulate(Xhat[hits], constellation, power)
    ref = demodulate(Xtrue[hits], constellation, power)
    errors = int(np.count_nonzero(got != ref))
    return p_d + errors / (Q * T), errors


def score(Xhat, support, Xtrue, truth, constellation: str, power: float = 1.0) -> Metrics:
    Q, T = Xtrue.shape
    p_d, f, m = compute_der(support, truth, Q)
    p_s, se = compute_ser(Xhat, Xtrue, support, truth, constellation, Q, T, power)
    return Metrics(p_d, p_s, f, m, se)
