"""Zadoff-Chu spreading signatures and equivalent (spread) channel matrices."""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

from .numerics import ContractError, DimensionError
from .scenario import ChannelSet


def zadoff_chu(K: int, beta: int, q: int = 0) -> np.ndarray:
    """Length-``K`` Zadoff-Chu sequence with root ``beta`` and shift ``q``."""
    if not 0 < beta < K or gcd(beta, K) != 1:
        raise ContractError(f"root {beta} must satisfy 0 < beta < {K} and be coprime to it")
    k = np.arange(K, dtype=float)
    if K % 2:
        phase = k * (k + 1 + 2 * q)
    else:
        phase = k * (k + 2 * q)
    # reduce modulo 2K before scaling to keep the phase argument small
    phase = np.mod(beta * phase, 2 * K)
    return np.exp(-1j * np.pi * phase / K)


def coprime_roots(K: int, count: int) -> list[int]:
    roots = [b for b in range(1, K) if gcd(b, K) == 1]
    if len(roots) < count:
        raise ContractError(f"only {len(roots)} roots coprime to {K}")
    return roots[:count]


@dataclass(frozen=True)
class SignatureSet:
    """Signatures shared by every cluster; row ``q`` is the signature of user ``q``."""

    signatures: np.ndarray  # (Q, K)
    roots: np.ndarray  # (Q,)
    shifts: np.ndarray  # (Q,)

    @property
    def K(self) -> int:
        return self.signatures.shape[1]

    @property
    def Q(self) -> int:
        return self.signatures.shape[0]


def assign_signatures(
    K: int,
    Q: int,
    rng: np.random.Generator,
    roots: list[int] | None = None,
) -> SignatureSet:
    """Randomly assign ``Q`` distinct ZC signatures.

    The shift index has period ``K``, so one root yields at most ``K`` distinct
    sequences. When ``Q > K`` further roots coprime to ``K`` are used, ``K``
    shifts each. ``roots`` overrides the default of the smallest coprime roots.
    """
    if roots is None:
        roots = coprime_roots(K, max(1, -(-Q // K)))
    if Q > K * len(roots):
        raise ContractError(f"{Q} users exceed the {K * len(roots)}-signature budget")
    plan = [(beta, shift) for beta in roots for shift in range(K)]
    pick = rng.permutation(len(plan))[:Q]
    chosen = [plan[i] for i in pick]
    sig = np.array([zadoff_chu(K, beta, shift) for beta, shift in chosen])
    return SignatureSet(
        sig,
        np.array([c[0] for c in chosen]),
        np.array([c[1] for c in chosen]),
    )


@dataclass(frozen=True)
class EquivalentChannel:
    """Spread channels; ``blocks[n, k]`` is the M x Q matrix of cluster n, subcarrier k."""

    blocks: np.ndarray  # (N, K, M, Q)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.blocks.shape

    def stacked(self, n: int) -> np.ndarray:
        """The ``KM x Q`` matrix of cluster ``n`` (subcarrier blocks stacked)."""
        _, K, M, Q = self.blocks.shape
        return self.blocks[n].reshape(K * M, Q)


def equivalent_channel(channels: ChannelSet, signatures: SignatureSet) -> EquivalentChannel:
    N, Q, K, M = channels.shape
    if signatures.signatures.shape != (Q, K):
        raise DimensionError(
            f"signatures {signatures.signatures.shape} do not match (Q, K) = {(Q, K)}"
        )
    # g[n, q, k, m] * s[q, k] -> blocks[n, k, m, q]
    spread = channels.gains * signatures.signatures[None, :, :, None]
    return EquivalentChannel(np.ascontiguousarray(spread.transpose(0, 2, 3, 1)))
