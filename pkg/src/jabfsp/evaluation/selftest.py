"""Quick invariant suite behind ``jabfsp selftest``.

Each check prints one PASS/FAIL line; the suite takes a few seconds.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .. import beamforming as bf
from .. import kernels
from .. import numerics as nm
from .. import recovery as rc
from ..scenario import cluster_angles, complex_normal, make_geometry, sample_channels
from ..spreading import assign_signatures, equivalent_channel, zadoff_chu
from ..transceiver import make_truth, superpose
from .config import ExperimentConfig, SystemConfig
from .harness import format_csv, parse_csv, run_sweep


def _block_pinv(rng):
    A = complex_normal(rng, (30, 5))
    B = complex_normal(rng, (30, 4))
    top, bottom = nm.block_pinv(A, B)
    ref = nm.pinv_full_col(np.hstack([A, B]))
    return np.abs(np.vstack([top, bottom]) - ref).max() < 1e-9


def _vec_roundtrip(rng):
    X = complex_normal(rng, (6, 7))
    return np.array_equal(nm.unvec(nm.vec(X), X.shape[0]), X)


def _zc_unit_modulus(rng):
    return all(np.allclose(np.abs(zadoff_chu(K, 1, q)), 1) for K in (19, 20) for q in range(3))


def _scene(rng, M=5, N=3, Q=40, K=20, T=7):
    theta = cluster_angles(np.linspace(-30, 10, N), Q, 5.0, rng)
    ch = sample_channels(make_geometry(theta), K, M, rng)
    eq = equivalent_channel(ch, assign_signatures(K, Q, rng))
    return ch, eq


def _beam_constraint(rng):
    _, eq = _scene(rng)
    abar = complex_normal(rng, (3, 5))
    ws = [bf.sbf_weight(eq, n, abar[n]) for n in range(3)] + bf.zf_weights(abar)
    return max(w.constraint_error for w in ws) < nm.TOL.constraint


def _noiseless_recovery(rng):
    _, eq = _scene(rng, N=1)
    truth = make_truth(40, 7, rng, [4], [1.0])
    Y = superpose(eq, truth.symbols)
    res = rc.oracle_blocksp_baseline(Y, eq, 0, 4)
    X = truth.symbols[0]
    return set(res.support.tolist()) == set(truth.supports[0].tolist()) and \
        np.linalg.norm(res.X - X) <= 1e-8 * np.linalg.norm(X)


def _backends_agree(rng):
    impls = kernels.backends()
    if len(impls) < 2:
        return True
    B = complex_normal(rng, (20, 40))
    Y = complex_normal(rng, (20, 7))
    e = [m.block_energies(B, Y) for m in impls.values()]
    return np.allclose(e[0], e[1], rtol=1e-10)


def _csv_determinism(rng, trials):
    cfg = ExperimentConfig(system=SystemConfig(M=3, N=2, Q=16, K=8, T=3, centers_deg=(-20.0, 20.0)),
                           sparsity=(2,), receivers=("jabfsp",), trials=trials, seed=int(rng.integers(1 << 31)))
    a = format_csv(run_sweep(cfg, threads=1))
    b = format_csv(run_sweep(replace(cfg, threads=2), threads=2))
    return a == b and format_csv(parse_csv(a)) == a


def run_selftest(seed: int = 0, trials: int = 20) -> bool:
    rng = np.random.default_rng(seed)
    checks = [
        ("block pseudo-inverse matches direct", lambda: _block_pinv(rng)),
        ("vec/unvec round trip", lambda: _vec_roundtrip(rng)),
        ("Zadoff-Chu unit modulus", lambda: _zc_unit_modulus(rng)),
        ("beam weights meet the distortionless constraint", lambda: _beam_constraint(rng)),
        ("noiseless known-sparsity recovery is exact", lambda: _noiseless_recovery(rng)),
        (f"kernel backends agree ({kernels.BACKEND} active)", lambda: _backends_agree(rng)),
        ("sweep CSV identical across worker counts", lambda: _csv_determinism(rng, trials)),
    ]
    ok = True
    for name, fn in checks:
        try:
            passed = bool(fn())
        except Exception as exc:  # report and keep going
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
