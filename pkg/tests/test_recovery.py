import itertools

import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from jabfsp import beamforming as bf
from jabfsp import numerics as nm
from jabfsp import recovery as rc
from jabfsp.scenario import average_steering
from jabfsp.spreading import EquivalentChannel
from jabfsp.transceiver import make_truth, noise_and_powers, superpose
from conftest import crandn, make_scene


def _measurement(rng, K=20, Q=40, T=7, s=4, noise=0.0):
    B = crandn(rng, K, Q)
    X = np.zeros((Q, T), dtype=complex)
    sup = np.sort(rng.choice(Q, s, replace=False))
    X[sup] = crandn(rng, s, T)
    Y = B @ X + (np.sqrt(noise) * crandn(rng, K, T) if noise else 0)
    return bf.Measurement(0, Y, B), X, sup


def test_find_top_examples():
    assert rc.find_top([3, 1, 2], 2).tolist() == [0, 2]
    assert rc.find_top([5, 5, 5, 5], 2).tolist() == [0, 1]
    with pytest.raises(nm.DimensionError):
        rc.find_top([1, 2], 3)


@given(st.lists(st.integers(0, 5), min_size=1, max_size=30), st.data())
def test_find_top_matches_sort(values, data):
    z = data.draw(st.integers(0, len(values)))
    ref = sorted(sorted(range(len(values)), key=lambda i: (-values[i], i))[:z])
    assert rc.find_top(np.array(values, float), z).tolist() == ref


def test_ls_on_support_exact_and_empty(rng):
    meas, X, sup = _measurement(rng)
    assert np.allclose(rc.ls_on_support(meas, sup), X, atol=1e-12)
    assert np.array_equal(rc.ls_on_support(meas, []), np.zeros_like(X))


def test_ls_on_support_matches_explicit_system(rng):
    meas, _, _ = _measurement(rng, noise=0.5)
    sup = np.array([1, 7, 9, 30, 33])
    X = rc.ls_on_support(meas, sup)
    T = meas.T
    D = meas.explicit_D()
    cols = np.concatenate([np.arange(q * T, (q + 1) * T) for q in sup])
    ref, *_ = np.linalg.lstsq(D[:, cols], meas.eta, rcond=None)
    assert np.abs(X[sup].reshape(-1) - ref).max() < 1e-10
    others = np.setdiff1d(np.arange(40), sup)
    assert np.all(X[others] == 0)


def test_ls_on_support_rank_error(rng):
    meas, _, _ = _measurement(rng)
    B = meas.B.copy()
    B[:, 5] = B[:, 3]
    with pytest.raises(nm.RankError):
        rc.ls_on_support(bf.Measurement(0, meas.Y, B), [3, 5])


def test_asp_warm_start_on_truth(rng):
    meas, X, sup = _measurement(rng)
    res = rc.asp(meas, sup, meas.Y, 4)
    assert res.support.tolist() == sup.tolist()
    assert res.residual_energy < 1e-20
    assert res.iterations <= 2
    assert np.allclose(res.X, X)


def test_asp_full_support_is_full_ls(rng):
    meas, _, _ = _measurement(rng, K=12, Q=6, T=3, s=2, noise=1.0)
    res = rc.asp(meas, [], meas.Y, 6)
    B = meas.B
    P = B @ np.linalg.pinv(B)
    assert np.allclose(res.residual, meas.Y - P @ meas.Y)


def test_asp_accepts_vector_residual(rng):
    meas, _, _ = _measurement(rng, noise=0.1)
    a = rc.asp(meas, [], meas.Y, 4)
    b = rc.asp(meas, [], meas.eta, 4)
    assert np.array_equal(a.X, b.X)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_asp_residual_non_increasing_in_iterations(seed):
    r = np.random.default_rng(seed)
    meas, _, _ = _measurement(r, noise=0.3)
    energies = [rc.asp(meas, [], meas.Y, 4, L1=l).residual_energy for l in range(1, 8)]
    assert all(b <= a for a, b in zip(energies, energies[1:]))
    assert energies[0] < np.vdot(meas.Y, meas.Y).real


def test_asp_noiseless_brute_force_small(rng):
    for _ in range(30):
        meas, _, sup = _measurement(rng, K=20, Q=8, T=2, s=2)
        res = rc.asp(meas, [], meas.Y, 2)
        assert res.support.tolist() == sup.tolist()
        best = min(
            itertools.combinations(range(8), 2),
            key=lambda c: np.linalg.norm(meas.Y - meas.apply(rc.ls_on_support(meas, list(c)))),
        )
        assert res.support.tolist() == list(best)


def test_tpr_examples():
    X = np.zeros((4, 2), dtype=complex)
    X[1] = [2, 0]
    X[3] = [1, 0]
    assert rc.tpr(X, [1]) == 1.0
    assert rc.tpr(X, [1, 3]) == 4.0
    assert rc.tpr(X, [0, 1]) == np.inf
    assert rc.tpr(X, []) == np.inf


def _state(tprs, eps):
    st_ = rc.SparsitySearchState()
    for s, (g, e) in enumerate(zip(tprs, eps), start=1):
        st_.add(rc.SparsityRecord(s, e, np.arange(s), None, g, None))
    return st_


def test_decide_sparsity_examples():
    assert rc.decide_sparsity(_state([1.2, 1.1, 8.0], [9, 4, 1]), 3.0) == (2, False)
    assert rc.decide_sparsity(_state([1, 1, 1, 1], [5, 4, 3, 2]), 3.0) == (4, False)
    assert rc.decide_sparsity(_state([9, 9, 9], [3, 1, 2]), 3.0) == (2, True)
    assert rc.decide_sparsity(_state([1, 1], [2, 2]), 3.0) == (1, False)


def _frame(seed, N=3, M=5, snr=2.0, s_o=4, T=7):
    r = np.random.default_rng(seed)
    ch, _, eq = make_scene(r, M=M, N=N)
    nv, pw = noise_and_powers([snr] * N)
    truth = make_truth(40, T, r, [s_o] * N, pw)
    Y = superpose(eq, truth.symbols) + (np.sqrt(nv / 2) * (r.standard_normal((eq.shape[1] * M, T))
                                                           + 1j * r.standard_normal((eq.shape[1] * M, T))))
    return ch, eq, truth, Y, nv


def test_jabfsp_output_contract():
    ch, eq, truth, Y, nv = _frame(0)
    cfg = rc.ReceiverConfig()
    res = rc.jabfsp(Y, eq, average_steering(ch), cfg, nv)
    for r in res:
        assert r.sparsity == r.support.size <= cfg.sparsity_bound(40) == 8
        outside = np.setdiff1d(np.arange(40), r.support)
        assert np.all(r.X[outside] == 0)
        assert r.weight.constraint_error < 1e-10
        assert sorted(r.search.records) == list(range(1, 9))
    again = rc.jabfsp(Y, eq, average_steering(ch), cfg, nv)
    for a, b in zip(res, again):
        assert np.array_equal(a.X, b.X)


def test_jabfsp_all_hypotheses_failed():
    r = np.random.default_rng(0)
    ch, _, eq = make_scene(r, N=1, Q=10, K=6, M=3)
    dead = EquivalentChannel(np.zeros_like(eq.blocks))
    Y = crandn(r, 18, 3)
    out = rc.jabfsp(Y, dead, average_steering(ch), rc.ReceiverConfig(s_max=3), 1.0)[0]
    assert out.failed and out.support.size == 0 and np.all(out.X == 0)


def test_jabfsp_single_cluster_reduction():
    agree = 0
    for seed in range(40):
        ch, eq, truth, Y, nv = _frame(seed, N=1, snr=5.0)
        abar = average_steering(ch)
        a = rc.jabfsp(Y, eq, abar, rc.ReceiverConfig(), nv)[0]
        b = rc.jabfsp(Y, eq, abar, rc.ReceiverConfig(adaptive=False), nv)[0]
        agree += a.support.tolist() == b.support.tolist()
    assert agree >= 38


def test_ic_fixed_point_on_truth():
    ch, eq, truth, _, _ = _frame(3)
    Y = superpose(eq, truth.symbols)
    abar = average_steering(ch)
    cfg = rc.ReceiverConfig(adaptive=False)
    weights = rc.initial_weights(eq, abar, cfg)
    init = [rc.RecoveryResult(n, truth.supports[n], truth.symbols[n].copy(), 0.0, weights[n], 4)
            for n in range(3)]
    out = rc.jabfsp_ic(Y, eq, abar, init, cfg)
    for n in range(3):
        assert np.allclose(out[n], truth.symbols[n], atol=1e-10)


def test_ic_single_cluster_runs_and_keeps_support():
    ch, eq, truth, Y, nv = _frame(4, N=1)
    abar = average_steering(ch)
    init = rc.jabfsp(Y, eq, abar, rc.ReceiverConfig(), nv)
    X = rc.jabfsp_ic(Y, eq, abar, init, rc.ReceiverConfig(), nv)[0]
    outside = np.setdiff1d(np.arange(40), init[0].support)
    assert np.all(X[outside] == 0)


def _error_analysis_setup(rng, extra):
    meas, X, sup = _measurement(rng)
    false = np.setdiff1d(np.arange(40), sup)[:extra]
    return meas, X, sup, false


def test_exact_support_zero_ipnc(rng):
    meas, X, sup, _ = _error_analysis_setup(rng, 0)
    assert np.allclose(rc.ls_on_support(meas, sup), X, atol=1e-12)


def test_superset_support_zero_ipnc(rng):
    meas, X, sup, false = _error_analysis_setup(rng, 3)
    Xh = rc.ls_on_support(meas, np.union1d(sup, false))
    assert np.allclose(Xh[sup], X[sup], atol=1e-10)
    assert np.abs(Xh[false]).max() < 1e-10


def test_false_block_pinv_unit_gain(rng):
    meas, X, sup, false = _error_analysis_setup(rng, 3)
    D = meas.explicit_D()
    T = meas.T

    def cols(idx):
        return D[:, np.concatenate([np.arange(q * T, (q + 1) * T) for q in idx])]

    parts = nm.block_pinv_parts(cols(sup), cols(false))
    Wh = parts["W"].conj().T
    assert np.abs(Wh @ cols(false) - np.eye(false.size * T)).max() < 1e-9


def test_baseline_zero_noise_exact_and_matches_asp():
    r = np.random.default_rng(9)
    _, _, eq = make_scene(r, N=1)
    truth = make_truth(40, 7, r, [4], [1.0])
    Y = superpose(eq, truth.symbols)
    res = rc.oracle_blocksp_baseline(Y, eq, 0, 4)
    assert res.support.tolist() == truth.supports[0].tolist()
    assert np.allclose(res.X, truth.symbols[0], atol=1e-9)
    meas = rc.single_antenna_measurement(Y, eq, 0)
    ref = rc.asp(meas, [], meas.Y, 4)
    assert np.array_equal(ref.X, res.X)


def test_baseline_loses_to_jabfsp_under_interference():
    worse = 0
    for seed in range(20):
        ch, eq, truth, Y, nv = _frame(seed)
        res = rc.jabfsp(Y, eq, average_steering(ch), rc.ReceiverConfig(), nv)
        for n in range(3):
            base = rc.oracle_blocksp_baseline(Y, eq, n, 4)
            d_base = len(set(base.support) ^ set(truth.supports[n]))
            d_ours = len(set(res[n].support) ^ set(truth.supports[n]))
            worse += d_base >= d_ours
    assert worse == 60
