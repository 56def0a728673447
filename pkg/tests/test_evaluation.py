import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jabfsp.evaluation import cli
from jabfsp.evaluation.config import ConfigError, ExperimentConfig, SystemConfig, parse_config, load_config
from jabfsp.evaluation.harness import (
    CSV_HEADER,
    Row,
    aggregate,
    emit_csv,
    format_csv,
    parse_csv,
    read_csv,
    run_sweep,
    run_trial,
    run_trials,
    trial_streams,
)
from jabfsp.evaluation.metrics import compute_der, compute_ser
from jabfsp.transceiver import constellation

SMALL = SystemConfig(M=3, N=2, Q=16, K=8, T=3, centers_deg=(-25.0, 20.0))


def small(**kw):
    base = dict(system=SMALL, sparsity=(2,), receivers=("jabfsp", "jabfsp-ic"), trials=4, seed=3)
    base.update(kw)
    return ExperimentConfig(**base).validate()


def test_der_examples():
    assert compute_der([1, 2], [1, 2], 40) == (0.0, 0, 0)
    assert compute_der([1, 3], [1, 2], 40) == (0.05, 1, 1)
    assert compute_der([], [0, 1, 2, 3], 40) == (0.1, 0, 4)


def test_ser_examples():
    pts = constellation("16QAM")
    X = np.zeros((40, 7), dtype=complex)
    X[[2, 9]] = pts[np.arange(14).reshape(2, 7)]
    assert compute_ser(X, X, [2, 9], [2, 9], "16QAM", 40, 7) == (0.0, 0)
    Xh = X.copy()
    Xh[9, 3] = -Xh[9, 3]
    assert compute_ser(Xh, X, [2, 9], [2, 9], "16QAM", 40, 7) == (pytest.approx(1 / 280), 1)
    with pytest.raises(ValueError):
        compute_ser(X, X, [2], [2], "8PSK", 40, 7)


@settings(max_examples=50)
@given(st.sets(st.integers(0, 39), max_size=8), st.sets(st.integers(0, 39), max_size=8), st.integers(0, 2**31))
def test_ser_at_least_der(est, truth, seed):
    r = np.random.default_rng(seed)
    X = np.zeros((40, 7), dtype=complex)
    Xh = np.zeros((40, 7), dtype=complex)
    pts = constellation("16QAM")
    X[list(truth)] = pts[r.integers(0, 16, (len(truth), 7))]
    Xh[list(est)] = pts[r.integers(0, 16, (len(est), 7))]
    p_d, f, m = compute_der(sorted(est), sorted(truth), 40)
    p_s, _ = compute_ser(Xh, X, sorted(est), sorted(truth), "16QAM", 40, 7)
    assert p_s >= p_d
    assert 0 <= f <= 40 - len(truth) and 0 <= m <= len(truth)


def test_config_parse_and_overrides(tmp_path):
    text = """
[system]
antennas = 4
clusters = 3
cluster_centers_deg = -30, -10, 10
[signal]
snr_db = 2, 5, 3
sparsity = 5, 4, 6
[receiver]
receivers = jabfsp, oracle-bsasp
s_max = 8
loading = trace
[sweep]
param = antennas
values = 4, 5, 6
[run]
trials = 7
seed = 11
"""
    cfg = parse_config(text)
    assert cfg.system.M == 4 and cfg.cluster_snr_db == (2.0, 5.0, 3.0)
    assert cfg.cluster_sparsity == (5, 4, 6)
    assert cfg.receiver.s_max == 8 and cfg.receiver.loading == "trace"
    assert cfg.at("antennas", 6).system.M == 6
    path = tmp_path / "c.ini"
    path.write_text(text)
    assert load_config(path) == cfg


@pytest.mark.parametrize("text", [
    "[system]\nantennas = 0\n",
    "[signal]\nsnr_db = 1, 2\n",
    "[sweep]\nparam = snr\nvalues = 2, 1\n",
    "[sweep]\nparam = colour\nvalues = 1\n",
    "[receiver]\nreceivers = magic\n",
    "[bogus]\nx = 1\n",
    "[system]\nantennas = many\n",
    "[signal]\nsparsity = 50\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_bundled_configs_load():
    import pathlib
    for path in sorted(pathlib.Path(__file__).parent.parent.joinpath("configs").glob("*.ini")):
        load_config(path)


def test_trial_streams_independent_of_order():
    a = trial_streams(5, 3)["noise"].random(4)
    trial_streams(5, 2)
    b = trial_streams(5, 3)["noise"].random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, trial_streams(5, 4)["noise"].random(4))


def test_run_trial_deterministic():
    cfg = small()
    a, b = run_trial(cfg, 2), run_trial(cfg, 2)
    assert a.metrics == b.metrics


def test_noiseless_single_cluster_exact():
    # constant-modulus symbols keep the true temporal power ratio at exactly 1
    cfg = small(system=SystemConfig(M=5, N=1, Q=40, K=20, T=7, centers_deg=(0.0,)), sparsity=(4,),
                snr_db=(300.0,), constellation="QPSK")
    for t in range(5):
        m = run_trial(cfg, t).metrics
        assert all(x.der == 0 and x.ser == 0 for v in m.values() for x in v)


def test_single_antenna_single_cluster_matches_oracle():
    cfg = small(system=replace(SMALL, M=1, N=1, K=12, centers_deg=(0.0,)), snr_db=(12.0,),
                receivers=("jabfsp", "oracle-bsasp"), trials=20)
    same = 0
    for t in range(cfg.trials):
        m = run_trial(cfg, t).metrics
        same += m["jabfsp"] == m["oracle-bsasp"]
    assert same >= 18


def test_trials_one_equals_run_trial():
    cfg = small(trials=1)
    rows = run_sweep(cfg)
    m = run_trial(cfg, 0).metrics
    for row in rows:
        if row.cluster == "avg":
            continue
        got = m[row.receiver][int(row.cluster) - 1]
        assert row.der == pytest.approx(got.der, rel=1e-9, abs=0)
        assert row.ser == pytest.approx(got.ser, rel=1e-9, abs=0)
        assert row.f_mean == got.false_detections and row.m_mean == got.missed_detections


def test_unbalanced_arity():
    cfg = small(system=replace(SMALL, N=3, centers_deg=(-30.0, -10.0, 10.0)), sparsity=(3, 2, 4),
                snr_db=(2.0, 5.0, 3.0), trials=2)
    rows = run_sweep(cfg)
    for name in cfg.receivers:
        assert sorted(r.cluster for r in rows if r.receiver == name) == ["1", "2", "3", "avg"]
    assert all(len(v) == 3 for v in run_trial(cfg, 0).metrics.values())


def test_aggregation_order_invariant():
    cfg = small(trials=6)
    res = run_trials(cfg)
    assert aggregate(cfg, res, None, 0.0) == aggregate(cfg, res[::-1], None, 0.0)


def test_threads_bit_identical():
    cfg = small(trials=6, sweep_param="snr", sweep_values=(0.0, 4.0))
    assert format_csv(run_sweep(cfg, threads=1)) == format_csv(run_sweep(cfg, threads=3))


def test_csv_contract(tmp_path):
    assert format_csv([]) == ",".join(CSV_HEADER) + "\n"
    rows = run_sweep(small(trials=3))
    path = emit_csv(rows, tmp_path / "out.csv")
    text = path.read_text(encoding="utf-8")
    assert all(len(line.split(",")) == 10 for line in text.splitlines())
    assert read_csv(path) == rows
    with pytest.raises(OSError):
        emit_csv(rows, tmp_path / "missing" / "x.csv")


row_values = st.floats(0, 1, allow_nan=False).map(lambda x: float(f"{x:.10g}"))


@given(st.lists(st.tuples(st.sampled_from(["snr", "antennas"]), row_values, st.sampled_from(["jabfsp", "sbf-asp"]),
                          st.sampled_from(["1", "2", "avg"]), row_values, row_values, row_values, row_values,
                          st.integers(1, 10**6), st.integers(0, 2**31)), max_size=12))
def test_csv_round_trip(recs):
    rows = sorted((Row(*r) for r in recs), key=Row.key)
    assert parse_csv(format_csv(rows)) == rows


def test_cli_run_and_errors(tmp_path, capsys):
    cfgfile = tmp_path / "c.ini"
    cfgfile.write_text("[system]\nantennas = 3\nclusters = 2\nusers_per_cluster = 16\nsubcarriers = 8\n"
                       "slots = 3\ncluster_centers_deg = -25, 20\n[signal]\nsparsity = 2\n"
                       "[sweep]\nparam = snr\nvalues = 0, 3\n")
    out = tmp_path / "o.csv"
    assert cli.main(["sweep", "--config", str(cfgfile), "--out", str(out), "--trials", "2",
                     "--seed", "4", "--receiver", "jabfsp", "--threads", "1"]) == 0
    rows = read_csv(out)
    assert {r.sweep_value for r in rows} == {0.0, 3.0} and {r.seed for r in rows} == {4}
    assert cli.main(["run", "--config", str(cfgfile), "--trials", "1", "--receiver", "sbf-asp"]) == 0
    assert capsys.readouterr().out.startswith(",".join(CSV_HEADER))
    assert cli.main(["sweep", "--trials", "1"]) != 0
    assert cli.main(["run", "--config", str(tmp_path / "nope.ini")]) != 0
    assert cli.main(["run", "--threads", "0"]) != 0
    assert "error" in capsys.readouterr().err


def test_cli_entry_point_selftest():
    proc = subprocess.run([sys.executable, "-m", "jabfsp.evaluation.cli", "selftest", "--trials", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert proc.stdout.count("PASS") == 7
