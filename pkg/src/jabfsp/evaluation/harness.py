"""Monte Carlo trials, sweeps and CSV output.

Every trial draws its randomness from ``SeedSequence(seed, spawn_key=(trial,))``
split into one named child stream per concern. The sweep point is not mixed
into the seed, so trial ``i`` sees the same users, channels, signatures and
symbols at every sweep value; only the swept quantity changes. Results are a
function of ``(seed, trial)`` alone, so the number of workers cannot change
them.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import recovery as rc
from ..scenario import (
    average_steering,
    cluster_angles,
    complex_normal,
    make_geometry,
    perturb_csi,
    sample_channels,
)
from ..spreading import equivalent_channel, assign_signatures
from ..transceiver import make_truth, noise_and_powers, superpose
from .config import ExperimentConfig
from .metrics import Metrics, score

STREAMS = ("geometry", "fading", "signatures", "truth", "noise", "csi")

CSV_HEADER = (
    "sweep_param",
    "sweep_value",
    "receiver",
    "cluster",
    "der",
    "ser",
    "f_mean",
    "m_mean",
    "trials",
    "seed",
)


def trial_streams(seed: int, trial: int) -> dict[str, np.random.Generator]:
    root = np.random.SeedSequence(seed, spawn_key=(trial,))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, root.spawn(len(STREAMS)))}


@dataclass
class TrialResult:
    trial: int
    metrics: dict[str, list[Metrics]]
    recovery: list[rc.RecoveryResult] = field(default_factory=list)


def _receiver_cfg(base: rc.ReceiverConfig, name: str) -> rc.ReceiverConfig:
    if name.startswith("jabfsp"):
        return base
    if name.startswith("sbf-asp"):
        return replace(base, adaptive=False, initial_beam="sbf")
    if name.startswith("zfbf-asp"):
        return replace(base, adaptive=False, initial_beam="zf")
    raise ValueError(name)


def run_trial(cfg: ExperimentConfig, trial: int) -> TrialResult:
    """One generate, receive and score pass for trial index ``trial``."""
    s = cfg.system
    rngs = trial_streams(cfg.seed, trial)

    theta = cluster_angles(s.centers_deg, s.Q, s.width_deg, rngs["geometry"])
    channels = sample_channels(make_geometry(theta), s.K, s.M, rngs["fading"], s.spacing_ratio)
    sigs = assign_signatures(s.K, s.Q, rngs["signatures"])
    eqch = equivalent_channel(channels, sigs)

    noise_power, powers = noise_and_powers(cfg.cluster_snr_db)
    truth = make_truth(s.Q, s.T, rngs["truth"], cfg.cluster_sparsity, powers,
                       cfg.constellation, cfg.cluster_activity)
    V = complex_normal(rngs["noise"], (s.K * s.M, s.T), noise_power)
    Y = superpose(eqch, truth.symbols) + V

    # the receiver only sees its own (possibly perturbed) copy of the channels
    rx_channels = perturb_csi(channels, cfg.csi_error, rngs["csi"])
    rx_eqch = eqch if rx_channels is channels else equivalent_channel(rx_channels, sigs)
    abar = average_steering(rx_channels)

    metrics: dict[str, list[Metrics]] = {}
    primary: list[rc.RecoveryResult] = []
    cache: dict[str, list[rc.RecoveryResult]] = {}

    def scored(X_list, supports):
        return [
            score(X_list[n], supports[n], truth.symbols[n], truth.supports[n], truth.constellation, powers[n])
            for n in range(s.N)
        ]

    for name in cfg.receivers:
        if name == "oracle-bsasp":
            out = []
            for n in range(s.N):
                Yn = eqch.stacked(n) @ truth.symbols[n] + V
                res = rc.oracle_blocksp_baseline(Yn, rx_eqch, n, len(truth.supports[n]), L1=cfg.receiver.L1)
                out.append(score(res.X, res.support, truth.symbols[n], truth.supports[n],
                                 truth.constellation, powers[n]))
            metrics[name] = out
            continue
        base = name.removesuffix("-ic")
        rcfg = _receiver_cfg(cfg.receiver, base)
        if base not in cache:
            cache[base] = rc.jabfsp(Y, rx_eqch, abar, rcfg, noise_power=noise_power)
        res = cache[base]
        supports = [r.support for r in res]
        if name.endswith("-ic"):
            X_list = rc.jabfsp_ic(Y, rx_eqch, abar, res, rcfg, noise_power=noise_power)
        else:
            X_list = [r.X for r in res]
        metrics[name] = scored(X_list, supports)
        if not primary:
            primary = res
    return TrialResult(trial, metrics, primary)


def _run_block(cfg: ExperimentConfig, trials: list[int]) -> list[TrialResult]:
    out = []
    for t in trials:
        r = run_trial(cfg, t)
        r.recovery = []  # keep worker payloads small
        out.append(r)
    return out


def run_trials(cfg: ExperimentConfig, threads: int = 1) -> list[TrialResult]:
    """All ``cfg.trials`` trials, ordered by trial index."""
    idx = list(range(cfg.trials))
    if threads <= 1 or cfg.trials == 1:
        return _run_block(cfg, idx)
    chunks = [idx[i::threads] for i in range(threads) if idx[i::threads]]
    results: list[TrialResult] = []
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        for part in pool.map(_run_block, [cfg] * len(chunks), chunks):
            results.extend(part)
    return sorted(results, key=lambda r: r.trial)


@dataclass(frozen=True)
class Row:
    sweep_param: str
    sweep_value: float
    receiver: str
    cluster: str
    der: float
    ser: float
    f_mean: float
    m_mean: float
    trials: int
    seed: int

    def key(self):
        c = (1, 0) if self.cluster == "avg" else (0, int(self.cluster))
        return (self.sweep_param, self.sweep_value, self.receiver, c)


def _sig10(x: float) -> float:
    return float(f"{x:.10g}")


def aggregate(cfg: ExperimentConfig, results: list[TrialResult], param: str | None, value: float) -> list[Row]:
    """Per-cluster and cluster-averaged rows; sums run in trial order."""
    results = sorted(results, key=lambda r: r.trial)
    n_trials = len(results)
    rows = []
    label = param or "none"
    for name in cfg.receivers:
        N = len(results[0].metrics[name])
        acc = np.zeros((N, 4))
        for r in results:
            for n, m in enumerate(r.metrics[name]):
                acc[n] += (m.der, m.ser, m.false_detections, m.missed_detections)
        acc /= n_trials
        per = [acc[n] for n in range(N)] + [acc.mean(axis=0)]
        for n, v in enumerate(per):
            cluster = "avg" if n == N else str(n + 1)
            rows.append(Row(label, _sig10(value), name, cluster, *(_sig10(x) for x in v), n_trials, cfg.seed))
    return sorted(rows, key=Row.key)


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> list[Row]:
    """Rows for every sweep value (or the single configured point)."""
    cfg.validate()
    points = cfg.sweep_values if cfg.sweep_param else (0.0,)
    rows: list[Row] = []
    for value in points:
        point = cfg.at(cfg.sweep_param, value).validate()
        rows.extend(aggregate(point, run_trials(point, threads), cfg.sweep_param, value))
    return sorted(rows, key=Row.key)


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(rows, key=Row.key):
        w.writerow([
            r.sweep_param,
            f"{r.sweep_value:.10g}",
            r.receiver,
            r.cluster,
            *(f"{x:.10g}" for x in (r.der, r.ser, r.f_mean, r.m_mean)),
            r.trials,
            r.seed,
        ])
    return buf.getvalue()


def emit_csv(rows, path) -> Path:
    path = Path(path)
    try:
        path.write_text(format_csv(rows), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def parse_csv(text: str) -> list[Row]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        if len(rec) != len(CSV_HEADER):
            raise ValueError(f"row has {len(rec)} columns")
        rows.append(Row(rec[0], float(rec[1]), rec[2], rec[3], *(float(x) for x in rec[4:8]),
                        int(rec[8]), int(rec[9])))
    return rows


def read_csv(path) -> list[Row]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


def mean_metric(rows, receiver: str, field_name: str, value=None, cluster: str = "avg") -> float:
    hits = [getattr(r, field_name) for r in rows
            if r.receiver == receiver and r.cluster == cluster and (value is None or r.sweep_value == value)]
    if len(hits) != 1:
        return math.nan
    return hits[0]
