"""Experiment configuration: dataclasses plus an INI-style file loader.

A config file has the sections ``[system]``, ``[signal]``, ``[receiver]``,
``[sweep]`` and ``[run]``; every key is optional and list values are comma
separated. See ``configs/`` for complete examples.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..recovery import ReceiverConfig
from ..transceiver import CONSTELLATIONS

RECEIVERS = (
    "jabfsp",
    "jabfsp-ic",
    "sbf-asp",
    "sbf-asp-ic",
    "zfbf-asp",
    "zfbf-asp-ic",
    "oracle-bsasp",
)

SWEEP_PARAMS = ("snr", "slots", "antennas", "subcarriers", "csi_error", "esnr", "sparsity")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SystemConfig:
    M: int = 5
    N: int = 3
    Q: int = 40
    K: int = 20
    T: int = 7
    spacing_ratio: float = 0.5
    centers_deg: tuple[float, ...] = (-30.0, -10.0, 10.0)
    width_deg: float = 5.0


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    snr_db: tuple[float, ...] = (2.0,)
    sparsity: tuple[int, ...] | None = (4,)
    activity_rate: tuple[float, ...] | None = None
    constellation: str = "16QAM"
    csi_error: float = 0.0
    receivers: tuple[str, ...] = ("jabfsp", "jabfsp-ic")
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = ()
    trials: int = 100
    seed: int = 1
    threads: int = 1

    def per_cluster(self, values, name: str):
        if values is None:
            return None
        values = tuple(values)
        N = self.system.N
        if len(values) == 1:
            return values * N
        if len(values) != N:
            raise ConfigError(f"{name} has {len(values)} entries for {N} clusters")
        return values

    @property
    def cluster_snr_db(self) -> tuple[float, ...]:
        return self.per_cluster(self.snr_db, "snr_db")

    @property
    def cluster_sparsity(self):
        return self.per_cluster(self.sparsity, "sparsity")

    @property
    def cluster_activity(self):
        return self.per_cluster(self.activity_rate, "activity_rate")

    def validate(self) -> "ExperimentConfig":
        s = self.system
        for name in ("M", "N", "Q", "K", "T"):
            if getattr(s, name) <= 0:
                raise ConfigError(f"system.{name} must be positive")
        if len(s.centers_deg) != s.N:
            raise ConfigError(f"{len(s.centers_deg)} cluster centres for N={s.N}")
        if self.trials <= 0:
            raise ConfigError("trials must be positive")
        if self.constellation.upper() not in CONSTELLATIONS:
            raise ConfigError(f"unknown constellation {self.constellation!r}")
        self.cluster_snr_db
        sp = self.cluster_sparsity
        if sp is None and self.cluster_activity is None:
            raise ConfigError("either sparsity or activity_rate is required")
        if sp is not None and any(not 0 <= x <= s.Q for x in sp):
            raise ConfigError(f"sparsity {sp} outside [0, {s.Q}]")
        for r in self.receivers:
            if r not in RECEIVERS:
                raise ConfigError(f"unknown receiver {r!r}; choose from {RECEIVERS}")
        if self.sweep_param is not None:
            if self.sweep_param not in SWEEP_PARAMS:
                raise ConfigError(f"unknown sweep parameter {self.sweep_param!r}")
            v = self.sweep_values
            if not v or any(b <= a for a, b in zip(v, v[1:])):
                raise ConfigError("sweep values must be non-empty and strictly increasing")
        if self.csi_error < 0:
            raise ConfigError("csi_error must be non-negative")
        return self

    def at(self, param: str | None, value) -> "ExperimentConfig":
        """Copy with one sweep parameter set to ``value``."""
        if param is None:
            return self
        if param == "snr":
            return replace(self, snr_db=(float(value),))
        if param == "slots":
            return replace(self, system=replace(self.system, T=int(value)))
        if param == "antennas":
            return replace(self, system=replace(self.system, M=int(value)))
        if param == "subcarriers":
            return replace(self, system=replace(self.system, K=int(value)))
        if param == "csi_error":
            return replace(self, csi_error=float(value))
        if param == "esnr":
            return replace(self, receiver=replace(self.receiver, esnr_db=float(value)))
        if param == "sparsity":
            return replace(self, sparsity=(int(value),))
        raise ConfigError(f"unknown sweep parameter {param!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(";", ",").split(",") if x.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(x.strip().lower() for x in text.split(",") if x.strip())


_SYSTEM_KEYS = {
    "antennas": ("M", int),
    "clusters": ("N", int),
    "users_per_cluster": ("Q", int),
    "subcarriers": ("K", int),
    "slots": ("T", int),
    "spacing_ratio": ("spacing_ratio", float),
    "cluster_centers_deg": ("centers_deg", _floats),
    "cluster_width_deg": ("width_deg", float),
}

_RECEIVER_KEYS = {
    "s_max": int,
    "theta1": float,
    "l1": int,
    "l2": int,
    "l3": int,
    "max_beam_updates": int,
    "tpr_threshold": float,
    "esnr_db": float,
    "alpha": float,
}


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    known = {"system", "signal", "receiver", "sweep", "run"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    try:
        return _build(parser).validate()
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _build(p: configparser.ConfigParser) -> ExperimentConfig:
    sys_kw = {}
    if p.has_section("system"):
        for key, raw in p.items("system"):
            if key not in _SYSTEM_KEYS:
                raise ConfigError(f"unknown key system.{key}")
            name, conv = _SYSTEM_KEYS[key]
            sys_kw[name] = conv(raw)
    system = SystemConfig(**sys_kw)

    kw: dict = {"system": system}
    if p.has_section("signal"):
        sig = p["signal"]
        for key in sig:
            if key not in ("snr_db", "sparsity", "activity_rate", "constellation", "csi_error_percent"):
                raise ConfigError(f"unknown key signal.{key}")
        if "snr_db" in sig:
            kw["snr_db"] = _floats(sig["snr_db"])
        if "activity_rate" in sig and sig["activity_rate"].strip():
            kw["activity_rate"] = _floats(sig["activity_rate"])
            kw["sparsity"] = None
        if "sparsity" in sig and sig["sparsity"].strip():
            kw["sparsity"] = _ints(sig["sparsity"])
        if "constellation" in sig:
            kw["constellation"] = sig["constellation"].strip().upper()
        if "csi_error_percent" in sig:
            kw["csi_error"] = float(sig["csi_error_percent"])

    rcv_kw = {}
    if p.has_section("receiver"):
        for key, raw in p.items("receiver"):
            if key == "receivers":
                kw["receivers"] = _names(raw)
            elif key == "loading":
                raw = raw.strip().lower()
                rcv_kw["loading"] = raw if raw in ("auto", "trace") else float(raw)
            elif key == "s_max" and raw.strip().lower() == "auto":
                rcv_kw["s_max"] = None
            elif key in _RECEIVER_KEYS:
                name = {"l1": "L1", "l2": "L2", "l3": "L3"}.get(key, key)
                rcv_kw[name] = _RECEIVER_KEYS[key](raw)
            else:
                raise ConfigError(f"unknown key receiver.{key}")
    kw["receiver"] = ReceiverConfig(**rcv_kw)

    if p.has_section("sweep"):
        sw = p["sweep"]
        param = sw.get("param", "").strip().lower() or None
        kw["sweep_param"] = param
        kw["sweep_values"] = _floats(sw.get("values", ""))

    if p.has_section("run"):
        run = p["run"]
        for key in run:
            if key not in ("trials", "seed", "threads"):
                raise ConfigError(f"unknown key run.{key}")
        kw.update({k: int(run[k]) for k in run})
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def config_fields() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]
