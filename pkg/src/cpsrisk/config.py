"""Experiment configuration: nested dataclasses loaded from YAML."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigurationError
from .network_model import LayerParams


@dataclass
class TopologyConfig:
    physical: str = "ieee39"  # built-in name, or "file"
    physical_file: str | None = None
    cyber_nodes: int = 110
    m0: int = 3
    m: int = 2
    control_fraction: float = 0.2
    backup_fraction: float = 0.0


@dataclass
class CascadeSettings:
    failure_mode: str = "probabilistic"
    control_trip_prob: float = 0.5


@dataclass
class ProfileConfig:
    source: str = "estimate"  # estimate | parametric | file
    runs: int = 5000
    floor: float = 0.01
    reading: str = "auto"  # auto | verbatim | corrected
    path: str | None = None
    parametric: dict = field(default_factory=lambda: {
        "p0": 0.5, "lam_p": 0.1, "q0": 0.8, "lam_q": 0.1, "d0": 0.6, "lam_d": 0.05})


@dataclass
class PredictConfig:
    min_size: int = 2
    max_size: int = 9
    baseline_rate: float = 0.35
    mean_degree: float = 4.0
    count_walks: int = 20000
    exact_limit: int = 16


@dataclass
class OptimizerSettings:
    pack_size: int = 40
    max_iter: int = 1000
    omega: float = 8.0
    eta: float = 2.0
    stagnation: int = 10
    patience: int = 100
    center: float = 0.0
    max_region_size: int = 9
    w1: float = 0.5
    w2: float = 0.5


@dataclass
class EvaluateConfig:
    sizes: list = field(default_factory=lambda: [2, 4, 6, 8, 10, 12, 15])
    max_iter: int = 200
    strict_control: bool = False
    measure: str = "pairs"


@dataclass
class ExperimentConfig:
    seed: int = 0
    out: str = "results"
    threads: int = 1
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    params: LayerParams = field(default_factory=LayerParams)
    cascade: CascadeSettings = field(default_factory=CascadeSettings)
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    predict: PredictConfig = field(default_factory=PredictConfig)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """Digest of every setting that shapes results (output paths excluded)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("threads")
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


BUILTIN = {"ieee39-ba110": {}}


def _build(cls, data: Any, where: str):
    if not dataclasses.is_dataclass(cls):
        return data
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where or 'config'}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigurationError(f"{where or 'config'}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = cls()
        sub = getattr(default, name)
        kwargs[name] = _build(type(sub), value, f"{where}.{name}" if where else name) \
            if dataclasses.is_dataclass(sub) else value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{where or 'config'}: {exc}") from exc


def from_dict(data: dict | None) -> ExperimentConfig:
    return _build(ExperimentConfig, data or {}, "")


def load_config(source: str | Path | None) -> ExperimentConfig:
    """Read a YAML file, or return a built-in configuration by name."""
    if source is None:
        return ExperimentConfig()
    if str(source) in BUILTIN:
        return from_dict(BUILTIN[str(source)])
    path = Path(source)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    cfg = from_dict(data)
    if cfg.topology.physical_file is not None:
        p = Path(cfg.topology.physical_file)
        if not p.is_absolute():
            cfg.topology.physical_file = str((path.parent / p).resolve())
    return cfg
