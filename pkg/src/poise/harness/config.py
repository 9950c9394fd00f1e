"""Experiment configuration, loaded from TOML."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .. import corpus
from ..compiler.ir import ResourceModel
from ..controlplane.baseline import BaselineConfig
from ..controlplane.local import LatencyModel
from ..dataplane.config import PipelineConfig
from ..lang.syntax import Drop, Flood, Fwd, Log


class ConfigError(ValueError):
    pass


_FWD = re.compile(r"fwd\((\w+)\)$")


def parse_action(text):
    """``drop``, ``flood``, ``log`` or ``fwd(<port>)``."""
    text = text.strip()
    simple = {"drop": Drop, "flood": Flood, "log": Log}
    if text in simple:
        return simple[text]()
    m = _FWD.match(text)
    if m:
        port = m.group(1)
        return Fwd(int(port) if port.isdigit() else port)
    raise ConfigError(f"unknown action {text!r}")


def _latency(d):
    return LatencyModel(**d) if d else LatencyModel()


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int
    policy: str = "p1"
    trace: Dict[str, Any] = field(default_factory=dict)
    mode: str = "poise"
    resources: ResourceModel = field(default_factory=ResourceModel)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    insert_latency: LatencyModel = field(default_factory=LatencyModel)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    default_action: Optional[str] = None
    out: str = "results"
    params: Dict[str, Any] = field(default_factory=dict)
    base_dir: str = "."

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed is mandatory and must be an integer")
        if self.mode not in ("poise", "baseline"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.default_action is not None:
            parse_action(self.default_action)

    def resolve(self, p):
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def policy_source(self):
        if self.policy in corpus.NAMES:
            return corpus.source(self.policy)
        path = self.resolve(self.policy)
        if not path.is_file():
            raise ConfigError(f"policy file not found: {path}")
        return path.read_text(encoding="utf-8")

    def trace_file(self):
        f = self.trace.get("file")
        return None if f is None else self.resolve(f)

    def check_files(self):
        self.policy_source()
        f = self.trace_file()
        if f is not None and not f.is_file():
            raise ConfigError(f"trace file not found: {f}")


def config_from_mapping(data, base_dir=".", **overrides) -> ExperimentConfig:
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    if "seed" not in data:
        raise ConfigError("seed is mandatory")
    cp = data.pop("controlplane", {}) or {}
    res = data.pop("resources", None)
    if isinstance(res, str):
        path = Path(res) if Path(res).is_absolute() else Path(base_dir) / res
        if not path.is_file():
            raise ConfigError(f"resource file not found: {path}")
        resources = ResourceModel.load(path)
    else:
        try:
            resources = ResourceModel.from_mapping(res or {})
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    known = set(ExperimentConfig.__dataclass_fields__) - {"resources", "pipeline", "insert_latency",
                                                          "baseline", "base_dir", "params"}
    unknown = set(data) - known - {"pipeline", "params"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(
            name=data.get("name", "run"), seed=data["seed"], policy=data.get("policy", "p1"),
            trace=dict(data.get("trace", {})), mode=data.get("mode", "poise"),
            resources=resources, pipeline=PipelineConfig.from_mapping(data.get("pipeline", {})),
            insert_latency=_latency(cp.get("insert")),
            baseline=BaselineConfig(**{k: (_latency(v) if k == "rtt" else v)
                                       for k, v in cp.get("baseline", {}).items()}),
            default_action=data.get("default_action"), out=data.get("out", "results"),
            params=dict(data.get("params", {})), base_dir=str(base_dir))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_mapping(data, base_dir=path.parent, **overrides)
