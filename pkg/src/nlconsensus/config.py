"""Run configuration: one JSON document, strict about unknown keys.

Precedence is built-in defaults, then the config file, then command-line flags.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigParseError
from .graphs import Graph
from .rng import stream

IC_KINDS = ("uniform", "explicit", "fsm")


@dataclass
class IntegrationConfig:
    dt: float = 0.01
    t_end: float = 200.0
    record_every: int = 10


@dataclass
class SweepConfig:
    k_min: float = 0.5
    k_max: float = 3.5
    k_step: float = 0.01


@dataclass
class InitialCondition:
    """``uniform`` (seeded, in [-1, 1]^N), ``explicit`` (``values``) or ``fsm`` (``c * 1``)."""

    kind: str = "uniform"
    values: list[float] | None = None
    c: float | None = None

    def build(self, n: int, seed: int) -> np.ndarray:
        if self.kind == "uniform":
            return stream(seed, "initial_condition").uniform(-1.0, 1.0, n)
        if self.kind == "fsm":
            return np.full(n, float(self.c))
        x = np.asarray(self.values, dtype=float)
        if x.shape != (n,):
            raise ConfigParseError(f"explicit initial condition has {x.size} values, graph has {n}")
        return x


@dataclass
class ScenarioConfig:
    graph: str = "line:5"
    signal: str = "tanh:K=2.5"
    k: float | None = None
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    seed: int = 0
    initial_condition: InitialCondition = field(default_factory=InitialCondition)
    partition: str | None = None
    output_dir: str = "out"
    sweep: SweepConfig = field(default_factory=SweepConfig)
    n_random: int = 64

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        return _build(cls, data, "config")

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigParseError(f"cannot read config {path}: {exc}") from None
        return cls.from_json(text)

    def initial_state(self, g: Graph) -> np.ndarray:
        return self.initial_condition.build(g.n, self.seed)


_NESTED = {"integration": IntegrationConfig, "sweep": SweepConfig,
           "initial_condition": InitialCondition}
_NUMERIC = {"dt", "t_end", "k_min", "k_max", "k_step", "c", "k"}
_INTEGER = {"record_every", "seed", "n_random"}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigParseError(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigParseError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    for key, val in data.items():
        if key in _NESTED:
            kwargs[key] = _build(_NESTED[key], val, f"{where}.{key}")
        else:
            kwargs[key] = _check_value(key, val, f"{where}.{key}")
    obj = cls(**kwargs)
    _validate(obj, where)
    return obj


def _check_value(key, val, where):
    if val is None:
        return None
    if key in _INTEGER:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigParseError(f"{where} must be an integer")
        return val
    if key in _NUMERIC:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigParseError(f"{where} must be a number")
        return float(val)
    if key == "values":
        if not isinstance(val, list) or not all(isinstance(v, (int, float)) for v in val):
            raise ConfigParseError(f"{where} must be a list of numbers")
        return [float(v) for v in val]
    if not isinstance(val, str):
        raise ConfigParseError(f"{where} must be a string")
    return val


def _validate(obj, where):
    if isinstance(obj, IntegrationConfig):
        if obj.dt <= 0 or obj.t_end < obj.dt or obj.record_every < 1:
            raise ConfigParseError(f"{where}: need dt > 0, t_end >= dt, record_every >= 1")
    elif isinstance(obj, SweepConfig):
        if not 0 < obj.k_min < obj.k_max or obj.k_step <= 0:
            raise ConfigParseError(f"{where}: need 0 < k_min < k_max and k_step > 0")
    elif isinstance(obj, InitialCondition):
        if obj.kind not in IC_KINDS:
            raise ConfigParseError(f"{where}.kind must be one of {IC_KINDS}")
        if obj.kind == "explicit" and obj.values is None:
            raise ConfigParseError(f"{where}: explicit initial condition needs 'values'")
        if obj.kind == "fsm" and obj.c is None:
            raise ConfigParseError(f"{where}: fsm initial condition needs 'c'")
    elif isinstance(obj, ScenarioConfig):
        if not 0 <= obj.seed < 2 ** 64:
            raise ConfigParseError(f"{where}.seed must be a 64-bit unsigned integer")
        if obj.k is not None and obj.k <= 0:
            raise ConfigParseError(f"{where}.k must be positive")
        if obj.n_random < 0:
            raise ConfigParseError(f"{where}.n_random must be non-negative")


def parse_initial_condition(text: str) -> InitialCondition:
    """``uniform``, ``fsm:0.3`` or a comma-separated list of values."""
    text = text.strip()
    if text == "uniform":
        return InitialCondition("uniform")
    try:
        if text.startswith("fsm:"):
            return InitialCondition("fsm", c=float(text[4:]))
        return InitialCondition("explicit", values=[float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigParseError(f"cannot parse initial condition {text!r}") from None
