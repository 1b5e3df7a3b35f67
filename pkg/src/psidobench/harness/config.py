"""Experiment configuration: JSON schema ``psido-bench-config/1`` and named presets."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import ConfigError

__all__ = ["SCHEMA", "EXPERIMENTS", "PRESETS", "ExperimentConfig", "load_config"]

SCHEMA = "psido-bench-config/1"

EXPERIMENTS = (
    "certify",
    "pointwise",
    "operator-bound",
    "fefferman-stein",
    "maximal-bound",
    "diening",
    "chain",
    "decay",
)

_S010 = {"kind": "hormander", "m": 0.0, "rho": 1.0, "delta": 0.0}
_LOG_DECAY = {"kind": "log-decay", "p_inf": 2.0}
_PACK = {"kind": "gaussian-pack", "count": 50, "seed": 7}
_BUMPS = {"kind": "smooth-bump", "count": 20, "seed": 11}
_OPERATOR_CHAIN = ["certify", "pointwise", "operator-bound", "fefferman-stein",
                   "maximal-bound", "chain", "decay"]

PRESETS: dict[str, dict] = {
    "estimate-2": {
        "symbols": [
            {"id": "smoothed_sign", "params": {}, "class": _S010},
            {"id": "modulated", "params": {"m": 0.0}, "class": _S010},
        ],
        "family": _PACK,
        "q_values": [1.5, 2.0],
        "experiments": ["certify", "pointwise"],
    },
    "theorem-1.2": {
        "symbols": [{"id": "bessel_multiplier", "params": {"m": -0.5},
                     "class": {"kind": "hormander", "m": -0.5, "rho": 0.5, "delta": 0.0}}],
        "exponent": {"kind": "constant", "p": 3.0},
        "family": _PACK,
        "q_values": [1.5],
        "experiments": _OPERATOR_CHAIN,
    },
    "theorem-3.2a": {
        "symbols": [{"id": "modulated", "params": {"m": -0.5},
                     "class": {"kind": "hormander", "m": -0.5, "rho": 0.5, "delta": 0.0}}],
        "exponent": _LOG_DECAY,
        "family": _PACK,
        "q_values": [1.5],
        "experiments": _OPERATOR_CHAIN,
    },
    "theorem-3.2b": {
        "symbols": [{"id": "holder_rough", "params": {"kappa": 0.5, "kappa_pp": 1.0},
                     "class": {"kind": "miyachi", "m": -1.0, "rho": 0.0, "delta": 0.0,
                               "kappa": 0.5, "kappa_prime": 1.0}}],
        "exponent": _LOG_DECAY,
        "family": {"kind": "gaussian-pack", "count": 20, "seed": 7},
        "q_values": [1.5],
        "experiments": _OPERATOR_CHAIN,
    },
    "corollary-3.3": {
        "symbols": [{"id": "smoothed_sign", "params": {}, "class": _S010}],
        "exponent": _LOG_DECAY,
        "family": _PACK,
        "q_values": [1.5],
        "experiments": _OPERATOR_CHAIN,
    },
    "fefferman-stein": {
        "symbols": [],
        "exponent": _LOG_DECAY,
        "family": _BUMPS,
        "experiments": ["fefferman-stein"],
    },
    "lerner-perez": {
        "symbols": [],
        "exponent": _LOG_DECAY,
        "family": _BUMPS,
        "q_values": [1.0, 1.5],
        "experiments": ["maximal-bound"],
    },
    "diening-duality": {
        "symbols": [],
        "exponent": _LOG_DECAY,
        "family": _BUMPS,
        "q_values": [1.0],
        "experiments": ["diening"],
    },
}

_KEYS = {"schema", "preset", "grid", "symbols", "exponent", "family", "q_values", "cube_family",
         "guard_epsilon", "refinement_levels", "stability_threshold", "experiments", "plan",
         "histograms", "output", "workers"}


@dataclass
class ExperimentConfig:
    """Everything one run needs; ``grid`` is the coarsest level, refined by doubling ``N``."""

    preset: str | None = None
    grid: dict = field(default_factory=lambda: {"n": 1, "L": 16.0, "N": 256})
    symbols: list = field(default_factory=list)
    exponent: dict | None = None
    family: dict = field(default_factory=lambda: dict(_PACK))
    q_values: list = field(default_factory=lambda: [2.0])
    cube_family: dict = field(default_factory=dict)
    guard_epsilon: float = 1e-8
    refinement_levels: int = 2
    stability_threshold: float = 2.0
    experiments: list = field(default_factory=list)
    plan: dict = field(default_factory=dict)
    histograms: bool = False
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.guard_epsilon > 0:
            raise ConfigError(f"guard_epsilon must be positive, got {self.guard_epsilon!r}")
        if int(self.refinement_levels) != self.refinement_levels or self.refinement_levels < 2:
            raise ConfigError("refinement_levels must be an integer >= 2")
        if not self.stability_threshold >= 1:
            raise ConfigError("stability_threshold must be >= 1")
        unknown = [e for e in self.experiments if e not in EXPERIMENTS]
        if unknown:
            raise ConfigError(f"unknown experiments {unknown}; known: {list(EXPERIMENTS)}")
        if not self.experiments:
            raise ConfigError("no experiments configured")
        for key in ("n", "L", "N"):
            if key not in self.grid:
                raise ConfigError(f"grid is missing {key!r}")
        for s in self.symbols:
            if "id" not in s or "class" not in s:
                raise ConfigError(f"symbol entry needs 'id' and 'class': {s}")
        if not all(isinstance(q, (int, float)) for q in self.q_values):
            raise ConfigError("q_values must be numbers")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if data.get("schema", SCHEMA) != SCHEMA:
            raise ConfigError(f"unsupported schema {data.get('schema')!r}; expected {SCHEMA!r}")
        extra = set(data) - _KEYS
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        merged: dict = {}
        preset = data.get("preset")
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; known: {sorted(PRESETS)}")
            merged.update(copy.deepcopy(PRESETS[preset]))
        merged.update({k: v for k, v in data.items() if k != "schema"})
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "ExperimentConfig":
        return cls.from_dict({"preset": name, **overrides})

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, **asdict(self)}


def load_config(path, preset: str | None = None) -> ExperimentConfig:
    """Parse a config file; ``preset`` fills keys the file leaves out."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if preset is not None and isinstance(data, dict):
        data.setdefault("preset", preset)
    return ExperimentConfig.from_dict(data)
