"""Strict JSON run configuration for the command line tools.

A config file looks like::

    {
      "system": "plant.json",            # or an inline {"A", "B", "C", "h"[, "K"]}
      "train": {"T": 20, "M": 20, "J": 10, "lr": 0.1, "seed": 0},
      "out": "results",
      "simulate": {"T": 20, "r": 32, "phi": {"kind": "constant", "value": [1, 0]}},
      "verify": {"margin": 0.001},
      "grad_check": {"count": 5, "T": 2.0, "r": 32, "eps": 1e-5},
      "benchmark": {"scenario": 1, "count": 100, "base_seed": 0}
    }

Unknown keys anywhere are rejected. Relative system paths resolve against
the config file's directory. A bare system document (``A``, ``B``, ``C``,
``h``, optional ``K``) is accepted as a config with defaults for the rest.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DelaySOFError, MissingRequiredError, UnknownKeyError
from .model import DelaySystem, InitialFunction, load_system, system_from_dict
from .train import TrainConfig

TOP_KEYS = {"system", "train", "out", "verbosity", "simulate", "verify", "grad_check", "benchmark"}
TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
SECTION_KEYS = {
    "simulate": {"T", "r", "phi"},
    "verify": {"margin"},
    "grad_check": {"count", "T", "r", "eps"},
    "benchmark": {"scenario", "count", "base_seed"},
}
PHI_KEYS = {
    "constant": {"kind", "value"},
    "linear": {"kind", "offset", "slope"},
    "sampled-grid": {"kind", "values", "slopes"},
}


@dataclass
class RunConfig:
    system: DelaySystem | None = None
    gain: np.ndarray | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    out: Path | None = None
    verbosity: int = 0
    simulate: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    grad_check: dict = field(default_factory=dict)
    benchmark: dict = field(default_factory=dict)


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    for key in block:
        if key not in allowed:
            raise UnknownKeyError(key, where)


def parse_phi(spec: dict, h: float) -> InitialFunction:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("simulate.phi needs a 'kind'")
    kind = spec["kind"]
    if kind not in PHI_KEYS:
        raise ConfigError(f"simulate.phi.kind must be one of {sorted(PHI_KEYS)}, got {kind!r}")
    _reject_unknown(spec, PHI_KEYS[kind], "simulate.phi")
    try:
        if kind == "constant":
            return InitialFunction.constant(spec["value"], h)
        if kind == "linear":
            return InitialFunction.linear(spec["offset"], spec["slope"], h)
        return InitialFunction.sampled(spec["values"], h, spec.get("slopes"))
    except KeyError as exc:
        raise MissingRequiredError(f"simulate.phi lacks {exc.args[0]!r}") from None


def parse_config(text: str, base_dir=".", require_system: bool = True) -> RunConfig:
    """Parse and validate a run configuration document."""
    if not text.strip():
        raise MissingRequiredError("empty configuration: a 'system' source is required")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    # a bare matrix document stands for {"system": <doc>}
    if isinstance(doc, dict) and "A" in doc:
        doc = {"system": doc}
    _reject_unknown(doc, TOP_KEYS, "config")
    cfg = RunConfig()

    if "system" in doc:
        src = doc["system"]
        try:
            if isinstance(src, str):
                cfg.system, cfg.gain = load_system(Path(base_dir) / src)
            elif isinstance(src, dict):
                cfg.system, cfg.gain = system_from_dict(src)
            else:
                raise ConfigError("'system' must be a file path or an inline object")
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read system {src!r}: {exc}") from None
        except DelaySOFError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid system: {exc}") from None
    elif require_system:
        raise MissingRequiredError("a 'system' source is required")

    train = doc.get("train", {})
    _reject_unknown(train, TRAIN_KEYS, "train")
    try:
        cfg.train = TrainConfig(**train)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from None

    for name, allowed in SECTION_KEYS.items():
        block = doc.get(name, {})
        _reject_unknown(block, allowed, name)
        setattr(cfg, name, dict(block))
    if "out" in doc:
        cfg.out = Path(doc["out"])
    cfg.verbosity = int(doc.get("verbosity", 0))
    return cfg


def load_config(path, require_system: bool = True) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), path.parent, require_system)
