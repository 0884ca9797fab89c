"""Dataclass configs for the studies, with JSON I/O and ``key=value`` overrides."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from ..errors import ValidationError
from .generators import GeneratorSpec
from .training import TrainerConfig

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# units shown by ``--help``; keys not listed are dimensionless
UNITS = {
    "n_grid": "samples", "m_grid": "views", "replicates": "count", "seed": "64-bit integer",
    "generator.m": "views", "generator.y_card": "symbols", "generator.x_card": "symbols",
    "generator.v_card": "symbols", "generator.d": "coordinates", "generator.flip": "probability",
    "generator.q_cells": "cells", "generator.label_prior": "probability vector",
    "trainer.width": "code levels", "trainer.hidden": "units", "trainer.epochs": "count",
    "trainer.penalty_weight": "per nat", "bounds.delta": "probability", "bounds.gamma": "> 0",
    "bounds.lam": "in (0, 1)", "bounds.beta": "per unit loss", "bounds.xi": "> 0",
    "correlation.n": "samples", "correlation.widths": "code levels",
    "correlation.penalty_weights": "per nat", "correlation.seeds": "count", "correlation.draws": "count",
    "correlation.fingerprint_replicates": "count", "correlation.repetitions": "count",
    "correlation.weight_decays": "per squared weight", "trainer.weight_decay": "per squared weight",
    "trainer.lr": "step size", "chain.n": "samples", "chain.replicates": "count", "chain.studies": "count",
    "generator.sigma": "feature units", "generator.separation": "feature units",
}


@dataclass(frozen=True)
class BoundConfig:
    delta: float = 0.1
    gamma: float = 1.0
    lam: float = 0.1
    beta: float | None = None  # None: 0.9 * log 2 / (2 R), R the attainable loss maximum
    xi: float = 1.0


@dataclass(frozen=True)
class CorrelationConfig:
    n: int = 30
    widths: tuple = (2, 4, 8)
    penalty_weights: tuple = (0.0, 0.1, 1.0)
    weight_decays: tuple = (0.0, 1e-3)
    seeds: int = 6
    draws: int = 2
    fingerprint_replicates: int = 16
    repetitions: int = 1


@dataclass(frozen=True)
class ChainConfig:
    n: int = 10
    replicates: int = 2000
    studies: int = 20


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "validation"
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    n_grid: tuple = (50, 100, 200, 400, 800)
    m_grid: tuple = (2, 4)
    replicates: int = 200
    bounds: BoundConfig = field(default_factory=BoundConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    correlation: CorrelationConfig = field(default_factory=CorrelationConfig)
    chain: ChainConfig = field(default_factory=ChainConfig)
    seed: int = 0
    output_dir: str = "results"

    def __post_init__(self):
        if self.replicates < 1:
            raise ValidationError(f"replicates must be >= 1, got {self.replicates}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.n_grid or not self.m_grid or min(self.n_grid) < 1 or min(self.m_grid) < 1:
            raise ValidationError("n_grid and m_grid must be nonempty lists of positive integers")


_NESTED = {"generator": GeneratorSpec, "bounds": BoundConfig, "trainer": TrainerConfig,
           "correlation": CorrelationConfig, "chain": ChainConfig}


def _build(cls, doc: dict, prefix: str = ""):
    names = {f.name: f for f in fields(cls)}
    unknown = set(doc) - set(names)
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(prefix + k for k in sorted(unknown))}")
    kw: dict[str, Any] = {}
    for k, v in doc.items():
        sub = _NESTED.get(k) if cls is ExperimentConfig else None
        if sub is not None:
            if not isinstance(v, dict):
                raise ValidationError(f"config key {prefix + k} must be an object")
            kw[k] = _build(sub, v, prefix + k + ".")
        elif isinstance(v, list):
            kw[k] = tuple(v)
        else:
            kw[k] = v
    try:
        return cls(**kw)
    except TypeError as e:
        raise ValidationError(f"bad config under {prefix or 'root'}: {e}") from None


def config_from_dict(doc: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, doc)


def config_to_dict(cfg) -> dict:
    def conv(v):
        if dataclasses.is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in fields(v)}
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        return v
    return conv(cfg)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"config {path} must be a JSON object")
    return config_from_dict(doc)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")


def default_config(name: str) -> ExperimentConfig:
    """Shipped config ``name`` (validation, correlation, scaling, chain)."""
    path = CONFIG_DIR / f"{name}.json"
    if not path.exists():
        raise ValidationError(f"no shipped config named {name!r}")
    return load_config(path)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply ``key=value`` strings; dotted keys reach nested sections, values parse as JSON."""
    doc = config_to_dict(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ValidationError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = doc
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise ValidationError(f"unknown config key {key!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ValidationError(f"unknown config key {key!r}")
        node[parts[-1]] = _parse_value(raw)
    return config_from_dict(doc)


def config_keys() -> list[tuple[str, str, str]]:
    """``(dotted key, default, units)`` for every config key."""
    out = []
    base = ExperimentConfig()
    for f in fields(ExperimentConfig):
        v = getattr(base, f.name)
        if dataclasses.is_dataclass(v):
            for g in fields(v):
                key = f"{f.name}.{g.name}"
                out.append((key, json.dumps(config_to_dict(getattr(v, g.name))), UNITS.get(key, "dimensionless")))
        else:
            out.append((f.name, json.dumps(config_to_dict(v)), UNITS.get(f.name, "dimensionless")))
    return out
