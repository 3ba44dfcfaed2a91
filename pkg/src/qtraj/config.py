"""Experiment configuration: TOML file parsing into typed specs.

Configs are diff-able TOML documents; results are JSON and plot data CSV.
Seeds are mandatory fields with fixed defaults, never wall-clock derived, so
rerunning a config reproduces results byte for byte (timestamps are confined
to a metadata field).
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, replace
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .models import DistSpec, EnvSpec, ModelSpec

TASKS = ("validate", "esp", "stationary", "forgetting", "clt", "couple", "report")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    model: ModelSpec
    patterns: tuple[str, ...] = ()
    n_steps: int = 1000
    n_trajectories: int = 1000
    seed: int = 0
    threads: int = 0  # 0 = unset; resolved from QTRAJ_THREADS (default 1)
    out: str | None = None
    options: Mapping = field(default_factory=dict)

    def validated(self) -> "ExperimentConfig":
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.n_steps < 1 or self.n_trajectories < 1:
            raise ConfigError("steps and trajectories must be >= 1")
        cfg = self
        if cfg.threads == 0:
            cfg = replace(cfg, threads=int(os.environ.get("QTRAJ_THREADS", "1")))
        if cfg.threads < 1:
            raise ConfigError("threads must be >= 1")
        return cfg


def _dist_spec(table: Mapping) -> DistSpec:
    try:
        dist = table["dist"]
    except KeyError:
        raise ConfigError("parameter draw table requires a 'dist' key") from None
    values = table.get("values")
    return DistSpec(
        dist=dist,
        low=table.get("low"),
        high=table.get("high"),
        values=tuple(values) if values is not None else None,
    )


def _env_spec(table: Mapping, seed: int) -> EnvSpec:
    kind = table.get("kind", "deterministic")
    draws = {name: _dist_spec(t) for name, t in table.get("draws", {}).items()}
    transition = table.get("transition")
    symbols = table.get("symbols")
    return EnvSpec(
        kind=kind,
        seed=int(table.get("seed", seed)),
        draws=draws,
        transition=tuple(tuple(row) for row in transition) if transition is not None else None,
        symbols=tuple(dict(s) for s in symbols) if symbols is not None else None,
    )


def config_from_dict(doc: Mapping) -> ExperimentConfig:
    try:
        model_table = dict(doc["model"])
        name = model_table.pop("name")
    except KeyError as exc:
        raise ConfigError(f"config requires [model] with a name: missing {exc}") from None
    seed = int(doc.get("seed", 0))
    env = _env_spec(doc.get("environment", {}), seed)
    patterns = doc.get("patterns", [doc["pattern"]] if "pattern" in doc else [])
    cfg = ExperimentConfig(
        task=doc.get("task", "report"),
        model=ModelSpec(name=name, params=model_table, env=env),
        patterns=tuple(str(p) for p in patterns),
        n_steps=int(doc.get("steps", 1000)),
        n_trajectories=int(doc.get("trajectories", 1000)),
        seed=seed,
        threads=int(doc.get("threads", 0)),
        out=doc.get("out"),
        options=dict(doc.get("options", {})),
    )
    return cfg.validated()


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from None
    return config_from_dict(doc)
