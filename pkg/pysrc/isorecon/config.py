# SPDX-License-Identifier: (Apache-2.0 OR MIT)
# Copyright isorecon contributors (2026)

"""Pipeline configuration.

Defaults follow the values used on the synthetic benchmark: M = 7 images per
subset, epsilon = 5 degrees, r = 20 neighbours, warp smoothing 1e-3 and a
residual flag factor of 10.
"""

from __future__ import annotations

import dataclasses
import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import orjson

from .errors import ConfigError

__all__ = (
    "BASELINES",
    "JSON_OPTIONS",
    "SOLVERS",
    "THREADS_ENV",
    "PipelineConfig",
    "dumps_json",
)

SOLVERS = ("resultant", "substitution")
BASELINES = ("wide", "short")
THREADS_ENV = "ISORECON_THREADS"

JSON_OPTIONS = (
    orjson.OPT_INDENT_2
    | orjson.OPT_SORT_KEYS
    | orjson.OPT_SERIALIZE_NUMPY
    | orjson.OPT_APPEND_NEWLINE
)


def dumps_json(obj: Any) -> bytes:
    return orjson.dumps(obj, option=JSON_OPTIONS)


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    solver: str = "resultant"
    subset_size: int = 7
    baseline: str = "wide"
    short_baseline_size: int = 35
    short_baseline_references: int = 7
    epsilon_deg: float = 5.0
    min_subset: int = 5
    neighbors: int = 20
    integration_neighbors: int = 6
    warp_lambda: float = 1e-3
    mad_delta_fraction: float = 1e-3
    flag_factor: float = 10.0
    inlier_tolerance: float = 0.10
    inlier_fraction: float = 0.5
    hallucinate_grid: bool = False
    grid_size: int = 20
    use_mad: bool = True
    use_multi_reference: bool = True
    use_isometry_filter: bool = True
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.baseline not in BASELINES:
            raise ConfigError(
                f"baseline must be one of {BASELINES}, got {self.baseline!r}",
            )
        if self.subset_size < 3:
            raise ConfigError("subset_size must be at least 3")
        if self.short_baseline_size < 3 or self.short_baseline_references < 1:
            raise ConfigError("short-baseline subset sizes must be positive")
        if self.min_subset < 3:
            raise ConfigError("min_subset must be at least 3")
        if self.neighbors < 1 or self.integration_neighbors < 1:
            raise ConfigError("neighbour counts must be positive")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be at least 2")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        for name in (
            "epsilon_deg",
            "warp_lambda",
            "mad_delta_fraction",
            "flag_factor",
            "inlier_tolerance",
        ):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 <= self.inlier_fraction < 1:
            raise ConfigError("inlier_fraction must lie in [0, 1)")

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> PipelineConfig:
        fields = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(fields))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        kwargs: dict[str, Any] = {}
        for key, value in values.items():
            kwargs[key] = _coerce(key, fields[key].type, value)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | os.PathLike[str]) -> PipelineConfig:
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {os.fspath(path)}: {exc}") from exc
        try:
            values = orjson.loads(raw)
        except orjson.JSONDecodeError as exc:
            raise ConfigError(f"{os.fspath(path)}: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError(f"{os.fspath(path)}: top level must be an object")
        return cls.from_mapping(values)

    @classmethod
    def from_env(cls, environ: Mapping[str, str] | None = None) -> PipelineConfig:
        env = os.environ if environ is None else environ
        if THREADS_ENV in env:
            return cls(threads=_coerce("threads", "int", env[THREADS_ENV]))
        return cls()

    def replace(self, **overrides: Any) -> PipelineConfig:
        if not overrides:
            return self
        merged = self.to_dict()
        merged.update(overrides)
        return PipelineConfig.from_mapping(merged)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> bytes:
        return dumps_json(self.to_dict())


def _coerce(key: str, annotation: Any, value: Any) -> Any:
    # annotations are strings under postponed evaluation
    kind = annotation if isinstance(annotation, str) else annotation.__name__
    try:
        if kind == "bool":
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered in ("1", "true", "yes", "on"):
                    return True
                if lowered in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            if not isinstance(value, (bool, int)):
                raise TypeError(type(value).__name__)
            return bool(value)
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError(type(value).__name__)
            return int(value)
        if kind == "float":
            if isinstance(value, bool):
                raise TypeError("bool")
            return float(value)
        if not isinstance(value, str):
            raise TypeError(type(value).__name__)
        return value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key}: {value!r}") from exc
