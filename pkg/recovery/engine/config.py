"""Experiment configuration: YAML/JSON loading, validation and job resolution."""

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pydantic
import yaml
from pydantic import BaseModel, ConfigDict, Field, FilePath, model_validator

from ..core.estimators import EstimatorConfig, default_estimators
from ..core.evaluation import ExperimentPlan, SparsityLevels, default_sparsity_levels
from ..core.timeseries import DilationKernel, KernelShape
from .errors import ConfigError

JOBS_ENV = "RECOVERY_JOBS"


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """Resolve the worker count, with fallbacks.

    Args:
        jobs: Optional explicit worker count

    Returns:
        ``jobs`` if given, else ``$RECOVERY_JOBS``, else the CPU count
    """
    if jobs:
        return jobs
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError as e:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from e
        if value < 1:
            raise ConfigError(f"{JOBS_ENV} must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


class DilationSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: KernelShape = KernelShape.BOXCAR
    width_seconds: int = Field(..., ge=1)


class ExperimentConfig(BaseModel):
    """Contents of an experiment config file."""

    model_config = ConfigDict(extra="forbid")

    input: FilePath
    scale_min: Optional[float] = None
    scale_max: Optional[float] = None
    estimators: List[EstimatorConfig] = Field(default_factory=default_estimators)
    sparsity: SparsityLevels = Field(default_factory=default_sparsity_levels)
    iterations: int = Field(10, ge=1)
    dilation: Optional[DilationSettings] = None
    sample_rate_hz: float = Field(1.0, gt=0)
    base_seed: int = Field(0, ge=0)
    output: Path = Path("results")
    jobs: Optional[int] = Field(None, ge=1)
    clip: bool = False
    group_column: Optional[str] = "group"
    n_boot: int = Field(1000, ge=1)
    ci_level: float = Field(0.95, gt=0, lt=1)

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if (self.scale_min is None) != (self.scale_max is None):
            raise ValueError("scale_min and scale_max must be given together")
        # kernel and plan errors surface at load time
        try:
            self.to_plan()
        except pydantic.ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(part) for part in first.get("loc", ()))
            raise ValueError(f"{where}: {first['msg']}" if where else first["msg"]) from e
        return self

    @property
    def scale_bounds(self) -> Optional[tuple]:
        if self.scale_min is None:
            return None
        return (self.scale_min, self.scale_max)

    @property
    def kernel(self) -> Optional[DilationKernel]:
        if self.dilation is None:
            return None
        return DilationKernel(
            shape=self.dilation.shape,
            width_seconds=self.dilation.width_seconds,
            sample_rate_hz=self.sample_rate_hz,
        )

    def to_plan(self, group_labels: Optional[Dict[str, str]] = None) -> ExperimentPlan:
        return ExperimentPlan(
            sparsity_levels=self.sparsity,
            n_iterations=self.iterations,
            estimators=self.estimators,
            dilation=self.kernel,
            base_seed=self.base_seed,
            group_labels=group_labels,
            clip=self.clip,
            n_boot=self.n_boot,
            ci_level=self.ci_level,
        )


def _key_line(text: str, loc: Sequence[Union[str, int]]) -> Optional[int]:
    """1-based source line of the deepest key of ``loc`` found in the document."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    line = None
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            match = next((kv for kv in node.value if kv[0].value == str(part)), None)
            if match is None:
                # discriminator tags show up in loc but not in the file
                continue
            line = match[0].start_mark.line + 1
            node = match[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int):
            if part >= len(node.value):
                break
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _parse(path: Path, text: str) -> Any:
    if path.suffix == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(e.msg, line=e.lineno) from e
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(str(e), line=mark.line + 1 if mark else None) from e


def load_config(path: Path, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Read and validate an experiment config.

    Relative ``input``/``output`` paths in the file resolve against the file's directory.
    ``overrides`` (CLI flags) replace file values; ``None`` values are ignored.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror or e}") from e

    data = _parse(path, text)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of keys to values", line=1)

    for key in ("input", "output"):
        value = data.get(key)
        if isinstance(value, str) and not Path(value).is_absolute():
            data[key] = str(path.parent / value)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})

    try:
        return ExperimentConfig.model_validate(data)
    except pydantic.ValidationError as e:
        error = e.errors()[0]
        loc = error.get("loc", ())
        key = ".".join(str(part) for part in loc) or None
        raise ConfigError(error["msg"], key=key, line=_key_line(text, loc)) from e
