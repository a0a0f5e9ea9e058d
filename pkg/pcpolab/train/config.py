# pcpolab/train/config.py
from __future__ import annotations
import json
import os
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from pcpolab.envs.factory import DEFAULT_RISK_LIMIT
from pcpolab.errors import ConfigError
from pcpolab.utils.io import code_version, write_json
from pcpolab.utils.logging import get_logger

log = get_logger(__name__)

MANIFEST_NAME = "manifest.json"


class Algo(str, Enum):
    PCPO = "pcpo"
    CPO = "cpo"
    PPO = "ppo"


class TrainConfig(BaseModel):
    """Every knob of a training run. Defaults follow the lane-keeping setup."""
    model_config = ConfigDict(extra="forbid")

    algo: Algo = Algo.PCPO
    env: Literal["lane", "intersection"] = "lane"
    workers: int = Field(4, ge=1)
    n_steps: int = Field(16, ge=1)
    episodes_per_epoch: int = Field(25, ge=1)
    epochs: int = Field(200, ge=0)
    gamma: float = Field(0.95, gt=0, le=1)
    lr_value: float = Field(1e-3, gt=0)
    lr_risk: float = Field(1e-3, gt=0)
    lr_policy: float = Field(1e-4, gt=0)
    d: Optional[float] = None           # risk limit; per-env default when unset
    delta: float = Field(1e-3, gt=0)    # trust radius
    ppo_epsilon: float = Field(0.2, ge=0, lt=1)
    seed: int = Field(0, ge=0)
    hidden: Tuple[int, ...] = (100, 100)

    optimizer: Literal["sgd", "adam"] = "sgd"
    critic_passes: int = Field(5, ge=1)
    ppo_passes: int = Field(5, ge=1)
    damping: float = Field(1e-2, gt=0)
    cg_iters: int = Field(20, ge=1)
    cg_tol: float = Field(1e-8, gt=0)
    cg_residual_limit: float = Field(1e-3, gt=0)
    cg_accept_inexact: bool = True     # capped CG iterate is taken, clipped to the trust region
    line_search: bool = False
    center_q: bool = False
    checkpoint_every: int = Field(10, ge=1)
    parallel: bool = True
    dump_updates: bool = False
    dump_samples: bool = False
    init_from: Optional[str] = None     # checkpoint dir; warm start of the three parameter vectors only

    @model_validator(mode="after")
    def _resolve(self) -> "TrainConfig":
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be >= 1")
        if self.d is None:
            self.d = DEFAULT_RISK_LIMIT[self.env]
        if self.algo is Algo.CPO and self.workers != 1:
            if "workers" in self.model_fields_set:
                log.warning("cpo runs a single learner; workers=%d overridden to 1", self.workers)
            self.workers = 1
        return self


class RunManifest(BaseModel):
    config: TrainConfig
    seed: int
    timestamp: str
    out_dir: str
    code_version: str


def read_config_file(path: str | os.PathLike) -> Dict[str, Any]:
    """JSON or YAML mapping; a run manifest yields its embedded config."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        text = p.read_text(encoding="utf-8")
        data = yaml.safe_load(text) if p.suffix.lower() in (".yaml", ".yml") else json.loads(text)
    except (OSError, json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config {p}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {p} must be a mapping")
    if "config" in data and "code_version" in data:
        data = data["config"]
    return data


def build_config(path: Optional[str | os.PathLike] = None, **overrides: Any) -> TrainConfig:
    """defaults < file < overrides (None overrides are ignored)."""
    values: Dict[str, Any] = read_config_file(path) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return TrainConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def write_manifest(config: TrainConfig, out_dir: str | os.PathLike) -> RunManifest:
    manifest = RunManifest(
        config=config,
        seed=config.seed,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        out_dir=str(out_dir),
        code_version=code_version(),
    )
    write_json(Path(out_dir) / MANIFEST_NAME, manifest.model_dump(mode="json"))
    return manifest


def read_manifest(run_dir: str | os.PathLike) -> RunManifest:
    p = Path(run_dir) / MANIFEST_NAME
    if not p.is_file():
        raise ConfigError(f"no manifest in {run_dir}")
    try:
        return RunManifest.model_validate_json(p.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ConfigError(f"bad manifest {p}: {e}") from e
