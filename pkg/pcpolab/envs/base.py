# pcpolab/envs/base.py
from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from typing import Any, Protocol

import numpy as np


class DoneReason(str, Enum):
    RUNNING = "Running"
    OFF_LANE = "OffLane"
    COLLISION = "Collision"
    SUCCESS = "Success"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class StepOutcome:
    next_state: Any
    reward: float
    risk: float
    done: bool
    done_reason: DoneReason

    def __post_init__(self):
        if self.done != (self.done_reason is not DoneReason.RUNNING):
            raise ValueError("done must be False exactly when done_reason is Running")


class Env(Protocol):
    """What a rollout worker needs from an environment instance."""
    name: str
    obs_dim: int
    action_low: np.ndarray
    action_high: np.ndarray

    def reset(self, rng: np.random.Generator) -> np.ndarray: ...

    def step(self, action: np.ndarray) -> StepOutcome: ...

    def observation(self) -> np.ndarray: ...

    def deviation(self) -> float: ...
