# pcpolab/envs/intersection.py
from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pcpolab.envs.base import DoneReason, StepOutcome

N_VEHICLES = 3
COLLISION_RISK = 50.0
PASS_REWARD = 10.0
SUCCESS_REWARD = 10.0
STEP_REWARD = -1.0


class IntersectionParams(BaseModel):
    """Three vehicles on fixed perpendicular straights through one crossing.

    Vehicle 1 drives west->east on y=-offset, vehicle 2 south->north on
    x=+offset, vehicle 3 north->south on x=-offset. Each track is
    2*half_length long with l=0 at its middle point.
    """
    model_config = ConfigDict(frozen=True)

    dt: float = Field(0.1, gt=0)
    lane_offset: float = 1.75
    half_length: float = 40.0
    v_min: float = 6.0
    v_max: float = 14.0
    accel_limit: float = 3.0
    collision_distance: float = 2.5
    pass_line: float = 10.0
    reset_low: float = -40.0
    reset_high: float = -15.0
    max_steps: int = Field(200, ge=1)


@dataclass(frozen=True)
class IntersectionState:
    l: np.ndarray                 # (3,) signed distance to each track's middle point, m
    v: np.ndarray                 # (3,) speed, m/s
    passed: Tuple[bool, ...] = (False, False, False)
    steps: int = 0

    def observation(self) -> np.ndarray:
        return np.column_stack([self.l, self.v]).ravel()


def vehicle_positions(l: np.ndarray, params: Optional[IntersectionParams] = None) -> np.ndarray:
    """(3, 2) plane coordinates of the vehicle centers."""
    off = (params or IntersectionParams()).lane_offset
    return np.array([
        [l[0], -off],
        [off, l[1]],
        [-off, -l[2]],
    ])


def min_pairwise_distance(l: np.ndarray, params: Optional[IntersectionParams] = None) -> float:
    pos = vehicle_positions(l, params)
    return min(float(np.linalg.norm(pos[i] - pos[j]))
               for i in range(N_VEHICLES) for j in range(i + 1, N_VEHICLES))


def intersection_reset(rng: np.random.Generator, params: Optional[IntersectionParams] = None) -> IntersectionState:
    p = params or IntersectionParams()
    l = rng.uniform(p.reset_low, p.reset_high, size=N_VEHICLES)
    v = rng.uniform(p.v_min, p.v_max, size=N_VEHICLES)
    return IntersectionState(l=l, v=v)


def intersection_step(state: IntersectionState, a: np.ndarray,
                      params: Optional[IntersectionParams] = None) -> StepOutcome:
    p = params or IntersectionParams()
    a = np.clip(np.asarray(a, dtype=np.float64).reshape(N_VEHICLES), -p.accel_limit, p.accel_limit)
    l = state.l + state.v * p.dt + 0.5 * a * p.dt ** 2
    v = np.clip(state.v + a * p.dt, p.v_min, p.v_max)
    passed = tuple(bool(was or li >= p.pass_line) for was, li in zip(state.passed, l))
    newly = sum(1 for was, now in zip(state.passed, passed) if now and not was)
    success = all(passed) and not all(state.passed)
    nxt = IntersectionState(l=l, v=v, passed=passed, steps=state.steps + 1)

    reward = STEP_REWARD + PASS_REWARD * newly
    if min_pairwise_distance(l, p) < p.collision_distance:
        return StepOutcome(nxt, reward, COLLISION_RISK, True, DoneReason.COLLISION)
    if success:
        return StepOutcome(nxt, reward + SUCCESS_REWARD, 0.0, True, DoneReason.SUCCESS)
    if nxt.steps >= p.max_steps:
        return StepOutcome(nxt, reward, 0.0, True, DoneReason.TIMEOUT)
    return StepOutcome(nxt, reward, 0.0, False, DoneReason.RUNNING)


class IntersectionEnv:
    """Centralized control of three vehicles' accelerations."""
    name = "intersection"
    obs_dim = 2 * N_VEHICLES

    def __init__(self, params: Optional[IntersectionParams] = None):
        self.params = params or IntersectionParams()
        self.action_low = np.full(N_VEHICLES, -self.params.accel_limit)
        self.action_high = np.full(N_VEHICLES, self.params.accel_limit)
        self.state = IntersectionState(l=np.full(N_VEHICLES, self.params.reset_low),
                                       v=np.full(N_VEHICLES, self.params.v_min))

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state = intersection_reset(rng, self.params)
        return self.state.observation()

    def step(self, action: np.ndarray) -> StepOutcome:
        out = intersection_step(self.state, action, self.params)
        self.state = out.next_state
        return out

    def observation(self) -> np.ndarray:
        return self.state.observation()

    def deviation(self) -> float:
        return float("nan")
