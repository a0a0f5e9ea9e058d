# pcpolab/envs/lane.py
from __future__ import annotations
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pcpolab.envs.base import DoneReason, StepOutcome
from pcpolab.envs.track import TrackGeometry, generate_track
from pcpolab.errors import NumericalError

STEER_LIMIT = math.pi / 4
OFF_LANE_RISK = 100.0


class VehicleParams(BaseModel):
    """2-DOF dynamic bicycle model at constant longitudinal speed."""
    model_config = ConfigDict(frozen=True)

    mass: float = Field(1500.0, gt=0)        # kg
    yaw_inertia: float = Field(2500.0, gt=0)  # kg m^2
    a: float = Field(1.2, gt=0)               # CG to front axle, m
    b: float = Field(1.6, gt=0)               # CG to rear axle, m
    c_front: float = Field(80000.0, gt=0)     # cornering stiffness, N/rad
    c_rear: float = Field(80000.0, gt=0)
    v_x: float = Field(50.0 / 3.6, gt=0)      # m/s
    dt: float = Field(0.05, gt=0)             # s
    max_steps: int = Field(500, ge=1)


@dataclass(frozen=True)
class LaneState:
    d: float          # signed lateral offset from the centerline, m (left positive)
    beta: float       # heading error vs. path tangent, rad
    v_y: float = 0.0  # lateral velocity, m/s
    yaw_rate: float = 0.0
    s: float = 0.0    # arc length, m
    steps: int = 0

    def observation(self) -> np.ndarray:
        return np.array([self.d, self.beta])


def lane_reward(d: float, beta: float) -> float:
    return -(100.0 / 9.0) * d * d - beta * beta


def _derivatives(y: np.ndarray, delta_f: float, kappa: float, p: VehicleParams) -> np.ndarray:
    d, beta, v_y, r, _ = y
    vx, m, iz, a, b, cf, cr = p.v_x, p.mass, p.yaw_inertia, p.a, p.b, p.c_front, p.c_rear
    v_y_dot = (-(cf + cr) / (m * vx) * v_y
               + ((b * cr - a * cf) / (m * vx) - vx) * r
               + cf / m * delta_f)
    r_dot = ((b * cr - a * cf) / (iz * vx) * v_y
             - (a * a * cf + b * b * cr) / (iz * vx) * r
             + a * cf / iz * delta_f)
    beta_dot = r - vx * kappa
    d_dot = vx * math.sin(beta) + v_y * math.cos(beta)
    s_dot = vx * math.cos(beta) - v_y * math.sin(beta)
    return np.array([d_dot, beta_dot, v_y_dot, r_dot, s_dot])


def lane_reset(track: TrackGeometry, rng: np.random.Generator) -> LaneState:
    s = float(rng.uniform(0.0, track.total_length))
    d = float(rng.uniform(-0.5, 0.5))
    beta = float(rng.uniform(-0.1, 0.1))
    return LaneState(d=d, beta=beta, s=s)


def lane_step(track: TrackGeometry, state: LaneState, delta_f: float,
              params: Optional[VehicleParams] = None) -> StepOutcome:
    """One RK4 step of the bicycle model plus path kinematics."""
    p = params or VehicleParams()
    delta_f = float(np.clip(delta_f, -STEER_LIMIT, STEER_LIMIT))
    y0 = np.array([state.d, state.beta, state.v_y, state.yaw_rate, state.s])
    h = p.dt

    def f(y):
        if not np.all(np.isfinite(y)):
            raise NumericalError("lane dynamics produced a non-finite state")
        return _derivatives(y, delta_f, track.curvature_at(y[4]), p)

    k1 = f(y0)
    k2 = f(y0 + 0.5 * h * k1)
    k3 = f(y0 + 0.5 * h * k2)
    k4 = f(y0 + h * k3)
    y1 = y0 + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(y1)):
        raise NumericalError("lane dynamics produced a non-finite state")

    d, beta, v_y, r, s = (float(v) for v in y1)
    nxt = LaneState(d=d, beta=beta, v_y=v_y, yaw_rate=r, s=s % track.total_length, steps=state.steps + 1)
    reward = lane_reward(d, beta)
    if abs(d) > track.lane_width / 2:
        return StepOutcome(nxt, reward, OFF_LANE_RISK, True, DoneReason.OFF_LANE)
    if nxt.steps >= p.max_steps:
        return StepOutcome(nxt, reward, 0.0, True, DoneReason.TIMEOUT)
    return StepOutcome(nxt, reward, 0.0, False, DoneReason.RUNNING)


class LaneKeepingEnv:
    """Single vehicle following the closed track at constant speed."""
    name = "lane"
    obs_dim = 2

    def __init__(self, track: Optional[TrackGeometry] = None, params: Optional[VehicleParams] = None):
        self.track = track or generate_track()
        self.params = params or VehicleParams()
        self.action_low = np.array([-STEER_LIMIT])
        self.action_high = np.array([STEER_LIMIT])
        self.state = LaneState(d=0.0, beta=0.0)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state = lane_reset(self.track, rng)
        return self.state.observation()

    def step(self, action: np.ndarray) -> StepOutcome:
        out = lane_step(self.track, self.state, float(np.ravel(action)[0]), self.params)
        self.state = out.next_state
        return out

    def observation(self) -> np.ndarray:
        return self.state.observation()

    def deviation(self) -> float:
        return abs(self.state.d)

    def set_state(self, **kw) -> None:
        self.state = replace(self.state, **kw)
