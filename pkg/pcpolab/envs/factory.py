# pcpolab/envs/factory.py
from __future__ import annotations
from typing import Optional

from pcpolab.envs.intersection import IntersectionEnv
from pcpolab.envs.lane import LaneKeepingEnv
from pcpolab.envs.track import TrackGeometry, generate_track
from pcpolab.errors import ContractViolation

ENV_NAMES = ("lane", "intersection")
DEFAULT_RISK_LIMIT = {"lane": 1.0, "intersection": 5.0}


def make_env(name: str, track: Optional[TrackGeometry] = None):
    """Fresh environment instance; lane instances may share one read-only track."""
    if name == "lane":
        return LaneKeepingEnv(track=track or generate_track())
    if name == "intersection":
        return IntersectionEnv()
    raise ContractViolation(f"unknown environment {name!r}; expected one of {ENV_NAMES}")


def make_envs(name: str, count: int):
    track = generate_track() if name == "lane" else None
    return [make_env(name, track) for _ in range(count)]
