# pcpolab/envs/track.py
from __future__ import annotations
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pcpolab.errors import ContractViolation

SPACING = 0.015       # m between centerline samples
LANE_WIDTH = 3.0      # m
STRAIGHT = 100.0      # m, nominal straight length
RADIUS = 30.0         # m, semicircle radius
STRAIGHT_JITTER = 20.0


@dataclass(frozen=True)
class TrackGeometry:
    """Closed centerline sampled at uniform arc length.

    Arrays have n+1 entries; the last sample repeats the first (closure).
    """
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    kappa: np.ndarray
    lane_width: float = LANE_WIDTH

    @property
    def total_length(self) -> float:
        return float(self.s[-1])

    @property
    def spacing(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def n_segments(self) -> int:
        return len(self.s) - 1

    def index(self, s: float) -> int:
        return int(math.floor((s % self.total_length) / self.spacing)) % self.n_segments

    def curvature_at(self, s: float) -> float:
        return float(self.kappa[self.index(s)])

    def pose_at(self, s: float):
        i = self.index(s)
        return float(self.x[i]), float(self.y[i]), float(self.heading[i])


def _rounded_rectangle(s: np.ndarray, straight: float, radius: float):
    """Counter-clockwise loop: bottom straight, right arc, top straight, left arc."""
    x = np.empty_like(s)
    y = np.empty_like(s)
    h = np.empty_like(s)
    k = np.zeros_like(s)
    arc = math.pi * radius
    b1, b2, b3 = straight, straight + arc, 2 * straight + arc

    m = s < b1
    x[m], y[m], h[m] = s[m], -radius, 0.0
    m = (s >= b1) & (s < b2)
    phi = (s[m] - b1) / radius
    x[m], y[m], h[m], k[m] = straight + radius * np.sin(phi), -radius * np.cos(phi), phi, 1.0 / radius
    m = (s >= b2) & (s < b3)
    x[m], y[m], h[m] = straight - (s[m] - b2), radius, math.pi
    m = s >= b3
    phi = (s[m] - b3) / radius
    x[m], y[m], h[m], k[m] = -radius * np.sin(phi), radius * np.cos(phi), math.pi + phi, 1.0 / radius
    return x, y, h, k


def generate_track(seed: Optional[int] = None, spacing: float = SPACING,
                   straight: float = STRAIGHT, radius: float = RADIUS) -> TrackGeometry:
    """Rounded-rectangle loop. A seed perturbs both straights by the same U(-20, 20) m;
    no seed gives the nominal 2*100 + 2*pi*30 m track."""
    if seed is not None:
        straight = straight + float(np.random.default_rng(seed).uniform(-STRAIGHT_JITTER, STRAIGHT_JITTER))
    if straight <= 0 or radius <= 0:
        raise ContractViolation("straight length and radius must be positive")
    length = 2 * straight + 2 * math.pi * radius
    n = int(round(length / spacing))
    s = np.arange(n + 1) * (length / n)
    s[-1] = length
    x, y, h, k = _rounded_rectangle(s, straight, radius)
    # the closing sample sits exactly on the start point
    x[-1], y[-1], h[-1], k[-1] = x[0], y[0], h[0] + 2 * math.pi, k[0]
    return TrackGeometry(s=s, x=x, y=y, heading=h, kappa=k)


def save_track(path: str | os.PathLike, track: TrackGeometry) -> None:
    """One sample per line: `s x y heading kappa`, 9 significant digits."""
    table = np.column_stack([track.s, track.x, track.y, track.heading, track.kappa])
    np.savetxt(path, table, fmt="%.9g", header="s x y heading kappa", comments="# ")


def load_track(path: str | os.PathLike, lane_width: float = LANE_WIDTH) -> TrackGeometry:
    table = np.loadtxt(path, comments="#", ndmin=2)
    if table.shape[1] != 5 or table.shape[0] < 3:
        raise ContractViolation(f"{path}: expected rows of `s x y heading kappa`")
    s, x, y, h, k = (table[:, i].copy() for i in range(5))
    return TrackGeometry(s=s, x=x, y=y, heading=h, kappa=k, lane_width=lane_width)
