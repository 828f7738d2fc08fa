"""Reference trajectories sampled as flat setpoints."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _z3():
    return np.zeros(3)


@dataclass(frozen=True)
class Setpoint:
    """Position and its derivatives up to snap, plus the yaw-rate reference."""

    pos: np.ndarray = field(default_factory=_z3)
    vel: np.ndarray = field(default_factory=_z3)
    acc: np.ndarray = field(default_factory=_z3)
    jerk: np.ndarray = field(default_factory=_z3)
    snap: np.ndarray = field(default_factory=_z3)
    yaw_rate: float = 0.0
    yaw_rate_dot: float = 0.0
    yaw_rate_ddot: float = 0.0

    def derivatives(self) -> list[np.ndarray]:
        return [np.asarray(self.pos, float), np.asarray(self.vel, float), np.asarray(self.acc, float),
                np.asarray(self.jerk, float), np.asarray(self.snap, float)]


KINDS = ("hover", "step", "square", "waypoints", "minjerk")


@dataclass(frozen=True)
class TrajectoryPlan:
    """Reference description.

    ``hover`` holds ``(0, 0, altitude)``; ``step`` holds ``waypoints[0]``
    until ``segment_period`` and ``waypoints[1]`` afterwards; ``square`` and
    ``waypoints`` cycle through corners with a hold of ``segment_period``
    each; ``minjerk`` joins the same corners with rest-to-rest quintic
    segments so the feed-forward terms are non-zero.
    """

    kind: str = "square"
    side: float = 2.0
    altitude: float = 1.0
    segment_period: float = 5.0
    waypoints: tuple = ()
    yaw_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.segment_period <= 0:
            raise ValueError("segment_period must be positive")
        if self.kind in ("step", "waypoints") and len(self.waypoints) < (2 if self.kind == "step" else 1):
            raise ValueError(f"{self.kind} plan needs waypoints")
        if not np.all(np.isfinite(np.asarray(self.waypoints, dtype=float))):
            raise ValueError("waypoints must be finite")

    def corners(self) -> np.ndarray:
        if self.kind in ("square", "minjerk"):
            return square_corners(self.side, self.altitude)
        if self.kind == "hover":
            return np.array([[0.0, 0.0, self.altitude]])
        return np.asarray(self.waypoints, dtype=float).reshape(-1, 3)

    def sample(self, t: float) -> Setpoint:
        if self.kind == "hover":
            return Setpoint(pos=self.corners()[0], yaw_rate=self.yaw_rate)
        if self.kind == "step":
            c = self.corners()
            return Setpoint(pos=c[0] if t < self.segment_period else c[1], yaw_rate=self.yaw_rate)
        if self.kind == "square":
            sp = square_trajectory(self.side, self.altitude, self.segment_period, t)
            return Setpoint(pos=sp.pos, yaw_rate=self.yaw_rate)
        if self.kind == "waypoints":
            c = self.corners()
            return Setpoint(pos=c[int(t // self.segment_period) % len(c)], yaw_rate=self.yaw_rate)
        return min_jerk_cycle(self.corners(), self.segment_period, t, self.yaw_rate)


def square_corners(side: float, altitude: float) -> np.ndarray:
    h = side / 2
    return np.array([[-h, -h, altitude], [h, -h, altitude], [h, h, altitude], [-h, h, altitude]])


def square_trajectory(side: float, altitude: float, segment_period: float, t: float) -> Setpoint:
    """Corner-hold square: each corner is held for ``segment_period``; derivatives are zero."""
    if t < 0:
        raise ValueError("t must be non-negative")
    idx = int(t // segment_period) % 4
    return Setpoint(pos=square_corners(side, altitude)[idx].copy())


def _quintic(s):
    # rest-to-rest minimum-jerk profile and its derivatives w.r.t. s in [0, 1]
    return (10 * s**3 - 15 * s**4 + 6 * s**5,
            30 * s**2 - 60 * s**3 + 30 * s**4,
            60 * s - 180 * s**2 + 120 * s**3,
            60 - 360 * s + 360 * s**2,
            -360 + 720 * s)


def min_jerk_cycle(corners, period: float, t: float, yaw_rate: float = 0.0) -> Setpoint:
    n = len(corners)
    seg = int(t // period)
    a = corners[seg % n]
    b = corners[(seg + 1) % n]
    s = (t - seg * period) / period
    d = b - a
    q = _quintic(s)
    return Setpoint(pos=a + q[0] * d, vel=q[1] * d / period, acc=q[2] * d / period**2,
                    jerk=q[3] * d / period**3, snap=q[4] * d / period**4, yaw_rate=yaw_rate)


def distance_to_polyline(p, corners, closed: bool = True) -> float:
    """Euclidean distance from ``p`` to the (closed) polyline through ``corners``."""
    p = np.asarray(p, dtype=float)
    pts = np.asarray(corners, dtype=float)
    if len(pts) == 1:
        return float(np.linalg.norm(p - pts[0]))
    ends = np.roll(pts, -1, axis=0) if closed else pts[1:]
    starts = pts if closed else pts[:-1]
    best = np.inf
    for a, b in zip(starts, ends):
        d = b - a
        L2 = d @ d
        s = 0.0 if L2 == 0 else np.clip((p - a) @ d / L2, 0.0, 1.0)
        best = min(best, np.linalg.norm(p - (a + s * d)))
    return float(best)
