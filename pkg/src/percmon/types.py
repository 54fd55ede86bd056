"""Shared value types: object states, ego poses, point clouds, injected errors.

All positions are in the fixed 2D world frame, in meters. Angles are radians
normalized to (-pi, pi]. Frames are the join key between object lists, point
clouds and injection ledgers.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Map an angle to the half-open interval (-pi, pi]."""
    r = math.remainder(theta, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def velocity_to_polar(vx: float, vy: float) -> Tuple[float, float]:
    """Convert a cartesian velocity into (speed, heading).

    The heading of the zero vector is 0 by convention.
    """
    v = math.hypot(vx, vy)
    if v == 0.0:
        return 0.0, 0.0
    return v, normalize_angle(math.atan2(vy, vx))


def polar_to_velocity(v: float, theta: float) -> Tuple[float, float]:
    return v * math.cos(theta), v * math.sin(theta)


@dataclass(frozen=True, slots=True)
class ObjectState:
    """One perceived object at one frame.

    ``v`` is the speed along the heading. The ``d*`` fields are 1-sigma style
    margins of the corresponding quantity. ``dtheta=None`` means the producer
    did not supply a heading margin; consumers fall back to their default.
    """

    id: int
    frame: int
    t: float
    x: float
    y: float
    v: float
    theta: float
    l: float
    w: float
    dx: float = 0.0
    dy: float = 0.0
    dv: float = 0.0
    dtheta: Optional[float] = None
    dl: float = 0.0
    dw: float = 0.0

    def __post_init__(self):
        if not (self.l > 0 and self.w > 0):
            raise ValueError(f"object {self.id}: box size must be positive, got l={self.l}, w={self.w}")
        margins = (self.dx, self.dy, self.dv, self.dl, self.dw)
        if min(margins) < 0 or (self.dtheta is not None and self.dtheta < 0):
            raise ValueError(f"object {self.id}: margins must be non-negative")
        theta = normalize_angle(self.theta)
        if theta != self.theta:
            object.__setattr__(self, "theta", theta)

    @property
    def position(self) -> Tuple[float, float]:
        return self.x, self.y

    @property
    def velocity(self) -> Tuple[float, float]:
        return polar_to_velocity(self.v, self.theta)

    @property
    def key(self) -> Tuple[int, int]:
        return self.frame, self.id


@dataclass(frozen=True, slots=True)
class EgoPose:
    frame: int
    t: float
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        theta = normalize_angle(self.theta)
        if theta != self.theta:
            object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class PointCloud2D:
    """Obstacle returns of one LiDAR scan, world frame, shape (n, 2)."""

    frame: int
    points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise ValueError(f"frame {self.frame}: point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


class ErrorKind(str, enum.Enum):
    POSITION_PERMANENT = "PositionPermanent"
    POSITION_RANDOM = "PositionRandom"
    SPEED_PERMANENT = "SpeedPermanent"
    SPEED_TRANSIENT = "SpeedTransient"
    NOISE = "Noise"

    @property
    def is_position(self) -> bool:
        return self in (ErrorKind.POSITION_PERMANENT, ErrorKind.POSITION_RANDOM)

    @property
    def is_speed(self) -> bool:
        return self in (ErrorKind.SPEED_PERMANENT, ErrorKind.SPEED_TRANSIENT)


@dataclass(frozen=True, slots=True)
class InjectedError:
    """Ground-truth ledger entry for one injected fault.

    Position kinds set ``shift`` (applied dx, dy); speed kinds set ``dv_applied``.
    """

    frame: int
    object_id: int
    kind: ErrorKind
    magnitude: float
    shift: Optional[Tuple[float, float]] = None
    dv_applied: Optional[float] = None
    clamped: bool = False

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("magnitude must be non-negative")
        kind = ErrorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.is_position and self.shift is None:
            raise ValueError(f"{kind.value} entry requires an applied shift")
        if kind.is_speed and self.dv_applied is None:
            raise ValueError(f"{kind.value} entry requires an applied speed change")

    @property
    def key(self) -> Tuple[int, int]:
        return self.frame, self.object_id
