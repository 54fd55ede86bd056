"""Plausibility checks on an object's motion history.

Each object is verified over the interval between two consecutive frames:
turn rate and acceleration are estimated from the measured heading and speed,
the previous position is propagated with a second-order expansion of the
constant turn rate and acceleration (CTRA) model, and the prediction is
compared with the measured position. Margins are propagated to first order,
combining independent contributions in quadrature.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from .exceptions import MissingHistory, ZeroInterval
from .types import ObjectState, normalize_angle

DEFAULT_HEADING_MARGIN = math.radians(10.0)


@dataclass(frozen=True, slots=True)
class PlausibilityParams:
    a_acc: float = 7.0
    a_br: float = -7.0
    omega_max: float = math.radians(90.0) / 0.2
    dtheta_default: float = DEFAULT_HEADING_MARGIN
    gamma_plaus: float = 1.0

    def __post_init__(self):
        if not self.a_acc > 0 > self.a_br:
            raise ValueError("need a_acc > 0 > a_br")
        if not self.omega_max > 0:
            raise ValueError("omega_max must be positive")
        if self.gamma_plaus < 0 or self.dtheta_default < 0:
            raise ValueError("gamma_plaus and dtheta_default must be non-negative")


class Condition(str, enum.Enum):
    TURN_RATE = "TurnRate"
    ACCELERATION = "Acceleration"
    POSITION_PREDICTION = "PositionPrediction"


@dataclass(frozen=True, slots=True)
class RateEstimate:
    omega_hat: float
    a_hat: float
    d_omega: float
    d_a: float


@dataclass(frozen=True, slots=True)
class Prediction:
    x_hat: float
    y_hat: float
    dx_hat: float
    dy_hat: float


@dataclass(frozen=True, slots=True)
class PlausibilityVerdict:
    object_id: int
    frame: int
    plausible: bool
    violated: FrozenSet[Condition] = frozenset()
    x_hat: float = math.nan
    y_hat: float = math.nan
    dx_hat: float = math.nan
    dy_hat: float = math.nan
    residual: float = 0.0
    has_history: bool = True


def ctra_displacement(dt: float, v: float, theta: float, a: float, omega: float) -> Tuple[float, float]:
    """Displacement over ``dt`` from the CTRA model expanded to second order in ``dt``."""
    c, s = math.cos(theta), math.sin(theta)
    h = 0.5 * dt * dt
    fx = v * dt * c + h * (a * c - v * omega * s)
    fy = v * dt * s + h * (a * s + v * omega * c)
    return fx, fy


def ctra_jacobian(dt: float, v: float, theta: float, a: float, omega: float) -> np.ndarray:
    """Partials of (fx, fy) with respect to (v, theta, a, omega), shape (2, 4)."""
    c, s = math.cos(theta), math.sin(theta)
    h = 0.5 * dt * dt
    return np.array([
        [dt * c - h * omega * s,
         -v * dt * s - h * (a * s + v * omega * c),
         h * c,
         -h * v * s],
        [dt * s + h * omega * c,
         v * dt * c + h * (a * c - v * omega * s),
         h * s,
         h * v * c],
    ])


def heading_margin(o: ObjectState, default: float = DEFAULT_HEADING_MARGIN) -> float:
    return default if o.dtheta is None else o.dtheta


def _interval(prev: ObjectState, curr: ObjectState, dt: Optional[float]) -> float:
    if dt is None:
        dt = curr.t - prev.t
    if not dt > 0:
        raise ZeroInterval(f"object {curr.id}: non-positive interval {dt} between frames {prev.frame} and {curr.frame}")
    return dt


def estimate_rates(prev: ObjectState, curr: ObjectState, dt: Optional[float] = None,
                   dtheta_default: float = DEFAULT_HEADING_MARGIN) -> RateEstimate:
    """Turn rate and acceleration from two measured headings and speeds."""
    dt = _interval(prev, curr, dt)
    omega = normalize_angle(curr.theta - prev.theta) / dt
    a = (curr.v - prev.v) / dt
    d_omega = math.hypot(heading_margin(prev, dtheta_default), heading_margin(curr, dtheta_default)) / dt
    d_a = math.hypot(prev.dv, curr.dv) / dt
    return RateEstimate(omega, a, d_omega, d_a)


def predict_position(prev: ObjectState, est: RateEstimate, dt: float,
                     dtheta_default: float = DEFAULT_HEADING_MARGIN) -> Prediction:
    """Propagate the previous position over ``dt`` with the estimated rates."""
    if not dt > 0:
        raise ZeroInterval(f"object {prev.id}: non-positive interval {dt}")
    fx, fy = ctra_displacement(dt, prev.v, prev.theta, est.a_hat, est.omega_hat)
    jac = ctra_jacobian(dt, prev.v, prev.theta, est.a_hat, est.omega_hat)
    sig = np.array([prev.dv, heading_margin(prev, dtheta_default), est.d_a, est.d_omega])
    contrib = jac * sig
    dx_hat = math.sqrt(prev.dx ** 2 + float(contrib[0] @ contrib[0]))
    dy_hat = math.sqrt(prev.dy ** 2 + float(contrib[1] @ contrib[1]))
    return Prediction(prev.x + fx, prev.y + fy, dx_hat, dy_hat)


def check_plausibility(prev: Optional[ObjectState], curr: ObjectState,
                       params: PlausibilityParams = PlausibilityParams()) -> PlausibilityVerdict:
    """Flag the motion between ``prev`` and ``curr`` if any condition fires.

    Raises MissingHistory when ``prev`` is None and ZeroInterval when the two
    states do not span a positive time interval.
    """
    if prev is None:
        raise MissingHistory(f"object {curr.id} has no history at frame {curr.frame}")
    dt = _interval(prev, curr, None)
    est = estimate_rates(prev, curr, dt, params.dtheta_default)
    pred = predict_position(prev, est, dt, params.dtheta_default)

    violated = set()
    w_max = abs(params.omega_max)
    if est.omega_hat - est.d_omega > w_max or est.omega_hat + est.d_omega < -w_max:
        violated.add(Condition.TURN_RATE)
    if est.a_hat - est.d_a > params.a_acc or est.a_hat + est.d_a < params.a_br:
        violated.add(Condition.ACCELERATION)
    residual = math.hypot(pred.x_hat - curr.x, pred.y_hat - curr.y)
    allowance = params.gamma_plaus * (math.hypot(pred.dx_hat, pred.dy_hat) + math.hypot(curr.dx, curr.dy))
    if residual - allowance > 0:
        violated.add(Condition.POSITION_PREDICTION)

    return PlausibilityVerdict(curr.id, curr.frame, not violated, frozenset(violated),
                               pred.x_hat, pred.y_hat, pred.dx_hat, pred.dy_hat, residual)


def check_stream(stream: Iterable[ObjectState], params: PlausibilityParams = PlausibilityParams(),
                 frame_stride: int = 1) -> List[PlausibilityVerdict]:
    """Verify every object-frame of a stream against that object's previous frame.

    Objects without a state exactly ``frame_stride`` frames earlier are
    plausible by definition.
    """
    last: Dict[int, ObjectState] = {}
    out = []
    for o in sorted(stream, key=lambda s: (s.frame, s.id)):
        prev = last.get(o.id)
        if prev is not None and o.frame - prev.frame != frame_stride:
            prev = None
        try:
            out.append(check_plausibility(prev, o, params))
        except MissingHistory:
            out.append(PlausibilityVerdict(o.id, o.frame, True, has_history=False))
        last[o.id] = o
    return out


class SpeedErrorKind(str, enum.Enum):
    PERMANENT = "Permanent"
    TRANSIENT = "Transient"


@dataclass(frozen=True, slots=True)
class SpeedErrorMargins:
    """Measurement margins of the two-step constant-speed scenario."""

    dv: float = 1.0
    dx: float = 0.1
    dy: float = 0.1
    dtheta: Optional[float] = None


def transient_speed_threshold(dt: float, margins: SpeedErrorMargins = SpeedErrorMargins(),
                              params: PlausibilityParams = PlausibilityParams()) -> Tuple[float, float]:
    """Closed-form (positive, negative) thresholds when the acceleration limit dominates."""
    spread = math.sqrt(2.0) * margins.dv
    return params.a_acc * dt + spread, -params.a_br * dt + spread


def _two_step_pair(v: float, dt: float, dv_error: float, kind: SpeedErrorKind,
                   margins: SpeedErrorMargins) -> Tuple[ObjectState, ObjectState]:
    v_prev = v + dv_error if kind is SpeedErrorKind.PERMANENT else v
    common = dict(theta=0.0, l=1.0, w=1.0, dx=margins.dx, dy=margins.dy, dv=margins.dv, dtheta=margins.dtheta)
    prev = ObjectState(id=0, frame=0, t=0.0, x=0.0, y=0.0, v=v_prev, **common)
    curr = ObjectState(id=0, frame=1, t=dt, x=v * dt, y=0.0, v=v + dv_error, **common)
    return prev, curr


def min_detectable_speed_error(v: float, dt: float, kind, margins: SpeedErrorMargins = SpeedErrorMargins(),
                               params: PlausibilityParams = PlausibilityParams(), method: str = "scan",
                               resolution: float = 0.01, bracket: float = 50.0) -> Tuple[float, float]:
    """Smallest positive and negative speed errors the checks flag.

    ``method="closed"`` (transient only) evaluates the acceleration-limit
    threshold. ``method="scan"`` injects the error into a two-step
    constant-speed, constant-heading scenario and bisects for the smallest
    magnitude reported implausible. Returns ``inf`` when nothing within
    ``bracket`` is detected.
    """
    kind = SpeedErrorKind(kind)
    if method == "closed":
        if kind is not SpeedErrorKind.TRANSIENT:
            raise ValueError("the closed form only covers transient speed errors")
        return transient_speed_threshold(dt, margins, params)
    if method != "scan":
        raise ValueError(f"unknown method {method!r}")

    def detected(err: float) -> bool:
        prev, curr = _two_step_pair(v, dt, err, kind, margins)
        return not check_plausibility(prev, curr, params).plausible

    result = []
    for sign in (1.0, -1.0):
        if detected(0.0):
            result.append(0.0)
            continue
        if not detected(sign * bracket):
            result.append(math.inf)
            continue
        lo, hi = 0.0, bracket
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            if detected(sign * mid):
                hi = mid
            else:
                lo = mid
        result.append(hi)
    return result[0], result[1]
