"""Synthetic ground-truth scenarios and a 2D LiDAR with occlusion.

Two archetypes: pedestrians crossing a street in front of a static ego, and an
ego approaching a four-way intersection with turning vehicles and
pedestrians. Agents follow piecewise-constant (acceleration, turn rate)
controls integrated with the exact CTRA solution, so consecutive states are
physically consistent while control switches still fall between frames.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .geometry import OrientedRegion, ray_box_distances
from .types import EgoPose, ObjectState, PointCloud2D, normalize_angle

PEDESTRIAN_SIZE = (0.5, 0.5)
VEHICLE_SIZE = (4.5, 2.0)
PEDESTRIAN_SPEED = (0.5, 2.0)
VEHICLE_SPEED = (3.0, 15.0)
LANE_OFFSET = 1.75


class ScenarioKind(str, enum.Enum):
    PEDESTRIAN = "Pedestrian"
    INTERSECTION = "Intersection"


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario size and the uncertainty margins attached to reported objects.

    ``pos_margin`` and ``speed_margin`` are the dx/dy and dv values a
    perception stack would report with each object; heading margins are left
    unset so the monitor default applies.
    """

    kind: ScenarioKind = ScenarioKind.PEDESTRIAN
    n_pedestrians: int = 8
    n_vehicles: int = 0
    duration: float = 20.0
    frame_dt: float = 0.05
    area: float = 100.0
    seed: int = 0
    pos_margin: float = 0.03
    speed_margin: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if not self.frame_dt > 0 or not self.duration > 0:
            raise ValueError("duration and frame_dt must be positive")
        if self.n_pedestrians < 0 or self.n_vehicles < 0:
            raise ValueError("object counts must be non-negative")
        if self.pos_margin < 0 or self.speed_margin < 0:
            raise ValueError("margins must be non-negative")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration / self.frame_dt))


@dataclass(frozen=True)
class LidarConfig:
    angular_resolution: float = math.radians(0.2)
    max_range: float = 50.0
    range_noise_sigma: float = 0.02

    def __post_init__(self):
        if not self.angular_resolution > 0 or not self.max_range > 0:
            raise ValueError("angular_resolution and max_range must be positive")
        if self.range_noise_sigma < 0:
            raise ValueError("range_noise_sigma must be non-negative")

    @property
    def n_rays(self) -> int:
        return int(math.ceil(2.0 * math.pi / self.angular_resolution - 1e-9))


@dataclass
class Scenario:
    config: ScenarioConfig
    objects: List[ObjectState]
    ego: List[EgoPose]

    def frames(self) -> Dict[int, List[ObjectState]]:
        out: Dict[int, List[ObjectState]] = {e.frame: [] for e in self.ego}
        for o in self.objects:
            out[o.frame].append(o)
        return out


def ctra_step(x: float, y: float, v: float, theta: float, a: float, omega: float, dt: float):
    """Exact CTRA propagation over ``dt``; returns (x, y, v, theta)."""
    th1 = theta + omega * dt
    v1 = v + a * dt
    if abs(omega) < 1e-9:
        d = v * dt + 0.5 * a * dt * dt
        return x + d * math.cos(theta), y + d * math.sin(theta), v1, th1
    w2 = omega * omega
    x1 = x + (v1 * omega * math.sin(th1) + a * math.cos(th1) - v * omega * math.sin(theta) - a * math.cos(theta)) / w2
    y1 = y + (-v1 * omega * math.cos(th1) + a * math.sin(th1) + v * omega * math.cos(theta) - a * math.sin(theta)) / w2
    return x1, y1, v1, th1


class _Agent:
    """Kinematic agent with piecewise-constant controls."""

    def __init__(self, state, length, width, t_spawn=0.0, t_end=math.inf):
        self.state = state
        self.length = length
        self.width = width
        self.t_spawn = t_spawn
        self.t_end = t_end
        self.control = (0.0, 0.0)
        self.time = t_spawn

    def next_switch(self, t: float) -> float:
        raise NotImplementedError

    def update_control(self, t: float) -> None:
        raise NotImplementedError

    def advance_to(self, t1: float) -> None:
        t = self.time
        while t < t1 - 1e-12:
            ts = self.next_switch(t)
            end = min(ts, t1)
            self.state = ctra_step(*self.state, *self.control, end - t)
            t = end
            if ts <= t1 + 1e-12:
                self.update_control(t)
        self.time = max(self.time, t1)


class _Pedestrian(_Agent):
    """Walks back and forth across a street, wandering within speed limits."""

    turn_rate_max = 1.0
    accel_max = 0.8

    def __init__(self, state, rng, cross_axis, band, period, phase, **kw):
        super().__init__(state, *PEDESTRIAN_SIZE, **kw)
        self.rng = rng
        self.cross_axis = cross_axis
        self.band = band
        self.period = period
        self.phase = phase
        heading_sign = math.sin(state[3]) if cross_axis == 1 else math.cos(state[3])
        self.direction = 1.0 if heading_sign >= 0 else -1.0
        self.target_speed = state[2]
        self.wander = 0.0
        self.update_control(0.0)

    def next_switch(self, t):
        k = math.floor((t - self.phase) / self.period + 1e-9) + 1
        return self.phase + k * self.period

    def update_control(self, t):
        x, y, v, th = self.state
        along = y if self.cross_axis == 1 else x
        if along > self.band[1] and self.direction > 0:
            self.direction = -1.0
        elif along < self.band[0] and self.direction < 0:
            self.direction = 1.0
        if self.rng.random() < 0.3:
            self.target_speed = self.rng.uniform(0.6, 1.9)
        if self.rng.random() < 0.3:
            self.wander = self.rng.uniform(-0.3, 0.3)
        base = math.pi / 2 if self.cross_axis == 1 else 0.0
        desired = base if self.direction > 0 else base + math.pi
        err = normalize_angle(desired + self.wander - th)
        omega = float(np.clip(err / self.period, -self.turn_rate_max, self.turn_rate_max))
        lo, hi = PEDESTRIAN_SPEED
        target = min(max(self.target_speed, lo), hi)
        a = float(np.clip((target - v) / self.period, -self.accel_max, self.accel_max))
        self.control = (a, omega)


class _Vehicle(_Agent):
    """Drives straight, optionally takes one circular turn, then drives on."""

    def __init__(self, state, schedule, **kw):
        super().__init__(state, *VEHICLE_SIZE, **kw)
        self.schedule = schedule  # [(t_start, a, omega)], sorted
        self.update_control(kw.get("t_spawn", 0.0))

    def next_switch(self, t):
        for ts, _, _ in self.schedule:
            if ts > t + 1e-12:
                return ts
        return math.inf

    def update_control(self, t):
        current = (0.0, 0.0)
        for ts, a, w in self.schedule:
            if ts <= t + 1e-12:
                current = (a, w)
        self.control = current


def _rotate(x, y, angle):
    c, s = math.cos(angle), math.sin(angle)
    return c * x - s * y, s * x + c * y


def _pedestrian_scenario(config: ScenarioConfig, rng: np.random.Generator):
    egos = [EgoPose(k, k * config.frame_dt, 0.0, 0.0, 0.0) for k in range(config.n_frames)]
    n = config.n_pedestrians
    agents = []
    lanes = np.linspace(6.0, 22.0, n) if n > 1 else np.array([12.0] * n)
    for i in range(n):
        x0 = float(lanes[i] + rng.uniform(-0.8, 0.8))
        y0 = float(rng.uniform(-6.0, 6.0))
        up = rng.random() < 0.5
        theta = (math.pi / 2 if up else -math.pi / 2) + rng.uniform(-0.2, 0.2)
        v0 = float(rng.uniform(0.6, 1.9))
        agents.append(_Pedestrian((x0, y0, v0, theta), np.random.default_rng([config.seed, 101, i]),
                                  cross_axis=1, band=(-7.0, 7.0), period=float(rng.uniform(0.33, 0.47)),
                                  phase=float(rng.uniform(0.0, 0.3))))
    return agents, egos


def _vehicle_route(rng, config, t_spawn):
    """Schedule of a vehicle entering the intersection from a random approach."""
    approach = int(rng.integers(1, 4))  # 0 = from the west, reserved for the ego lane
    turn = rng.choice(["straight", "left", "right"])
    v = float(rng.uniform(*VEHICLE_SPEED))
    if turn != "straight":
        v = min(v, 8.0)
    start_dist = float(rng.uniform(25.0, 45.0))
    # canonical frame: drive east along y = -LANE_OFFSET toward the center
    if turn == "right":
        radius = 4.0
        turn_x = -LANE_OFFSET - radius
        omega = -v / radius
    elif turn == "left":
        radius = 8.0
        turn_x = LANE_OFFSET - radius
        omega = v / radius
    else:
        turn_x, omega = None, 0.0
    x0 = -start_dist
    angle = approach * math.pi / 2
    px, py = _rotate(x0, -LANE_OFFSET, angle)
    state = (px, py, v, normalize_angle(angle))
    schedule = [(t_spawn, 0.0, 0.0)]
    if turn_x is not None:
        t_turn = t_spawn + (turn_x - x0) / v
        schedule.append((t_turn, 0.0, omega))
        schedule.append((t_turn + (math.pi / 2) / abs(omega), 0.0, 0.0))
    t_end = t_spawn + (start_dist + 60.0) / v
    return state, schedule, t_end


def _intersection_scenario(config: ScenarioConfig, rng: np.random.Generator):
    ego_speed, ego_decel, x_start = 6.0, -0.9, -40.0
    t_stop = ego_speed / -ego_decel
    egos = []
    for k in range(config.n_frames):
        t = k * config.frame_dt
        tt = min(t, t_stop)
        x = x_start + ego_speed * tt + 0.5 * ego_decel * tt * tt
        egos.append(EgoPose(k, t, x, -LANE_OFFSET, 0.0))

    agents = []
    for i in range(config.n_vehicles):
        t_spawn = float(rng.uniform(0.0, 0.5 * config.duration))
        state, schedule, t_end = _vehicle_route(rng, config, t_spawn)
        agents.append(_Vehicle(state, schedule, t_spawn=t_spawn, t_end=t_end))

    for i in range(config.n_pedestrians):
        side = rng.choice([-1.0, 1.0])
        offset = float(side * rng.uniform(6.0, 12.0))
        cross_axis = int(rng.integers(0, 2))
        if cross_axis == 1:
            x0, y0 = offset, float(rng.uniform(-6.0, 6.0))
            base = math.pi / 2
        else:
            x0, y0 = float(rng.uniform(-6.0, 6.0)), offset
            base = 0.0
        theta = base + (0.0 if rng.random() < 0.5 else math.pi) + rng.uniform(-0.2, 0.2)
        agents.append(_Pedestrian((x0, y0, float(rng.uniform(0.6, 1.9)), normalize_angle(theta)),
                                  np.random.default_rng([config.seed, 101, i]),
                                  cross_axis=cross_axis, band=(-7.0, 7.0),
                                  period=float(rng.uniform(0.33, 0.47)), phase=float(rng.uniform(0.0, 0.3))))
    return agents, egos


def generate_scenario(config: ScenarioConfig = ScenarioConfig()) -> Scenario:
    """Ground-truth object stream and ego trajectory, deterministic under ``config.seed``."""
    rng = np.random.default_rng([config.seed, 7])
    if config.kind is ScenarioKind.PEDESTRIAN:
        agents, egos = _pedestrian_scenario(config, rng)
    else:
        agents, egos = _intersection_scenario(config, rng)

    objects = []
    for k in range(config.n_frames):
        t = k * config.frame_dt
        for idx, agent in enumerate(agents):
            if agent.t_spawn > t + 1e-9:
                continue
            agent.advance_to(t)
            if t <= agent.t_end:
                x, y, v, th = agent.state
                objects.append(ObjectState(
                    id=idx, frame=k, t=t, x=x, y=y, v=v, theta=th, l=agent.length, w=agent.width,
                    dx=config.pos_margin, dy=config.pos_margin, dv=config.speed_margin))
    return Scenario(config, objects, egos)


def simulate_lidar(objects: Sequence[ObjectState], ego: EgoPose, config: LidarConfig = LidarConfig(),
                   seed: int = 0, return_ids: bool = False):
    """Cast rays from the ego; each ray returns its nearest box hit within range.

    With ``return_ids=True`` also returns the id of the object hit by each point.
    """
    n = config.n_rays
    angles = ego.theta + config.angular_resolution * np.arange(n)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    objs = sorted(objects, key=lambda o: o.id)
    if not objs:
        cloud = PointCloud2D(ego.frame, np.empty((0, 2)))
        return (cloud, np.empty(0, dtype=np.int64)) if return_ids else cloud

    dist = np.vstack([
        ray_box_distances((ego.x, ego.y), dirs, OrientedRegion((o.x, o.y), 0.5 * o.l, 0.5 * o.w, o.theta))
        for o in objs])
    nearest = dist.min(axis=0)
    winner = np.argmax(dist <= nearest + 1e-9, axis=0)
    hit = nearest <= config.max_range
    noise = np.random.default_rng([int(seed), int(ego.frame)]).normal(0.0, 1.0, size=n) * config.range_noise_sigma
    rng_dist = np.where(hit, nearest + noise, 0.0)
    pts = np.column_stack([ego.x + dirs[:, 0] * rng_dist, ego.y + dirs[:, 1] * rng_dist])[hit]
    cloud = PointCloud2D(ego.frame, pts)
    if return_ids:
        ids = np.array([o.id for o in objs], dtype=np.int64)[winner[hit]]
        return cloud, ids
    return cloud


def random_static_scene(n_objects: int, seed: int = 0, radius: float = 40.0, min_gap: float = 3.0,
                        pos_margin: float = 0.03, speed_margin: float = 1.0, frame: int = 0,
                        max_tries: int = 10000) -> List[ObjectState]:
    """Non-overlapping pedestrians and vehicles scattered around an ego at the origin.

    Boxes are kept at least ``min_gap`` apart (by bounding circles) and at
    least 3 m from the ego. Raises RuntimeError if the disc is too crowded.
    """
    rng = np.random.default_rng(seed)
    placed: List[Tuple[float, float, float]] = []
    out: List[ObjectState] = []
    tries = 0
    while len(out) < n_objects:
        tries += 1
        if tries > max_tries:
            raise RuntimeError(f"could only place {len(out)} of {n_objects} objects")
        l, w = VEHICLE_SIZE if rng.random() < 0.4 else PEDESTRIAN_SIZE
        r = 0.5 * math.hypot(l, w)
        rho = rng.uniform(3.0 + r, radius)
        phi = rng.uniform(-math.pi, math.pi)
        x, y = rho * math.cos(phi), rho * math.sin(phi)
        if any(math.hypot(x - px, y - py) < r + pr + min_gap for px, py, pr in placed):
            continue
        placed.append((x, y, r))
        out.append(ObjectState(id=len(out), frame=frame, t=0.0, x=x, y=y, v=0.0,
                               theta=rng.uniform(-math.pi, math.pi), l=l, w=w,
                               dx=pos_margin, dy=pos_margin, dv=speed_margin))
    return out
