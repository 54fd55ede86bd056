"""Fault injection into object streams, with a ground-truth ledger.

Random decisions use one RNG substream per (seed, salt, frame, object id), so
results do not depend on processing order.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DegenerateGeometry
from .types import EgoPose, ErrorKind, InjectedError, ObjectState

_SALT = {
    ErrorKind.POSITION_RANDOM: 11,
    ErrorKind.SPEED_TRANSIENT: 23,
    ErrorKind.NOISE: 37,
}


@dataclass(frozen=True, slots=True)
class InjectionConfig:
    kind: ErrorKind = ErrorKind.POSITION_PERMANENT
    magnitude: float = 0.0
    rate: float = 0.1
    noise_sigma: float = 0.0
    seed: int = 0
    inward: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", ErrorKind(self.kind))
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate must lie in [0, 1], got {self.rate}")
        if self.magnitude < 0 or self.noise_sigma < 0:
            raise ValueError("magnitude and noise_sigma must be non-negative")


def substream(seed: int, kind: ErrorKind, frame: int, object_id: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), _SALT[kind], int(frame), int(object_id)])


def _ego_lookup(ego):
    """Frame -> ego pose, from a single pose, a mapping or a pose sequence."""
    if isinstance(ego, EgoPose):
        return lambda frame: ego
    if not isinstance(ego, Mapping):
        ego = {e.frame: e for e in ego}
    return ego.__getitem__


def _radial_shift(o: ObjectState, ego: EgoPose, magnitude: float, inward: bool) -> Optional[Tuple[float, float]]:
    rx, ry = o.x - ego.x, o.y - ego.y
    r = math.hypot(rx, ry)
    if r < 1e-9:
        warnings.warn(f"object {o.id} coincides with the ego at frame {o.frame}; skipped", DegenerateGeometry)
        return None
    sign = -1.0 if inward else 1.0
    return sign * magnitude * rx / r, sign * magnitude * ry / r


def _shift_positions(stream, magnitude, ego, kind, select, inward):
    ego_at = _ego_lookup(ego)
    out, ledger = [], []
    for o in stream:
        if not select(o):
            out.append(o)
            continue
        shift = _radial_shift(o, ego_at(o.frame), magnitude, inward)
        if shift is None:
            out.append(o)
            continue
        out.append(replace(o, x=o.x + shift[0], y=o.y + shift[1]))
        ledger.append(InjectedError(o.frame, o.id, kind, magnitude, shift=shift))
    return out, ledger


def inject_permanent_position(stream: Iterable[ObjectState], magnitude: float, ego,
                              inward: bool = False) -> Tuple[List[ObjectState], List[InjectedError]]:
    """Shift every object-frame radially away from the ego by ``magnitude``.

    ``ego`` is a single pose or per-frame poses. ``inward=True`` shifts toward
    the ego instead.
    """
    if magnitude < 0:
        raise ValueError("magnitude must be non-negative")
    return _shift_positions(stream, magnitude, ego, ErrorKind.POSITION_PERMANENT, lambda o: True, inward)


def inject_random_position(stream: Iterable[ObjectState], magnitude: float, rate: float, seed: int, ego,
                           inward: bool = False) -> Tuple[List[ObjectState], List[InjectedError]]:
    if magnitude < 0:
        raise ValueError("magnitude must be non-negative")
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    kind = ErrorKind.POSITION_RANDOM

    def select(o):
        return substream(seed, kind, o.frame, o.id).random() < rate

    return _shift_positions(stream, magnitude, ego, kind, select, inward)


def inject_speed_error(stream: Iterable[ObjectState], magnitude: float, mode: str = "Permanent",
                       rate: float = 0.1, seed: int = 0,
                       sign: float = 1.0) -> Tuple[List[ObjectState], List[InjectedError]]:
    """Add ``sign * magnitude`` to the reported speed.

    ``mode="Permanent"`` hits every object-frame; ``mode="Transient"`` hits each
    object-frame independently with probability ``rate``. Positions are left
    untouched. Speeds that would turn negative are clamped to zero.
    """
    if magnitude < 0:
        raise ValueError("magnitude must be non-negative")
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    if mode in ("Permanent", ErrorKind.SPEED_PERMANENT):
        kind = ErrorKind.SPEED_PERMANENT
    elif mode in ("Transient", ErrorKind.SPEED_TRANSIENT):
        kind = ErrorKind.SPEED_TRANSIENT
    else:
        raise ValueError(f"unknown speed error mode {mode!r}")

    out, ledger = [], []
    for o in stream:
        if kind is ErrorKind.SPEED_TRANSIENT and not substream(seed, kind, o.frame, o.id).random() < rate:
            out.append(o)
            continue
        v = o.v + sign * magnitude
        clamped = v < 0
        if clamped:
            v = 0.0
        out.append(replace(o, v=v))
        ledger.append(InjectedError(o.frame, o.id, kind, magnitude, dv_applied=v - o.v, clamped=clamped))
    return out, ledger


def add_gaussian_noise(stream: Iterable[ObjectState], sigma: float, seed: int = 0) -> List[ObjectState]:
    """Perturb positions with N(0, sigma^2) per axis and widen dx, dy by sigma."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return list(stream)
    out = []
    for o in stream:
        nx, ny = substream(seed, ErrorKind.NOISE, o.frame, o.id).normal(0.0, sigma, size=2)
        out.append(replace(o, x=o.x + nx, y=o.y + ny, dx=o.dx + sigma, dy=o.dy + sigma))
    return out


def apply(stream: Sequence[ObjectState], config: InjectionConfig, ego) -> Tuple[List[ObjectState], List[InjectedError]]:
    """Apply one configured error model (after optional noise)."""
    stream = add_gaussian_noise(stream, config.noise_sigma, config.seed)
    kind = config.kind
    if kind is ErrorKind.POSITION_PERMANENT:
        return inject_permanent_position(stream, config.magnitude, ego, config.inward)
    if kind is ErrorKind.POSITION_RANDOM:
        return inject_random_position(stream, config.magnitude, config.rate, config.seed, ego, config.inward)
    if kind is ErrorKind.SPEED_PERMANENT:
        return inject_speed_error(stream, config.magnitude, "Permanent", seed=config.seed)
    if kind is ErrorKind.SPEED_TRANSIENT:
        return inject_speed_error(stream, config.magnitude, "Transient", config.rate, config.seed)
    return list(stream), []
