"""Oriented rectangles and the vectorized tests built on them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

# positive-area overlap threshold; touching boundaries do not count
_OVERLAP_EPS = 1e-12
_INSIDE_EPS = 1e-9


@dataclass(frozen=True, slots=True)
class OrientedRegion:
    """Rectangle centered at ``center`` with its length axis along ``theta``."""

    center: Tuple[float, float]
    half_length: float
    half_width: float
    theta: float

    def __post_init__(self):
        if self.half_length < 0 or self.half_width < 0:
            raise ValueError("half extents must be non-negative")

    @property
    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([c, s]), np.array([-s, c])

    def corners(self) -> np.ndarray:
        u, n = self.axes
        ctr = np.asarray(self.center, dtype=float)
        hl, hw = self.half_length, self.half_width
        return np.array([ctr + hl * u + hw * n, ctr - hl * u + hw * n,
                         ctr - hl * u - hw * n, ctr + hl * u - hw * n])

    def bounds(self) -> Tuple[float, float, float, float]:
        """Axis-aligned bounding box as (xmin, ymin, xmax, ymax)."""
        c, s = abs(math.cos(self.theta)), abs(math.sin(self.theta))
        ex = self.half_length * c + self.half_width * s
        ey = self.half_length * s + self.half_width * c
        cx, cy = self.center
        return cx - ex, cy - ey, cx + ex, cy + ey

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """Express world points in the region frame (length axis first)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2) - np.asarray(self.center)
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.column_stack([pts[:, 0] * c + pts[:, 1] * s,
                                -pts[:, 0] * s + pts[:, 1] * c])

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Closed membership test for an (n, 2) array of points."""
        local = self.to_local(points)
        return ((np.abs(local[:, 0]) <= self.half_length + _INSIDE_EPS)
                & (np.abs(local[:, 1]) <= self.half_width + _INSIDE_EPS))

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from each point to the region (0 inside)."""
        local = np.abs(self.to_local(points))
        ox = np.maximum(local[:, 0] - self.half_length, 0.0)
        oy = np.maximum(local[:, 1] - self.half_width, 0.0)
        return np.hypot(ox, oy)


def squares_overlap_region(x0: np.ndarray, y0: np.ndarray, size: float,
                           region: OrientedRegion) -> np.ndarray:
    """Positive-area overlap of axis-aligned squares with an oriented region.

    ``x0, y0`` are the minimum corners of the squares. Separating-axis test
    over the two world axes and the two region axes.
    """
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    xmin, ymin, xmax, ymax = region.bounds()
    ok = ((np.minimum(x0 + size, xmax) - np.maximum(x0, xmin) > _OVERLAP_EPS)
          & (np.minimum(y0 + size, ymax) - np.maximum(y0, ymin) > _OVERLAP_EPS))

    half = 0.5 * size
    cx = x0 + half - region.center[0]
    cy = y0 + half - region.center[1]
    for axis, extent in zip(region.axes, (region.half_length, region.half_width)):
        proj = cx * axis[0] + cy * axis[1]
        radius = half * (abs(axis[0]) + abs(axis[1]))
        lo = np.maximum(proj - radius, -extent)
        hi = np.minimum(proj + radius, extent)
        ok &= hi - lo > _OVERLAP_EPS
    return ok


def ray_box_distances(origin: Tuple[float, float], directions: np.ndarray,
                      region: OrientedRegion) -> np.ndarray:
    """Distance along each unit ray to the first hit of a closed rectangle.

    Slab test in the rectangle frame. Rays that miss, or start inside the
    rectangle, get ``inf``.
    """
    local_o = region.to_local(np.asarray(origin, dtype=float))[0]
    c, s = math.cos(region.theta), math.sin(region.theta)
    dirs = np.asarray(directions, dtype=float)
    dl = np.column_stack([dirs[:, 0] * c + dirs[:, 1] * s,
                          -dirs[:, 0] * s + dirs[:, 1] * c])
    t_near = np.full(len(dirs), -np.inf)
    t_far = np.full(len(dirs), np.inf)
    miss = np.zeros(len(dirs), dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k, h in enumerate((region.half_length, region.half_width)):
            d = dl[:, k]
            o = local_o[k]
            parallel = np.abs(d) < 1e-15
            miss |= parallel & (np.abs(o) > h)
            t1 = (-h - o) / d
            t2 = (h - o) / d
            lo = np.where(parallel, -np.inf, np.minimum(t1, t2))
            hi = np.where(parallel, np.inf, np.maximum(t1, t2))
            t_near = np.maximum(t_near, lo)
            t_far = np.minimum(t_far, hi)
    hit = ~miss & (t_near <= t_far) & (t_near > 0)
    return np.where(hit, t_near, np.inf)
