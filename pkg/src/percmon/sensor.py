"""Sensor checks: verify reported objects against a LiDAR occupancy grid.

An object is a false positive when no cell inside its enlarged footprint is
occupied enough (consistency below ``tau_tp``). A cell is a false-negative
conflict when it is strongly occupied but explained by no reported object
(conflict above ``tau_fn``). A cell counts as covered by a region when the two
share positive area, i.e. the extreme of occupancy over all positions of the
region, which is what makes the diagonal intra-cell shift the worst case.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import OrientedRegion, squares_overlap_region
from .grid import GridConfig, OccupancyGrid, region_cell_window, region_cells
from .types import ObjectState


@dataclass(frozen=True, slots=True)
class SensorCheckParams:
    tau_tp: float = 0.8
    tau_fn: float = 0.8
    delta_safe: float = 0.1
    gamma_sens: float = 3.0
    r_attr: float = 2.0

    def __post_init__(self):
        for name in ("tau_tp", "tau_fn"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if self.delta_safe < 0 or self.gamma_sens < 0 or self.r_attr < 0:
            raise ValueError("delta_safe, gamma_sens and r_attr must be non-negative")


class Classification(str, enum.Enum):
    TRUE_POSITIVE = "TruePositive"
    FALSE_POSITIVE = "FalsePositive"


class Trigger(str, enum.Enum):
    FALSE_POSITIVE = "false_positive"
    FN_ATTRIBUTION = "fn_attribution"
    BOTH = "both"


@dataclass(frozen=True, slots=True)
class ObjectVerdict:
    object_id: int
    eta: float
    classification: Classification
    pos_error: bool
    trigger: Optional[Trigger]
    n_conflict_cells: int = 0


@dataclass(frozen=True)
class SensorVerdict:
    frame: int
    objects: List[ObjectVerdict]
    fn_cells: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))
    fn_kappa: np.ndarray = field(default_factory=lambda: np.empty(0))

    def flagged(self) -> List[int]:
        return [o.object_id for o in self.objects if o.pos_error]


def object_region(o: ObjectState, params: SensorCheckParams = SensorCheckParams()) -> OrientedRegion:
    """Reported footprint enlarged by the safety margin and scaled uncertainty."""
    g = params.gamma_sens
    return OrientedRegion(
        center=(o.x, o.y),
        half_length=0.5 * o.l + params.delta_safe + g * (o.dx + o.dl),
        half_width=0.5 * o.w + params.delta_safe + g * (o.dy + o.dw),
        theta=o.theta,
    )


def coverage(zeta: Tuple[float, float], region: OrientedRegion) -> int:
    return int(region.contains(np.asarray(zeta, dtype=float))[0])


def consistency(grid: OccupancyGrid, region: OrientedRegion) -> float:
    """Highest occupancy over the cells the region covers; 0 if none."""
    ix, iy = region_cells(grid, region)
    if len(ix) == 0:
        return 0.0
    return float(grid.cells[ix, iy].max())


def covered_mask(grid: OccupancyGrid, ix: np.ndarray, iy: np.ndarray,
                 regions: Sequence[OrientedRegion]) -> np.ndarray:
    """For the given cells, whether any region covers them."""
    covered = np.zeros(len(ix), dtype=bool)
    if len(ix) == 0:
        return covered
    c = grid.config.cell_size
    for region in regions:
        i0, i1, j0, j1 = region_cell_window(grid, region)
        cand = ~covered & (ix >= i0) & (ix <= i1) & (iy >= j0) & (iy <= j1)
        if not cand.any():
            continue
        sel = np.flatnonzero(cand)
        x0, y0 = grid.cell_min_corner(ix[sel], iy[sel])
        covered[sel[squares_overlap_region(x0, y0, c, region)]] = True
    return covered


def conflict_map(grid: OccupancyGrid, regions: Sequence[OrientedRegion]) -> Tuple[np.ndarray, np.ndarray]:
    """Occupied cells covered by no region, with their conflict value.

    Returns ``(cells, kappa)``: an (k, 2) index array in row-major order and
    the matching conflict values. Cells with zero conflict are omitted.
    """
    ix, iy, p = grid.nonzero()
    covered = covered_mask(grid, ix, iy, regions)
    keep = ~covered
    return np.column_stack([ix[keep], iy[keep]]), p[keep]


def classify_objects(etas: Sequence[float], params: SensorCheckParams = SensorCheckParams()) -> List[Classification]:
    return [Classification.FALSE_POSITIVE if eta < params.tau_tp else Classification.TRUE_POSITIVE
            for eta in etas]


def classify_cells(kappa: np.ndarray, params: SensorCheckParams = SensorCheckParams()) -> np.ndarray:
    """Boolean mask of false-negative cells (strictly above ``tau_fn``)."""
    return np.asarray(kappa, dtype=float) > params.tau_fn


def detect_position_errors(classes: Sequence[Classification], regions: Sequence[OrientedRegion],
                           fn_centers: np.ndarray,
                           params: SensorCheckParams = SensorCheckParams()) -> List[Tuple[bool, Optional[Trigger], int]]:
    """Per-object (flag, trigger, attributed conflict cells).

    Each false-negative cell is attributed to the object whose region boundary
    is nearest, if within ``r_attr``; exact ties attribute to all tied objects.
    """
    n = len(regions)
    attributed = np.zeros(n, dtype=np.int64)
    fn_centers = np.asarray(fn_centers, dtype=float).reshape(-1, 2)
    if n and len(fn_centers):
        dist = np.vstack([r.distance(fn_centers) for r in regions])
        nearest = dist.min(axis=0)
        winners = (dist <= nearest + 1e-9) & (nearest <= params.r_attr)
        attributed = winners.sum(axis=1)
    out = []
    for k in range(n):
        fp = classes[k] is Classification.FALSE_POSITIVE
        fn = attributed[k] > 0
        if fp and fn:
            trigger = Trigger.BOTH
        elif fp:
            trigger = Trigger.FALSE_POSITIVE
        elif fn:
            trigger = Trigger.FN_ATTRIBUTION
        else:
            trigger = None
        out.append((fp or fn, trigger, int(attributed[k])))
    return out


def check_frame(grid: OccupancyGrid, objects: Sequence[ObjectState],
                params: SensorCheckParams = SensorCheckParams(), frame: Optional[int] = None) -> SensorVerdict:
    """Run every sensor check for the objects reported in one frame."""
    regions = [object_region(o, params) for o in objects]
    etas = [consistency(grid, r) for r in regions]
    classes = classify_objects(etas, params)
    cells, kappa = conflict_map(grid, regions)
    fn = classify_cells(kappa, params)
    fn_cells, fn_kappa = cells[fn], kappa[fn]
    centers = grid.cell_center(fn_cells[:, 0], fn_cells[:, 1]) if len(fn_cells) else np.empty((0, 2))
    flags = detect_position_errors(classes, regions, centers, params)
    verdicts = [ObjectVerdict(o.id, eta, cls, flag, trig, count)
                for o, eta, cls, (flag, trig, count) in zip(objects, etas, classes, flags)]
    if frame is None:
        frame = objects[0].frame if objects else -1
    return SensorVerdict(frame, verdicts, fn_cells, fn_kappa)


def min_detectable_position_error(params: SensorCheckParams, config: GridConfig, o: ObjectState) -> float:
    """Smallest outward position error the sensor checks are guaranteed to flag."""
    border_sigma = math.hypot(o.dx + o.dl, o.dy + o.dw)
    return math.sqrt(2.0) * (config.cell_size + params.delta_safe) + params.gamma_sens * border_sigma
