"""Static single-scan occupancy grid built from a 2D point cloud."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .geometry import OrientedRegion, squares_overlap_region
from .types import EgoPose, PointCloud2D


@dataclass(frozen=True, slots=True)
class GridConfig:
    extent: float = 100.0
    cell_size: float = 0.5
    saturation_count: int = 3

    def __post_init__(self):
        if not self.extent > 0 or not self.cell_size > 0:
            raise ValueError("extent and cell_size must be positive")
        ratio = self.extent / self.cell_size
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"extent {self.extent} is not a whole number of {self.cell_size} m cells")
        if int(self.saturation_count) != self.saturation_count or self.saturation_count < 1:
            raise ValueError("saturation_count must be an integer >= 1")

    @property
    def n_cells(self) -> int:
        return int(round(self.extent / self.cell_size))


@dataclass(frozen=True)
class OccupancyGrid:
    """Cell occupancy probabilities; ``cells[ix, iy]`` covers
    ``[origin + i*c, origin + (i+1)*c)`` on each axis."""

    config: GridConfig
    origin: Tuple[float, float]
    cells: np.ndarray
    n_dropped: int = 0
    counts: np.ndarray = field(default=None, repr=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.cells.shape

    def cell_index(self, points: np.ndarray) -> np.ndarray:
        """Integer (ix, iy) per point; may fall outside the grid."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        c = self.config.cell_size
        return np.floor((pts - np.asarray(self.origin)) / c).astype(np.int64)

    def cell_min_corner(self, ix, iy) -> Tuple[np.ndarray, np.ndarray]:
        c = self.config.cell_size
        return (self.origin[0] + np.asarray(ix) * c, self.origin[1] + np.asarray(iy) * c)

    def cell_center(self, ix, iy) -> np.ndarray:
        c = self.config.cell_size
        x0, y0 = self.cell_min_corner(ix, iy)
        return np.column_stack([np.ravel(x0 + 0.5 * c), np.ravel(y0 + 0.5 * c)])

    def nonzero(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        ix, iy = np.nonzero(self.cells)
        return ix, iy, self.cells[ix, iy]


def grid_origin(ego: EgoPose, config: GridConfig) -> Tuple[float, float]:
    """Minimum grid corner: ego minus half the extent, snapped to the cell lattice."""
    c = config.cell_size
    half = 0.5 * config.extent
    return (math.floor((ego.x - half) / c + 1e-9) * c,
            math.floor((ego.y - half) / c + 1e-9) * c)


def build_grid(cloud: PointCloud2D, ego: EgoPose, config: GridConfig = GridConfig()) -> OccupancyGrid:
    if cloud.frame != ego.frame:
        raise ValueError(f"cloud frame {cloud.frame} does not match ego frame {ego.frame}")
    n = config.n_cells
    origin = grid_origin(ego, config)
    pts = cloud.points
    idx = np.floor((pts - np.asarray(origin)) / config.cell_size).astype(np.int64)
    inside = np.all((idx >= 0) & (idx < n), axis=1)
    idx = idx[inside]
    counts = np.bincount(idx[:, 0] * n + idx[:, 1], minlength=n * n).reshape(n, n)
    cells = np.minimum(counts / float(config.saturation_count), 1.0)
    return OccupancyGrid(config, origin, cells, int(len(pts) - inside.sum()), counts)


def occupancy_at(grid: OccupancyGrid, zeta: Tuple[float, float]) -> float:
    """P of the cell containing ``zeta``; 0 outside the grid."""
    ix, iy = grid.cell_index(np.asarray(zeta))[0]
    n = grid.config.n_cells
    if 0 <= ix < n and 0 <= iy < n:
        return float(grid.cells[ix, iy])
    return 0.0


def region_cell_window(grid: OccupancyGrid, region: OrientedRegion):
    """Index ranges of the cells touched by the region's bounding box, clipped."""
    n = grid.config.n_cells
    c = grid.config.cell_size
    xmin, ymin, xmax, ymax = region.bounds()
    ox, oy = grid.origin
    i0 = max(int(math.floor((xmin - ox) / c)), 0)
    i1 = min(int(math.floor((xmax - ox) / c)), n - 1)
    j0 = max(int(math.floor((ymin - oy) / c)), 0)
    j1 = min(int(math.floor((ymax - oy) / c)), n - 1)
    return i0, i1, j0, j1


def region_cells(grid: OccupancyGrid, region: OrientedRegion) -> Tuple[np.ndarray, np.ndarray]:
    """Indices of the cells sharing positive area with the region, row-major."""
    i0, i1, j0, j1 = region_cell_window(grid, region)
    if i0 > i1 or j0 > j1:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    ix, iy = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    ix, iy = ix.ravel(), iy.ravel()
    x0, y0 = grid.cell_min_corner(ix, iy)
    keep = squares_overlap_region(x0, y0, grid.config.cell_size, region)
    return ix[keep], iy[keep]


def cells_in_region(grid: OccupancyGrid, region: OrientedRegion) -> List[Tuple[Tuple[int, int], Tuple[float, float], float]]:
    """(index, center, P) of every cell the region covers, row-major."""
    ix, iy = region_cells(grid, region)
    centers = grid.cell_center(ix, iy)
    return [((int(i), int(j)), (float(cx), float(cy)), float(grid.cells[i, j]))
            for i, j, (cx, cy) in zip(ix, iy, centers)]
