"""scikit-learn style wrappers around the checks.

The checks have no trainable state: ``fit`` validates the hyperparameters and
freezes them into parameter objects, ``predict`` returns one implausibility /
position-error flag per input row. Object tables are either sequences of
ObjectState or float arrays with columns in ``OBJECT_COLUMNS`` order (NaN in
the dtheta column means "use the default heading margin").
"""
from __future__ import annotations

import math
import numbers
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_scalar

from .grid import GridConfig, build_grid
from .io import OBJECT_FIELDS
from .plausibility import PlausibilityParams, check_stream
from .sensor import SensorCheckParams, check_frame
from .types import EgoPose, ObjectState, PointCloud2D

OBJECT_COLUMNS = OBJECT_FIELDS
_INT_COLUMNS = {"frame", "id"}


def as_objects(X) -> List[ObjectState]:
    """Validate an object table and return it as ObjectState rows."""
    if len(X) and isinstance(X[0], ObjectState):
        return list(X)
    arr = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan", ensure_min_samples=0)
    if arr.shape[1] != len(OBJECT_COLUMNS):
        raise ValueError(f"object table needs {len(OBJECT_COLUMNS)} columns {OBJECT_COLUMNS}, got {arr.shape[1]}")
    nan_cols = [c for c, bad in zip(OBJECT_COLUMNS, np.isnan(arr).any(axis=0)) if bad and c != "dtheta"]
    if nan_cols:
        raise ValueError(f"NaN only allowed in dtheta, found in {nan_cols}")
    if (arr[:, OBJECT_COLUMNS.index("v")] < 0).any():
        raise ValueError("speeds must be non-negative")
    out = []
    for row in arr:
        rec = {c: (int(x) if c in _INT_COLUMNS else float(x)) for c, x in zip(OBJECT_COLUMNS, row)}
        if math.isnan(rec["dtheta"]):
            rec["dtheta"] = None
        out.append(ObjectState(**rec))
    return out


def objects_to_array(objects: Sequence[ObjectState]) -> np.ndarray:
    rows = [[np.nan if getattr(o, c) is None else getattr(o, c) for c in OBJECT_COLUMNS] for o in objects]
    return np.asarray(rows, dtype=np.float64).reshape(-1, len(OBJECT_COLUMNS))


def _check_positive(x, name, integer=False):
    return check_scalar(x, name, numbers.Integral if integer else numbers.Real, min_val=0,
                        include_boundaries="neither")


class OccupancyGridBuilder(TransformerMixin, BaseEstimator):
    """Points (n, 2) -> occupancy probabilities on an ego-centred grid."""

    def __init__(self, extent=100.0, cell_size=0.5, saturation_count=3):
        self.extent = extent
        self.cell_size = cell_size
        self.saturation_count = saturation_count

    def fit(self, X=None, y=None):
        _check_positive(self.extent, "extent")
        _check_positive(self.cell_size, "cell_size")
        _check_positive(self.saturation_count, "saturation_count", integer=True)
        self.config_ = GridConfig(float(self.extent), float(self.cell_size), int(self.saturation_count))
        return self

    def transform(self, X, ego: Optional[EgoPose] = None):
        check_is_fitted(self, "config_")
        pts = check_array(X, dtype=np.float64, ensure_min_samples=0).reshape(-1, 2)
        ego = ego or EgoPose(0, 0.0, 0.0, 0.0, 0.0)
        return build_grid(PointCloud2D(ego.frame, pts), ego, self.config_).cells


class PlausibilityCheck(ClassifierMixin, BaseEstimator):
    """Flags object-frames whose motion history violates the CTRA limits."""

    def __init__(self, a_acc=7.0, a_br=-7.0, omega_max=math.radians(90.0) / 0.2,
                 dtheta_default=math.radians(10.0), gamma_plaus=1.0, frame_stride=1):
        self.a_acc = a_acc
        self.a_br = a_br
        self.omega_max = omega_max
        self.dtheta_default = dtheta_default
        self.gamma_plaus = gamma_plaus
        self.frame_stride = frame_stride

    def fit(self, X=None, y=None):
        _check_positive(self.a_acc, "a_acc")
        check_scalar(self.a_br, "a_br", numbers.Real, max_val=0, include_boundaries="neither")
        _check_positive(self.omega_max, "omega_max")
        check_scalar(self.dtheta_default, "dtheta_default", numbers.Real, min_val=0)
        check_scalar(self.gamma_plaus, "gamma_plaus", numbers.Real, min_val=0)
        _check_positive(self.frame_stride, "frame_stride", integer=True)
        self.params_ = PlausibilityParams(self.a_acc, self.a_br, self.omega_max, self.dtheta_default,
                                          self.gamma_plaus)
        self.classes_ = np.array([0, 1])
        return self

    def _verdicts(self, X):
        check_is_fitted(self, "params_")
        objects = as_objects(X)
        by_key = {(v.frame, v.object_id): v for v in check_stream(objects, self.params_, self.frame_stride)}
        return [by_key[o.key] for o in objects]

    def predict(self, X):
        """1 where the object-frame is implausible, aligned with the input rows."""
        return np.array([0 if v.plausible else 1 for v in self._verdicts(X)], dtype=np.int64)

    def transform(self, X):
        """Columns x_hat, y_hat, dx_hat, dy_hat, residual (NaN without history)."""
        rows = [(v.x_hat, v.y_hat, v.dx_hat, v.dy_hat, v.residual if v.has_history else np.nan)
                for v in self._verdicts(X)]
        return np.asarray(rows, dtype=np.float64).reshape(-1, 5)


class SensorCheck(ClassifierMixin, BaseEstimator):
    """Flags reported objects whose position contradicts the LiDAR occupancy grid.

    ``predict`` needs the point clouds (frame -> PointCloud2D or (n, 2) array)
    and ego poses (frame -> EgoPose, or a sequence of poses) of every frame in X.
    """

    def __init__(self, extent=100.0, cell_size=0.5, saturation_count=3, tau_tp=0.8, tau_fn=0.8,
                 delta_safe=0.1, gamma_sens=3.0, r_attr=2.0):
        self.extent = extent
        self.cell_size = cell_size
        self.saturation_count = saturation_count
        self.tau_tp = tau_tp
        self.tau_fn = tau_fn
        self.delta_safe = delta_safe
        self.gamma_sens = gamma_sens
        self.r_attr = r_attr

    def fit(self, X=None, y=None):
        self.grid_ = OccupancyGridBuilder(self.extent, self.cell_size, self.saturation_count).fit().config_
        for name in ("tau_tp", "tau_fn"):
            check_scalar(getattr(self, name), name, numbers.Real, min_val=0, max_val=1)
        for name in ("delta_safe", "gamma_sens", "r_attr"):
            check_scalar(getattr(self, name), name, numbers.Real, min_val=0)
        self.params_ = SensorCheckParams(self.tau_tp, self.tau_fn, self.delta_safe, self.gamma_sens, self.r_attr)
        self.classes_ = np.array([0, 1])
        return self

    def _verdicts(self, X, clouds: Mapping, egos):
        check_is_fitted(self, "params_")
        objects = as_objects(X)
        ego_map: Dict[int, EgoPose] = egos if isinstance(egos, Mapping) else {e.frame: e for e in egos}
        frames: Dict[int, List[ObjectState]] = {}
        for o in objects:
            frames.setdefault(o.frame, []).append(o)
        out = {}
        for f, objs in frames.items():
            if f not in ego_map:
                raise ValueError(f"no ego pose for frame {f}")
            cloud = clouds.get(f)
            if cloud is None:
                cloud = PointCloud2D(f)
            elif not isinstance(cloud, PointCloud2D):
                cloud = PointCloud2D(f, check_array(cloud, dtype=np.float64, ensure_min_samples=0))
            verdict = check_frame(build_grid(cloud, ego_map[f], self.grid_), objs, self.params_, f)
            out.update(((f, ov.object_id), ov) for ov in verdict.objects)
        return [out[o.key] for o in objects]

    def predict(self, X, clouds: Mapping, egos):
        return np.array([int(v.pos_error) for v in self._verdicts(X, clouds, egos)], dtype=np.int64)

    def transform(self, X, clouds: Mapping, egos):
        """Consistency eta per row."""
        return np.array([v.eta for v in self._verdicts(X, clouds, egos)], dtype=np.float64).reshape(-1, 1)
