import numpy as np
import pytest
from sklearn.base import clone

from percmon.estimators import (OBJECT_COLUMNS, OccupancyGridBuilder, PlausibilityCheck, SensorCheck, as_objects,
                                objects_to_array)
from percmon.faults import inject_permanent_position, inject_speed_error
from percmon.types import EgoPose, ObjectState


def test_object_table_round_trip(pedestrian_world):
    objs = pedestrian_world.scenario.objects[:50]
    X = objects_to_array(objs)
    assert X.shape == (50, len(OBJECT_COLUMNS))
    assert as_objects(X) == objs
    assert as_objects(objs) == objs


def test_object_table_validation():
    X = objects_to_array([ObjectState(id=0, frame=0, t=0.0, x=0.0, y=0.0, v=1.0, theta=0.0, l=1.0, w=1.0)])
    with pytest.raises(ValueError):
        as_objects(X[:, :5])
    bad = X.copy()
    bad[0, OBJECT_COLUMNS.index("v")] = -1.0
    with pytest.raises(ValueError):
        as_objects(bad)
    bad = X.copy()
    bad[0, OBJECT_COLUMNS.index("x")] = np.nan
    with pytest.raises(ValueError):
        as_objects(bad)


def test_params_and_clone():
    est = PlausibilityCheck(gamma_plaus=2.0)
    assert est.get_params()["gamma_plaus"] == 2.0
    assert clone(est).get_params() == est.get_params()
    assert SensorCheck(cell_size=0.2).set_params(tau_tp=0.7).get_params()["tau_tp"] == 0.7


@pytest.mark.parametrize("est", [PlausibilityCheck(a_br=1.0), PlausibilityCheck(frame_stride=0),
                                 SensorCheck(tau_tp=1.5), SensorCheck(cell_size=0.3),
                                 OccupancyGridBuilder(saturation_count=0)])
def test_fit_validates_hyperparameters(est):
    with pytest.raises((ValueError, TypeError)):
        est.fit()


def test_predict_requires_fit():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        PlausibilityCheck().predict(np.zeros((0, len(OBJECT_COLUMNS))))


def test_plausibility_estimator_matches_check(pedestrian_world):
    gt = pedestrian_world.scenario.objects
    stream, ledger = inject_speed_error(gt, 4.0, "Transient", rate=0.1, seed=1)
    est = PlausibilityCheck().fit()
    flags = est.predict(objects_to_array(stream))
    assert flags.shape == (len(stream),)
    assert flags.sum() > len(ledger)
    assert est.predict(objects_to_array(gt)).sum() == 0
    out = est.transform(stream)
    assert out.shape == (len(stream), 5)


def test_sensor_estimator_flags_shifted_objects(pedestrian_world):
    w = pedestrian_world
    frames = set(range(10))
    gt = [o for o in w.scenario.objects if o.frame in frames]
    shifted, _ = inject_permanent_position(gt, 2.0, w.scenario.ego)
    est = SensorCheck().fit()
    clean = est.predict(gt, w.clouds, w.scenario.ego)
    bad = est.predict(shifted, w.clouds, w.scenario.ego)
    assert bad.sum() > clean.sum()
    eta = est.transform(gt, w.clouds, w.scenario.ego)
    assert eta.shape == (len(gt), 1) and ((eta >= 0) & (eta <= 1)).all()


def test_grid_builder():
    g = OccupancyGridBuilder(extent=10.0, cell_size=0.5).fit()
    cells = g.transform(np.array([[1.1, 1.1]] * 3), ego=EgoPose(0, 0.0, 0.0, 0.0, 0.0))
    assert cells.shape == (20, 20) and cells.max() == 1.0 and cells.sum() == 1.0
