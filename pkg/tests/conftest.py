import pytest

from percmon.evaluation import simulate_world
from percmon.sim import ScenarioConfig, ScenarioKind


@pytest.fixture(scope="session")
def pedestrian_world():
    return simulate_world(ScenarioConfig(kind=ScenarioKind.PEDESTRIAN, seed=0))


@pytest.fixture(scope="session")
def intersection_world():
    return simulate_world(ScenarioConfig(kind=ScenarioKind.INTERSECTION, n_pedestrians=6, n_vehicles=8, seed=0))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        parts = RESULTS[k]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {d}" for name, _, d in parts)
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} | {detail}")
