"""Run the monitor over injected streams and score it against the injection ledger."""
from __future__ import annotations

import enum
import time
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from . import faults
from .exceptions import FrameMismatch
from .geometry import OrientedRegion
from .grid import GridConfig, OccupancyGrid, build_grid
from .plausibility import PlausibilityParams, PlausibilityVerdict, check_stream
from .sensor import SensorCheckParams, SensorVerdict, check_frame
from .sim import LidarConfig, Scenario, ScenarioConfig, generate_scenario, simulate_lidar
from .types import EgoPose, ErrorKind, InjectedError, ObjectState, PointCloud2D

Key = Tuple[int, int]  # (frame, object id)

# points farther than this from every ground-truth box are not attributed to any object
_POINT_ATTRIBUTION_TOL = 0.15


class Check(str, enum.Enum):
    SENSOR = "Sensor"
    PLAUSIBILITY = "Plausibility"
    COMBINED = "Combined"


@dataclass(frozen=True)
class MonitorParams:
    grid: GridConfig = GridConfig()
    sensor: SensorCheckParams = SensorCheckParams()
    plausibility: PlausibilityParams = PlausibilityParams()
    frame_stride: int = 1


@dataclass
class FrameContext:
    """Per-frame artifacts that depend only on the ground-truth world."""

    egos: Dict[int, EgoPose]
    grids: Dict[int, OccupancyGrid]
    observable: Set[Key]


@dataclass
class MonitorRun:
    sensor: Dict[int, SensorVerdict]
    plausibility: List[PlausibilityVerdict]
    flags: Dict[Check, Set[Key]]
    observable: Set[Key]
    object_frames: Set[Key]


def group_by_frame(stream: Iterable[ObjectState]) -> Dict[int, List[ObjectState]]:
    out: Dict[int, List[ObjectState]] = defaultdict(list)
    for o in stream:
        out[o.frame].append(o)
    return dict(out)


def observable_objects(objects: Sequence[ObjectState], cloud: PointCloud2D, grid: OccupancyGrid) -> Set[int]:
    """Ids of objects whose own returns fill at least one cell to saturation.

    Points are attributed to the nearest ground-truth box within a small
    tolerance. Objects below this bar (fully or mostly occluded, or too far
    for the scan density) cannot be confirmed by the grid at all.
    """
    if not objects or len(cloud) == 0:
        return set()
    pts = cloud.points
    dist = np.vstack([OrientedRegion((o.x, o.y), 0.5 * o.l, 0.5 * o.w, o.theta).distance(pts) for o in objects])
    owner = dist.argmin(axis=0)
    owned = dist[owner, np.arange(len(pts))] <= _POINT_ATTRIBUTION_TOL
    idx = grid.cell_index(pts)
    n = grid.config.n_cells
    inside = owned & np.all((idx >= 0) & (idx < n), axis=1)
    keys = owner[inside] * (n * n) + idx[inside, 0] * n + idx[inside, 1]
    uniq, counts = np.unique(keys, return_counts=True)
    full = uniq[counts >= grid.config.saturation_count] // (n * n)
    return {objects[int(k)].id for k in np.unique(full)}


def prepare_frames(gt_stream: Sequence[ObjectState], clouds: Mapping[int, PointCloud2D],
                   egos: Iterable[EgoPose], grid_config: GridConfig = GridConfig()) -> FrameContext:
    ego_map = egos if isinstance(egos, Mapping) else {e.frame: e for e in egos}
    by_frame = group_by_frame(gt_stream)
    missing = set(by_frame) - set(ego_map)
    if missing:
        raise FrameMismatch(f"no ego pose for frames {sorted(missing)[:5]}")
    grids, observable = {}, set()
    for frame, ego in ego_map.items():
        cloud = clouds.get(frame) or PointCloud2D(frame)
        grid = build_grid(cloud, ego, grid_config)
        grids[frame] = grid
        for oid in observable_objects(by_frame.get(frame, []), cloud, grid):
            observable.add((frame, oid))
    return FrameContext(dict(ego_map), grids, observable)


def run_monitor(gt_stream: Sequence[ObjectState], injected_stream: Sequence[ObjectState],
                clouds: Mapping[int, PointCloud2D], egos, params: MonitorParams = MonitorParams(),
                context: Optional[FrameContext] = None) -> MonitorRun:
    """Sensor and plausibility verdicts for every reported object-frame.

    Sensor checks compare the reported (injected) objects with the grid built
    from ``clouds``; plausibility checks use consecutive reported states. The
    ground-truth stream only serves to label which objects the LiDAR observed.
    """
    gt_keys = {o.key for o in gt_stream}
    inj_keys = {o.key for o in injected_stream}
    if gt_keys != inj_keys:
        diff = sorted(gt_keys ^ inj_keys)[:5]
        raise FrameMismatch(f"ground-truth and reported streams disagree on object-frames, e.g. {diff}")
    if context is None:
        context = prepare_frames(gt_stream, clouds, egos, params.grid)

    reported = group_by_frame(injected_stream)
    sensor = {}
    flags = {c: set() for c in Check}
    for frame in sorted(context.grids):
        objs = reported.get(frame, [])
        verdict = check_frame(context.grids[frame], objs, params.sensor, frame)
        sensor[frame] = verdict
        flags[Check.SENSOR].update((frame, oid) for oid in verdict.flagged())

    plaus = check_stream(injected_stream, params.plausibility, params.frame_stride)
    flags[Check.PLAUSIBILITY].update((v.frame, v.object_id) for v in plaus if not v.plausible)
    flags[Check.COMBINED] = flags[Check.SENSOR] | flags[Check.PLAUSIBILITY]
    return MonitorRun(sensor, plaus, flags, set(context.observable), inj_keys)


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    fn: int
    excluded: int = 0
    duplicates: int = 0

    @property
    def precision(self) -> float:
        return ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return ratio(self.tp, self.tp + self.fn)

    @property
    def raw_recall(self) -> float:
        """Recall counting out-of-scope ledger entries as misses."""
        return ratio(self.tp, self.tp + self.fn + self.excluded)


def ratio(num: int, den: int) -> float:
    return 1.0 if den == 0 else num / den


def match_detections(flags: Iterable[Key], ledger: Iterable[InjectedError], window: int = 2,
                     scope: Optional[Set[Key]] = None) -> MatchResult:
    """Match flagged object-frames to ledger entries.

    A flag at frame f matches the earliest unmatched entry of the same object
    with frame in [f - window, f]. Flags that find no entry but follow an
    already-matched entry of the same object within the window are duplicate
    detections of that error, not false positives. With ``scope``, entries and
    flags outside it are set aside; excluded entries are counted separately.
    """
    entries: Dict[int, List[int]] = defaultdict(list)
    excluded = 0
    for e in ledger:
        if scope is not None and e.key not in scope:
            excluded += 1
            continue
        entries[e.object_id].append(e.frame)
    by_obj: Dict[int, List[int]] = defaultdict(list)
    for frame, oid in flags:
        if scope is None or (frame, oid) in scope:
            by_obj[oid].append(frame)

    tp = fp = dup = 0
    total = sum(len(v) for v in entries.values())
    for oid, flag_frames in by_obj.items():
        ent = sorted(entries.get(oid, []))
        used = [False] * len(ent)
        for f in sorted(flag_frames):
            hit = None
            near = False
            for i, ef in enumerate(ent):
                if ef > f:
                    break
                if f - ef <= window:
                    near = True
                    if not used[i]:
                        hit = i
                        break
            if hit is not None:
                used[hit] = True
                tp += 1
            elif near:
                dup += 1
            else:
                fp += 1
    return MatchResult(tp, fp, total - tp, excluded, dup)


METRICS_COLUMNS = ("scenario", "check", "error_kind", "magnitude", "rate", "tp", "fp", "fn",
                   "precision", "recall", "false_alarm_rate")


@dataclass(frozen=True)
class MetricsRow:
    scenario: str
    check: Check
    error_kind: str
    magnitude: float
    rate: float
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    false_alarm_rate: float
    excluded: int = 0
    raw_recall: float = 1.0

    def as_record(self) -> dict:
        rec = {c: getattr(self, c) for c in METRICS_COLUMNS}
        rec["check"] = Check(self.check).value
        return rec


def score(run: MonitorRun, ledger: Sequence[InjectedError], scenario: str, error_kind: str,
          magnitude: float, rate: float, window: int = 2) -> List[MetricsRow]:
    """One metrics row per check.

    Sensor scoring is restricted to observed object-frames. The combined check
    counts sensor flags only on observed object-frames, since an unobserved
    object cannot be confirmed by the grid whether or not it is faulty.
    """
    ledger_keys = {e.key for e in ledger}
    rows = []
    for check in Check:
        scope = run.observable if check is Check.SENSOR else None
        flags = run.flags[check]
        if check is Check.COMBINED:
            flags = (run.flags[Check.SENSOR] & run.observable) | run.flags[Check.PLAUSIBILITY]
        m = match_detections(flags, ledger, window, scope)
        population = run.object_frames if scope is None else run.object_frames & scope
        clean = len(population - ledger_keys)
        rows.append(MetricsRow(scenario, check, error_kind, magnitude, rate, m.tp, m.fp, m.fn,
                               m.precision, m.recall, 0.0 if clean == 0 else m.fp / clean,
                               m.excluded, m.raw_recall))
    return rows


@dataclass
class World:
    """A generated scenario with its simulated LiDAR scans."""

    scenario: Scenario
    clouds: Dict[int, PointCloud2D]
    lidar: LidarConfig

    @property
    def name(self) -> str:
        return self.scenario.config.kind.value.lower()


def simulate_world(config: ScenarioConfig = ScenarioConfig(), lidar: LidarConfig = LidarConfig()) -> World:
    scenario = generate_scenario(config)
    frames = scenario.frames()
    clouds = {e.frame: simulate_lidar(frames[e.frame], e, lidar, config.seed) for e in scenario.ego}
    return World(scenario, clouds, lidar)


SWEEP_KINDS = ("noise", "position_permanent", "position_random", "speed_permanent", "speed_transient")


@dataclass(frozen=True)
class Experiment:
    """A grid of injection settings evaluated on one simulated world.

    ``kind`` selects what ``values`` sweep: the noise sigma for ``noise``, the
    error magnitude otherwise. ``cell_sizes`` optionally repeats the sweep for
    several grid resolutions.
    """

    kind: str = "noise"
    values: Tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4)
    rate: float = 0.1
    noise_sigma: float = 0.0
    cell_sizes: Tuple[float, ...] = ()
    seed: int = 0
    window: int = 2

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValueError(f"unknown sweep kind {self.kind!r}; expected one of {SWEEP_KINDS}")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")


def inject(kind: str, stream: Sequence[ObjectState], value: float, exp: Experiment,
           egos: Sequence[EgoPose]) -> Tuple[List[ObjectState], List[InjectedError], str, float]:
    """Apply one sweep point; returns (stream, ledger, error-kind label, rate)."""
    if kind == "noise":
        return faults.add_gaussian_noise(stream, value, exp.seed), [], ErrorKind.NOISE.value, 0.0
    stream = faults.add_gaussian_noise(stream, exp.noise_sigma, exp.seed)
    if kind == "position_permanent":
        out, led = faults.inject_permanent_position(stream, value, egos)
        return out, led, ErrorKind.POSITION_PERMANENT.value, 1.0
    if kind == "position_random":
        out, led = faults.inject_random_position(stream, value, exp.rate, exp.seed, egos)
        return out, led, ErrorKind.POSITION_RANDOM.value, exp.rate
    if kind == "speed_permanent":
        out, led = faults.inject_speed_error(stream, value, "Permanent", seed=exp.seed)
        return out, led, ErrorKind.SPEED_PERMANENT.value, 1.0
    out, led = faults.inject_speed_error(stream, value, "Transient", exp.rate, exp.seed)
    return out, led, ErrorKind.SPEED_TRANSIENT.value, exp.rate


def sweep(experiment: Experiment, world: World, params: MonitorParams = MonitorParams()) -> List[MetricsRow]:
    """Evaluate every sweep point and return one metrics row per point and check."""
    gt = world.scenario.objects
    egos = world.scenario.ego
    cell_sizes = experiment.cell_sizes or (params.grid.cell_size,)
    rows = []
    for cell in cell_sizes:
        grid_cfg = replace(params.grid, cell_size=cell)
        p = replace(params, grid=grid_cfg)
        context = prepare_frames(gt, world.clouds, egos, grid_cfg)
        label = world.name if not experiment.cell_sizes else f"{world.name}/c{cell:g}"
        for value in experiment.values:
            stream, ledger, kind, rate = inject(experiment.kind, gt, value, experiment, egos)
            run = run_monitor(gt, stream, world.clouds, egos, p, context)
            rows.extend(score(run, ledger, label, kind, value, rate, experiment.window))
    return rows


LATENCY_COLUMNS = ("check", "mean_ms", "p50_ms", "p99_ms", "frames")


@dataclass(frozen=True)
class LatencyRow:
    check: str
    mean_ms: float
    p50_ms: float
    p99_ms: float
    frames: int

    def as_record(self) -> dict:
        return {c: getattr(self, c) for c in LATENCY_COLUMNS}


def _summarize(check: str, samples: List[float], frames: int) -> LatencyRow:
    arr = np.asarray(samples) * 1e3
    if len(arr) == 0:
        return LatencyRow(check, 0.0, 0.0, 0.0, frames)
    return LatencyRow(check, float(arr.mean()), float(np.percentile(arr, 50)), float(np.percentile(arr, 99)), frames)


def bench_latency(stream: Sequence[ObjectState], clouds: Mapping[int, PointCloud2D], egos,
                  params: MonitorParams = MonitorParams(), repetitions: int = 10) -> List[LatencyRow]:
    """Wall-clock time per frame of (grid build + sensor checks) and of plausibility checks.

    Single-threaded; I/O and stream grouping are excluded from the timings.
    """
    if repetitions < 10:
        raise ValueError("repetitions must be at least 10")
    ego_map = egos if isinstance(egos, Mapping) else {e.frame: e for e in egos}
    by_frame = group_by_frame(stream)
    frames = sorted(ego_map)
    pairs = {}
    for f in frames:
        prev = {o.id: o for o in by_frame.get(f - params.frame_stride, [])}
        pairs[f] = [(prev.get(o.id), o) for o in by_frame.get(f, [])]
    empty = {f: PointCloud2D(f) for f in frames if f not in clouds}

    from .plausibility import check_plausibility
    sensor_t, plaus_t = [], []
    clock = time.perf_counter
    for _ in range(repetitions):
        for f in frames:
            cloud = clouds.get(f) or empty[f]
            objs = by_frame.get(f, [])
            t0 = clock()
            grid = build_grid(cloud, ego_map[f], params.grid)
            check_frame(grid, objs, params.sensor, f)
            t1 = clock()
            for prev, curr in pairs[f]:
                if prev is not None:
                    check_plausibility(prev, curr, params.plausibility)
            t2 = clock()
            sensor_t.append(t1 - t0)
            plaus_t.append(t2 - t1)
    return [_summarize(Check.SENSOR.value, sensor_t, len(frames)),
            _summarize(Check.PLAUSIBILITY.value, plaus_t, len(frames))]
