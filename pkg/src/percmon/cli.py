"""Command-line pipeline: scenario -> lidar -> inject -> monitor, plus sweep and bench.

Each subcommand reads and writes files under ``--out`` (default ``.``), so the
stages can be run, inspected and replaced independently. On failure a single
JSON line ``{"error": ..., "message": ...}`` is printed to stderr and the
exit code is nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import faults, io
from .config import RunConfig, load_config
from .evaluation import (LATENCY_COLUMNS, METRICS_COLUMNS, World, bench_latency, prepare_frames,
                         run_monitor, score, simulate_world, sweep)
from .exceptions import ConfigError, MonitorError
from .sim import generate_scenario, simulate_lidar

EXIT_CONFIG = 2
EXIT_FAILURE = 1

OBJECTS = "objects.jsonl"
EGO = "ego.jsonl"
CLOUDS = "clouds.csv"
INJECTED = "injected.jsonl"
LEDGER = "ledger.jsonl"
SENSOR = "sensor_verdicts.jsonl"
FN_CELLS = "fn_cells.jsonl"
PLAUSIBILITY = "plausibility_verdicts.jsonl"
METRICS = "metrics.csv"
LATENCY = "latency.csv"


def _path(args, name: str, default: str) -> Path:
    given = getattr(args, name, None)
    return Path(given) if given else Path(args.out) / default


def cmd_scenario(args, cfg: RunConfig) -> List[Path]:
    sc = generate_scenario(cfg.scenario_config())
    objects, ego = _path(args, "objects", OBJECTS), _path(args, "ego", EGO)
    io.write_objects(objects, sc.objects)
    io.write_ego(ego, sc.ego)
    return [objects, ego]


def cmd_lidar(args, cfg: RunConfig) -> List[Path]:
    objects = io.read_objects(_path(args, "objects", OBJECTS))
    egos = io.read_ego(_path(args, "ego", EGO))
    by_frame = {}
    for o in objects:
        by_frame.setdefault(o.frame, []).append(o)
    clouds = [simulate_lidar(by_frame.get(e.frame, []), e, cfg.lidar, cfg.seed) for e in egos]
    out = _path(args, "clouds", CLOUDS)
    io.write_clouds(out, clouds)
    return [out]


def cmd_inject(args, cfg: RunConfig) -> List[Path]:
    objects = io.read_objects(_path(args, "objects", OBJECTS))
    egos = io.read_ego(_path(args, "ego", EGO))
    stream, ledger = faults.apply(objects, cfg.injection_config(), egos)
    injected, led = _path(args, "injected", INJECTED), _path(args, "ledger", LEDGER)
    io.write_objects(injected, stream)
    io.write_ledger(led, ledger)
    return [injected, led]


def cmd_monitor(args, cfg: RunConfig) -> List[Path]:
    gt = io.read_objects(_path(args, "objects", OBJECTS))
    reported = io.read_objects(_path(args, "injected", INJECTED))
    egos = io.read_ego(_path(args, "ego", EGO))
    clouds = io.read_clouds(_path(args, "clouds", CLOUDS))
    params = cfg.monitor_params()
    context = prepare_frames(gt, clouds, egos, params.grid)
    run = run_monitor(gt, reported, clouds, egos, params, context)

    out = Path(args.out)
    verdicts = [run.sensor[f] for f in sorted(run.sensor)]
    written = [out / SENSOR, out / FN_CELLS, out / PLAUSIBILITY]
    io.write_jsonl(written[0], io.sensor_records(verdicts))
    io.write_jsonl(written[1], io.fn_cell_records(verdicts))
    io.write_jsonl(written[2], io.plausibility_records(run.plausibility))
    ledger_path = _path(args, "ledger", LEDGER)
    if args.ledger or ledger_path.exists():
        ledger = io.read_ledger(ledger_path)
        inj = cfg.injection_config()
        kind = ledger[0].kind.value if ledger else inj.kind.value
        magnitude = ledger[0].magnitude if ledger else inj.magnitude
        rate = inj.rate if kind in ("PositionRandom", "SpeedTransient") else float(bool(ledger))
        rows = score(run, ledger, cfg.scenario.kind.value.lower(), kind, magnitude, rate, cfg.monitor.window)
        io.write_table(out / METRICS, METRICS_COLUMNS, (r.as_record() for r in rows))
        written.append(out / METRICS)
    for frame in args.dump_grid or ():
        if frame not in context.grids:
            raise MonitorError(f"no grid for frame {frame}")
        p = out / f"grid_{frame}.csv"
        io.write_grid(p, context.grids[frame])
        written.append(p)
    return written


def _world(args, cfg: RunConfig) -> World:
    if args.objects:
        from .sim import Scenario
        objects = io.read_objects(args.objects)
        egos = io.read_ego(_path(args, "ego", EGO))
        clouds = io.read_clouds(_path(args, "clouds", CLOUDS))
        return World(Scenario(cfg.scenario_config(), objects, egos), clouds, cfg.lidar)
    return simulate_world(cfg.scenario_config(), cfg.lidar)


def cmd_sweep(args, cfg: RunConfig) -> List[Path]:
    rows = sweep(cfg.experiment(), _world(args, cfg), cfg.monitor_params())
    out = _path(args, "metrics", METRICS)
    io.write_table(out, METRICS_COLUMNS, (r.as_record() for r in rows))
    return [out]


def cmd_bench(args, cfg: RunConfig) -> List[Path]:
    world = _world(args, cfg)
    rows = bench_latency(world.scenario.objects, world.clouds, world.scenario.ego, cfg.monitor_params(),
                         cfg.bench.repetitions)
    out = _path(args, "latency", LATENCY)
    io.write_table(out, LATENCY_COLUMNS, (r.as_record() for r in rows))
    return [out]


COMMANDS = {
    "scenario": (cmd_scenario, "generate a ground-truth object stream and ego trajectory", ("objects", "ego")),
    "lidar": (cmd_lidar, "simulate LiDAR scans for an object stream", ("objects", "ego", "clouds")),
    "inject": (cmd_inject, "inject errors into an object stream", ("objects", "ego", "injected", "ledger")),
    "monitor": (cmd_monitor, "run sensor and plausibility checks",
                ("objects", "ego", "clouds", "injected", "ledger")),
    "sweep": (cmd_sweep, "evaluate a grid of injection settings", ("objects", "ego", "clouds", "metrics")),
    "bench": (cmd_bench, "measure per-frame check latency", ("objects", "ego", "clouds", "latency")),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="YAML config with dotted keys")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="global random seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default .)")
    common.add_argument("--set", dest="overrides", action="append", default=argparse.SUPPRESS,
                        metavar="KEY=VALUE", help="override one config key; repeatable")

    parser = argparse.ArgumentParser(prog="percmon", parents=[common],
                                     description="Perception monitor pipeline: simulate, inject, check, evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text, files) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        for f in files:
            p.add_argument(f"--{f}", default=None, help=f"{f} file path")
        if name == "monitor":
            p.add_argument("--dump-grid", type=int, action="append", metavar="FRAME",
                           help="also write the occupancy grid of FRAME as CSV")
    return parser


def _error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("config", None), ("seed", None), ("out", "."), ("overrides", [])):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        cfg = load_config(args.config, args.overrides, args.seed)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        written = COMMANDS[args.command][0](args, cfg)
    except ConfigError as e:
        _error("ConfigError", str(e))
        return EXIT_CONFIG
    except io.IoError as e:
        _error("IoError", str(e))
        return EXIT_FAILURE
    except (MonitorError, ValueError, OSError) as e:
        _error(type(e).__name__, str(e))
        return EXIT_FAILURE
    except Exception as e:  # still report machine-readably
        _error("InternalError", f"{type(e).__name__}: {e}")
        return EXIT_FAILURE
    for p in written:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
