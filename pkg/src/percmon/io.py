"""Readers and writers for the pipeline's file formats.

Object lists, ego poses, ledgers and verdicts are JSON lines; point clouds,
grid dumps, metrics and latency reports are CSV. Every writer goes through
``atomic_write`` so a crashed run never leaves a half-written artifact.
"""
from __future__ import annotations

import contextlib
import csv
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Sequence, Union

import numpy as np

from .exceptions import MonitorError
from .grid import OccupancyGrid
from .plausibility import PlausibilityVerdict
from .sensor import SensorVerdict
from .types import EgoPose, ErrorKind, InjectedError, ObjectState, PointCloud2D

PathLike = Union[str, os.PathLike]

OBJECT_FIELDS = ("frame", "t", "id", "x", "y", "v", "theta", "l", "w", "dx", "dy", "dv", "dtheta", "dl", "dw")
EGO_FIELDS = ("frame", "t", "x", "y", "theta")


class IoError(MonitorError):
    """A file is missing, malformed or violates its format."""


@contextlib.contextmanager
def atomic_write(path: PathLike, newline: str = "\n"):
    """Yield a text handle; the target is replaced only if the block succeeds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline=newline) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _dump(rec: dict) -> str:
    return json.dumps(rec, separators=(", ", ": "), allow_nan=False)


def _read_jsonl(path: PathLike) -> Iterator[dict]:
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e.strerror}") from e
    with fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise IoError(f"{path}:{n}: invalid JSON ({e.msg})") from e
            if not isinstance(rec, dict):
                raise IoError(f"{path}:{n}: expected a JSON object")
            yield rec


def write_jsonl(path: PathLike, records: Iterable[dict]) -> None:
    with atomic_write(path) as fh:
        for rec in records:
            fh.write(_dump(rec) + "\n")


# object lists

def object_to_record(o: ObjectState) -> dict:
    return {f: getattr(o, f) for f in OBJECT_FIELDS}


def object_from_record(rec: dict) -> ObjectState:
    missing = [f for f in OBJECT_FIELDS if f not in rec and f != "dtheta"]
    if missing:
        raise IoError(f"object record lacks fields {missing}")
    extra = set(rec) - set(OBJECT_FIELDS)
    if extra:
        raise IoError(f"object record has unknown fields {sorted(extra)}")
    if rec["v"] < 0:
        raise IoError(f"object {rec['id']} at frame {rec['frame']}: speed must be non-negative")
    try:
        return ObjectState(**{f: rec.get(f) for f in OBJECT_FIELDS})
    except (TypeError, ValueError) as e:
        raise IoError(f"object {rec.get('id')} at frame {rec.get('frame')}: {e}") from e


def write_objects(path: PathLike, objects: Iterable[ObjectState]) -> None:
    write_jsonl(path, (object_to_record(o) for o in objects))


def read_objects(path: PathLike) -> List[ObjectState]:
    return [object_from_record(r) for r in _read_jsonl(path)]


def write_ego(path: PathLike, poses: Iterable[EgoPose]) -> None:
    write_jsonl(path, ({f: getattr(e, f) for f in EGO_FIELDS} for e in poses))


def read_ego(path: PathLike) -> List[EgoPose]:
    out = []
    for r in _read_jsonl(path):
        try:
            out.append(EgoPose(**{f: r[f] for f in EGO_FIELDS}))
        except KeyError as e:
            raise IoError(f"{path}: ego record lacks field {e}") from e
    return out


# point clouds

def write_clouds(path: PathLike, clouds: Iterable[PointCloud2D]) -> None:
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("frame", "x", "y"))
        for c in clouds:
            for x, y in c.points:
                w.writerow((c.frame, repr(float(x)), repr(float(y))))


def read_clouds(path: PathLike) -> Dict[int, PointCloud2D]:
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            body = fh.read()
    except OSError as e:
        raise IoError(f"cannot read point cloud {path}: {e.strerror}") from e
    if header != "frame,x,y":
        raise IoError(f"{path}: expected header 'frame,x,y', got {header!r}")
    if not body.strip():
        return {}
    try:
        data = np.loadtxt(body.splitlines(), delimiter=",", ndmin=2)
    except ValueError as e:
        raise IoError(f"cannot parse point cloud {path}: {e}") from e
    if data.shape[1] != 3:
        raise IoError(f"{path}: expected 3 columns")
    frames = data[:, 0].astype(np.int64)
    out = {}
    for f in np.unique(frames):
        try:
            out[int(f)] = PointCloud2D(int(f), data[frames == f, 1:3])
        except ValueError as e:
            raise IoError(f"{path}: frame {f}: {e}") from e
    return out


# injection ledger

def ledger_to_record(e: InjectedError) -> dict:
    rec = {"frame": e.frame, "object_id": e.object_id, "kind": e.kind.value, "magnitude": e.magnitude}
    if e.shift is not None:
        rec["applied_shift"] = list(e.shift)
    if e.dv_applied is not None:
        rec["dv_applied"] = e.dv_applied
    rec["clamped"] = e.clamped
    return rec


def ledger_from_record(rec: dict) -> InjectedError:
    try:
        shift = rec.get("applied_shift")
        return InjectedError(frame=rec["frame"], object_id=rec["object_id"], kind=ErrorKind(rec["kind"]),
                             magnitude=rec["magnitude"], shift=None if shift is None else tuple(shift),
                             dv_applied=rec.get("dv_applied"), clamped=bool(rec.get("clamped", False)))
    except (KeyError, ValueError, TypeError) as e:
        raise IoError(f"bad ledger record {rec}: {e}") from e


def write_ledger(path: PathLike, ledger: Iterable[InjectedError]) -> None:
    write_jsonl(path, (ledger_to_record(e) for e in ledger))


def read_ledger(path: PathLike) -> List[InjectedError]:
    return [ledger_from_record(r) for r in _read_jsonl(path)]


# verdicts

def sensor_records(verdicts: Iterable[SensorVerdict]) -> Iterator[dict]:
    for v in verdicts:
        for ov in v.objects:
            yield {"frame": int(v.frame), "object_id": int(ov.object_id), "eta": float(ov.eta),
                   "class": ov.classification.value, "pos_error": bool(ov.pos_error), "trigger": None if ov.trigger is None else ov.trigger.value}


def fn_cell_records(verdicts: Iterable[SensorVerdict]) -> Iterator[dict]:
    for v in verdicts:
        for (ix, iy), k in zip(v.fn_cells, v.fn_kappa):
            yield {"frame": v.frame, "ix": int(ix), "iy": int(iy), "kappa": float(k)}


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)


def plausibility_records(verdicts: Iterable[PlausibilityVerdict]) -> Iterator[dict]:
    for v in verdicts:
        yield {"frame": int(v.frame), "object_id": int(v.object_id), "plausible": bool(v.plausible),
               "violated": sorted(c.value for c in v.violated), "residual": _finite_or_none(v.residual),
               "x_hat": _finite_or_none(v.x_hat), "y_hat": _finite_or_none(v.y_hat),
               "dx_hat": _finite_or_none(v.dx_hat), "dy_hat": _finite_or_none(v.dy_hat)}


def write_grid(path: PathLike, grid: OccupancyGrid) -> None:
    ix, iy, p = grid.nonzero()
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("ix", "iy", "p"))
        for row in zip(ix.tolist(), iy.tolist(), p.tolist()):
            w.writerow((row[0], row[1], repr(row[2])))


def write_table(path: PathLike, columns: Sequence[str], records: Iterable[dict]) -> None:
    """CSV with a fixed column order; floats are written with full precision."""
    with atomic_write(path, newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n", extrasaction="raise")
        w.writeheader()
        for rec in records:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})


def read_table(path: PathLike) -> List[dict]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as e:
        raise IoError(f"cannot read {path}: {e.strerror}") from e
