"""Run configuration: flat dotted keys such as ``grid.cell_size``.

Files are YAML; nested mappings are flattened, so ``grid: {cell_size: 0.2}``
and ``grid.cell_size: 0.2`` are equivalent. Command-line ``--set`` overrides
are applied on top of the file. Unknown keys and invalid values raise
ConfigError.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

import yaml

from .evaluation import Experiment, MonitorParams
from .exceptions import ConfigError
from .faults import InjectionConfig
from .grid import GridConfig
from .plausibility import PlausibilityParams
from .sensor import SensorCheckParams
from .sim import LidarConfig, ScenarioConfig


@dataclass(frozen=True)
class MonitorOptions:
    frame_stride: int = 1
    window: int = 2


@dataclass(frozen=True)
class BenchOptions:
    repetitions: int = 10
    objects: int = 30


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    scenario: ScenarioConfig = ScenarioConfig()
    lidar: LidarConfig = LidarConfig()
    grid: GridConfig = GridConfig()
    sensor: SensorCheckParams = SensorCheckParams()
    plausibility: PlausibilityParams = PlausibilityParams()
    inject: InjectionConfig = InjectionConfig()
    monitor: MonitorOptions = MonitorOptions()
    sweep: Experiment = Experiment()
    bench: BenchOptions = BenchOptions()

    def monitor_params(self) -> MonitorParams:
        return MonitorParams(self.grid, self.sensor, self.plausibility, self.monitor.frame_stride)

    def scenario_config(self) -> ScenarioConfig:
        return dataclasses.replace(self.scenario, seed=self.seed)

    def injection_config(self) -> InjectionConfig:
        return dataclasses.replace(self.inject, seed=self.seed)

    def experiment(self) -> Experiment:
        return dataclasses.replace(self.sweep, seed=self.seed, window=self.monitor.window)


# the run seed is global; per-section seed fields are filled from it
_SECTIONS = {f.name: f.default for f in dataclasses.fields(RunConfig) if f.name != "seed"}
_HIDDEN = {"scenario": {"seed"}, "inject": {"seed"}, "sweep": {"seed", "window"}}


def section_keys(section: str) -> Tuple[str, ...]:
    default = _SECTIONS[section]
    return tuple(f.name for f in dataclasses.fields(default) if f.name not in _HIDDEN.get(section, ()))


def known_keys() -> Tuple[str, ...]:
    keys = ["seed"]
    for s in _SECTIONS:
        keys.extend(f"{s}.{k}" for k in section_keys(s))
    return tuple(keys)


def flatten(tree: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key: str, value: Any, default: Any) -> Any:
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            value = [value]
        return tuple(float(x) for x in value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not hasattr(default, "value"):
        if isinstance(value, bool) or not float(value).is_integer():
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def build_config(values: Mapping[str, Any]) -> RunConfig:
    """RunConfig from flat dotted keys; missing keys keep their defaults."""
    known = set(known_keys())
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    per_section: Dict[str, Dict[str, Any]] = {s: {} for s in _SECTIONS}
    seed = 0
    try:
        for key, value in values.items():
            if key == "seed":
                seed = _coerce(key, value, 0)
                continue
            section, name = key.split(".", 1)
            default = getattr(_SECTIONS[section], name)
            per_section[section][name] = _coerce(key, value, default)
        built = {s: dataclasses.replace(_SECTIONS[s], **kw) for s, kw in per_section.items()}
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    return RunConfig(seed=seed, **built)


def parse_override(item: str) -> Tuple[str, Any]:
    """``key=value`` with the value parsed as a YAML scalar or list."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        return key.strip(), yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse value of {key!r}: {e}") from e


def load_config(path: Optional[Path] = None, overrides: Iterable[str] = (), seed: Optional[int] = None) -> RunConfig:
    values: Dict[str, Any] = {}
    if path is not None:
        try:
            tree = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"config {path} is not valid YAML: {e}") from e
        if not isinstance(tree, Mapping):
            raise ConfigError(f"config {path} must be a mapping")
        values.update(flatten(tree))
    for item in overrides:
        key, value = parse_override(item)
        values[key] = value
    if seed is not None:
        values["seed"] = seed
    return build_config(values)


def dump_config(config: RunConfig) -> Dict[str, Any]:
    """Flat key/value view of a RunConfig (enums as their values)."""
    out: Dict[str, Any] = {"seed": config.seed}
    for s in _SECTIONS:
        obj = getattr(config, s)
        for k in section_keys(s):
            v = getattr(obj, k)
            out[f"{s}.{k}"] = v.value if hasattr(v, "value") else (list(v) if isinstance(v, tuple) else v)
    return out
