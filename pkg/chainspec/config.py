"""
Configuration loading and logging setup.

Config files are `key = value` text with [analysis], [system], [pairs]
and [prolongation] sections, or JSON when the name ends in `.json`.
CLI flags override file values; CHAINSPEC_THREADS overrides threads.
"""

import configparser
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from .epsgraph import RefinementSchedule, schedule_for
from .errors import ConfigError
from .geometry import MetricDescriptor
from .models import AnalysisConfig, parse_point
from .systems import SampleGrid, SystemDef, make_system, sample

HOME_ENV = "CHAINSPEC_HOME"
THREADS_ENV = "CHAINSPEC_THREADS"

logger = logging.getLogger("chainspec")

_LIST_KEYS = {"schedule", "prolong_x", "transitivity_witness"}
_BOOL_KEYS = {"closed_balls"}


def chainspec_home() -> Path:
    return Path(os.environ.get(HOME_ENV) or Path.home() / ".chainspec")


# ── Logging ───────────────────────────────────────────────────────
def setup_logging(level: int = logging.INFO, log_file: bool = True) -> logging.Logger:
    """Diagnostics to standard error and <home>/logs/chainspec.log; stdout stays free for reports."""
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        log_dir = chainspec_home() / "logs"
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
            handlers.append(logging.FileHandler(log_dir / "chainspec.log", encoding="utf-8"))
        except OSError as exc:
            print(f"chainspec: file logging disabled ({exc})", file=sys.stderr)
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(message)s",
        handlers=handlers,
        force=True,
    )
    return logger


# ── Loading ───────────────────────────────────────────────────────
def _coerce(key: str, raw: str) -> Any:
    raw = raw.strip()
    if key in _BOOL_KEYS:
        return raw.lower() in ("1", "true", "yes", "on")
    if key in _LIST_KEYS:
        if key == "schedule" and raw == "default":
            return raw
        return [float(v) for v in raw.replace(";", ",").split(",") if v.strip()]
    return raw


def _from_ini(text: str) -> Dict[str, Any]:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    data: Dict[str, Any] = {}
    if parser.has_section("analysis"):
        for key, raw in parser.items("analysis"):
            data[key] = _coerce(key, raw)
    if parser.has_section("system"):
        params = {}
        for key, raw in parser.items("system"):
            if key == "base":
                data["system"] = raw.strip()
            elif key in ("metric_scale", "metric_warp"):
                data[key] = raw.strip()
            else:
                try:
                    params[key] = float(raw)
                except ValueError:
                    raise ConfigError(f"system parameter {key} = {raw!r} is not numeric") from None
        data["system_params"] = params
    if parser.has_section("pairs"):
        data["pairs"] = [raw.strip() for _, raw in parser.items("pairs")]
    if parser.has_section("prolongation"):
        for key, raw in parser.items("prolongation"):
            if key == "x":
                data["prolong_x"] = list(parse_point(raw))
            elif key == "alpha_max":
                data["alpha_max"] = raw.strip()
            else:
                raise ConfigError(f"unknown prolongation key {key!r}")
    return data


def validate(data: Dict[str, Any]) -> AnalysisConfig:
    try:
        return AnalysisConfig(**data)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors())
        raise ConfigError(f"invalid configuration: {problems}") from None
    except ValueError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> AnalysisConfig:
    data: Dict[str, Any] = {}
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} not found")
        text = p.read_text(encoding="utf-8")
        if p.suffix == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from None
        else:
            data = _from_ini(text)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    env_threads = os.environ.get(THREADS_ENV)
    if env_threads:
        data["threads"] = env_threads
    return validate(data)


# ── Builders ──────────────────────────────────────────────────────
def _table_system(path: Path) -> SystemDef:
    """Finite system from a JSON lookup table {"name", "points", "images"}."""
    try:
        table = json.loads(path.read_text(encoding="utf-8"))
        return SystemDef.from_table(table.get("name", path.stem), table["points"], table["images"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read system table {path}: {exc}") from None


def build_system(cfg: AnalysisConfig) -> SystemDef:
    path = Path(cfg.system)
    if path.suffix == ".json" and path.is_file():
        return _table_system(path)
    params = {k: (int(v) if float(v).is_integer() and k in ("depth", "truncation", "k_max", "line_steps") else v)
              for k, v in cfg.system_params.items()}
    sys_ = make_system(cfg.system, **params)
    if cfg.metric_scale != 1.0 or cfg.metric_warp != 0.0:
        sys_ = sys_.with_metric(MetricDescriptor(kind=sys_.metric.kind, scale=cfg.metric_scale,
                                                 warp=cfg.metric_warp))
    return sys_


def build_grid(cfg: AnalysisConfig, sys_: SystemDef) -> SampleGrid:
    return sample(sys_, cfg.resolution, cfg.point_budget)


def build_schedule(cfg: AnalysisConfig, grid: SampleGrid) -> RefinementSchedule:
    explicit = None if cfg.schedule == "default" else cfg.schedule
    return schedule_for(grid, cfg.schedule_depth, explicit)
