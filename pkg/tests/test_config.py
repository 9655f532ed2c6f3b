import json
import logging

import pytest

from chainspec.config import build_schedule, build_grid, build_system, load_config, setup_logging, validate
from chainspec.errors import ConfigError
from chainspec.models import parse_pair

INI = """
[analysis]
resolution = 0.05
schedule_depth = 6
closed_balls = yes

[system]
base = cascade
depth = 12
metric_scale = 2.0

[pairs]
p1 = 1.0;0.125
p2 = 0.9;0.5

[prolongation]
x = 1.0
alpha_max = 2
"""


def test_ini_sections_map_onto_the_config(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(INI)
    cfg = load_config(str(path))
    assert cfg.system == "cascade"
    assert cfg.system_params == {"depth": 12.0}
    assert cfg.metric_scale == 2.0
    assert cfg.resolution == 0.05
    assert cfg.closed_balls
    assert cfg.pairs == ["1.0;0.125", "0.9;0.5"]
    assert cfg.prolong_x == [1.0]
    assert cfg.alpha_max == 2


def test_overrides_beat_file_values_and_none_is_skipped(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(INI)
    cfg = load_config(str(path), {"resolution": 0.02, "system": None})
    assert cfg.resolution == 0.02
    assert cfg.system == "cascade"


def test_json_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"system": "halving", "schedule": [0.5, 0.25, 0.1]}))
    cfg = load_config(str(path))
    assert cfg.schedule == [0.5, 0.25, 0.1]


def test_thread_override_from_the_environment(monkeypatch):
    monkeypatch.setenv("CHAINSPEC_THREADS", "3")
    assert load_config().threads == 3


@pytest.mark.parametrize("data", [
    {"resolution": 0},
    {"schedule": [0.5, 0.5]},
    {"schedule": "fast"},
    {"evidence": "some"},
    {"metric_warp": 1.0},
    {"pairs": ["0.1,0.2"]},
])
def test_invalid_values_raise_config_errors(data):
    with pytest.raises(ConfigError):
        validate(data)


def test_missing_file_and_unknown_sections_keys(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.ini"))
    path = tmp_path / "bad.ini"
    path.write_text("[prolongation]\nbeta = 1\n")
    with pytest.raises(ConfigError):
        load_config(str(path))
    path.write_text("[system]\nbase = cascade\nslope = steep\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_plane_pairs_parse_with_commas():
    assert parse_pair("0,0;0,1") == ((0.0, 0.0), (0.0, 1.0))
    with pytest.raises(ValueError):
        parse_pair("0;1;2")


def test_builders_follow_the_config():
    cfg = validate({"system": "cascade", "system_params": {"depth": 8}, "resolution": 0.05,
                    "schedule_depth": 5, "metric_scale": 2.0})
    sys = build_system(cfg)
    assert sys.params["depth"] == 8
    assert sys.metric.scale == 2.0
    grid = build_grid(cfg, sys)
    assert len(grid) == 21
    assert len(build_schedule(cfg, grid)) <= 5


def test_table_system_from_a_json_file(tmp_path):
    path = tmp_path / "cycle.json"
    path.write_text(json.dumps({"name": "cycle", "points": [0, 1, 2], "images": [1, 2, 0]}))
    sys = build_system(validate({"system": str(path)}))
    assert sys.name == "cycle"
    assert sys.domain.kind == "finite"
    path.write_text(json.dumps({"points": [0, 1]}))
    with pytest.raises(ConfigError):
        build_system(validate({"system": str(path)}))


def test_logging_writes_to_the_home_log(chainspec_home):
    setup_logging(logging.INFO)
    logging.getLogger("chainspec.test").info("hello")
    for h in logging.getLogger().handlers:
        h.flush()
    assert "hello" in (chainspec_home / "logs" / "chainspec.log").read_text()
