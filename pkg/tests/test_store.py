from chainspec.store import RunStore, config_hash


def test_runs_come_back_newest_first(tmp_path):
    store = RunStore(str(tmp_path / "db" / "runs.db"))
    first = store.record_run("analyze", "cascade", '{"a": 1}', 0, "/tmp/out", {"sample": 0.5})
    second = store.record_run("analyze", "halving", '{"a": 2}', 3)
    runs = store.get_runs()
    assert [r["id"] for r in runs] == [second, first]
    assert runs[1]["timings"] == {"sample": 0.5}
    assert runs[1]["config_hash"] == config_hash('{"a": 1}')
    assert runs[0]["output"] is None
    assert len(store.get_runs(limit=1)) == 1


def test_clear_history(tmp_path):
    store = RunStore(str(tmp_path / "runs.db"))
    store.record_run("analyze", "cascade", "{}", 0)
    store.clear_history()
    assert store.get_runs() == []


def test_config_hash_is_short_and_stable():
    assert config_hash("{}") == config_hash("{}")
    assert len(config_hash("{}")) == 16
    assert config_hash("{}") != config_hash("[]")
