import json

import pytest

from chainspec.cli import EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_OK, main

HALVING = ["--system", "halving", "--resolution", "0.05", "--depth", "5"]
CASCADE = ["--system", "cascade", "--resolution", "0.05", "--depth", "5"]


def test_systems_json_lists_the_zoo(capsys):
    assert main(["-q", "systems", "--json"]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)
    names = [r["name"] for r in rows]
    assert names == sorted(names)
    assert "cascade" in names
    assert all(r["self_test"] == "pass" for r in rows)


def test_usage_errors_exit_with_two():
    with pytest.raises(SystemExit) as info:
        main(["spectrum", "--resolution", "fine"])
    assert info.value.code == 2


def test_bad_values_are_config_errors(capsys):
    assert main(["-q", "spectrum", "--system", "halving", "--resolution", "0", "--pair", "1;0"]) == EXIT_CONFIG
    assert main(["-q", "spectrum", "--system", "logistic", "--pair", "1;0"]) == EXIT_CONFIG
    assert main(["-q", "prolong", *CASCADE]) == EXIT_CONFIG
    assert capsys.readouterr().out == ""


def test_analyze_writes_a_stable_report(tmp_path, capsys):
    out = tmp_path / "out"
    args = ["-q", "analyze", *HALVING, "--pair", "1;0", "--x", "1", "--alpha-max", "2", "--out", str(out)]
    first_code = main(args)
    first = (out / "report.json").read_bytes()
    second_code = main(args)
    assert first_code == second_code
    assert first_code in (EXIT_OK, EXIT_NONCONVERGENCE)
    assert (out / "report.json").read_bytes() == first
    for name in ("conley.dot", "timings.json", "prolongation.csv"):
        assert (out / name).is_file()

    report = json.loads(first)
    assert report["system"] == "halving"
    assert report["pairs"][0]["spectrum"]["chain_related"]
    assert "w" in [e["term"] for e in report["pairs"][0]["spectrum"]["entries"]]
    assert "timings" not in report
    assert capsys.readouterr().out.strip().endswith("report.json")

    assert main(["-q", "history", "--json"]) == EXIT_OK
    runs = json.loads(capsys.readouterr().out)
    assert [r["command"] for r in runs] == ["analyze", "analyze"]
    assert runs[0]["config_hash"] == runs[1]["config_hash"]


def test_chains_dumps_a_family(capsys):
    code = main(["-q", "chains", *HALVING, "--pair", "1;0"])
    assert code in (EXIT_OK, EXIT_NONCONVERGENCE)
    assert capsys.readouterr().out.startswith("# family 1 -> 0")


def test_chains_reports_unrelated_pairs(capsys):
    args = ["-q", "chains", "--system", "identity-two-intervals", "--resolution", "0.05", "--depth", "5",
            "--pair", "0.5;2.5"]
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out.startswith("# not chain related")


def test_chains_adjacency_dump(capsys):
    assert main(["-q", "chains", *HALVING, "--adjacency", "0"]) == EXIT_OK
    lines = capsys.readouterr().out.split()
    assert lines and all(tok.isdigit() for tok in lines)
    assert main(["-q", "chains", *HALVING, "--adjacency", "9"]) == EXIT_CONFIG


def test_conley_dot_and_json(capsys):
    assert main(["-q", "conley", *CASCADE]) == EXIT_OK
    dot = capsys.readouterr().out
    assert dot.startswith("digraph conley")
    assert main(["-q", "conley", *CASCADE, "--json"]) == EXIT_OK
    dump = json.loads(capsys.readouterr().out)
    assert dump["components"] and dump["total"]


def test_prolong_csv(capsys):
    assert main(["-q", "prolong", *CASCADE, "--x", "1", "--alpha-max", "2"]) == EXIT_OK
    header = capsys.readouterr().out.splitlines()[0]
    assert header == "index,coords,first_alpha,J1,J2"


def test_spectrum_xi_class(capsys):
    args = ["-q", "spectrum", "--system", "rotation-eighth", "--resolution", "0.015625", "--depth", "6",
            "--xi", "fin:2", "--x", "0"]
    assert main(args) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["members"] == [[0.375]]
