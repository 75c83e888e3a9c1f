from __future__ import annotations

import argparse
import json

import pytest

from mindgrid.cli import build_parser, main, parse_ids, parse_seeds


def test_parse_ids():
    assert parse_ids("0-8") == list(range(9))
    assert parse_ids("1,3,5") == [1, 3, 5]
    assert parse_ids("0-2,6,1") == [0, 1, 2, 6]
    for bad in ("", "3-1", "x"):
        with pytest.raises((argparse.ArgumentTypeError, ValueError)):
            parse_ids(bad)


def test_parse_seeds():
    assert parse_seeds("5") == [0, 1, 2, 3, 4]
    assert parse_seeds("0,3,7") == [0, 3, 7]
    assert parse_seeds("2-4") == [2, 3, 4]
    with pytest.raises(argparse.ArgumentTypeError):
        parse_seeds("0")


def test_config_rejects_credentials(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("backend: remote\napi_key: sk-secret\n", encoding="utf-8")
    with pytest.raises(SystemExit, match="MINDGRID_API_KEY") as info:
        main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert "sk-secret" not in str(info.value)


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("colour: blue\n", encoding="utf-8")
    with pytest.raises(SystemExit, match="unknown keys"):
        main(["run", "--config", str(cfg)])


def test_remote_needs_url_and_model(tmp_path):
    with pytest.raises(SystemExit, match="--base-url"):
        main(["run", "--backend", "remote", "--out", str(tmp_path)])


def test_unknown_scenario_exits(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--scenarios", "99", "--out", str(tmp_path)])


def test_run_analyze_replay(tmp_path, capsys):
    out = tmp_path / "res"
    cfg = tmp_path / "run.yaml"
    cfg.write_text(
        f"substrate: rws_repeated\nscenarios: [1, 3]\nseeds: 2\nsteps: 200\nout: {out}\n", encoding="utf-8"
    )
    assert main(["run", "--config", str(cfg)]) == 0
    table = capsys.readouterr().out
    assert "| rws_repeated | 1 | tom |" in table and "| rws_repeated | 3 | tom |" in table
    assert len(list((out / "rws_repeated").glob("scenario*_seed*.json"))) == 4

    report = tmp_path / "analysis.json"
    assert main(["analyze", str(out), "--bootstrap", "50", "--json", str(report)]) == 0
    printed = capsys.readouterr().out
    assert "offset analysis:" in printed
    data = json.loads(report.read_text(encoding="utf-8"))
    assert {"summary", "offsets"} <= set(data)
    assert len(data["summary"]["rows"]) == 2

    one = out / "rws_repeated" / "scenario1_seed0.json"
    assert main(["replay", str(one)]) == 0
    assert "identical" in capsys.readouterr().out
    rec = json.loads(one.read_text(encoding="utf-8"))
    rec["focal_reward"] += 1
    one.write_text(json.dumps(rec, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n", encoding="utf-8")
    assert main(["replay", str(one)]) == 1
    assert "focal_reward" in capsys.readouterr().out


def test_cassette_run_and_replay(tmp_path, capsys):
    out, tape = tmp_path / "res", tmp_path / "tape.jsonl"
    args = ["run", "--substrate", "pd_repeated", "--scenarios", "0", "--steps", "100", "--out", str(out)]
    assert main([*args, "--backend", "cassette", "--cassette", str(tape),
                 "--cassette-mode", "record", "--cassette-inner", "oracle"]) == 0
    assert tape.exists()
    first = (out / "pd_repeated" / "scenario0_seed0.json").read_text(encoding="utf-8")
    result = out / "pd_repeated" / "scenario0_seed0.json"
    assert main(["replay", str(result), "--cassette", str(tape)]) == 0
    result.unlink()
    assert main([*args, "--backend", "cassette", "--cassette", str(tape)]) == 0
    assert result.read_text(encoding="utf-8") == first
    capsys.readouterr()


def test_analyze_empty_directory(tmp_path):
    with pytest.raises(SystemExit, match="no result files"):
        main(["analyze", str(tmp_path)])


def test_parser_help_lists_commands():
    text = build_parser().format_help()
    assert all(c in text for c in ("run", "analyze", "replay"))
