from __future__ import annotations

import json

import pytest
import yaml

from berteam.cli import TRAIN_COMMANDS, build_parser, main
from conftest import tiny_overrides


def test_parser_knows_every_subcommand():
    parser = build_parser()
    for cmd in [*TRAIN_COMMANDS, "tournament"]:
        args = parser.parse_args([cmd, "--seed", "4", "--profile", "paper", "--out", "o"])
        assert (args.seed, args.profile, args.out) == (4, "paper", "o")
    assert parser.parse_args(["report", "d"]).run_dir.name == "d"
    assert parser.parse_args(["grad-check"]).n_op_configs == 92
    with pytest.raises(SystemExit):
        parser.parse_args(["train-coev", "--profile", "huge"])


def test_nash_run_and_report(tmp_path, capsys):
    out = tmp_path / "nash"
    assert main(["nash", "--out", str(out), "--seed", "1"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["final_exploitability"] < 0.05
    assert (out / "config.yaml").exists() and (out / "exploitability.csv").exists()
    assert main(["report", str(out)]) == 0
    assert "final_exploitability" in capsys.readouterr().out
    assert main(["report", str(tmp_path / "missing")]) == 1


def test_config_file_is_applied(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({**tiny_overrides("fixed-policy"), "seed": 11}))
    out = tmp_path / "fixed"
    assert main(["train-fixed", "--config", str(cfg), "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 11
    assert yaml.safe_load((out / "config.yaml").read_text())["coev"]["n_epochs"] == 4


def test_bad_config_exits_with_code_2(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("coev:\n  n_epoch: 3\n")
    assert main(["train-coev", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    assert "coev.n_epoch" in capsys.readouterr().err
    assert main(["train-coev", "--config", str(tmp_path / "absent.yaml")]) == 2


def test_grad_check_subcommand(tmp_path, capsys):
    csv_path = tmp_path / "grad.csv"
    assert main(["grad-check", "--n-op-configs", "23", "--out", str(csv_path)]) == 0
    assert "configurations passed" in capsys.readouterr().out
    assert csv_path.read_text().startswith("name,max_rel_error,passed,n_params")
