"""CLI tests: subcommand wiring, output formats, and exit codes."""

import json

import pytest

from sadrl import cli
from sadrl.matrix_game import default_payoff, save_payoff


def run_cli(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_matrix_solve_default(capsys):
    code, out, _ = run_cli(["matrix-solve"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "best_value,best_noncomm_value,optimal_pairs"
    assert lines[1].startswith("10,8,")


def test_matrix_solve_payoff_file(tmp_path, capsys):
    path = tmp_path / "payoff.csv"
    save_payoff(default_payoff(), path)
    code, out, _ = run_cli(["matrix-solve", "--payoff", str(path)], capsys)
    assert code == 0
    assert "10,8," in out


def test_matrix_solve_missing_payoff(tmp_path, capsys):
    code, _, err = run_cli(["matrix-solve", "--payoff", str(tmp_path / "no.csv")], capsys)
    assert code == 1
    assert "error" in err


def test_matrix_train_small(capsys):
    code, out, _ = run_cli(
        ["matrix-train", "--seeds", "2", "--episodes", "300", "--seed", "5"], capsys
    )
    assert code == 0
    assert out.startswith("sad mean ")


def test_matrix_train_iql_flag(capsys):
    code, out, _ = run_cli(
        ["matrix-train", "--seeds", "2", "--episodes", "300", "--no-sad"], capsys
    )
    assert code == 0
    assert out.startswith("iql mean ")


def test_belief_demo_endpoints(capsys):
    code, out, _ = run_cli(["belief-demo", "--epsilons", "0,0.5,1"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "epsilon,unfiltered_mass"
    table = {row.split(",")[0]: float(row.split(",")[1]) for row in lines[1:]}
    assert table["0"] == 0.0
    assert table["1"] == 1.0
    assert 0.0 < table["0.5"] < 1.0


def test_train_eval_curves_pipeline(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code, out, _ = run_cli(
        [
            "train",
            "--desk-scale",
            "--actor-threads",
            "1",
            "--envs-per-thread",
            "2",
            "--hidden",
            "16",
            "--eval-games",
            "4",
            "--max-updates",
            "4",
            "--out-dir",
            str(out_dir),
        ],
        capsys,
    )
    assert code == 0
    assert "run finished: 4 updates" in out
    saved = json.loads((out_dir / "config.json").read_text())
    assert saved["hidden"] == 16 and saved["envs_per_thread"] == 2

    code, out, _ = run_cli(
        ["eval", "--checkpoint", str(out_dir / "final"), "--games", "4", "--batch-games", "2"],
        capsys,
    )
    assert code == 0
    assert "mean " in out and "score,count" in out

    curve = tmp_path / "curve.csv"
    code, out, _ = run_cli(
        ["curves", "--out", str(curve), str(out_dir / "training_log.csv")], capsys
    )
    assert code == 0
    assert curve.read_text().startswith("steps,mean,sem")


def test_train_config_file_with_flag_overrides(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps(
            {
                "players": 2,
                "actor_threads": 1,
                "envs_per_thread": 1,
                "hidden": 12,
                "replay_capacity": 64,
                "replay_warmup": 2,
                "batch_size": 2,
                "eval_games": 2,
                "eval_batch_games": 2,
                "eval_every_updates": 50,
                "max_updates": 2,
                "out_dir": str(tmp_path / "from_file"),
            }
        )
    )
    out_dir = tmp_path / "overridden"
    code, out, _ = run_cli(
        ["train", "--config", str(cfg_path), "--out-dir", str(out_dir), "--seed", "3"],
        capsys,
    )
    assert code == 0
    assert json.loads((out_dir / "config.json").read_text())["seed"] == 3


def test_exit_codes(tmp_path, capsys, monkeypatch):
    # Unknown flag value: argparse rejects it -> config error.
    code, _, _ = run_cli(["train", "--mode", "ppo"], capsys)
    assert code == 1
    # Valid flags but inconsistent config (no budget).
    code, _, _ = run_cli(["train", "--players", "2"], capsys)
    assert code == 1
    # Missing checkpoint.
    code, _, _ = run_cli(["eval", "--checkpoint", str(tmp_path / "none")], capsys)
    assert code == 1
    # Missing log file.
    code, _, _ = run_cli(
        ["curves", "--out", str(tmp_path / "c.csv"), str(tmp_path / "no.csv")], capsys
    )
    assert code == 1
    # A crash inside a subcommand is a runtime failure.
    monkeypatch.setattr(cli, "run_training", lambda cfg: 1 / 0)
    code, _, err = run_cli(["train", "--desk-scale", "--max-updates", "1"], capsys)
    assert code == 2
    assert "runtime failure" in err


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
    capsys.readouterr()
