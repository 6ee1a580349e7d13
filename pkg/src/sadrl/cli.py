"""Command-line interface.

Subcommands: matrix-solve, matrix-train, belief-demo, train, eval, curves.
Exit codes: 0 success, 1 configuration error (bad flags, files, or values),
2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .belief import BeliefDistribution, epsilon_sweep
from .harness import (
    ConfigError,
    CurveError,
    EvaluationError,
    RunnerConfig,
    desk_config,
    emit_curves,
    evaluate_checkpoint,
    load_config,
    run_training,
)
from .matrix_game import (
    PayoffFormatError,
    PayoffInvariantError,
    default_payoff,
    load_payoff,
    solve_exhaustive,
)
from .nn import CheckpointError
from .rng import RngStream
from .tabular import TabularConfig, experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

_CONFIG_ERRORS = (
    ConfigError,
    CurveError,
    EvaluationError,
    CheckpointError,
    PayoffFormatError,
    PayoffInvariantError,
    ValueError,
    FileNotFoundError,
)


def _cmd_matrix_solve(args) -> int:
    tensor = load_payoff(args.payoff) if args.payoff else default_payoff()
    best, best_noncomm, count = solve_exhaustive(tensor)
    print("best_value,best_noncomm_value,optimal_pairs")
    print(f"{best:g},{best_noncomm:g},{count}")
    return EXIT_OK


def _cmd_matrix_train(args) -> int:
    cfg = TabularConfig(
        learning_rate=args.lr,
        epsilon=args.epsilon,
        episodes=args.episodes,
        seeds=args.seeds,
        sad_enabled=args.sad if args.sad is not None else True,
        base_seed=args.seed,
        payoff=load_payoff(args.payoff) if args.payoff else default_payoff(),
    )
    result = experiment(cfg)
    if args.curve_out:
        result.write_curve_csv(args.curve_out)
        print(f"curve rows written to {args.curve_out}")
    label = "sad" if cfg.sad_enabled else "iql"
    print(f"{label} mean {result.mean:.4f} sem {result.sem:.4f} over {cfg.seeds} seeds")
    return EXIT_OK


def _cmd_belief_demo(args) -> int:
    # Two-card signaling prior; the greedy map answers each card with a
    # distinct action, so the greedy action identifies the card exactly and
    # everything between the ends is exploration blur.
    prior = BeliefDistribution.uniform((0, 1))
    greedy_map = {0: 0, 1: 2}
    epsilons = [float(x) for x in args.epsilons.split(",")]
    rows = epsilon_sweep(prior, greedy_map, args.action, action_count=3, epsilons=epsilons)
    print("epsilon,unfiltered_mass")
    for eps, mass in rows:
        print(f"{eps:g},{mass:.6f}")
    return EXIT_OK


def _runner_overrides(args) -> dict:
    overrides = {}
    for key in (
        "players",
        "mode",
        "sad",
        "aux",
        "seed",
        "out_dir",
        "hidden",
        "lr",
        "actor_threads",
        "envs_per_thread",
        "eval_games",
        "max_updates",
        "max_seconds",
        "max_env_steps",
        "deterministic",
        "stop_when_eval_at_least",
    ):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    return overrides


def _cmd_train(args) -> int:
    overrides = _runner_overrides(args)
    if args.config:
        cfg = load_config(args.config, overrides)
    elif args.desk_scale:
        cfg = desk_config(**overrides)
    else:
        cfg = RunnerConfig(**overrides)
    metrics = run_training(cfg)
    print(
        f"run finished: {metrics.updates} updates, {metrics.env_steps} env steps, "
        f"{metrics.wall_seconds:.1f}s ({metrics.stop_reason})"
    )
    print(
        f"final eval {metrics.final_eval_mean:.3f} +/- {metrics.final_eval_sem:.3f}, "
        f"best {metrics.best_eval_mean:.3f}"
    )
    print(f"artifacts in {cfg.out_dir}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    result = evaluate_checkpoint(
        args.checkpoint,
        games=args.games,
        rng=RngStream(args.seed, 31),
        batch_games=args.batch_games,
    )
    print(
        f"mean {result.mean:.4f} sem {result.sem:.4f} win_rate {result.win_rate:.4f} "
        f"over {len(result.scores)} games"
    )
    print("score,count")
    for score, count in enumerate(result.histogram):
        print(f"{score},{count}")
    return EXIT_OK


def _cmd_curves(args) -> int:
    out = emit_curves(args.logs, args.out)
    print(f"curve written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sadrl",
        description="Cooperative multi-agent Q-learning: matrix games, belief analysis, Hanabi training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("matrix-solve", help="brute-force the two-step signaling game")
    p.add_argument("--payoff", help="payoff tensor file (default: built-in tensor)")
    p.set_defaults(func=_cmd_matrix_solve)

    p = sub.add_parser("matrix-train", help="tabular Q-learning on the signaling game")
    p.add_argument("--payoff", help="payoff tensor file")
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--episodes", type=int, default=50_000)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--sad", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--curve-out", help="write per-seed learning curves to this CSV")
    p.set_defaults(func=_cmd_matrix_train)

    p = sub.add_parser("belief-demo", help="exploration-blur sweep on the signaling game")
    p.add_argument("--action", type=int, default=0, help="observed action")
    p.add_argument(
        "--epsilons",
        default="0,0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1",
        help="comma-separated exploration rates",
    )
    p.set_defaults(func=_cmd_belief_demo)

    p = sub.add_parser("train", help="threaded actor/trainer run on Hanabi")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--desk-scale", action="store_true", help="workstation-sized preset")
    p.add_argument("--players", type=int, choices=(2, 3, 4, 5))
    p.add_argument("--mode", choices=("iql", "vdn"))
    p.add_argument("--sad", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--aux", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--hidden", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--actor-threads", dest="actor_threads", type=int)
    p.add_argument("--envs-per-thread", dest="envs_per_thread", type=int)
    p.add_argument("--eval-games", dest="eval_games", type=int)
    p.add_argument("--max-updates", dest="max_updates", type=int)
    p.add_argument("--max-seconds", dest="max_seconds", type=float)
    p.add_argument("--max-env-steps", dest="max_env_steps", type=int)
    p.add_argument("--deterministic", action="store_true", default=None)
    p.add_argument(
        "--stop-when-eval-at-least", dest="stop_when_eval_at_least", type=float
    )
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    p.add_argument("--checkpoint", required=True, help="checkpoint stem (without .json/.bin)")
    p.add_argument("--games", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-games", dest="batch_games", type=int, default=32)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("curves", help="aggregate training logs into a learning curve")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("logs", nargs="+", help="training_log.csv files")
    p.set_defaults(func=_cmd_curves)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except _CONFIG_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {err!r}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
