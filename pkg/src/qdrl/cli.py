"""Command-line front end: train, evaluate, baseline, sweep, and plot.

Every command reads one YAML experiment config (all keys optional, all
overridable with --set path.key=value), writes its artifacts under the
configured output directory, and exits 0 on success, 2 on configuration
errors, 3 on plant divergence, and 4 on I/O failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .agent import QuantumActor
from .config import ConfigError, ExperimentConfig, dump_tree, load_tree, resolve
from .gradients import GradientMethodError
from .lfc import DivergenceError, LfcEnv, run_pi_baseline
from .plotting import PlotError, plot_csv
from .trainer import EvalResult, evaluate_policy, load_checkpoint, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="YAML experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument(
        "--grad",
        choices=("parameter-shift", "adjoint", "finite-diff"),
        default=None,
        help="gradient method override",
    )
    parser.add_argument(
        "--noise", choices=("none", "nisq"), default=None, help="noise model toggle"
    )
    parser.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=[],
        metavar="PATH=VALUE",
        help="override one config key, e.g. trainer.n_episodes=50",
    )


def _resolve_from_args(args) -> ExperimentConfig:
    tree = load_tree(args.config) if args.config else {}
    return resolve(
        tree_from_file=tree,
        overrides=args.assignments,
        seed=args.seed,
        out_dir=args.out,
        grad=getattr(args, "grad", None),
        noise_mode=getattr(args, "noise", None),
    )


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as handle:
        handle.write(text)


def _trajectory_csv(result: EvalResult) -> str:
    n = result.freq_hz.shape[1]
    cols = (
        ["time_s"]
        + [f"f{j + 1}_hz" for j in range(n)]
        + ["ace_pu", "u_pu"]
        + [f"a{j + 1}_pu" for j in range(n)]
        + ["reward"]
    )
    lines = [",".join(cols)]
    for i in range(result.time_s.shape[0]):
        row = (
            [repr(float(result.time_s[i]))]
            + [repr(float(v)) for v in result.freq_hz[i]]
            + [repr(float(result.ace_pu[i])), repr(float(result.command_pu[i]))]
            + [repr(float(v)) for v in result.actions_pu[i]]
            + [repr(float(result.reward[i]))]
        )
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _baseline_csv(result) -> str:
    n = result.freq_hz.shape[1]
    cols = ["time_s"] + [f"f{j + 1}_hz" for j in range(n)] + ["ace_pu", "u_pu"]
    lines = [",".join(cols)]
    for i in range(result.time_s.shape[0]):
        row = (
            [repr(float(result.time_s[i]))]
            + [repr(float(v)) for v in result.freq_hz[i]]
            + [repr(float(result.ace_pu[i])), repr(float(result.command_pu[i]))]
        )
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _actor_from_checkpoint(payload: dict) -> QuantumActor:
    from .trainer import _actor_from_dict

    return _actor_from_dict(payload["actor"])


# ============================================================
# commands
# ============================================================


def cmd_train(args) -> int:
    config = _resolve_from_args(args)
    out = config.out_dir
    env = LfcEnv(config.grid, config.scenario, action_limit=config.action_limit)
    _write_text(os.path.join(out, "config-resolved.yaml"), dump_tree(config.tree))

    resume = None
    if args.resume:
        payload = load_checkpoint(args.resume)
        if payload["config_fingerprint"] != config.fingerprint:
            raise ConfigError(
                "checkpoint was produced by a different configuration "
                f"(fingerprint {payload['config_fingerprint'][:12]}… vs {config.fingerprint[:12]}…)"
            )
        resume = payload

    # greedy trajectory of the untouched initial policy (first-episode
    # behavior without exploration noise), the "before" figure raw data
    if resume is None:
        initial_actor = QuantumActor.build(
            env.n_observations, config.actor_config, (config.trainer.seed, 1)
        )
        try:
            initial = evaluate_policy(
                config.grid, config.scenario, initial_actor, action_limit=config.action_limit
            )
        except DivergenceError as exc:
            print(f"initial rollout diverged ({exc}); skipping trajectory-initial.csv")
        else:
            _write_text(os.path.join(out, "trajectory-initial.csv"), _trajectory_csv(initial))

    result = train(
        env,
        config.trainer,
        config.actor_config,
        config.critic_config,
        noise=config.noise,
        resume=resume,
        checkpoint_path=os.path.join(out, "checkpoint.json"),
        config_fingerprint=config.fingerprint,
    )
    # a finished checkpoint resumes to zero new rows; keep the old log then
    if result.log.rows or resume is None:
        result.log.write_csv(os.path.join(out, "training_log.csv"))

    if result.status == "diverged":
        print(f"diverged: {result.error}")
        print(f"partial log ({len(result.log.rows)} episodes) kept under {out}")
        return EXIT_DIVERGED

    final = evaluate_policy(
        config.grid, config.scenario, result.actor, action_limit=config.action_limit
    )
    _write_text(os.path.join(out, "trajectory-final.csv"), _trajectory_csv(final))
    rets = result.log.returns()
    if rets.size:
        print(f"trained {len(result.log.rows)} episodes, return {rets[0]:.3f} -> {rets[-1]:.3f}")
    else:
        print("no new episodes (checkpoint already covers the episode budget)")
    print(f"greedy rollout: return {final.episode_return:.3f}, nadir {final.nadir_hz:.3f} Hz, "
          f"final {final.final_freq_hz:.3f} Hz")
    print(f"artifacts under {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _resolve_from_args(args)
    payload = load_checkpoint(args.checkpoint)
    actor = _actor_from_checkpoint(payload)
    if actor.layout.n_inputs != config.grid.n_generators:
        raise ConfigError(
            f"checkpoint actor reads {actor.layout.n_inputs} observations but the "
            f"grid has {config.grid.n_generators} generators"
        )
    result = evaluate_policy(
        config.grid, config.scenario, actor, action_limit=config.action_limit
    )
    out = config.out_dir
    _write_text(os.path.join(out, "trajectory-eval.csv"), _trajectory_csv(result))
    summary = {
        "return": result.episode_return,
        "nadir_hz": result.nadir_hz,
        "final_freq_hz": result.final_freq_hz,
        "final_max_dev_hz": result.final_max_dev_hz,
    }
    _write_text(os.path.join(out, "eval-summary.json"), json.dumps(summary, indent=2) + "\n")
    print(f"return {result.episode_return:.4f}  nadir {result.nadir_hz:.4f} Hz  "
          f"final {result.final_freq_hz:.4f} Hz")
    return EXIT_OK


def cmd_baseline(args) -> int:
    config = _resolve_from_args(args)
    result = run_pi_baseline(config.grid, config.scenario, kp=args.kp, ki=args.ki)
    out = config.out_dir
    _write_text(os.path.join(out, "trajectory-baseline.csv"), _baseline_csv(result))
    final = float(result.freq_hz[-1].mean())
    print(f"PI baseline: nadir {result.nadir_hz:.4f} Hz  final {final:.4f} Hz")
    return EXIT_OK


SWEEP_COLUMNS = ("param", "value", "final_freq_hz", "nadir_hz", "return", "episodes", "status")


def cmd_sweep(args) -> int:
    if args.param not in ("layers", "policy_update_interval"):
        raise ConfigError(f"sweep param must be layers or policy_update_interval, got {args.param!r}")
    values = [int(v) for v in args.values]
    if len(values) < 2:
        raise ConfigError("sweep needs at least 2 values")
    if len(set(values)) != len(values):
        raise ConfigError(f"sweep values contain duplicates: {values}")

    rows = []
    for value in values:
        key = "circuit.layers" if args.param == "layers" else "trainer.policy_update_interval"
        run_args = argparse.Namespace(
            config=args.config,
            seed=args.seed,
            out=args.out,
            grad=args.grad,
            noise=args.noise,
            assignments=args.assignments + [f"{key}={value}"],
        )
        try:
            config = _resolve_from_args(run_args)
            run_dir = os.path.join(config.out_dir, f"sweep-{args.param}-{value}")
            env = LfcEnv(config.grid, config.scenario, action_limit=config.action_limit)
            result = train(
                env,
                config.trainer,
                config.actor_config,
                config.critic_config,
                noise=config.noise,
                checkpoint_path=os.path.join(run_dir, "checkpoint.json"),
                config_fingerprint=config.fingerprint,
            )
            result.log.write_csv(os.path.join(run_dir, "training_log.csv"))
            if result.status == "completed":
                ev = evaluate_policy(
                    config.grid, config.scenario, result.actor, action_limit=config.action_limit
                )
                rows.append(
                    (args.param, value, ev.final_freq_hz, ev.nadir_hz,
                     float(result.log.returns()[-1]), len(result.log.rows), "completed")
                )
            else:
                rows.append((args.param, value, float("nan"), float("nan"),
                             float(result.log.returns()[-1]) if result.log.rows else float("nan"),
                             len(result.log.rows), "diverged"))
        except (ConfigError, OSError) as exc:
            rows.append((args.param, value, float("nan"), float("nan"), float("nan"), 0,
                         f"failed: {exc}"))

    base = _resolve_from_args(args)
    lines = [",".join(SWEEP_COLUMNS)]
    for param, value, final_hz, nadir, ret, episodes, status in rows:
        lines.append(
            ",".join(
                [param, str(value), repr(float(final_hz)), repr(float(nadir)),
                 repr(float(ret)), str(episodes), status.replace(",", ";")]
            )
        )
    path = os.path.join(base.out_dir, "sweep.csv")
    _write_text(path, "\n".join(lines) + "\n")
    print(f"swept {args.param} over {values}; results in {path}")
    for row in rows:
        print(f"  {row[0]}={row[1]}: final {row[2]:.4f} Hz, return {row[4]:.4f}, {row[6]}")
    return EXIT_OK


def cmd_plot(args) -> int:
    plot_csv(args.csv, args.out_path)
    print(f"wrote {args.out_path}")
    return EXIT_OK


# ============================================================
# entry point
# ============================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdrl",
        description="Quantum-circuit DDPG for grid frequency regulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run (or resume) a training experiment")
    _common_flags(p_train)
    p_train.add_argument("--resume", default=None, help="checkpoint to resume from")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="greedy rollout of a trained checkpoint")
    _common_flags(p_eval)
    p_eval.add_argument("checkpoint", help="checkpoint.json to evaluate")
    p_eval.set_defaults(func=cmd_evaluate)

    p_base = sub.add_parser("baseline", help="PI automatic generation control rollout")
    _common_flags(p_base)
    p_base.add_argument("--kp", type=float, default=0.8, help="proportional gain")
    p_base.add_argument("--ki", type=float, default=8.0, help="integral gain")
    p_base.set_defaults(func=cmd_baseline)

    p_sweep = sub.add_parser("sweep", help="one training run per hyperparameter value")
    _common_flags(p_sweep)
    p_sweep.add_argument("param", choices=("layers", "policy_update_interval"))
    p_sweep.add_argument("values", nargs="+", help="values to sweep")
    p_sweep.set_defaults(func=cmd_sweep)

    p_plot = sub.add_parser("plot", help="render a logged CSV to SVG")
    p_plot.add_argument("csv", help="training_log.csv or a trajectory CSV")
    p_plot.add_argument("out_path", help="output .svg path")
    p_plot.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlotError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except GradientMethodError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
