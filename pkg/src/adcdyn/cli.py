"""Command line entry point: ``adcdyn {generate,run,eval,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .equilibrium import Aggregation, full_report, nash_gap
from .game import GameClass, GameSpec, generate_random_game, load_game, save_game
from .harness import (SUMMARY_HEADER, ExperimentConfig, _atomic_write, _csv_text, run_experiment,
                      summary_rows_from_trials, write_outputs)


def _cmd_generate(args) -> dict:
    counts = tuple(args.actions) if len(args.actions) > 1 else (args.actions[0],) * args.n_agents
    spec = GameSpec(args.n_agents, args.n_states, counts, args.gamma, GameClass(args.game_class),
                    tuple(args.reward_range), args.transition_floor)
    game = generate_random_game(spec, args.seed)
    if args.out:
        save_game(game, args.out)
        return {"written": args.out}
    json.dump(game.to_dict(), sys.stdout)
    sys.stdout.write("\n")
    return {}


def _cmd_run(args) -> dict:
    config = ExperimentConfig.load(args.config)
    overrides = {}
    if args.stages is not None:
        overrides["total_stages"] = args.stages
    if args.trials is not None:
        overrides["n_trials"] = args.trials
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.epsilon is not None:
        overrides["epsilon"] = args.epsilon
    if args.out is not None:
        overrides["output_dir"] = args.out
    if overrides:
        config = replace(config, **overrides)
    if config.output_dir is None:
        raise ValueError("no output directory: set output_dir in the config or pass --out")
    result = run_experiment(config, workers=args.workers)
    manifest = write_outputs(result, config, config.output_dir)
    last = result.aggregate[-1]
    return {"manifest": manifest, "final": {"k": last[0], "mean_gap": last[1],
                                             "std_gap": last[2], "threshold": last[3]}}


def _cmd_eval(args) -> dict:
    game = load_game(args.game)
    data = json.loads(Path(args.profile).read_text())
    rows = data["profile"] if isinstance(data, dict) else data
    profile = [np.asarray(p, dtype=float) for p in rows]
    if args.epsilon is not None:
        rep = full_report(game, profile, args.epsilon, args.tol, args.aggregation)
    else:
        rep = nash_gap(game, profile, args.tol, args.aggregation)
    return rep.to_dict()


def _cmd_report(args) -> dict:
    trials = Path(args.trials)
    threshold = args.threshold
    if threshold is None:
        run_json = trials.parent / "run.json"
        threshold = json.loads(run_json.read_text())["epsilon_threshold"] if run_json.exists() \
            else float("nan")
    rows = summary_rows_from_trials(trials, threshold)
    out = Path(args.out) if args.out else trials.parent / "summary.csv"
    _atomic_write(out, _csv_text(SUMMARY_HEADER, rows))
    return {"written": str(out), "rows": len(rows)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adcdyn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="emit a random game as JSON")
    g.add_argument("--n-agents", type=int, default=2)
    g.add_argument("--n-states", type=int, default=3)
    g.add_argument("--actions", type=int, nargs="+", default=[3],
                   help="one count for all agents, or one per agent")
    g.add_argument("--gamma", type=float, default=0.8)
    g.add_argument("--game-class", default="ZeroSum", choices=[c.value for c in GameClass])
    g.add_argument("--reward-range", type=float, nargs=2, default=[0.0, 1.0])
    g.add_argument("--transition-floor", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=_cmd_generate)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--stages", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--out")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("eval", help="Nash gap of a profile in a game")
    e.add_argument("--game", required=True)
    e.add_argument("--profile", required=True,
                   help='JSON: {"profile": [agent][state][action]}')
    e.add_argument("--epsilon", type=float,
                   help="treat the profile as exploration-free and also report the effective gap")
    e.add_argument("--tol", type=float, default=1e-10)
    e.add_argument("--aggregation", default=Aggregation.MAX_OVER_STATES.value,
                   choices=[a.value for a in Aggregation])
    e.set_defaults(func=_cmd_eval)

    rp = sub.add_parser("report", help="recompute summary.csv from trials.csv")
    rp.add_argument("trials")
    rp.add_argument("--threshold", type=float)
    rp.add_argument("--out")
    rp.set_defaults(func=_cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        out = args.func(args)
    except Exception as e:  # reported as JSON for scripting
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e),
                                     "command": args.command}) + "\n")
        return 1
    if out:
        print(json.dumps(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
