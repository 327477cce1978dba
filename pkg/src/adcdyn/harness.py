"""Seeded multi-trial experiments with checkpointed Nash-gap evaluation."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import platform
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import diagnostic_snapshot
from .dynamics import StepSchedule, check_learner
from .engine import Engine
from .equilibrium import Aggregation, effective_nash_gap, epsilon_threshold, nash_gap
from .game import (GameClass, GameSpec, StochasticGame, generate_random_game, load_game,
                   validate_game)

log = logging.getLogger(__name__)

TRIALS_HEADER = ["k", "trial", "nash_gap", "effective_nash_gap"]
SUMMARY_HEADER = ["k", "mean_gap", "std_gap", "threshold"]


class ConfigError(ValueError):
    pass


class TrialError(RuntimeError):
    def __init__(self, trial: int, cause: Exception):
        super().__init__(f"trial {trial} failed: {cause}")
        self.trial = trial
        self.cause = cause


@dataclass
class ExperimentConfig:
    game_spec: GameSpec | None = None
    game_seed: int = 0
    game_path: str | None = None
    epsilon: float = 0.002
    schedule: StepSchedule = field(default_factory=StepSchedule)
    total_stages: int = 10**7
    n_trials: int = 10
    base_seed: int = 0
    n_checkpoints: int = 40
    checkpoints: list[int] | None = None
    extra_checkpoints: list[int] = field(default_factory=list)
    diagnostics: bool = False
    aggregation: Aggregation = Aggregation.MAX_OVER_STATES
    output_dir: str | None = None
    eval_tol: float = 1e-10

    def __post_init__(self):
        self.aggregation = Aggregation(self.aggregation)
        if self.total_stages < 1:
            raise ConfigError("total_stages must be >= 1")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if (self.game_spec is None) == (self.game_path is None):
            raise ConfigError("give exactly one of game_spec or game_path")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        for k in list(self.checkpoints or []) + list(self.extra_checkpoints):
            if not 0 <= k <= self.total_stages:
                raise ConfigError(f"checkpoint {k} outside [0, {self.total_stages}]")

    def checkpoint_list(self) -> list[int]:
        if self.checkpoints is not None:
            base = set(int(k) for k in self.checkpoints)
        else:
            T = self.total_stages
            lo = min(100, T)
            pts = np.logspace(np.log10(lo), np.log10(T), self.n_checkpoints)
            base = set(int(round(x)) for x in pts) | {T}
        base |= set(int(k) for k in self.extra_checkpoints)
        return sorted(base)

    def load_game(self) -> StochasticGame:
        if self.game_path is not None:
            return load_game(self.game_path)
        return generate_random_game(self.game_spec, self.game_seed)

    def reward_bound(self) -> float | None:
        """Declared bound on |reward| for generated games; None for games read from file."""
        if self.game_spec is None:
            return None
        return max(abs(x) for x in self.game_spec.reward_range)

    def trial_seed(self, trial_index: int) -> int:
        return self.base_seed + trial_index

    def to_dict(self) -> dict:
        return {
            "game": {"path": self.game_path} if self.game_path is not None
            else {"spec": self.game_spec.to_dict(), "seed": self.game_seed},
            "epsilon": self.epsilon,
            "schedule": asdict(self.schedule),
            "total_stages": self.total_stages,
            "n_trials": self.n_trials,
            "base_seed": self.base_seed,
            "checkpoints": {"count": self.n_checkpoints} if self.checkpoints is None
            else {"count": self.n_checkpoints, "list": list(self.checkpoints)},
            "extra_checkpoints": list(self.extra_checkpoints),
            "diagnostics": self.diagnostics,
            "aggregation": self.aggregation.value,
            "output_dir": self.output_dir,
            "eval_tol": self.eval_tol,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        game = d.get("game", {})
        cp = d.get("checkpoints", {"count": 40})
        try:
            return cls(
                game_spec=GameSpec.from_dict(game["spec"]) if "spec" in game else None,
                game_seed=int(game.get("seed", 0)),
                game_path=game.get("path"),
                epsilon=float(d.get("epsilon", 0.002)),
                schedule=StepSchedule(**d.get("schedule", {})),
                total_stages=int(d.get("total_stages", 10**7)),
                n_trials=int(d.get("n_trials", 10)),
                base_seed=int(d.get("base_seed", 0)),
                n_checkpoints=int(cp.get("count", 40)),
                checkpoints=cp.get("list"),
                extra_checkpoints=list(d.get("extra_checkpoints", [])),
                diagnostics=bool(d.get("diagnostics", False)),
                aggregation=Aggregation(d.get("aggregation", "MaxOverStates")),
                output_dir=d.get("output_dir"),
                eval_tol=float(d.get("eval_tol", 1e-10)),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed config: {e}") from e

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class CheckpointRecord:
    k: int
    nash_gap: float
    effective_nash_gap: float
    diagnostics: dict | None = None


@dataclass
class TrialLog:
    trial: int
    seed: int
    initial_state: int
    records: list[CheckpointRecord]
    invariants: dict[str, float]
    wall_time: float = 0.0
    # per checkpoint, stacked global Q tables (n_agents, S, J); diagnostics runs only
    global_q_history: np.ndarray | None = None

    def gaps(self) -> np.ndarray:
        return np.array([r.nash_gap for r in self.records])

    def at(self, k: int) -> CheckpointRecord:
        for r in self.records:
            if r.k == k:
                return r
        raise KeyError(k)


def _validated_game(config: ExperimentConfig) -> StochasticGame:
    game = config.load_game()
    report = validate_game(game)
    if not report.passed:
        raise ConfigError(f"game fails validation: {report.violations[:3]}")
    if game.game_class is GameClass.IDENTICAL_INTEREST:
        config.schedule.validate(game.game_class)
    else:
        config.schedule.validate()
    return game


def run_trial(config: ExperimentConfig, trial_index: int,
              game: StochasticGame | None = None) -> TrialLog:
    if game is None:
        game = _validated_game(config)
    seed = config.trial_seed(trial_index)
    t0 = time.perf_counter()
    engine = Engine(game, config.epsilon, config.schedule, seed)
    init_state = engine.state
    records, qhist = [], []
    for k in config.checkpoint_list():
        engine.advance(k)
        pi, mu = engine.profile("pi"), engine.profile("mu")
        ng = nash_gap(game, pi, config.eval_tol, config.aggregation).nash_gap
        eng = effective_nash_gap(game, mu, config.epsilon, config.eval_tol, config.aggregation)
        diag = None
        if config.diagnostics:
            learners = engine.learners()
            snap = diagnostic_snapshot(game, learners, k)
            diag = snap.summary()
            qhist.append(np.stack(snap.global_q))
        records.append(CheckpointRecord(k, ng, eng, diag))
        log.debug("trial %d k=%d gap=%.4g", trial_index, k, ng)
    inv = engine.invariant_stats()
    for L in engine.learners():
        for key, val in check_learner(L).items():
            inv[f"final_{key}"] = max(inv.get(f"final_{key}", 0.0), val)
    return TrialLog(trial_index, seed, init_state, records, inv,
                    time.perf_counter() - t0, np.stack(qhist) if qhist else None)


def _trial_worker(args):
    config, index = args
    return run_trial(config, index)


@dataclass
class ExperimentResult:
    logs: list[TrialLog]
    aggregate: list[tuple[int, float, float, float]]
    threshold: float
    wall_time: float = 0.0


def aggregate_logs(logs: list[TrialLog], threshold: float) -> list[tuple[int, float, float, float]]:
    rows = []
    ks = [r.k for r in logs[0].records]
    gaps = np.array([[r.nash_gap for r in L.records] for L in logs])
    for c, k in enumerate(ks):
        col = gaps[:, c]
        std = float(np.std(col, ddof=1)) if len(col) > 1 else 0.0
        rows.append((k, float(np.mean(col)), std, threshold))
    return rows


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    t0 = time.perf_counter()
    game = _validated_game(config)
    jobs = [(config, i) for i in range(config.n_trials)]
    logs: list[TrialLog] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_trial_worker, j) for j in jobs]
            for i, f in enumerate(futures):
                try:
                    logs.append(f.result())
                except Exception as e:
                    raise TrialError(i, e) from e
    else:
        for i in range(config.n_trials):
            try:
                logs.append(run_trial(config, i, game))
            except Exception as e:
                raise TrialError(i, e) from e
    logs.sort(key=lambda L: L.trial)
    thr = epsilon_threshold(game, config.epsilon, config.reward_bound())
    return ExperimentResult(logs, aggregate_logs(logs, thr), thr, time.perf_counter() - t0)


# output -------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as e:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(f"could not write {path}: {e}") from e


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def summary_rows_from_trials(trials_csv: str | Path, threshold: float) -> list[tuple]:
    by_k: dict[int, list[float]] = {}
    with open(trials_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRIALS_HEADER:
            raise ConfigError(f"{trials_csv}: unexpected header {reader.fieldnames}")
        for row in reader:
            by_k.setdefault(int(row["k"]), []).append(float(row["nash_gap"]))
    rows = []
    for k in sorted(by_k):
        col = np.array(by_k[k])
        std = float(np.std(col, ddof=1)) if len(col) > 1 else 0.0
        rows.append((k, float(np.mean(col)), std, threshold))
    return rows


def write_outputs(result: ExperimentResult, config: ExperimentConfig,
                  directory: str | Path) -> dict[str, str]:
    out = Path(directory)
    trial_rows = [(r.k, L.trial, r.nash_gap, r.effective_nash_gap)
                  for L in result.logs for r in L.records]
    manifest = {"trials": str(out / "trials.csv"), "summary": str(out / "summary.csv"),
                "run": str(out / "run.json")}
    _atomic_write(out / "trials.csv", _csv_text(TRIALS_HEADER, trial_rows))
    _atomic_write(out / "summary.csv", _csv_text(SUMMARY_HEADER, result.aggregate))
    from . import __version__
    from .engine import BACKEND
    meta = {
        "config": config.to_dict(),
        "seeds": [L.seed for L in result.logs],
        "initial_states": [L.initial_state for L in result.logs],
        "epsilon_threshold": result.threshold,
        "invariants": [L.invariants for L in result.logs],
        "versions": {"adcdyn": __version__, "numpy": np.__version__,
                     "python": platform.python_version(), "backend": BACKEND},
        "timing": {"wall_time": result.wall_time,
                   "trial_wall_times": [L.wall_time for L in result.logs],
                   "finished": time.strftime("%Y-%m-%dT%H:%M:%S")},
    }
    _atomic_write(out / "run.json", json.dumps(meta, indent=1, sort_keys=True))
    if config.diagnostics:
        diag = {str(L.trial): [{"k": r.k, **(r.diagnostics or {})} for r in L.records]
                for L in result.logs}
        _atomic_write(out / "diagnostics.json", json.dumps(diag, indent=1, sort_keys=True))
        manifest["diagnostics"] = str(out / "diagnostics.json")
    return manifest


def standard_config(game_class: GameClass | str, n_agents: int, total_stages: int = 10**7,
                    n_trials: int = 10, **kw) -> ExperimentConfig:
    """Three states, three actions per agent, gamma 0.8, eps 0.002, default schedule."""
    spec = GameSpec(n_agents, 3, (3,) * n_agents, 0.8, GameClass(game_class), (0.0, 1.0))
    return ExperimentConfig(game_spec=spec, total_stages=total_stages, n_trials=n_trials, **kw)

