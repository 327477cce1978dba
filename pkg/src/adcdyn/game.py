"""Tabular stochastic games: representation, validation, random ensembles and
the exploration-perturbed effective game.

Joint actions are stored flat. With ``action_counts = (A0, A1, ...)`` the joint
action ``(a0, a1, ...)`` has index ``a0 + A0*a1 + A0*A1*a2 + ...`` (agent 0
varies fastest).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

TOL = 1e-12
JOINT_INDEX_CONVENTION = "agent0_fastest"


class GameClass(str, enum.Enum):
    ZERO_SUM = "ZeroSum"
    IDENTICAL_INTEREST = "IdenticalInterest"
    GENERAL = "General"


class GameStructureError(ValueError):
    """Declared sizes disagree with table shapes."""


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class RewardNoise:
    """Finite additive noise on one agent's reward (support values + probabilities)."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if values.ndim != 1 or values.shape != probs.shape or values.size == 0:
            raise GameStructureError("noise values/probs must be equal-length 1-d arrays")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > TOL:
            raise ParameterError("noise probabilities must form a distribution")
        if abs(float(values @ probs)) > TOL:
            raise ParameterError("reward noise must be zero-mean")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True, eq=False)
class StochasticGame:
    """Finite discounted stochastic game with expected-reward tables.

    ``rewards[i, s, j]`` is agent ``i``'s expected reward at state ``s`` under
    flat joint action ``j``; ``transitions[s, j, s2]`` is ``p(s2 | s, j)``.
    """

    n_agents: int
    n_states: int
    action_counts: tuple[int, ...]
    rewards: np.ndarray
    transitions: np.ndarray
    gamma: float
    game_class: GameClass = GameClass.GENERAL
    noise: tuple[RewardNoise, ...] | None = None
    strides: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.action_counts)
        object.__setattr__(self, "action_counts", counts)
        object.__setattr__(self, "game_class", GameClass(self.game_class))
        if self.n_agents < 1 or self.n_states < 1:
            raise GameStructureError("need at least one agent and one state")
        if len(counts) != self.n_agents or min(counts) < 1:
            raise GameStructureError(
                f"action_counts {counts} inconsistent with n_agents={self.n_agents}"
            )
        strides = [1]
        for c in counts[:-1]:
            strides.append(strides[-1] * c)
        object.__setattr__(self, "strides", tuple(strides))

        rewards = np.array(self.rewards, dtype=float)
        transitions = np.array(self.transitions, dtype=float)
        n_joint = self.n_joint
        if rewards.shape != (self.n_agents, self.n_states, n_joint):
            raise GameStructureError(
                f"rewards shape {rewards.shape} != {(self.n_agents, self.n_states, n_joint)}"
            )
        if transitions.shape != (self.n_states, n_joint, self.n_states):
            raise GameStructureError(
                f"transitions shape {transitions.shape} != "
                f"{(self.n_states, n_joint, self.n_states)}"
            )
        if not (0.0 <= self.gamma < 1.0):
            raise ParameterError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.noise is not None:
            if len(self.noise) != self.n_agents:
                raise GameStructureError("need one noise entry per agent")
            object.__setattr__(self, "noise", tuple(self.noise))
        rewards.setflags(write=False)
        transitions.setflags(write=False)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_joint(self) -> int:
        return int(np.prod(self.action_counts))

    @property
    def max_abs_reward(self) -> float:
        return float(np.max(np.abs(self.rewards)))

    def encode(self, actions: Sequence[int]) -> int:
        """Flat joint index of per-agent ``actions``."""
        if len(actions) != self.n_agents:
            raise IndexError("one action per agent required")
        idx = 0
        for a, c, st in zip(actions, self.action_counts, self.strides):
            if not 0 <= a < c:
                raise IndexError(f"action {a} out of range for {c} actions")
            idx += int(a) * st
        return idx

    def decode(self, joint: int) -> tuple[int, ...]:
        if not 0 <= joint < self.n_joint:
            raise IndexError(f"joint action {joint} out of range")
        out = []
        for c in self.action_counts:
            out.append(joint % c)
            joint //= c
        return tuple(out)

    def action_table(self) -> np.ndarray:
        """``(n_joint, n_agents)`` array whose row ``j`` is ``decode(j)``."""
        j = np.arange(self.n_joint)
        return np.stack([(j // st) % c for c, st in zip(self.action_counts, self.strides)], axis=1)

    def with_rewards(self, rewards: np.ndarray) -> "StochasticGame":
        return StochasticGame(
            self.n_agents, self.n_states, self.action_counts, rewards,
            self.transitions, self.gamma, GameClass.GENERAL, self.noise,
        )

    # serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "n_agents": self.n_agents,
            "n_states": self.n_states,
            "action_counts": list(self.action_counts),
            "gamma": self.gamma,
            "game_class": self.game_class.value,
            "joint_index": JOINT_INDEX_CONVENTION,
            "rewards": self.rewards.tolist(),
            "transitions": self.transitions.tolist(),
        }
        if self.noise is not None:
            d["noise"] = [
                {"values": n.values.tolist(), "probs": n.probs.tolist()} for n in self.noise
            ]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StochasticGame":
        convention = d.get("joint_index", JOINT_INDEX_CONVENTION)
        if convention != JOINT_INDEX_CONVENTION:
            raise GameStructureError(f"unsupported joint_index convention {convention!r}")
        noise = d.get("noise")
        if noise is not None:
            noise = tuple(RewardNoise(np.array(n["values"]), np.array(n["probs"])) for n in noise)
        return cls(
            n_agents=int(d["n_agents"]),
            n_states=int(d["n_states"]),
            action_counts=tuple(d["action_counts"]),
            rewards=np.array(d["rewards"], dtype=float),
            transitions=np.array(d["transitions"], dtype=float),
            gamma=float(d["gamma"]),
            game_class=GameClass(d.get("game_class", "General")),
            noise=noise,
        )


def save_game(game: StochasticGame, path: str | Path) -> None:
    Path(path).write_text(json.dumps(game.to_dict(), indent=1))


def load_game(path: str | Path) -> StochasticGame:
    return StochasticGame.from_dict(json.loads(Path(path).read_text()))


# validation -------------------------------------------------------------


@dataclass
class Violation:
    rule: str
    location: tuple
    magnitude: float


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}


def validate_game(game: StochasticGame, tol: float = TOL) -> ValidationReport:
    """Check simplex rows, strict reachability and the declared game class."""
    report = ValidationReport()
    p = game.transitions
    row_err = np.abs(p.sum(axis=2) - 1.0)
    for s, j in zip(*np.nonzero(row_err > tol)):
        report.violations.append(Violation("simplex", (int(s), int(j)), float(row_err[s, j])))
    for s, j, s2 in zip(*np.nonzero(p < 0)):
        report.violations.append(Violation("nonnegative", (int(s), int(j), int(s2)), float(p[s, j, s2])))
    for s, j, s2 in zip(*np.nonzero(p == 0)):
        report.violations.append(Violation("reachability", (int(s), int(j), int(s2)), 0.0))
    if not np.all(np.isfinite(game.rewards)):
        report.violations.append(Violation("finite", (), float("nan")))

    r = game.rewards
    if game.game_class is GameClass.ZERO_SUM:
        if game.n_agents != 2:
            report.violations.append(Violation("zero-sum", ("n_agents",), float(game.n_agents)))
        else:
            total = r[0] + r[1]
            for s, j in zip(*np.nonzero(np.abs(total) > tol)):
                report.violations.append(Violation("zero-sum", (int(s), int(j)), float(total[s, j])))
    elif game.game_class is GameClass.IDENTICAL_INTEREST:
        diff = np.max(np.abs(r - r[0:1]), axis=0)
        for s, j in zip(*np.nonzero(diff > tol)):
            report.violations.append(
                Violation("identical-interest", (int(s), int(j)), float(diff[s, j]))
            )
    return report


# random ensembles -------------------------------------------------------


@dataclass(frozen=True)
class GameSpec:
    n_agents: int
    n_states: int
    action_counts: tuple[int, ...]
    gamma: float
    game_class: GameClass = GameClass.GENERAL
    reward_range: tuple[float, float] = (0.0, 1.0)
    # guaranteed minimum of every generated transition entry; None -> raw draws on [0.1, 1]
    transition_floor: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "action_counts", tuple(int(c) for c in self.action_counts))
        object.__setattr__(self, "game_class", GameClass(self.game_class))
        object.__setattr__(self, "reward_range", tuple(float(x) for x in self.reward_range))
        if len(self.action_counts) != self.n_agents:
            raise ParameterError("action_counts length must equal n_agents")
        lo, hi = self.reward_range
        if lo > hi:
            raise ParameterError("reward_range must satisfy lo <= hi")
        if self.game_class is GameClass.ZERO_SUM and self.n_agents != 2:
            raise ParameterError("zero-sum games have exactly two agents")
        floor = self.floor
        if not (0.0 < floor and floor * self.n_states <= 1.0 + TOL):
            raise ParameterError("transition_floor must be positive with floor * n_states <= 1")

    @property
    def floor(self) -> float:
        if self.transition_floor is not None:
            return float(self.transition_floor)
        return 0.1 / (0.1 + self.n_states - 1)

    @property
    def raw_floor(self) -> float:
        """Lower end of the raw entry draws that guarantees :attr:`floor` after normalizing."""
        if self.n_states == 1:
            return 1.0
        if self.transition_floor is None:
            return 0.1
        f = self.floor
        return min(1.0, f * (self.n_states - 1) / (1.0 - f))

    def to_dict(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "n_states": self.n_states,
            "action_counts": list(self.action_counts),
            "gamma": self.gamma,
            "game_class": self.game_class.value,
            "reward_range": list(self.reward_range),
            "transition_floor": self.transition_floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GameSpec":
        return cls(
            n_agents=int(d["n_agents"]),
            n_states=int(d["n_states"]),
            action_counts=tuple(d["action_counts"]),
            gamma=float(d["gamma"]),
            game_class=GameClass(d.get("game_class", "General")),
            reward_range=tuple(d.get("reward_range", (0.0, 1.0))),
            transition_floor=d.get("transition_floor"),
        )


def generate_random_game(spec: GameSpec, seed: int) -> StochasticGame:
    rng = np.random.default_rng(seed)
    n, S = spec.n_agents, spec.n_states
    J = int(np.prod(spec.action_counts))
    lo, hi = spec.reward_range
    if spec.game_class is GameClass.ZERO_SUM:
        r1 = rng.uniform(lo, hi, size=(S, J))
        rewards = np.stack([r1, -r1])
    elif spec.game_class is GameClass.IDENTICAL_INTEREST:
        rewards = np.repeat(rng.uniform(lo, hi, size=(1, S, J)), n, axis=0)
    else:
        rewards = rng.uniform(lo, hi, size=(n, S, J))
    raw = rng.uniform(spec.raw_floor, 1.0, size=(S, J, S))
    transitions = raw / raw.sum(axis=2, keepdims=True)
    return StochasticGame(n, S, spec.action_counts, rewards, transitions, spec.gamma, spec.game_class)


def expected_reward(game: StochasticGame, agent: int, s: int, a: int | Sequence[int]) -> float:
    """Mean reward of ``agent`` at ``(s, a)``; ``a`` is a flat index or per-agent tuple."""
    if not 0 <= agent < game.n_agents:
        raise IndexError(f"agent {agent} out of range")
    if not 0 <= s < game.n_states:
        raise IndexError(f"state {s} out of range")
    j = game.encode(a) if not np.isscalar(a) else int(a)
    if not 0 <= j < game.n_joint:
        raise IndexError(f"joint action {j} out of range")
    return float(game.rewards[agent, s, j])


# exploration ------------------------------------------------------------


def _check_epsilon(epsilon: float) -> None:
    if not (0.0 < epsilon < 1.0):
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")


def exploration_kernel(epsilon: float, n_actions: int, a: int) -> np.ndarray:
    """Distribution of the executed action when ``a`` is intended under
    uniform ``epsilon`` exploration. The last entry is the residual so the
    result sums to one exactly."""
    _check_epsilon(epsilon)
    if n_actions < 1 or not 0 <= a < n_actions:
        raise ParameterError(f"bad action {a} for {n_actions} actions")
    dist = np.full(n_actions, epsilon / n_actions)
    dist[a] = 1.0 - epsilon + epsilon / n_actions
    dist[-1] = 1.0 - dist[:-1].sum()
    return dist


def exploration_matrix(epsilon: float, n_actions: int) -> np.ndarray:
    """Row ``a`` is ``exploration_kernel(epsilon, n_actions, a)``."""
    return np.stack([exploration_kernel(epsilon, n_actions, a) for a in range(n_actions)])


def joint_exploration_matrix(game: StochasticGame, epsilon: float) -> np.ndarray:
    """``E[j, j~]`` = product of per-agent kernels, flat indices on both axes."""
    E = np.ones((1, 1))
    # kron(A, B) puts B's index fastest, so the fastest agent goes last
    for c in game.action_counts:
        E = np.kron(exploration_matrix(epsilon, c), E)
    return E


def build_effective_game(game: StochasticGame, epsilon: float) -> StochasticGame:
    """Game whose rewards and transitions average over uniform exploration of every agent."""
    _check_epsilon(epsilon)
    E = joint_exploration_matrix(game, epsilon)
    rewards = game.rewards @ E.T
    transitions = np.einsum("ak,skt->sat", E, game.transitions)
    transitions /= transitions.sum(axis=2, keepdims=True)
    return StochasticGame(
        game.n_agents, game.n_states, game.action_counts, rewards, transitions,
        game.gamma, game.game_class, game.noise,
    )
