"""Nash gaps in the original and the exploration-perturbed game."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .game import StochasticGame, _check_epsilon, build_effective_game
from .mdp import StrategyProfile, best_response_value, check_profile, policy_evaluation

CLAMP_TOL = 1e-9


class Aggregation(str, enum.Enum):
    MAX_OVER_STATES = "MaxOverStates"
    UNIFORM_INITIAL = "UniformInitial"


@dataclass
class NashGapReport:
    utilities: list[np.ndarray]
    best_response_values: list[np.ndarray]
    agent_gaps: list[float]
    nash_gap: float
    epsilon_threshold: float = float("nan")
    effective_nash_gap: float | None = None
    aggregation: Aggregation = Aggregation.MAX_OVER_STATES

    def to_dict(self) -> dict:
        return {
            "utilities": [u.tolist() for u in self.utilities],
            "best_response_values": [b.tolist() for b in self.best_response_values],
            "agent_gaps": list(self.agent_gaps),
            "nash_gap": self.nash_gap,
            "effective_nash_gap": self.effective_nash_gap,
            "epsilon_threshold": self.epsilon_threshold,
            "aggregation": self.aggregation.value,
        }


def perturb_profile(mu: StrategyProfile, epsilon: float) -> list[np.ndarray]:
    """``(1 - eps) * mu + eps * uniform`` for every agent."""
    return [(1.0 - epsilon) * np.asarray(m) + epsilon / np.shape(m)[1] for m in mu]


def epsilon_threshold(game: StochasticGame, epsilon: float,
                      reward_bound: float | None = None) -> float:
    """``2 eps / (1 - gamma)^2`` times the largest absolute expected reward.

    ``reward_bound`` replaces the realized maximum by a known bound, e.g. the
    range the rewards were drawn from.
    """
    _check_epsilon(epsilon)
    bound = game.max_abs_reward if reward_bound is None else float(reward_bound)
    return 2.0 * epsilon / (1.0 - game.gamma) ** 2 * bound


def _aggregate(diff: np.ndarray, aggregation: Aggregation) -> float:
    if aggregation is Aggregation.MAX_OVER_STATES:
        return float(np.max(diff))
    return float(np.mean(diff))


def nash_gap(game: StochasticGame, profile: StrategyProfile, tol: float = 1e-10,
             aggregation: Aggregation | str = Aggregation.MAX_OVER_STATES) -> NashGapReport:
    aggregation = Aggregation(aggregation)
    check_profile(game, profile)
    utils, brs, gaps = [], [], []
    for i in range(game.n_agents):
        u = policy_evaluation(game, i, profile).values
        b, _ = best_response_value(game, i, profile, tol)
        g = _aggregate(b.values - u, aggregation)
        if -max(tol, CLAMP_TOL) <= g < 0.0:
            g = 0.0
        utils.append(u)
        brs.append(b.values)
        gaps.append(g)
    return NashGapReport(utils, brs, gaps, max(gaps), aggregation=aggregation)


def effective_nash_gap(game: StochasticGame, mu: StrategyProfile, epsilon: float,
                       tol: float = 1e-10,
                       aggregation: Aggregation | str = Aggregation.MAX_OVER_STATES) -> float:
    return nash_gap(build_effective_game(game, epsilon), mu, tol, aggregation).nash_gap


def full_report(game: StochasticGame, mu: StrategyProfile, epsilon: float, tol: float = 1e-10,
                aggregation: Aggregation | str = Aggregation.MAX_OVER_STATES) -> NashGapReport:
    """Gap of the perturbed profile plus the effective gap of ``mu``."""
    rep = nash_gap(game, perturb_profile(mu, epsilon), tol, aggregation)
    rep.effective_nash_gap = effective_nash_gap(game, mu, epsilon, tol, aggregation)
    rep.epsilon_threshold = epsilon_threshold(game, epsilon)
    return rep


@dataclass
class PropositionCheck:
    effective_gap: float
    raw_gap: float
    threshold: float
    consistent: bool = field(init=False)
    tol: float = 1e-9

    def __post_init__(self):
        self.consistent = self.effective_gap > self.tol or self.raw_gap <= self.threshold + self.tol


def check_proposition(game: StochasticGame, mu: StrategyProfile, epsilon: float,
                      tol: float = 1e-9) -> PropositionCheck:
    """Zero effective gap of ``mu`` must imply a raw gap within the threshold for its perturbation."""
    bre_tol = min(tol, 1e-10)
    eff = effective_nash_gap(game, mu, epsilon, bre_tol)
    raw = nash_gap(game, perturb_profile(mu, epsilon), bre_tol).nash_gap
    return PropositionCheck(eff, raw, epsilon_threshold(game, epsilon), tol=tol)

