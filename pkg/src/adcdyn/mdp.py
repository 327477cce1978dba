"""Exact single-agent solves against frozen opponents."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import ParameterError, StochasticGame

RESIDUAL_TOL = 1e-10
ENUMERATION_LIMIT = 10**6

# one (n_states, n_actions_i) row-stochastic array per agent
StrategyProfile = Sequence[np.ndarray]


@dataclass
class ValueVector:
    values: np.ndarray
    agent: int
    tol: float = 0.0
    iterations: int = 0
    residual: float = 0.0

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def uniform_profile(game: StochasticGame) -> list[np.ndarray]:
    return [np.full((game.n_states, c), 1.0 / c) for c in game.action_counts]


def pure_profile(game: StochasticGame, actions: np.ndarray) -> list[np.ndarray]:
    """Deterministic profile from an ``(n_agents, n_states)`` table of actions."""
    out = []
    for i, c in enumerate(game.action_counts):
        p = np.zeros((game.n_states, c))
        p[np.arange(game.n_states), np.asarray(actions[i])] = 1.0
        out.append(p)
    return out


def check_profile(game: StochasticGame, profile: StrategyProfile, skip: int | None = None,
                  tol: float = 1e-12) -> None:
    if len(profile) != game.n_agents:
        raise ParameterError(f"profile has {len(profile)} entries, game has {game.n_agents} agents")
    for i, (p, c) in enumerate(zip(profile, game.action_counts)):
        if i == skip:
            continue
        p = np.asarray(p)
        if p.shape != (game.n_states, c):
            raise ParameterError(f"agent {i} strategy shape {p.shape} != {(game.n_states, c)}")
        if np.any(p < -tol) or np.max(np.abs(p.sum(axis=1) - 1.0)) > tol:
            raise ParameterError(f"agent {i} strategy rows are not distributions")


def joint_action_probs(game: StochasticGame, profile: StrategyProfile,
                       skip: int | None = None) -> np.ndarray:
    """``(n_states, n_joint)`` product distribution over joint actions.

    With ``skip=i`` agent ``i``'s factor is left out, giving the opponents'
    weight for each joint action.
    """
    acts = game.action_table()
    probs = np.ones((game.n_states, game.n_joint))
    for i in range(game.n_agents):
        if i == skip:
            continue
        probs *= np.asarray(profile[i])[:, acts[:, i]]
    return probs


def policy_evaluation(game: StochasticGame, agent: int, profile: StrategyProfile) -> ValueVector:
    """Solve ``(I - gamma P_pi) v = r_pi`` for ``agent`` under ``profile``."""
    check_profile(game, profile)
    w = joint_action_probs(game, profile)
    P = np.einsum("sj,sjt->st", w, game.transitions)
    r = np.einsum("sj,sj->s", w, game.rewards[agent])
    A = np.eye(game.n_states) - game.gamma * P
    v = np.linalg.solve(A, r)
    residual = float(np.max(np.abs(A @ v - r)))
    if residual > RESIDUAL_TOL:
        raise FloatingPointError(f"policy evaluation residual {residual:.3e} exceeds {RESIDUAL_TOL}")
    return ValueVector(v, agent, 0.0, 0, residual)


def induced_mdp(game: StochasticGame, agent: int,
                opponents: StrategyProfile) -> tuple[np.ndarray, np.ndarray]:
    """Agent's rewards ``(S, A_i)`` and transitions ``(S, A_i, S)`` with opponents marginalized.

    ``opponents`` is a full-length profile; the entry at ``agent`` is ignored
    and may be ``None``.
    """
    check_profile(game, opponents, skip=agent)
    w = joint_action_probs(game, opponents, skip=agent)
    own = game.action_table()[:, agent]
    n_own = game.action_counts[agent]
    onehot = (own[:, None] == np.arange(n_own)[None, :]).astype(float)  # (J, A_i)
    r = np.einsum("sj,sj,ja->sa", w, game.rewards[agent], onehot)
    p = np.einsum("sj,sjt,ja->sat", w, game.transitions, onehot)
    return r, p


def best_response_value(game: StochasticGame, agent: int, opponents: StrategyProfile,
                        tol: float = 1e-10) -> tuple[ValueVector, np.ndarray]:
    """Optimal values of ``agent``'s induced MDP and a greedy deterministic policy.

    Value iteration stops once successive iterates differ by at most
    ``tol * (1 - gamma) / (2 * gamma)`` in max norm, which bounds the error of
    the returned values by ``tol``. Ties go to the lowest action index.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    r, p = induced_mdp(game, agent, opponents)
    g = game.gamma
    v = np.zeros(game.n_states)
    if g == 0.0:
        q = r
        v = q.max(axis=1)
        return ValueVector(v, agent, tol, 1), np.argmax(q, axis=1)
    stop = tol * (1.0 - g) / (2.0 * g)
    it = 0
    while True:
        it += 1
        q = r + g * (p @ v)
        v_new = q.max(axis=1)
        diff = float(np.max(np.abs(v_new - v)))
        v = v_new
        if diff <= stop:
            break
    q = r + g * (p @ v)
    return ValueVector(v, agent, tol, it), np.argmax(q, axis=1)


def brute_force_best_response(game: StochasticGame, agent: int,
                              opponents: StrategyProfile) -> ValueVector:
    """Statewise max over every deterministic stationary policy of ``agent``."""
    n_own = game.action_counts[agent]
    if n_own ** game.n_states > ENUMERATION_LIMIT:
        raise ParameterError(
            f"{n_own}^{game.n_states} deterministic policies exceed the enumeration limit"
        )
    check_profile(game, opponents, skip=agent)
    profile = list(opponents)
    best = np.full(game.n_states, -np.inf)
    eye = np.eye(n_own)
    for actions in itertools.product(range(n_own), repeat=game.n_states):
        profile[agent] = eye[list(actions)]
        best = np.maximum(best, policy_evaluation(game, agent, profile).values)
    return ValueVector(best, agent)
