"""Actor-dual-critic learners, one stage at a time.

Each agent keeps a fast critic ``q`` over its own actions, an actor ``pi``
with its exploration-free companion ``mu`` and a slow critic ``v``. The
functions here are the reference, per-stage form of the dynamics; the batch
kernels in :mod:`adcdyn.engine` run the same arithmetic in a tight loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .game import GameClass, ParameterError, StochasticGame, _check_epsilon, exploration_kernel


@dataclass(frozen=True)
class StepSchedule:
    rho_lambda: float = 0.60
    rho_alpha: float = 0.95
    beta_scale: float = 10.0

    def validate(self, game_class: GameClass | str | None = None) -> None:
        if not (0.5 < self.rho_lambda < self.rho_alpha < 1.0):
            raise ParameterError(
                f"need 1/2 < rho_lambda < rho_alpha < 1, got {self.rho_lambda}, {self.rho_alpha}"
            )
        if self.beta_scale < 1.0:
            raise ParameterError("beta_scale must be >= 1")
        if game_class is not None and GameClass(game_class) is GameClass.IDENTICAL_INTEREST:
            if self.rho_alpha < 1.5 * self.rho_lambda or self.rho_alpha + self.rho_lambda <= 1.5:
                raise ParameterError(
                    "identical-interest games need rho_alpha >= 1.5 rho_lambda "
                    "and rho_alpha + rho_lambda > 1.5"
                )


def step_sizes(k: int, schedule: StepSchedule) -> tuple[float, float, float]:
    """``(lambda_k, alpha_k, beta_k)``."""
    if k < 0:
        raise ParameterError("stage index must be non-negative")
    t = k + 1.0
    return t ** (-schedule.rho_lambda), t ** (-schedule.rho_alpha), min(1.0, schedule.beta_scale / t)


@dataclass
class LearnerState:
    agent: int
    epsilon: float
    q: np.ndarray  # (n_states, n_actions)
    mu: np.ndarray
    pi: np.ndarray
    v: np.ndarray  # (n_states,)

    @property
    def n_actions(self) -> int:
        return self.q.shape[1]

    def copy(self) -> "LearnerState":
        return LearnerState(self.agent, self.epsilon, self.q.copy(), self.mu.copy(),
                            self.pi.copy(), self.v.copy())


@dataclass(frozen=True)
class StageRecord:
    k: int
    state: int
    joint_action: tuple[int, ...]
    rewards: tuple[float, ...]
    next_state: int


def init_learners(game: StochasticGame, epsilon: float) -> list[LearnerState]:
    _check_epsilon(epsilon)
    out = []
    for i, c in enumerate(game.action_counts):
        u = np.full((game.n_states, c), 1.0 / c)
        out.append(LearnerState(i, epsilon, np.zeros((game.n_states, c)), u.copy(), u.copy(),
                                np.zeros(game.n_states)))
    return out


def mix_uniform(mu_row, epsilon: float, n_actions: int):
    return (1.0 - epsilon) * mu_row + epsilon / n_actions


def q_update(learner: LearnerState, k: int, prev: StageRecord, schedule: StepSchedule,
             gamma: float) -> LearnerState:
    """Move only the visited ``(state, own action)`` entry of the fast critic."""
    lam = step_sizes(k - 1, schedule)[0]
    s, a = prev.state, prev.joint_action[learner.agent]
    q = learner.q.copy()
    old = q[s, a]
    target = prev.rewards[learner.agent] + gamma * learner.v[prev.next_state]
    q[s, a] = old + lam * (target - old) / learner.pi[s, a]
    return replace(learner, q=q)


def _first_argmax(row) -> int:
    best, b = row[0], 0
    for j in range(1, len(row)):
        if row[j] > best:
            best, b = row[j], j
    return b


def epsilon_best_response(q_row: Sequence[float], epsilon: float) -> tuple[np.ndarray, int]:
    row = np.asarray(q_row, dtype=float)
    if row.size == 0 or not np.all(np.isfinite(row)):
        raise ParameterError("q row must be nonempty and finite")
    b = _first_argmax(row)
    return exploration_kernel(epsilon, row.size, b), b


def actor_update(learner: LearnerState, k: int, schedule: StepSchedule) -> LearnerState:
    """Step ``mu`` toward the greedy action of ``q`` at every state and re-derive ``pi``."""
    alpha = step_sizes(k - 1, schedule)[1]
    n_act = learner.n_actions
    mu = learner.mu.copy()
    for s in range(mu.shape[0]):
        ind = np.zeros(n_act)
        ind[_first_argmax(learner.q[s])] = 1.0
        mu[s] = mu[s] + alpha * (ind - mu[s])
    pi = mix_uniform(mu, learner.epsilon, n_act)
    return replace(learner, mu=mu, pi=pi)


def v_update(learner: LearnerState, k: int, schedule: StepSchedule) -> LearnerState:
    beta = step_sizes(k - 1, schedule)[2]
    v = learner.v.copy()
    for s in range(v.shape[0]):
        t = 0.0
        for p, qq in zip(learner.pi[s], learner.q[s]):
            t += p * qq
        v[s] = v[s] + beta * (t - v[s])
    return replace(learner, v=v)


class TrialStreams:
    """Independent counter-based generators: one per agent, one for the
    environment and one for the initial state."""

    def __init__(self, seed: int, n_agents: int):
        children = np.random.SeedSequence(seed).spawn(n_agents + 2)
        self.agents = [np.random.Generator(np.random.Philox(c)) for c in children[:n_agents]]
        self.env = np.random.Generator(np.random.Philox(children[n_agents]))
        self.init = np.random.Generator(np.random.Philox(children[n_agents + 1]))

    def initial_state(self, n_states: int) -> int:
        return int(self.init.integers(n_states))


def sample_index(probs, u: float) -> int:
    """Inverse-CDF draw with a running sum; falls back to the last index."""
    c = 0.0
    for j, p in enumerate(probs):
        c += p
        if u < c:
            return j
    return len(probs) - 1


def sample_from_cdf(cdf, u: float) -> int:
    for j, c in enumerate(cdf):
        if u < c:
            return j
    return len(cdf) - 1


def environment_step(game: StochasticGame, s: int, actions: Sequence[int],
                     env_u: Sequence[float]) -> tuple[tuple[float, ...], int]:
    """Rewards and next state for joint ``actions``; ``env_u`` holds
    ``n_agents + 1`` uniforms (transition first, then one per agent's noise)."""
    j = game.encode(actions)
    nxt = sample_from_cdf(np.cumsum(game.transitions[s, j]), env_u[0])
    rewards = []
    for i in range(game.n_agents):
        r = float(game.rewards[i, s, j])
        if game.noise is not None:
            n = game.noise[i]
            r += float(n.values[sample_from_cdf(np.cumsum(n.probs), env_u[1 + i])])
        rewards.append(r)
    return tuple(rewards), nxt


def adc_stage(game: StochasticGame, learners: Sequence[LearnerState], k: int,
              prev: StageRecord | None, current_state: int, streams: TrialStreams,
              schedule: StepSchedule) -> tuple[list[LearnerState], StageRecord]:
    """One stage: update from the previous record (when ``k > 0``), then act.

    All three updates read the stage ``k-1`` snapshot. Each learner sees only
    its own reward, its own action and the states.
    """
    if (k > 0) != (prev is not None):
        raise ParameterError("prev record is required exactly when k > 0")
    if k > 0:
        new = []
        for L in learners:
            qn = q_update(L, k, prev, schedule, game.gamma)
            an = actor_update(L, k, schedule)
            vn = v_update(L, k, schedule)
            new.append(LearnerState(L.agent, L.epsilon, qn.q, an.mu, an.pi, vn.v))
        learners = new
    else:
        learners = list(learners)
    actions = tuple(sample_index(L.pi[current_state], streams.agents[L.agent].random())
                    for L in learners)
    rewards, nxt = environment_step(game, current_state, actions, streams.env.random(game.n_agents + 1))
    return learners, StageRecord(k, current_state, actions, rewards, nxt)


def profile_of(learners: Sequence[LearnerState], which: str = "pi") -> list[np.ndarray]:
    return [getattr(L, which).copy() for L in learners]


def check_learner(learner: LearnerState, tol: float = 1e-12) -> dict[str, float]:
    """Deviations from the decomposition, floor and simplex invariants (all should be <= tol)."""
    n = learner.n_actions
    eps = learner.epsilon
    decomp = float(np.max(np.abs(learner.pi - mix_uniform(learner.mu, eps, n))))
    floor = float(max(0.0, eps / n - np.min(learner.pi)))
    simplex = float(max(np.max(np.abs(learner.pi.sum(axis=1) - 1.0)),
                        np.max(np.abs(learner.mu.sum(axis=1) - 1.0)),
                        max(0.0, -np.min(learner.mu))))
    finite = all(np.all(np.isfinite(x)) for x in (learner.q, learner.pi, learner.mu, learner.v))
    return {"decomposition": decomp, "floor": floor, "simplex": simplex,
            "finite": 0.0 if finite else math.inf}
