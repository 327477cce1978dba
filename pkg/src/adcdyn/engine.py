"""Batch simulation of the learning dynamics.

The stage loop runs in the compiled ``_kernel`` extension when it is built,
otherwise in ``_fallback``. Set ``ADCDYN_BACKEND=python`` to force the
fallback. Both consume the same pre-drawn uniforms and produce identical
trajectories.
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback
from .dynamics import LearnerState, StepSchedule, TrialStreams, init_learners
from .game import StochasticGame

try:
    from . import _kernel
except ImportError:  # pragma: no cover - depends on the build
    _kernel = None

BACKENDS = {"python": _fallback.run_stages}
if _kernel is not None:
    BACKENDS["cython"] = _kernel.run_stages

if os.environ.get("ADCDYN_BACKEND", "").lower() == "python" or _kernel is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

STAT_NAMES = ("decomposition", "floor_margin", "simplex", "min_mu",
              "actor_improvement", "max_abs_q", "max_abs_v")


class NonFiniteStateError(FloatingPointError):
    def __init__(self, stage: int):
        super().__init__(f"non-finite learner state at stage {stage}")
        self.stage = stage


def _fresh_stats() -> np.ndarray:
    return np.array([0.0, np.inf, 0.0, np.inf, np.inf, 0.0, 0.0])


class Engine:
    """All learners of one trial plus its random streams.

    ``stage`` is the index of the next stage to be played; after
    ``advance(K)`` the learners hold their stage-``K`` iterates.
    """

    def __init__(self, game: StochasticGame, epsilon: float, schedule: StepSchedule,
                 seed: int, *, initial_state: int | None = None, check: bool = True,
                 chunk: int = 1 << 15, backend: str | None = None):
        self.game = game
        self.epsilon = float(epsilon)
        self.schedule = schedule
        self.check = check
        self.chunk = int(chunk)
        self.backend = backend or BACKEND
        self._run = BACKENDS[self.backend]
        self.streams = TrialStreams(seed, game.n_agents)
        self.state = self.streams.initial_state(game.n_states) if initial_state is None \
            else int(initial_state)
        self.stage = 0

        n, S = game.n_agents, game.n_states
        amax = max(game.action_counts)
        self.q = np.zeros((n, S, amax))
        self.mu = np.zeros((n, S, amax))
        self.pi = np.zeros((n, S, amax))
        self.v = np.zeros((n, S))
        for L in init_learners(game, epsilon):
            self.load_learner(L)

        self.n_actions = np.array(game.action_counts, dtype=np.int_)
        self.strides = np.array(game.strides, dtype=np.int_)
        self.rewards = np.ascontiguousarray(game.rewards)
        cdf = np.cumsum(game.transitions, axis=2)
        self.trans_cdf = np.ascontiguousarray(cdf)
        if game.noise is None:
            self.noise_vals = np.zeros((n, 1))
            self.noise_cdf = np.ones((n, 1))
            self.noise_len = np.zeros(n, dtype=np.int_)
        else:
            z = max(len(x.values) for x in game.noise)
            self.noise_vals = np.zeros((n, z))
            self.noise_cdf = np.ones((n, z))
            self.noise_len = np.array([len(x.values) for x in game.noise], dtype=np.int_)
            for i, x in enumerate(game.noise):
                self.noise_vals[i, :len(x.values)] = x.values
                self.noise_cdf[i, :len(x.values)] = np.cumsum(x.probs)
        self.stats = _fresh_stats()
        self._agent_u = np.zeros((n, 0))
        self._env_u = np.zeros((0, n + 1))
        self._u_off = 0

    def load_learner(self, L: LearnerState) -> None:
        a = L.n_actions
        self.q[L.agent, :, :a] = L.q
        self.mu[L.agent, :, :a] = L.mu
        self.pi[L.agent, :, :a] = L.pi
        self.v[L.agent] = L.v

    def learners(self) -> list[LearnerState]:
        out = []
        for i, a in enumerate(self.game.action_counts):
            out.append(LearnerState(i, self.epsilon, self.q[i, :, :a].copy(),
                                    self.mu[i, :, :a].copy(), self.pi[i, :, :a].copy(),
                                    self.v[i].copy()))
        return out

    def profile(self, which: str = "pi") -> list[np.ndarray]:
        arr = getattr(self, which)
        return [arr[i, :, :a].copy() for i, a in enumerate(self.game.action_counts)]

    def _refill(self) -> None:
        n = self.game.n_agents
        self._agent_u = np.ascontiguousarray(
            np.stack([g.random(self.chunk) for g in self.streams.agents]))
        self._env_u = np.ascontiguousarray(self.streams.env.random((self.chunk, n + 1)))
        self._u_off = 0

    def advance(self, to_stage: int) -> None:
        """Play stages ``self.stage, ..., to_stage - 1``."""
        if to_stage < self.stage:
            raise ValueError(f"cannot rewind from stage {self.stage} to {to_stage}")
        sch = self.schedule
        while self.stage < to_stage:
            if self._u_off >= self._agent_u.shape[1]:
                self._refill()
            k1 = min(to_stage, self.stage + self._agent_u.shape[1] - self._u_off)
            s, bad = self._run(
                self.stage, k1, self.state, self.q, self.mu, self.pi, self.v,
                self.n_actions, self.strides, self.rewards, self.trans_cdf,
                self.noise_vals, self.noise_cdf, self.noise_len,
                self._agent_u, self._env_u, self._u_off,
                self.game.gamma, self.epsilon, sch.rho_lambda, sch.rho_alpha, sch.beta_scale,
                self.stats, self.check,
            )
            if bad >= 0:
                raise NonFiniteStateError(int(bad))
            self._u_off += k1 - self.stage
            self.stage = k1
            self.state = int(s)

    def invariant_stats(self) -> dict[str, float]:
        return dict(zip(STAT_NAMES, self.stats.tolist()))
