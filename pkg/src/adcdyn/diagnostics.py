"""Analysis quantities computed from learner snapshots.

These read every agent's internal state (opponent strategies included), which
the learners themselves never do.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import LearnerState
from .game import ParameterError, StochasticGame
from .mdp import joint_action_probs


def global_q(game: StochasticGame, agent: int, v: np.ndarray) -> np.ndarray:
    """``r(s, a) + gamma * sum_s' p(s' | s, a) v(s')`` over flat joint actions."""
    v = np.asarray(v, dtype=float)
    if v.shape != (game.n_states,):
        raise ParameterError(f"value vector shape {v.shape} != ({game.n_states},)")
    return game.rewards[agent] + game.gamma * (game.transitions @ v)


def contract_opponents(game: StochasticGame, agent: int, table: np.ndarray,
                       profile: Sequence[np.ndarray]) -> np.ndarray:
    """``(S, A_i)`` expectation of a joint-action table over the opponents' strategies."""
    w = joint_action_probs(game, profile, skip=agent)
    own = game.action_table()[:, agent]
    onehot = own[:, None] == np.arange(game.action_counts[agent])[None, :]
    return (w * table) @ onehot


@dataclass
class DiagnosticSnapshot:
    k: int
    global_q: list[np.ndarray]        # per agent, (S, J)
    tracking_error: np.ndarray        # (n_agents, S), 2-norm of delta_k^i(s)
    mismatch: np.ndarray | None       # (S,), Frobenius norm of Delta_k(s); two agents only
    innovation: list[np.ndarray]      # per agent, (S, J)
    global_q_step: np.ndarray | None = None  # (n_agents,), max |Q_k - Q_prev|

    def summary(self) -> dict:
        return {
            "tracking_error_mean": float(np.mean(self.tracking_error)),
            "mismatch_mean": None if self.mismatch is None else float(np.mean(self.mismatch)),
            "innovation_max": float(max(np.max(np.abs(y)) for y in self.innovation)),
        }

    def to_dict(self) -> dict:
        S = self.tracking_error.shape[1]
        d = {
            "k": self.k,
            "tracking_error": {str(s): self.tracking_error[:, s].tolist() for s in range(S)},
            "mismatch": None if self.mismatch is None
            else {str(s): float(self.mismatch[s]) for s in range(S)},
            "innovation_max": {str(s): [float(np.max(np.abs(y[s]))) for y in self.innovation]
                               for s in range(S)},
        }
        if self.global_q_step is not None:
            d["global_q_step"] = self.global_q_step.tolist()
        return d


def diagnostic_snapshot(game: StochasticGame, learners: Sequence[LearnerState], k: int,
                        prev_v: Sequence[np.ndarray] | None = None,
                        want_mismatch: bool | None = None) -> DiagnosticSnapshot:
    if want_mismatch and game.n_agents != 2:
        raise ParameterError("the mismatch error is defined for two-agent games only")
    pi = [L.pi for L in learners]
    Qs, deltas, Ys = [], [], []
    for L in learners:
        i = L.agent
        Q = global_q(game, i, L.v)
        Qs.append(Q)
        deltas.append(np.linalg.norm(contract_opponents(game, i, Q, pi) - L.q, axis=1))
        v_hat = np.einsum("sa,sa->s", L.pi, L.q)
        Ys.append(global_q(game, i, v_hat) - Q)
    mismatch = None
    if game.n_agents == 2 and want_mismatch is not False:
        mismatch = np.linalg.norm(Qs[0] - Qs[1], axis=1)
    step = None
    if prev_v is not None:
        step = np.array([np.max(np.abs(Qs[i] - global_q(game, i, prev_v[i])))
                         for i in range(game.n_agents)])
    return DiagnosticSnapshot(k, Qs, np.array(deltas), mismatch, Ys, step)


def quasi_mono_monitor(history: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Largest backslide still ahead of each checkpoint.

    ``B[K] = max_{k2 >= k1 >= K} (Q[k1] - Q[k2])`` elementwise, from suffix
    minima in one backward pass. ``B`` is non-negative and nonincreasing in K.
    """
    H = np.asarray(history, dtype=float)
    if H.shape[0] < 2:
        raise ParameterError("need at least two checkpoints")
    B = np.zeros_like(H)
    suffix_min = H[-1].copy()
    for K in range(H.shape[0] - 2, -1, -1):
        suffix_min = np.minimum(suffix_min, H[K])
        B[K] = np.maximum(B[K + 1], H[K] - suffix_min)
    return B
