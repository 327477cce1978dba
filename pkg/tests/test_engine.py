import os
import subprocess
import sys

import numpy as np
import pytest

from adcdyn.dynamics import StepSchedule, TrialStreams, adc_stage, init_learners
from adcdyn.engine import BACKENDS, Engine, NonFiniteStateError
from adcdyn.game import (GameClass, GameSpec, RewardNoise, StochasticGame,
                         generate_random_game)

EPS = 0.002
SCHED = StepSchedule()
needs_cython = pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")


def zs_game(seed=0):
    return generate_random_game(GameSpec(2, 3, (3, 3), 0.8, GameClass.ZERO_SUM), seed)


def mixed_game(seed=1):
    return generate_random_game(GameSpec(3, 2, (2, 3, 2), 0.7, GameClass.GENERAL), seed)


def noisy(game):
    noise = tuple(RewardNoise(np.array([-0.2, 0.0, 0.2]), np.array([0.25, 0.5, 0.25]))
                  for _ in range(game.n_agents))
    return StochasticGame(game.n_agents, game.n_states, game.action_counts, game.rewards,
                          game.transitions, game.gamma, game.game_class, noise)


def snapshot(e):
    return [e.q.copy(), e.mu.copy(), e.pi.copy(), e.v.copy(), e.stats.copy(), e.state]


def same(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def reference_learners(game, K, seed):
    """Stage-``K`` learners from the per-stage reference."""
    streams = TrialStreams(seed, game.n_agents)
    s = streams.initial_state(game.n_states)
    learners, prev = init_learners(game, EPS), None
    for k in range(K + 1):
        learners, prev = adc_stage(game, learners, k, prev, s, streams, SCHED)
        s = prev.next_state
    return learners


@needs_cython
@pytest.mark.parametrize("make", [zs_game, mixed_game, lambda: noisy(zs_game(3))])
def test_backends_bit_identical(make):
    g = make()
    runs = []
    for b in ("cython", "python"):
        e = Engine(g, EPS, SCHED, 17, backend=b, chunk=700)
        e.advance(2500)
        runs.append(snapshot(e))
    assert same(*runs)


@pytest.mark.parametrize("make,K", [(zs_game, 400), (mixed_game, 300),
                                    (lambda: noisy(mixed_game(2)), 250)])
def test_engine_matches_per_stage_reference(make, K):
    g = make()
    ref = reference_learners(g, K, 5)
    e = Engine(g, EPS, SCHED, 5)
    e.advance(K)
    for a, b in zip(ref, e.learners()):
        for f in ("q", "mu", "pi", "v"):
            assert np.array_equal(getattr(a, f), getattr(b, f)), f


def test_checkpoint_placement_is_invisible():
    g = zs_game()
    a = Engine(g, EPS, SCHED, 3)
    a.advance(70_000)
    b = Engine(g, EPS, SCHED, 3)
    for K in (1, 2, 77, 32_768, 32_769, 50_000, 70_000):
        b.advance(K)
    assert same(snapshot(a), snapshot(b))


def test_chunk_size_is_invisible():
    g = mixed_game()
    a = Engine(g, EPS, SCHED, 8, chunk=1 << 15)
    b = Engine(g, EPS, SCHED, 8, chunk=37)
    a.advance(3000)
    b.advance(3000)
    assert same(snapshot(a), snapshot(b))


def test_seed_changes_trajectory():
    g = zs_game()
    a, b = Engine(g, EPS, SCHED, 1), Engine(g, EPS, SCHED, 2)
    a.advance(1000)
    b.advance(1000)
    assert not np.array_equal(a.q, b.q)


def test_invariant_stats():
    e = Engine(mixed_game(), EPS, SCHED, 4)
    e.advance(20_000)
    st = e.invariant_stats()
    assert st["decomposition"] <= 1e-12
    assert st["simplex"] <= 1e-12
    assert st["floor_margin"] >= 0.0
    assert st["min_mu"] >= 0.0
    assert st["actor_improvement"] >= -1e-12
    assert np.isfinite(st["max_abs_q"])


def test_padding_untouched():
    e = Engine(mixed_game(), EPS, SCHED, 4)
    e.advance(5000)
    assert np.all(e.q[0, :, 2] == 0) and np.all(e.pi[2, :, 2] == 0)


@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_non_finite_state_reports_stage(backend):
    g = zs_game()
    big = StochasticGame(2, 3, (3, 3), np.stack([np.full((3, 9), 1e308)] * 2),
                         g.transitions, 0.8)
    e = Engine(big, EPS, SCHED, 0, backend=backend)
    with pytest.raises(NonFiniteStateError) as info:
        e.advance(100)
    assert 0 <= info.value.stage < 100


def test_no_rewind():
    e = Engine(zs_game(), EPS, SCHED, 0)
    e.advance(10)
    with pytest.raises(ValueError):
        e.advance(5)


def test_backend_env_override():
    env = dict(os.environ, ADCDYN_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import adcdyn; print(adcdyn.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
