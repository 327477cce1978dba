import numpy as np
import pytest
from hypothesis import settings

from adcdyn.game import GameClass, StochasticGame

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def make_game(rng, n_agents=2, n_states=2, actions=2, game_class=GameClass.GENERAL, gamma=0.8):
    counts = (actions,) * n_agents if np.isscalar(actions) else tuple(actions)
    J = int(np.prod(counts))
    r = rng.uniform(-1, 1, size=(n_agents, n_states, J))
    if game_class is GameClass.ZERO_SUM:
        r[1] = -r[0]
    elif game_class is GameClass.IDENTICAL_INTEREST:
        r[:] = r[0]
    p = rng.uniform(0.1, 1, size=(n_states, J, n_states))
    p /= p.sum(axis=2, keepdims=True)
    return StochasticGame(n_agents, n_states, counts, r, p, gamma, game_class)


def random_profile(rng, game):
    out = []
    for c in game.action_counts:
        x = rng.uniform(size=(game.n_states, c))
        out.append(x / x.sum(axis=1, keepdims=True))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
