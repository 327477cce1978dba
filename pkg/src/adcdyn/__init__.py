"""Actor-dual-critic learning dynamics for tabular stochastic games."""

from .dynamics import StepSchedule, adc_stage, init_learners, step_sizes
from .engine import BACKEND, Engine
from .equilibrium import (
    Aggregation,
    check_proposition,
    effective_nash_gap,
    epsilon_threshold,
    nash_gap,
)
from .game import (
    GameClass,
    GameSpec,
    StochasticGame,
    build_effective_game,
    generate_random_game,
    load_game,
    save_game,
    validate_game,
)
from .mdp import best_response_value, brute_force_best_response, policy_evaluation

__version__ = "0.1.0"
