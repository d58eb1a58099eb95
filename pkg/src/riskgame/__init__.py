"""Equilibria, learning dynamics and correlated-equilibrium checks for the competition-for-risk game."""

__version__ = "0.1.0"

from .analytic import (
    ConvergenceError,
    EquilibriumDensity,
    efficiency,
    solve_correlated_extreme,
    solve_multiplayer,
    solve_two_player,
)
from .corr_eq import CEPolytopeResult, max_total_reward_ce
from .discrete import build_grid, matrix_game, payoff_matrices
from .metrics import AtomicStrategyPair, nash_conv, quasi_nash_conv, sobol_1d
from .model import GameSpec, TieRule, bivariate_normal_cdf, utility2, utility_n
from .oracle import mc_utility2
from .solvers import Algorithm, SolverConfig, SolveResult, solve

__all__ = [
    "__version__",
    "GameSpec",
    "TieRule",
    "bivariate_normal_cdf",
    "utility2",
    "utility_n",
    "EquilibriumDensity",
    "ConvergenceError",
    "solve_two_player",
    "solve_multiplayer",
    "solve_correlated_extreme",
    "efficiency",
    "build_grid",
    "payoff_matrices",
    "matrix_game",
    "AtomicStrategyPair",
    "nash_conv",
    "quasi_nash_conv",
    "sobol_1d",
    "Algorithm",
    "SolverConfig",
    "SolveResult",
    "solve",
    "CEPolytopeResult",
    "max_total_reward_ce",
    "mc_utility2",
]
