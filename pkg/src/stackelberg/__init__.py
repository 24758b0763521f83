"""Local Stackelberg equilibria of one leader and N quadratic aggregative followers."""

from .errors import SolverError
from .game import Budget, FollowerSpec, LeaderSpec, ParametrizedGame, validate_game
from .leader import ArmijoConfig, StackelbergConfig, solve_stackelberg
from .lower import VneConfig, solve_vne
from .numerics import Polytope, block_inverse, solve_qp
from .scenario import GeneratorConfig, generate_scenario, load_scenario
from .sensitivity import follower_jacobian, game_jacobians
from .warmstart import centralized_lp_oracle, run_warmstart

__version__ = "0.1.0"

__all__ = [
    "ArmijoConfig",
    "Budget",
    "FollowerSpec",
    "GeneratorConfig",
    "LeaderSpec",
    "ParametrizedGame",
    "Polytope",
    "SolverError",
    "StackelbergConfig",
    "VneConfig",
    "block_inverse",
    "centralized_lp_oracle",
    "follower_jacobian",
    "game_jacobians",
    "generate_scenario",
    "load_scenario",
    "run_warmstart",
    "solve_qp",
    "solve_stackelberg",
    "solve_vne",
    "validate_game",
]
