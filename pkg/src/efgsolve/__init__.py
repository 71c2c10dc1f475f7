"""Equilibrium solvers for two-player zero-sum extensive-form games in sequence form."""

from .cfr import CfrConfig, RegretState, averaged_strategy, cfr_step, counterfactual_values, regret_update
from .games import Game, GameError, build_kuhn, build_leduc, build_matrix_game, get_game, rock_paper_scissors
from .metrics import MetricsRecord, ReferenceEquilibrium, best_response, duality_gap, theta
from .oomd import OomdConfig, OomdState, Trajectory
from .regularizers import Regularizer, bregman, kkt_residual, prox_treeplex
from .treeplex import (
    Treeplex,
    TreeplexError,
    behavioral_from_sequence,
    build_treeplex,
    sequence_from_behavioral,
    uniform_strategy,
    validate_sequence,
)

__version__ = "0.1.0"
