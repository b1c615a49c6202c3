from .beam import nlp_beam_search
from .budget import Budget, IncumbentStore, SearchTrace
from .mcts import MctsConfig, exploration_bonus, mcts_search
from .rollout import greedy_rollout, sample_batch, sample_rollouts
from .run import METHODS, BudgetReport, run_with_budget, sampling
from .sgbs import SgbsConfig, sgbs

__all__ = [
    "METHODS",
    "Budget",
    "BudgetReport",
    "IncumbentStore",
    "MctsConfig",
    "SearchTrace",
    "SgbsConfig",
    "exploration_bonus",
    "greedy_rollout",
    "mcts_search",
    "nlp_beam_search",
    "run_with_budget",
    "sample_batch",
    "sample_rollouts",
    "sampling",
    "sgbs",
]
