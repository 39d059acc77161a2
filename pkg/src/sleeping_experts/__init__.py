"""Online learning with changing action sets: approximate-regret learners, oracles and a trial runner."""

from .bandit import BanditHATT, ChosenLossQuery, Level, bandit_defaults, level_bound, round_losses
from .core import (
    ConfigError,
    DomainError,
    Environment,
    PreconditionError,
    Ranking,
    RegretReport,
    RoundTrace,
    comparator_loss_of,
    make_environment,
    regret_report,
    sigma_choice,
    validate_environment,
)
from .envgen import GeneratorSpec, generate, z01_to_z0
from .hatt import HATT, hatt_bound, hatt_step, run_tournament
from .hedge import Hedge, ewu_update, hedge_bound
from .hopp import HOPP, hopp_bound, hopp_step
from .oracle import best_ranking, best_ranking_dp, per_subset_baseline, ranking_hedge_baseline
from .rng import Stream, generator
from .runner import replay
from .traces import read_trace, write_trace

__version__ = "0.1.0"
