"""Treatment-rule learning from instrumental-variable data with partially identified effects."""

from .bounds import (
    BALKE_PEARL, MANSKI, MANSKI_PEPPER, POINT_LATE, BoundsEstimate, balke_pearl_bounds, compute_bounds,
    manski_bounds, manski_pepper_bounds, point_late,
)
from .core_model import (
    LINEAR, QUADRANT, ConfigError, DataError, NumericalError, ObservationTable, OutcomeRange, Policy,
    PolicyClassSpec, empirical_objective, evaluate_policy, population_objective,
)
from .nuisance import CrossFitNuisances, LearnerSpec, PointNuisance, crossfit, make_folds
from .optimize import SolveResult, solve, solve_linear, solve_quadrant, verify_solution
from .scores import ORTHOGONAL, PLUGIN, Criterion, ScoreVector, build_scores, plugin_score

__version__ = "0.1.0"
