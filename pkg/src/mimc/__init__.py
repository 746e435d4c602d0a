"""Multi-index Monte Carlo: index sets, rate model, estimator and samplers."""
from .index_sets import (
    IndexSet,
    full_tensor_set,
    outer_boundary,
    optimal_weights,
    profit,
    profit_level_set,
    td_set,
)
from .rate_model import (
    BoxTooSmallError,
    ComplexityReport,
    RateParameters,
    c_epsilon,
    classify_directions,
    complexity_class,
    derived_rates,
    ft_complexity,
    ft_levels_for_tol,
    mlmc_complexity,
    predicted_bias_bound,
    predicted_work_bound,
    td_level_for_tol,
)
from .simplex_integrals import (
    bias_bound_constant,
    exp_simplex_integral,
    work_bound_constant,
)

__version__ = "0.1.0"
