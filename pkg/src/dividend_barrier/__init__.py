"""Optimal dividend barrier with controlled business activity and a ruin-probability constraint."""

from .errors import (BracketError, ConfigError, DividendBarrierError, DomainError,
                     NumericalError, TruncationError, UnattainableRiskError,
                     UnsupportedCaseError)
from .model import (CaseLabel, ModelParams, RiskConstraint, characteristic_roots,
                    classify_case, drift_parameter, transform_G, transform_G_inverse)
from .policy import FeedbackPolicy, PolicyTable, a_star
from .risk import (ConstrainedOptimum, barrier_ruin, lower_bound_epsilon0, optimal_value,
                   risk_capital, solve_b_star)
from .simulate import (Estimate, SimBatch, SimConfig, band_stay_mc, bm_band_stay_probability,
                       estimate_J, long_horizon, simulate_path, simulate_reflected)
from .survival import SurvivalGrid, ruin_probability, solve_survival
from .value_function import (ValueFunctionSolution, closed_form_b0, compute_x_alpha,
                             compute_x_beta, dg_db, f, g, middle_a, solve_b0,
                             solve_value_function, thresholds)

__all__ = [name for name in dir() if not name.startswith("_")]
