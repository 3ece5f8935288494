"""Equilibrium stopping sets for one-dimensional diffusions under weighted discounting."""

__version__ = "0.1.0"

from .discounting import DiscountMeasure, eval_delta, hyperbolic_measure, check_decreasing_impatience  # noqa: E402
from .diffusion import DiffusionModel, constant_model, general_model, laplace_one_barrier, laplace_two_barrier  # noqa: E402
from .stopping_sets import StoppingSet, set_liminf_limsup  # noqa: E402
from .rewards import RewardFunction, make_reward, tent_reward  # noqa: E402
from .valuation import continuation_value, solve_resolvent, closed_form_J_ab, closed_form_J_b  # noqa: E402
from .equilibrium import (  # noqa: E402
    EquilibriumReport,
    check_equilibrium,
    smallest_equilibrium,
    value_V,
    value_V_eps,
)

__all__ = [
    "DiscountMeasure", "eval_delta", "hyperbolic_measure", "check_decreasing_impatience",
    "DiffusionModel", "constant_model", "general_model", "laplace_one_barrier", "laplace_two_barrier",
    "StoppingSet", "set_liminf_limsup", "RewardFunction", "make_reward", "tent_reward",
    "continuation_value", "solve_resolvent", "closed_form_J_ab", "closed_form_J_b",
    "EquilibriumReport", "check_equilibrium", "smallest_equilibrium", "value_V", "value_V_eps",
]
