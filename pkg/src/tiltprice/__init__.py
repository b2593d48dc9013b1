"""Utility indifference prices and their large-position limits.

Library layout:

* :mod:`tiltprice.utility` -- utility class, conjugates, membership checks
* :mod:`tiltprice.market` -- basis-risk diffusion simulation and Z(rho)
* :mod:`tiltprice.montecarlo` -- stable weighted-expectation estimators
* :mod:`tiltprice.tilt` -- exponential-tilt equation and its solver
* :mod:`tiltprice.pricing` -- value functions, prices, limits, p_i/p_m curves
* :mod:`tiltprice.trinomial` -- exact one-period three-state market
* :mod:`tiltprice.cli` -- config-driven command line front end
"""

from .market import BasisRiskModel, Coefficient, PathBatch, q_measure_weights, simulate, stochastic_exponential
from .montecarlo import Estimate, difference, log_mean_exp, weighted_mean
from .pricing import (
    ClaimSpec,
    PriceResult,
    arbitrage_bounds,
    differential_check,
    entropy_gap,
    exp_indifference_price,
    exp_value_function,
    fixed_market_price_decay,
    limit_price,
    optimal_quantity,
    pi_pm_curves,
    quantity_limit_product,
)
from .tilt import TiltSample, beta_n, beta_star, solve_tilt, tilt_mean
from .trinomial import TrinomialModel, tri_limit, tri_price_exp, tri_price_general, tri_value
from .utility import UtilitySpec, check_membership, conjugate_exp, eval_utility, risk_aversion

__version__ = "0.1.0"
