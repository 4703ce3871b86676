"""Polynomial interest-rate and stochastic-volatility models.

Bond prices of the form P = sum_i g_i(T-t) Z^i and power-option prices
S^theta * sum_i k_i(T-t, theta) Z^i, with exact no-arbitrage constraint
checking, matrix-exponential term structures, Monte Carlo cross-validation,
stationary factor densities, and a forward-variance verification suite.
"""

__version__ = "0.1.0"

from .errors import PolytermError
from .models import (
    ConstraintReport,
    Interval,
    RateModelSpec,
    VolModelSpec,
    build_family,
    check_rate_constraints,
    check_vol_constraints,
    compute_Ai,
    compute_Bi,
)
from .polynomials import Polynomial
from .termstructure import TermStructure, build_information_matrix, matrix_exponential, spot_rate
from .volatility import ThetaSolution, build_theta_matrix, implied_forward_variance, power_price, solve_K

__all__ = [
    "__version__",
    "PolytermError",
    "Polynomial",
    "Interval",
    "RateModelSpec",
    "VolModelSpec",
    "ConstraintReport",
    "build_family",
    "check_rate_constraints",
    "check_vol_constraints",
    "compute_Ai",
    "compute_Bi",
    "TermStructure",
    "build_information_matrix",
    "matrix_exponential",
    "spot_rate",
    "ThetaSolution",
    "build_theta_matrix",
    "solve_K",
    "power_price",
    "implied_forward_variance",
]
