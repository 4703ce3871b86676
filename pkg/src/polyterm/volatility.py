"""Theta-indexed coefficient ODEs and power-option pricing.

For each theta = i/N on the grid, the coefficient functions k_i(x, theta)
solve K'(x) = S(theta) K(x), K(0) = (1, 0, ..., 0), where S(theta) is banded
exactly like the rate-model information matrix with the short-rate column
replaced by theta(theta-1)/2 * |h|^2 and the drift replaced by
d(z, theta) = a + theta * b.h.

The banding below was obtained by matching powers of z in
sum_i k_i * B_i(z, theta); the test suite keeps that symbolic match as a
permanent oracle, entry by entry in exact rational arithmetic.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Tuple

import numpy as np

from .errors import ConstraintError, DomainError, ThetaError
from .models import VolModelSpec, as_exact, check_vol_constraints
from .termstructure import matrix_exponential

__all__ = [
    "theta_index",
    "vol_band_entry",
    "build_theta_matrix",
    "ThetaSolution",
    "solve_K",
    "power_price",
    "implied_forward_variance",
]


def theta_index(spec: VolModelSpec, theta) -> int:
    """Map theta to its grid index i with theta = i/N, or raise ThetaError.

    Exact rationals are matched exactly; floats within 1e-12 of a grid point
    are accepted (no interpolation between grid points is ever attempted).
    """
    exact = as_exact(theta) * spec.N
    if exact.denominator == 1 and 1 <= exact.numerator <= spec.N - 1:
        return int(exact)
    approx = float(theta) * spec.N
    i = round(approx)
    if abs(approx - i) < 1e-12 * spec.N and 1 <= i <= spec.N - 1:
        return i
    raise ThetaError(
        f"theta={theta} is not on the grid {{i/{spec.N}: i=1..{spec.N - 1}}}"
    )


def vol_band_entry(spec: VolModelSpec, theta, row: int, col: int):
    """Entry (row, col) of S(theta), in exact arithmetic.

    Row ``row`` collects the z^row coefficient of B_col(z, theta):
    ``tt*h2[row-col] + col*d[row-col+1] + col(col-1)/2*b2[row-col+2]`` with
    tt = theta(theta-1)/2 and d = a + theta*bh.
    """
    theta = as_exact(theta)
    shift = row - col
    if abs(shift) > 2:
        return Fraction(0)
    half = Fraction(1, 2)
    tt = theta * (theta - 1) * half
    d = spec.d(theta)
    return (
        tt * spec.h2.as_fraction().coeff(shift)
        + col * d.as_fraction().coeff(shift + 1)
        + col * (col - 1) * half * spec.b2.as_fraction().coeff(shift + 2)
    )


def _validate(spec: VolModelSpec, theta) -> Tuple[int, int]:
    i = theta_index(spec, theta)
    report = check_vol_constraints(spec)
    if not report.satisfied:
        name, value = report.worst()
        raise ConstraintError(
            f"spec fails the no-arbitrage constraints: {name} residual {value}"
        )
    return i, spec.n_of(i)


def build_theta_matrix(spec: VolModelSpec, theta, exact: bool = False):
    """The (n(theta)+1) x (n(theta)+1) ODE matrix for one grid theta."""
    i, n = _validate(spec, theta)
    theta = Fraction(i, spec.N)
    rows: List[List[Fraction]] = [
        [vol_band_entry(spec, theta, r, c) for c in range(n + 1)]
        for r in range(n + 1)
    ]
    if exact:
        return rows
    return np.array([[float(v) for v in row] for row in rows])


class ThetaSolution:
    """Coefficient-ODE solution for a single theta on the grid.

    Per-theta solutions are fully independent, so a family of these may be
    built and evaluated in parallel with results identical to sequential
    execution.
    """

    def __init__(self, spec: VolModelSpec, theta):
        self.spec = spec
        self.index = theta_index(spec, theta)
        self.theta = Fraction(self.index, spec.N)
        self.n_theta = spec.n_of(self.index)
        self.S = build_theta_matrix(spec, self.theta)
        self.K0 = np.zeros(self.n_theta + 1)
        self.K0[0] = 1.0
        self._cache: Dict[float, np.ndarray] = {}

    def solve_K(self, x: float) -> np.ndarray:
        if x == 0.0:
            return self.K0.copy()
        cached = self._cache.get(x)
        if cached is None:
            cached = matrix_exponential(self.S, x)
            self._cache[x] = cached
        return cached @ self.K0

    def solve_K_dot(self, x: float) -> np.ndarray:
        return self.S @ self.solve_K(x)

    def price_factor(self, x: float, z: float) -> float:
        """sum_i k_i(x, theta) z^i."""
        self.spec.domain.require(z)
        return float(self.solve_K(x) @ np.power(z, np.arange(self.n_theta + 1)))


def solve_K(spec: VolModelSpec, theta, x: float) -> np.ndarray:
    """Coefficient vector (k_0(x, theta), ..., k_n(theta)(x, theta))."""
    if x < 0:
        raise DomainError(f"x must be non-negative, got {x}")
    return ThetaSolution(spec, theta).solve_K(x)


def power_price(spec: VolModelSpec, theta, ttm: float, s: float, z: float) -> float:
    """Price of the claim paying S_T^theta, T - t = ttm.

    No discounting: the spot rate is identically zero in this model class.
    """
    if s <= 0:
        raise DomainError(f"stock price must be positive, got {s}")
    if ttm < 0:
        raise DomainError(f"time to maturity must be non-negative, got {ttm}")
    sol = ThetaSolution(spec, theta)
    return float(s) ** float(sol.theta) * sol.price_factor(ttm, z)


def implied_forward_variance(spec: VolModelSpec, theta, x: float, z: float) -> float:
    """Forward variance implied by the polynomial price at horizon x.

    f = -(2 / (theta(1-theta))) * d/dx log(sum_i k_i(x, theta) z^i), with the
    x-derivative taken analytically through K'(x) = S K(x).  At x = 0 this
    equals h2(z) exactly.
    """
    from .errors import NonPositivePriceError

    sol = ThetaSolution(spec, theta)
    powers = np.power(z, np.arange(sol.n_theta + 1))
    q = float(sol.solve_K(x) @ powers)
    if q <= 0.0:
        raise NonPositivePriceError(
            f"polynomial price factor {q} <= 0 at x={x}, z={z}"
        )
    qdot = float(sol.solve_K_dot(x) @ powers)
    t = float(sol.theta)
    return -2.0 / (t * (1.0 - t)) * qdot / q
