"""Information matrix, coefficient ODE solution, and bond-price evaluation.

The coefficient functions g_i of a passing rate model solve the linear ODE
system G'(x) = S G(x) with G(0) = (1, 0, ..., 0), where S is the banded
"information matrix" assembled from the polynomial coefficients of the drift,
squared diffusion and short-rate map.  The solution G(x) = e^{Sx} G(0) is
evaluated through a dense matrix exponential; S is small, so this is cheap
and robust even when S is defective.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Sequence

import numpy as np
import scipy.linalg

from .errors import ConstraintError, DomainError, NonPositivePriceError, OverflowRangeError
from .models import RateModelSpec, check_rate_constraints

__all__ = [
    "band_entry",
    "build_information_matrix",
    "matrix_exponential",
    "TermStructure",
    "spot_rate",
]


def band_entry(a, b2, R, row: int, col: int):
    """Entry (row, col) of the information matrix, in the input arithmetic.

    Row ``row`` of the ODE collects, from g_col, the z^row coefficient of
    A_col(z); with monomial basis that is
    ``col * a[row-col+1] + col(col-1)/2 * b2[row-col+2] - R[row-col]``.
    """
    shift = row - col
    if abs(shift) > 2:
        return 0
    half = Fraction(1, 2)
    return (
        col * a.coeff(shift + 1)
        + col * (col - 1) * half * b2.coeff(shift + 2)
        - R.coeff(shift)
    )


def build_information_matrix(spec: RateModelSpec, exact: bool = False):
    """Assemble the (n+1) x (n+1) information matrix of a passing spec.

    With ``exact=True`` returns a list of Fraction rows (used by the fixture
    tests); otherwise a float ndarray.
    """
    report = check_rate_constraints(spec)
    if not report.satisfied:
        name, value = report.worst()
        raise ConstraintError(
            f"spec fails the no-arbitrage constraints: {name} residual {value}"
        )
    a, b2, R = spec.a.as_fraction(), spec.b2.as_fraction(), spec.R.as_fraction()
    size = spec.n + 1
    rows: List[List[Fraction]] = [
        [band_entry(a, b2, R, i, j) for j in range(size)] for i in range(size)
    ]
    if exact:
        return rows
    return np.array([[float(v) for v in row] for row in rows])


def matrix_exponential(M: np.ndarray, x: float) -> np.ndarray:
    """e^{Mx} by scaling and squaring (Pade), accurate to ~1e-12 relative."""
    if x < 0:
        raise DomainError(f"x must be non-negative, got {x}")
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise OverflowRangeError("matrix contains non-finite entries")
    out = scipy.linalg.expm(M * x)
    if not np.all(np.isfinite(out)):
        raise OverflowRangeError(f"e^(Mx) overflows at x={x}")
    return out


class TermStructure:
    """Solved coefficient functions of a rate model.

    Immutable after construction except for the exponential memo cache,
    which is an idempotent fill keyed on the exact float bit pattern of x
    (yield-curve sweeps reuse maturities); duplicated computation is
    harmless, so concurrent reads are safe.
    """

    def __init__(self, spec: RateModelSpec):
        self.spec = spec
        self.S = build_information_matrix(spec)
        self.G0 = np.zeros(spec.n + 1)
        self.G0[0] = 1.0
        self._cache: Dict[float, np.ndarray] = {}

    def expSx(self, x: float) -> np.ndarray:
        cached = self._cache.get(x)
        if cached is None:
            cached = matrix_exponential(self.S, x)
            self._cache[x] = cached
        return cached

    def solve_G(self, x: float) -> np.ndarray:
        """Coefficient vector (g_0(x), ..., g_n(x))."""
        if x == 0.0:
            return self.G0.copy()
        return self.expSx(x) @ self.G0

    def solve_G_dot(self, x: float) -> np.ndarray:
        """Time derivative S G(x) of the coefficient vector."""
        return self.S @ self.solve_G(x)

    def bond_price(self, ttm: float, z: float) -> float:
        """P = sum_i g_i(ttm) z^i for z in the factor domain."""
        self.spec.domain.require(z)
        if ttm < 0:
            raise DomainError(f"time to maturity must be non-negative, got {ttm}")
        g = self.solve_G(ttm)
        return float(g @ np.power(z, np.arange(self.spec.n + 1)))

    def yield_curve(self, ttm: float, z: float) -> float:
        """Continuously compounded yield -log(P)/ttm, ttm > 0."""
        if ttm <= 0:
            raise DomainError(f"yield needs ttm > 0, got {ttm}")
        price = self.bond_price(ttm, z)
        if price <= 0.0:
            raise NonPositivePriceError(
                f"polynomial bond price {price} <= 0 at ttm={ttm}, z={z}; "
                "the model is outside its true-martingale regime"
            )
        return -float(np.log(price)) / ttm


def spot_rate(spec: RateModelSpec, z: float) -> float:
    """Short rate R(z) for z in the factor domain."""
    spec.domain.require(z)
    return float(spec.R.as_float()(z))
