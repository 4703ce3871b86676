"""Model specifications, parametric families, and no-arbitrage checks.

Two kinds of model are supported:

* rate models: bond prices ``P_t(T) = sum_i g_i(T-t) Z_t^i`` with spot rate
  ``r_t = R(Z_t)`` and factor ``dZ = a(Z)dt + b(Z)dW``;
* volatility models: power-option prices
  ``P_t(T, theta) = S_t^theta * sum_i k_i(T-t, theta) Z_t^i`` for theta on the
  grid ``{i/N}``, with volatility ``|h(Z)|``.

The coefficient constraints that make these models arbitrage free are linear
identities in the polynomial coefficients.  They are therefore checked in
exact rational arithmetic: a residual is either exactly zero or the model is
rejected.  Decimal parameters are parsed as exact decimal fractions (0.1 means
1/10, not the nearest binary double) so that textbook parameter values produce
exactly zero residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Optional, Tuple

from .errors import DegreeError, DomainError, ParamError
from .polynomials import Polynomial

__all__ = [
    "Interval",
    "RateModelSpec",
    "VolModelSpec",
    "ConstraintReport",
    "check_rate_constraints",
    "check_vol_constraints",
    "build_family",
    "compute_Ai",
    "compute_Bi",
    "RATE_FAMILIES",
    "VOL_FAMILIES",
]

_SAMPLE_POINTS = 1024
_HALFLINE_SPAN = 100.0


def as_exact(value) -> Fraction:
    """Parse a number as an exact rational.

    Floats go through their decimal string form, so 0.1 -> 1/10.  Strings and
    Fractions are taken verbatim.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ParamError(f"parameter must be finite, got {value}")
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value)
    raise ParamError(f"cannot parse {value!r} as an exact rational")


@dataclass(frozen=True)
class Interval:
    """Closed state-space interval; ``hi`` may be ``inf`` for a half line."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ParamError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, z: float) -> bool:
        return self.lo <= z <= self.hi

    def clamp(self, z):
        """Clamp a scalar or array into the interval."""
        import numpy as np

        return np.clip(z, self.lo, self.hi)

    def require(self, z: float, what: str = "z"):
        if not self.contains(z):
            raise DomainError(f"{what}={z} outside domain [{self.lo}, {self.hi}]")

    def sample_grid(self, n: int = _SAMPLE_POINTS):
        """Uniform grid used by the sampled nonnegativity checks."""
        import numpy as np

        hi = self.hi if math.isfinite(self.hi) else self.lo + _HALFLINE_SPAN
        lo = self.lo if math.isfinite(self.lo) else hi - _HALFLINE_SPAN
        return np.linspace(lo, hi, n)

    @property
    def midpoint(self) -> float:
        if not self.bounded:
            raise DomainError("midpoint undefined for an unbounded domain")
        return 0.5 * (self.lo + self.hi)


def _check_degree(p: Polynomial, k: int, name: str):
    if not p.in_Fk(k):
        raise DegreeError(
            f"{name} has degree {p.degree}, exceeding the F_{k} bound"
        )


@dataclass(frozen=True)
class RateModelSpec:
    """A polynomial bond-price model of degree ``n``.

    ``a`` (drift), ``b2`` (squared diffusion) and ``R`` (short-rate map) all
    carry units of 1/time.  Degree bounds a in F3, b2 in F4, R in F2 are hard
    invariants; violating them raises ``DegreeError`` at construction.
    """

    n: int
    a: Polynomial
    b2: Polynomial
    R: Polynomial
    domain: Interval
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ParamError(f"n must be a positive integer, got {self.n}")
        _check_degree(self.a, 3, "a")
        _check_degree(self.b2, 4, "b2")
        _check_degree(self.R, 2, "R")
        b2f = self.b2.as_float()
        grid = self.domain.sample_grid()
        if (b2f(grid) < -1e-12).any():
            raise ParamError("b2 is negative somewhere on the domain")

    def key(self) -> str:
        """Stable identity string (used in provenance digests)."""
        return (
            f"rate(n={self.n},a={list(self.a.coeffs)},b2={list(self.b2.coeffs)},"
            f"R={list(self.R.coeffs)},domain=[{self.domain.lo},{self.domain.hi}])"
        )


@dataclass(frozen=True)
class VolModelSpec:
    """A theta-grid stochastic-volatility model on ``D_N = {i/N}``.

    Only the scalar polynomials |h|^2, |b|^2 and b.h enter the constraints
    and the coefficient ODEs, so vector-valued drivers are never stored; the
    simulation module reconstructs a two-dimensional Brownian driver with
    state-dependent correlation from these scalars.
    """

    N: int
    h2: Polynomial
    b2: Polynomial
    bh: Polynomial
    a: Polynomial
    nmap: Callable[[int], int] = field(compare=False)
    domain: Interval = field(default_factory=lambda: Interval(0.0, 1.0))
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.N < 2:
            raise ParamError(f"N must be at least 2, got {self.N}")
        _check_degree(self.h2, 2, "h2")
        _check_degree(self.b2, 4, "b2")
        _check_degree(self.a, 3, "a")
        _check_degree(self.bh, 3, "bh")
        grid = self.domain.sample_grid()
        b2f, h2f, bhf = self.b2.as_float(), self.h2.as_float(), self.bh.as_float()
        if (b2f(grid) < -1e-12).any():
            raise ParamError("b2 is negative somewhere on the domain")
        if (h2f(grid) < -1e-12).any():
            raise ParamError("h2 is negative somewhere on the domain")
        # No vector pair (b, h) realizes the spec if this Cauchy-Schwarz
        # bound fails anywhere on the domain.
        gap = bhf(grid) ** 2 - h2f(grid) * b2f(grid)
        if (gap > 1e-12 * (1.0 + abs(h2f(grid) * b2f(grid))).max()).any():
            raise ParamError("bh^2 exceeds h2*b2 somewhere on the domain")

    def thetas(self):
        """The grid D_N as exact fractions, in increasing order."""
        return [Fraction(i, self.N) for i in range(1, self.N)]

    def n_of(self, i: int) -> int:
        n = self.nmap(i)
        if n < 0:
            raise ParamError(f"nmap({i}) = {n} must be non-negative")
        return n

    def d(self, theta) -> Polynomial:
        """Effective drift polynomial d(z, theta) = a + theta * bh."""
        return self.a + as_exact(theta) * self.bh

    def key(self) -> str:
        return (
            f"vol(N={self.N},h2={list(self.h2.coeffs)},b2={list(self.b2.coeffs)},"
            f"bh={list(self.bh.coeffs)},a={list(self.a.coeffs)},"
            f"n={[self.nmap(i) for i in range(1, self.N)]},"
            f"domain=[{self.domain.lo},{self.domain.hi}])"
        )


@dataclass
class ConstraintReport:
    """Exact residuals of the no-arbitrage coefficient constraints."""

    residuals: Dict[str, Fraction]
    satisfied: bool
    per_theta: Optional[Dict[Fraction, Tuple[Fraction, Fraction, Fraction]]] = None

    def worst(self) -> Tuple[str, Fraction]:
        name = max(self.residuals, key=lambda k: abs(self.residuals[k]))
        return name, self.residuals[name]


def _rate_residuals(n: int, a: Polynomial, b2: Polynomial, R: Polynomial):
    a3, a2 = a.coeff(3), a.coeff(2)
    b4, b3 = b2.coeff(4), b2.coeff(3)
    R2, R1 = R.coeff(2), R.coeff(1)
    half = Fraction(1, 2)
    return (
        n * a3 + n * (n - 1) * half * b4 - R2,
        (n - 1) * a3 + (n - 1) * (n - 2) * half * b4 - R2,
        n * a2 + n * (n - 1) * half * b3 - R1,
    )


def check_rate_constraints(spec: RateModelSpec) -> ConstraintReport:
    """Evaluate the three rate-model coefficient constraints exactly."""
    r1, r2, r3 = _rate_residuals(
        spec.n, spec.a.as_fraction(), spec.b2.as_fraction(), spec.R.as_fraction()
    )
    residuals = {
        "z^(n+2) closure": r1,
        "z^(n+1) closure (row n-1)": r2,
        "z^(n+1) closure (row n)": r3,
    }
    return ConstraintReport(residuals, all(v == 0 for v in residuals.values()))


def check_vol_constraints(spec: VolModelSpec) -> ConstraintReport:
    """Evaluate the volatility-model constraints for every theta on D_N."""
    h2 = spec.h2.as_fraction()
    b2 = spec.b2.as_fraction()
    a = spec.a.as_fraction()
    bh = spec.bh.as_fraction()
    half = Fraction(1, 2)
    per_theta: Dict[Fraction, Tuple[Fraction, Fraction, Fraction]] = {}
    residuals: Dict[str, Fraction] = {}
    for i in range(1, spec.N):
        theta = Fraction(i, spec.N)
        n = spec.n_of(i)
        d = a + theta * bh
        tt = theta * (theta - 1) * half
        trip = (
            n * d.coeff(3) + n * (n - 1) * half * b2.coeff(4) + tt * h2.coeff(2),
            (n - 1) * d.coeff(3)
            + (n - 1) * (n - 2) * half * b2.coeff(4)
            + tt * h2.coeff(2),
            n * d.coeff(2) + n * (n - 1) * half * b2.coeff(3) + tt * h2.coeff(1),
        )
        per_theta[theta] = trip
        for j, value in enumerate(trip, start=1):
            residuals[f"theta={theta} eq{j}"] = value
    satisfied = all(v == 0 for v in residuals.values())
    return ConstraintReport(residuals, satisfied, per_theta)


def compute_Ai(spec: RateModelSpec, i: int) -> Polynomial:
    """Generator action on the i-th monomial of a rate model.

    A_i = a * (z^i)' + b2/2 * (z^i)'' - R * z^i.  When the spec passes the
    constraints, A_i stays in F_n.
    """
    if not 0 <= i <= spec.n:
        raise IndexError(f"i={i} outside 0..{spec.n}")
    zi = Polynomial.monomial(i)
    return (
        spec.a * zi.derivative()
        + Fraction(1, 2) * spec.b2 * zi.derivative(2)
        - spec.R * zi
    )


def compute_Bi(spec: VolModelSpec, i: int, theta) -> Polynomial:
    """Generator action on the i-th monomial of a vol model at fixed theta.

    B_i = theta(theta-1)/2 * h2 * z^i + d(z,theta) * (z^i)' + b2/2 * (z^i)''.
    """
    theta = as_exact(theta)
    zi = Polynomial.monomial(i)
    tt = theta * (theta - 1) * Fraction(1, 2)
    return (
        tt * spec.h2 * zi
        + spec.d(theta) * zi.derivative()
        + Fraction(1, 2) * spec.b2 * zi.derivative(2)
    )


# ---------------------------------------------------------------------------
# Parametric families
# ---------------------------------------------------------------------------


def _require(cond: bool, msg: str):
    if not cond:
        raise ParamError(msg)


def _rate_family_1(alpha, beta, k) -> RateModelSpec:
    alpha, beta, k = map(as_exact, (alpha, beta, k))
    _require(alpha > 0 and beta > 0 and k > 0, "family 1 needs alpha, beta, k > 0")
    a = Polynomial([0, -alpha * k, alpha])           # alpha*z*(z - k)
    b2 = Polynomial([0, beta * k, -beta])            # beta*z*(k - z)
    R = Polynomial([0, 2 * alpha])
    return RateModelSpec(
        2, a, b2, R, Interval(0.0, float(k)),
        notes=("factor may be absorbed at the boundary in finite time",),
    )


def _rate_family_2(alpha, beta) -> RateModelSpec:
    alpha, beta = map(as_exact, (alpha, beta))
    _require(alpha > 0 and beta > 0, "family 2 needs alpha, beta > 0")
    a = Polynomial([alpha * beta, -alpha])
    b2 = Polynomial([0, 0, 0, 1])
    R = Polynomial([0, 1])
    return RateModelSpec(2, a, b2, R, Interval(0.0, math.inf))


def _rate_family_3(alpha, beta, k, l) -> RateModelSpec:
    alpha, beta, k, l = map(as_exact, (alpha, beta, k, l))
    _require(alpha > 0 and 0 < beta < k <= l, "family 3 needs alpha>0, 0<beta<k<=l")
    a = Polynomial([alpha * beta, -alpha])
    b2 = Polynomial([0, k * l, -(k + l), 1])         # z*(k-z)*(l-z)
    R = Polynomial([0, 1])
    return RateModelSpec(2, a, b2, R, Interval(0.0, float(k)))


def _rate_family_4(alpha, k) -> RateModelSpec:
    alpha, k = map(as_exact, (alpha, k))
    _require(alpha > 0 and k > 0, "family 4 needs alpha, k > 0")
    beta = (2 * k + alpha) ** 2
    a = Polynomial([k * beta, -beta, -k, 1])         # (z-k)(z^2 - beta)
    b2 = Polynomial([0, 0, 0, 2 * k, -1])            # -z^3*(z - 2k)
    R = Polynomial([0, 0, 1])
    return RateModelSpec(2, a, b2, R, Interval(0.0, float(2 * k)))


def _vol_example_6(N, h0, alpha1, alpha2, beta, gamma) -> VolModelSpec:
    N = int(N)
    h0, a1, a2, beta, gamma = map(as_exact, (h0, alpha1, alpha2, beta, gamma))
    _require(N >= 2, "example 6 needs N >= 2")
    _require(h0 >= 0 and beta > 0, "example 6 needs h0 >= 0 and beta > 0")
    _require(0 < a1 < gamma < a2, "example 6 needs 0 < alpha1 < gamma < alpha2")
    h2 = Polynomial([h0, 2 * N * N])
    a = Polynomial([a1 * a2, -(a1 + a2), 1])
    b2 = Polynomial([0, beta * gamma, -beta])
    return VolModelSpec(
        N, h2, b2, Polynomial(), a,
        nmap=lambda i: i * (N - i),
        domain=Interval(0.0, float(gamma)),
    )


def _vol_example_7(N, c, h0, alpha1, alpha2, beta, gamma) -> VolModelSpec:
    N = int(N)
    c, h0, a1, a2, beta, gamma = map(as_exact, (c, h0, alpha1, alpha2, beta, gamma))
    _require(N >= 2, "example 7 needs N >= 2")
    _require(c > 0 and h0 >= 0 and beta >= 0, "example 7 needs c > 0, h0 >= 0, beta >= 0")
    _require(0 < a1 < gamma < a2, "example 7 needs 0 < alpha1 < gamma < alpha2")
    h2 = Polynomial([h0, c * N * N])
    lead = Fraction(N - 1, 2) * c
    a = Polynomial([lead * a1 * a2, -lead * (a1 + a2), lead])
    b2 = Polynomial([0, c * beta * gamma, c * (gamma - beta), -c])  # c*z*(z+beta)*(gamma-z)
    return VolModelSpec(
        N, h2, b2, Polynomial(), a,
        nmap=lambda i: min(i, N - i),
        domain=Interval(0.0, float(gamma)),
    )


RATE_FAMILIES = {
    "rate-family-1": _rate_family_1,
    "rate-family-2": _rate_family_2,
    "rate-family-3": _rate_family_3,
    "rate-family-4": _rate_family_4,
}

VOL_FAMILIES = {
    "vol-example-6": _vol_example_6,
    "vol-example-7": _vol_example_7,
}


def build_family(name: str, **params):
    """Build a fully expanded spec from a named parametric family."""
    builder = RATE_FAMILIES.get(name) or VOL_FAMILIES.get(name)
    if builder is None:
        known = sorted(RATE_FAMILIES) + sorted(VOL_FAMILIES)
        raise ParamError(f"unknown family {name!r}; known: {', '.join(known)}")
    try:
        return builder(**params)
    except TypeError as exc:
        raise ParamError(f"bad parameters for {name}: {exc}") from None
