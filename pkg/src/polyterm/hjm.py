"""Forward-variance (HJM-style) verification suite.

This module checks, numerically, the no-arbitrage content of the
forward-variance formulation: the integrated drift condition

    G_x = |b|^2/2 * (G_zz - theta(1-theta)/2 * G_z^2)
          + (theta*b.h + a) * G_z + |h|^2,        G(0, theta, z) = 0,

the spot-variance boundary condition dG/dx(0) = |h(z)|^2, the maximal-degree
feasibility count for polynomial forward-variance models, and the two static
replication identities that tie power options to calls and back.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .errors import TruncationError
from .polynomials import Polynomial

__all__ = [
    "ForwardVarianceSpec",
    "drift_residual",
    "spot_variance_check",
    "max_degree_feasible",
    "replicate_power_from_calls",
    "replicate_min_from_power",
    "bridge_from_vol_model",
]

_REL_STEP = 1e-5


@dataclass(frozen=True)
class ForwardVarianceSpec:
    """Factor dynamics plus an integrated-forward-variance evaluator.

    ``G(x, theta, z)`` must be smooth in x and z near the sample points;
    partial derivatives are taken by second-order central differences with
    relative step 1e-5.
    """

    a: Polynomial
    b2: Polynomial
    bh: Polynomial
    h2: Polynomial
    G: Callable[[float, float, float], float]


def _dx(G, x, theta, z):
    h = _REL_STEP * max(1.0, abs(x))
    return (G(x + h, theta, z) - G(x - h, theta, z)) / (2 * h)


def _dz(G, x, theta, z):
    h = _REL_STEP * max(1.0, abs(z))
    return (G(x, theta, z + h) - G(x, theta, z - h)) / (2 * h)


def _dzz(G, x, theta, z):
    h = math.sqrt(_REL_STEP) * max(1.0, abs(z))
    return (G(x, theta, z + h) - 2 * G(x, theta, z) + G(x, theta, z - h)) / (h * h)


def drift_residual(spec: ForwardVarianceSpec,
                   samples: Iterable[Tuple[float, float, float]]) -> float:
    """Max absolute residual of the integrated drift condition over samples."""
    a, b2 = spec.a.as_float(), spec.b2.as_float()
    bh, h2 = spec.bh.as_float(), spec.h2.as_float()
    worst = 0.0
    for x, theta, z in samples:
        gx = _dx(spec.G, x, theta, z)
        gz = _dz(spec.G, x, theta, z)
        gzz = _dzz(spec.G, x, theta, z)
        rhs = (
            0.5 * b2(z) * (gzz - 0.5 * theta * (1 - theta) * gz * gz)
            + (theta * bh(z) + a(z)) * gz
            + h2(z)
        )
        worst = max(worst, abs(gx - rhs))
    return worst


def spot_variance_check(spec: ForwardVarianceSpec,
                        samples: Iterable[Tuple[float, float]]) -> float:
    """Max |dG/dx(0, theta, z) - h2(z)| over the (theta, z) samples."""
    h2 = spec.h2.as_float()
    worst = 0.0
    for theta, z in samples:
        worst = max(worst, abs(_dx(spec.G, 0.0, theta, z) - h2(z)))
    return worst


def max_degree_feasible(n: int, deg_b2: int) -> bool:
    """Whether a degree-n polynomial forward-variance model can close.

    The quadratic term of the no-arbitrage identity contains
    |b|^2 n^2 z^{2n-2}/4, which must stay in F_n; with deg(|b|^2) = deg_b2
    that forces deg_b2 + 2n - 2 <= n.  With nonzero constant |b|^2 this is
    exactly n <= 2.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if deg_b2 < 0:
        raise ValueError("deg_b2 must be non-negative (b not identically zero)")
    return deg_b2 + 2 * n - 2 <= n


def replicate_power_from_calls(s: float, theta: float, tol: float = 1e-9) -> float:
    """Quadrature value of theta(1-theta) * int_0^inf (s ^ K) K^{theta-2} dK.

    The static replication identity makes this equal s**theta.  The integral
    is split at K = s; the upper piece is mapped to a finite interval by
    K = 1/u so both pieces are plain adaptive quadratures with algebraic
    endpoint singularities.
    """
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if s < 0:
        raise ValueError(f"s must be non-negative, got {s}")
    if s == 0:
        return 0.0
    lower, _ = quad(lambda K: K ** (theta - 1.0), 0.0, s,
                    epsabs=tol, epsrel=tol, limit=300)
    upper, _ = quad(lambda u: s * u ** (-theta), 0.0, 1.0 / s,
                    epsabs=tol, epsrel=tol, limit=300)
    return theta * (1.0 - theta) * (lower + upper)


def _rational_kernel(x: complex, theta: float) -> complex:
    return 1.0 / ((x - 1j * theta) * (x + 1j * (1.0 - theta)))


def replicate_min_from_power(s: float, K: float, theta: float,
                             x_max: float = 1e4, tol: float = 1e-4) -> float:
    """Recover min(s, K) from the generalized-power-option integral.

    Evaluates (1/2pi) int_R s^{theta+ix} K^{1-theta-ix} /
    ((x - i theta)(x + i(1-theta))) dx.  The integrand satisfies
    f(-x) = conj(f(x)), so only [0, x_max] is integrated (with oscillatory
    Clenshaw-Curtis weights when log(s/K) != 0) and the tail beyond x_max is
    handled by an integration-by-parts estimate whose error bound must fall
    below ``tol``.
    """
    if not (s > 0 and K > 0):
        raise ValueError("need s, K > 0")
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    omega = math.log(s / K)
    prefactor = s**theta * K ** (1.0 - theta) / (2.0 * math.pi)

    def g(x: float) -> complex:
        return _rational_kernel(x, theta)

    # centre: 2 * Re int_0^xmax e^{i omega x} g(x) dx
    if omega == 0.0:
        re_part, _ = quad(lambda x: g(x).real, 0.0, x_max, limit=500)
        center = re_part
    else:
        cos_part, _ = quad(lambda x: g(x).real, 0.0, x_max,
                           weight="cos", wvar=omega, limit=500)
        sin_part, _ = quad(lambda x: g(x).imag, 0.0, x_max,
                           weight="sin", wvar=omega, limit=500)
        center = cos_part - sin_part

    # tail: int_xmax^inf e^{i omega x} g(x) dx (+ conjugate on the left)
    if omega == 0.0:
        # the integrand is rational; the tail has an exact antiderivative
        tail = (-1.0 / 1j) * cmath.log(
            (x_max - 1j * theta) / (x_max + 1j * (1.0 - theta))
        )
        tail_bound = 0.0
    else:
        gp = (_rational_kernel(x_max + 1e-4, theta)
              - _rational_kernel(x_max - 1e-4, theta)) / 2e-4
        phase = cmath.exp(1j * omega * x_max)
        tail = -phase * g(x_max) / (1j * omega) + phase * gp / (1j * omega) ** 2
        tail_bound = 12.0 / (omega**2 * x_max**3)
    if prefactor * 2.0 * tail_bound > tol:
        raise TruncationError(
            f"tail bound {prefactor * 2.0 * tail_bound:.3g} exceeds tolerance {tol}; "
            "increase x_max"
        )
    return prefactor * (2.0 * center + 2.0 * tail.real)


def bridge_from_vol_model(spec, theta) -> ForwardVarianceSpec:
    """Translate a solved theta-grid vol model into a ForwardVarianceSpec.

    Uses G = -(2 / (theta(1-theta))) log(sum_i k_i(x, theta) z^i), which
    satisfies the integrated drift condition exactly when the coefficient
    ODE does.  The returned G ignores its theta argument (it is pinned to
    the grid value used here).
    """
    from .volatility import ThetaSolution

    sol = ThetaSolution(spec, theta)
    t = float(sol.theta)
    powers = np.arange(sol.n_theta + 1)

    def G(x: float, _theta: float, z: float) -> float:
        k = sol.solve_K(abs(x)) if x >= 0 else _solve_negative(sol, x)
        q = float(k @ np.power(z, powers))
        return -2.0 / (t * (1.0 - t)) * math.log(q)

    return ForwardVarianceSpec(a=spec.a, b2=spec.b2, bh=spec.bh, h2=spec.h2, G=G)


def _solve_negative(sol, x: float):
    # central finite differences step slightly below x = 0; the ODE solution
    # extends there via the same matrix exponential
    import scipy.linalg

    return scipy.linalg.expm(sol.S * x) @ sol.K0
