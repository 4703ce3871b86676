"""Stationary densities of the factor diffusion.

A scalar diffusion dZ = a(Z)dt + b(Z)dW with an integrable speed measure has
stationary density

    g(y)  propto  (1 / b^2(y)) * exp( int 2a/b^2 ),

the time-independent solution of the forward (Fokker-Planck) equation
-(g a)' + (g b^2)''/2 = 0.  Normalization constants are always computed by
adaptive quadrature; closed forms (the reciprocal-variable density and CDF of
the mean-reverting cubic-variance family) are cross-checked against that
quadrature in the test suite rather than trusted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.stats import norm as _norm

from .errors import DivergenceError, ParamError
from .models import Interval

__all__ = [
    "Density",
    "stationary_density",
    "family2_x_density",
    "family2_cdf",
    "ks_distance",
]

_GRID_SIZE = 1025


def _quad_strict(fn, lo, hi, **kw):
    """quad() that converts convergence failures into DivergenceError."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, abserr = quad(fn, lo, hi, limit=300, **kw)
        except DivergenceError:
            raise
        except Exception as exc:  # noqa: BLE001 - quad raises a mixed bag
            raise DivergenceError(f"integral over [{lo}, {hi}] failed: {exc}") from None
    if not math.isfinite(value):
        raise DivergenceError(f"integral over [{lo}, {hi}] is not finite")
    return value, abserr


class Density:
    """Normalized probability density from an unnormalized handle.

    Immutable after construction; the CDF tabulation is built once on a grid
    covering the effective support (everything outside carries < ~1e-12 of
    the mass) and the ``cdf``/``ppf`` callables interpolate the exact
    segment-wise quadrature values on that grid.
    """

    def __init__(self, support: Interval, unnorm: Callable[[float], float],
                 mode_hint: Optional[float] = None):
        self.support = support
        self.unnorm = unnorm
        self._mode = mode_hint
        lo_eff, hi_eff = self._effective_bounds()
        self.grid = np.linspace(lo_eff, hi_eff, _GRID_SIZE)
        total = 0.0
        segs = np.empty(_GRID_SIZE - 1)
        for i in range(_GRID_SIZE - 1):
            segs[i], _ = _quad_strict(unnorm, self.grid[i], self.grid[i + 1])
        head, _ = _quad_strict(unnorm, support.lo, lo_eff) if support.lo < lo_eff else (0.0, 0.0)
        tail, _ = _quad_strict(unnorm, hi_eff, support.hi) if hi_eff < support.hi else (0.0, 0.0)
        total = head + float(segs.sum()) + tail
        if not (total > 0 and math.isfinite(total)):
            raise DivergenceError("normalization integral does not converge")
        self.norm_const = 1.0 / total
        cdf = np.concatenate([[head], head + np.cumsum(segs)]) * self.norm_const
        self.cdf_grid = np.clip(cdf, 0.0, 1.0)

    def _effective_bounds(self):
        lo, hi = self.support.lo, self.support.hi
        mode = self._mode
        if mode is None:
            probe_lo = lo if math.isfinite(lo) else -1.0
            probe_hi = hi if math.isfinite(hi) else probe_lo + 2.0
            probes = np.linspace(probe_lo, probe_hi, 201)
            vals = np.array([self.unnorm(float(p)) for p in probes])
            if not np.isfinite(vals).all():
                raise DivergenceError("unnormalized density is not finite on the probe grid")
            mode = float(probes[int(np.argmax(vals))])
        peak = self.unnorm(mode)
        if not (peak > 0 and math.isfinite(peak)):
            raise DivergenceError("unnormalized density has no positive mode")
        cut = peak * 1e-14

        def expand(direction: float, bound: float) -> float:
            x, step = mode, max(abs(mode), 1.0) * 1e-3
            for _ in range(2000):
                nxt = x + direction * step
                if not math.isfinite(nxt):
                    break
                if math.isfinite(bound) and (
                    (direction > 0 and nxt >= bound) or (direction < 0 and nxt <= bound)
                ):
                    return bound
                if self.unnorm(nxt) < cut:
                    return nxt
                x, step = nxt, step * 1.3
            raise DivergenceError("density tail does not decay; no stationary law")

        lo_eff = lo if math.isfinite(lo) else expand(-1.0, lo)
        hi_eff = hi if math.isfinite(hi) else expand(+1.0, hi)
        return lo_eff, hi_eff

    # -- evaluation ------------------------------------------------------

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        out = np.array([self.unnorm(float(v)) for v in np.atleast_1d(y)])
        out = out * self.norm_const
        out[~np.array([self.support.contains(float(v)) for v in np.atleast_1d(y)])] = 0.0
        return out if y.ndim else float(out[0])

    def cdf(self, y: float) -> float:
        """P[Y <= y] by quadrature from the support edge (accurate path)."""
        if y <= self.grid[0]:
            val, _ = _quad_strict(self.unnorm, self.support.lo, max(y, self.support.lo)) \
                if y > self.support.lo else (0.0, 0.0)
            return val * self.norm_const
        if y >= self.grid[-1]:
            tail, _ = _quad_strict(self.unnorm, min(y, self.support.hi), self.support.hi) \
                if y < self.support.hi else (0.0, 0.0)
            return 1.0 - tail * self.norm_const
        i = int(np.searchsorted(self.grid, y) - 1)
        seg, _ = _quad_strict(self.unnorm, self.grid[i], y)
        return float(self.cdf_grid[i] + seg * self.norm_const)

    def cdf_many(self, ys: np.ndarray) -> np.ndarray:
        return np.array([self.cdf(float(y)) for y in ys])

    def ppf(self, q):
        """Approximate quantile via interpolation on the CDF tabulation."""
        return np.interp(q, self.cdf_grid, self.grid)


def stationary_density(spec, support: Optional[Interval] = None,
                       mode_hint: Optional[float] = None) -> Density:
    """Stationary density of dZ = a(Z)dt + b(Z)dW from its speed measure.

    ``spec`` is any object with polynomial attributes ``a`` and ``b2``
    (rate or vol model spec).  ``b2`` must be positive on the interior of the
    support; a DivergenceError is raised when the normalization integral
    fails to converge.
    """
    support = support or spec.domain
    a = spec.a.as_float()
    b2 = spec.b2.as_float()

    lo, hi = support.lo, support.hi
    ref = mode_hint
    if ref is None:
        if math.isfinite(lo) and math.isfinite(hi):
            ref = 0.5 * (lo + hi)
        elif math.isfinite(lo):
            ref = lo + 1.0
        elif math.isfinite(hi):
            ref = hi - 1.0
        else:
            ref = 0.0
    if b2(ref) <= 0:
        raise ParamError(f"b2 must be positive at the reference point {ref}")

    def ratio(u: float) -> float:
        return 2.0 * a(u) / b2(u)

    exponent_cache = {}

    def exponent(y: float) -> float:
        val = exponent_cache.get(y)
        if val is None:
            val, _ = quad(ratio, ref, y, limit=300)
            exponent_cache[y] = val
        return val

    def unnorm(y: float) -> float:
        v = b2(y)
        if v <= 0:
            return 0.0
        e = exponent(y)
        if e > 700.0:
            raise DivergenceError("speed-measure exponent overflows")
        return math.exp(e) / v

    return Density(support, unnorm, mode_hint=mode_hint)


def family2_x_density(alpha: float, beta: float) -> Density:
    """Stationary law of the reciprocal factor X = 1/R for the family
    dR = alpha(beta - R)dt + sqrt(R^3)dW.

    f_X(x) = C x exp(-alpha*beta*(x - 1/beta)^2) on (0, inf); the constant C
    comes from quadrature inside Density.
    """
    if not (alpha > 0 and beta > 0):
        raise ParamError("need alpha, beta > 0")
    lam = alpha * beta
    mu = 1.0 / beta

    def unnorm(x: float) -> float:
        if x <= 0:
            return 0.0
        return x * math.exp(-lam * (x - mu) ** 2)

    return Density(Interval(0.0, math.inf), unnorm, mode_hint=mu)


def family2_norm_const(alpha: float, beta: float) -> float:
    """Closed-form normalizing constant of ``family2_x_density``.

    C^-1 = e^{-alpha/beta}/(2 alpha beta)
           + sqrt(pi/(alpha beta^3)) * Phi(sqrt(2 alpha / beta)).
    """
    lam, mu = alpha * beta, 1.0 / beta
    cinv = math.exp(-lam * mu * mu) / (2.0 * lam) + mu * math.sqrt(math.pi / lam) * _norm.cdf(
        mu * math.sqrt(2.0 * lam)
    )
    return 1.0 / cinv


def family2_cdf(alpha: float, beta: float, r: float) -> float:
    """P[R <= r] = P[X >= 1/r] for the stationary law above, in closed form.

    A Gaussian integral in the X variable: with lam = alpha*beta, mu = 1/beta,
    x0 = 1/r,

        P[R <= r] = C * ( e^{-lam (x0-mu)^2} / (2 lam)
                          + mu sqrt(pi/lam) Phi((mu - x0) sqrt(2 lam)) ).
    """
    if r <= 0:
        return 0.0
    lam, mu = alpha * beta, 1.0 / beta
    x0 = 1.0 / r
    c = family2_norm_const(alpha, beta)
    val = c * (
        math.exp(-lam * (x0 - mu) ** 2) / (2.0 * lam)
        + mu * math.sqrt(math.pi / lam) * _norm.cdf((mu - x0) * math.sqrt(2.0 * lam))
    )
    return min(max(val, 0.0), 1.0)


def ks_distance(paths_or_samples, d: Density, burn_in: float = 0.0) -> float:
    """Kolmogorov-Smirnov distance between terminal samples and ``d``.

    Accepts a PathSet (terminal factor values are used; the horizon must
    exceed ``burn_in``) or a plain array of samples.
    """
    from .simulation import PathSet

    if isinstance(paths_or_samples, PathSet):
        paths = paths_or_samples
        if paths.times[-1] <= burn_in:
            raise ParamError(
                f"horizon {paths.times[-1]} must exceed burn-in {burn_in}"
            )
        samples = paths.z[:, -1]
    else:
        samples = np.asarray(paths_or_samples, dtype=float)
    samples = np.sort(samples)
    n = len(samples)
    f = d.cdf_many(samples)
    i = np.arange(n)
    return float(max((f - i / n).max(), ((i + 1) / n - f).max()))
