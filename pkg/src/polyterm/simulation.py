"""Monte Carlo engine for the factor and joint factor/stock SDEs.

Scheme: Euler-Maruyama with full truncation.  The diffusion argument is the
post-clamp state, the square root is taken of max(b2, 0), and the state is
clamped back into the factor domain after every step.  Pre-clamp violations
are counted so the bias of the clamping can be monitored.

Randomness is counter-based: paths are partitioned into fixed-size blocks and
block ``b`` draws from its own Philox stream keyed by (seed, b).  The result
is bitwise reproducible and independent of how blocks would be scheduled
across threads.  Within a block, one array of normals is drawn per time step
(two per step for the joint simulation), in step order.

Paths are thinned on output: the state is recorded on a coarser save grid
(every ``save_every`` fine steps) together with the running left-endpoint
quadrature of the short rate, which is what the discounted-bond estimators
actually need.  The fine step size only enters through the dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq
from scipy.stats import norm

from .errors import (
    ConfigError,
    CorrelationError,
    DomainError,
    MissingStockError,
    OutOfBoundsError,
)
from .models import RateModelSpec, VolModelSpec
from .termstructure import TermStructure

__all__ = [
    "SimConfig",
    "PathSet",
    "MartingaleReport",
    "simulate_factor",
    "simulate_joint",
    "mc_bond_price",
    "mc_martingale_check",
    "mc_power_price",
    "mc_call_price",
    "bs_call_price",
    "implied_vol",
]


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run configuration.  Times are in years."""

    n_paths: int
    dt: float
    horizon: float
    seed: int
    scheme: str = "euler_full_truncation"
    save_every: Optional[int] = None
    block_size: int = 1 << 14

    def __post_init__(self):
        if self.n_paths < 2:
            raise ConfigError(f"n_paths must be >= 2, got {self.n_paths}")
        if not 0 < self.dt <= self.horizon:
            raise ConfigError(f"need 0 < dt <= horizon, got dt={self.dt}, horizon={self.horizon}")
        if self.scheme != "euler_full_truncation":
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.block_size < 1:
            raise ConfigError("block_size must be positive")

    @property
    def n_steps(self) -> int:
        n = round(self.horizon / self.dt)
        if abs(n * self.dt - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ConfigError(
                f"horizon {self.horizon} is not an integer multiple of dt {self.dt}"
            )
        return int(n)

    @property
    def stride(self) -> int:
        if self.save_every is not None:
            if self.save_every < 1:
                raise ConfigError("save_every must be positive")
            return self.save_every
        return max(1, self.n_steps // 200)


@dataclass
class PathSet:
    """Thinned Monte Carlo ensemble with simulation metadata."""

    times: np.ndarray
    z: np.ndarray
    config: SimConfig
    spec_key: str
    s: Optional[np.ndarray] = None
    r_integral: Optional[np.ndarray] = None
    preclamp_violations: int = 0
    fine_states: int = 0

    @property
    def violation_rate(self) -> float:
        """Fraction of fine steps that left the domain before clamping."""
        return self.preclamp_violations / max(1, self.fine_states)

    def index_at(self, t: float) -> int:
        hits = np.nonzero(np.isclose(self.times, t, rtol=0, atol=1e-9))[0]
        if hits.size == 0:
            raise ConfigError(
                f"time {t} is not on the save grid (stride {self.config.stride})"
            )
        return int(hits[0])


def _horner(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    acc = np.full_like(z, coeffs[-1]) if len(coeffs) else np.zeros_like(z)
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def _blocks(n_paths: int, block_size: int):
    for b, start in enumerate(range(0, n_paths, block_size)):
        yield b, start, min(start + block_size, n_paths)


def _save_indices(cfg: SimConfig) -> np.ndarray:
    idx = np.arange(0, cfg.n_steps + 1, cfg.stride)
    if idx[-1] != cfg.n_steps:
        idx = np.append(idx, cfg.n_steps)
    return idx


def simulate_factor(spec, cfg: SimConfig, z0: float) -> PathSet:
    """Simulate the scalar factor SDE dZ = a(Z)dt + b(Z)dW.

    Accepts a rate or a vol spec; for rate specs the running short-rate
    integral (left-endpoint rule on the fine grid) is accumulated alongside.
    """
    spec.domain.require(z0, "z0")
    lo, hi = spec.domain.lo, spec.domain.hi
    a_c = np.array([float(c) for c in spec.a.coeffs]) if spec.a.coeffs else np.zeros(1)
    b2_c = np.array([float(c) for c in spec.b2.coeffs]) if spec.b2.coeffs else np.zeros(1)
    is_rate = isinstance(spec, RateModelSpec)
    if is_rate:
        r_c = np.array([float(c) for c in spec.R.coeffs]) if spec.R.coeffs else np.zeros(1)

    n_steps = cfg.n_steps
    save_idx = _save_indices(cfg)
    save_pos = {int(k): j for j, k in enumerate(save_idx)}
    n_saved = len(save_idx)
    sqdt = math.sqrt(cfg.dt)

    z_out = np.empty((cfg.n_paths, n_saved))
    r_out = np.zeros((cfg.n_paths, n_saved)) if is_rate else None
    violations = 0

    for b, start, stop in _blocks(cfg.n_paths, cfg.block_size):
        rng = np.random.Generator(
            np.random.Philox(key=np.array([cfg.seed, b], dtype=np.uint64))
        )
        width = stop - start
        z = np.full(width, float(z0))
        racc = np.zeros(width)
        z_out[start:stop, 0] = z
        for k in range(n_steps):
            if is_rate:
                racc += _horner(r_c, z) * cfg.dt
            xi = rng.standard_normal(width)
            diff = np.sqrt(np.maximum(_horner(b2_c, z), 0.0))
            z = z + _horner(a_c, z) * cfg.dt + diff * sqdt * xi
            out = (z < lo) | (z > hi)
            violations += int(out.sum())
            np.clip(z, lo, hi, out=z)
            j = save_pos.get(k + 1)
            if j is not None:
                z_out[start:stop, j] = z
                if is_rate:
                    r_out[start:stop, j] = racc

    return PathSet(
        times=save_idx * cfg.dt,
        z=z_out,
        config=cfg,
        spec_key=spec.key(),
        r_integral=r_out,
        preclamp_violations=violations,
        fine_states=cfg.n_paths * n_steps,
    )


def simulate_joint(spec: VolModelSpec, cfg: SimConfig, z0: float, s0: float) -> PathSet:
    """Simulate (Z, S) jointly with a two-dimensional Brownian driver.

    The factor uses driver 1; the stock volatility vector is reconstructed
    from the scalars as sqrt(h2) * (rho, sqrt(1 - rho^2)) with
    rho(z) = bh / sqrt(h2 * b2) (zero where the product vanishes).  The stock
    is evolved in log space, so S stays positive.
    """
    spec.domain.require(z0, "z0")
    if s0 <= 0:
        raise DomainError(f"s0 must be positive, got {s0}")
    lo, hi = spec.domain.lo, spec.domain.hi
    a_c = np.array([float(c) for c in spec.a.coeffs]) if spec.a.coeffs else np.zeros(1)
    b2_c = np.array([float(c) for c in spec.b2.coeffs]) if spec.b2.coeffs else np.zeros(1)
    h2_c = np.array([float(c) for c in spec.h2.coeffs]) if spec.h2.coeffs else np.zeros(1)
    bh_c = np.array([float(c) for c in spec.bh.coeffs]) if spec.bh.coeffs else np.zeros(1)
    bh_zero = spec.bh.is_zero

    n_steps = cfg.n_steps
    save_idx = _save_indices(cfg)
    save_pos = {int(k): j for j, k in enumerate(save_idx)}
    n_saved = len(save_idx)
    sqdt = math.sqrt(cfg.dt)

    z_out = np.empty((cfg.n_paths, n_saved))
    s_out = np.empty((cfg.n_paths, n_saved))
    violations = 0

    for b, start, stop in _blocks(cfg.n_paths, cfg.block_size):
        rng = np.random.Generator(
            np.random.Philox(key=np.array([cfg.seed, b], dtype=np.uint64))
        )
        width = stop - start
        z = np.full(width, float(z0))
        logs = np.full(width, math.log(s0))
        z_out[start:stop, 0] = z
        s_out[start:stop, 0] = s0
        for k in range(n_steps):
            xi = rng.standard_normal((2, width))
            h2 = np.maximum(_horner(h2_c, z), 0.0)
            b2 = np.maximum(_horner(b2_c, z), 0.0)
            vol = np.sqrt(h2)
            if bh_zero:
                dlogs = -0.5 * h2 * cfg.dt + vol * sqdt * xi[1]
            else:
                prod = h2 * b2
                rho = np.where(prod > 0, _horner(bh_c, z) / np.sqrt(np.where(prod > 0, prod, 1.0)), 0.0)
                if np.any(np.abs(rho) > 1 + 1e-9):
                    raise CorrelationError(
                        f"|rho| = {np.abs(rho).max():.6g} > 1 at a visited state"
                    )
                rho = np.clip(rho, -1.0, 1.0)
                dlogs = -0.5 * h2 * cfg.dt + vol * sqdt * (
                    rho * xi[0] + np.sqrt(1.0 - rho**2) * xi[1]
                )
            logs += dlogs
            z = z + _horner(a_c, z) * cfg.dt + np.sqrt(b2) * sqdt * xi[0]
            out = (z < lo) | (z > hi)
            violations += int(out.sum())
            np.clip(z, lo, hi, out=z)
            j = save_pos.get(k + 1)
            if j is not None:
                z_out[start:stop, j] = z
                s_out[start:stop, j] = np.exp(logs)

    return PathSet(
        times=save_idx * cfg.dt,
        z=z_out,
        config=cfg,
        spec_key=spec.key(),
        s=s_out,
        preclamp_violations=violations,
        fine_states=cfg.n_paths * n_steps,
    )


def _mean_se(values: np.ndarray) -> Tuple[float, float]:
    n = len(values)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n))
    return mean, se


def mc_bond_price(paths: PathSet, spec: RateModelSpec, T: float) -> Tuple[float, float]:
    """Estimate E[exp(-int_0^T R(Z_s) ds)] with its standard error."""
    if paths.r_integral is None:
        raise ConfigError("paths carry no short-rate integral; simulate a rate spec")
    if paths.spec_key != spec.key():
        raise ConfigError("paths were simulated under a different spec")
    idx = paths.index_at(T)
    return _mean_se(np.exp(-paths.r_integral[:, idx]))


@dataclass
class MartingaleReport:
    estimate: float
    std_error: float
    target: float
    z_score: float


def mc_martingale_check(paths: PathSet, ts: TermStructure, t: float, T: float) -> MartingaleReport:
    """Compare E[exp(-int_0^t R) P_t(T)] against P_0(T).

    Under condition (A) the discounted bond price is a martingale, so the
    z-score of the difference should be statistical noise.
    """
    if not 0 <= t < T:
        raise ConfigError(f"need 0 <= t < T, got t={t}, T={T}")
    if paths.r_integral is None:
        raise ConfigError("paths carry no short-rate integral; simulate a rate spec")
    z0 = paths.z[0, 0]
    target = ts.bond_price(T, z0)
    if t == 0:
        return MartingaleReport(target, 0.0, target, 0.0)
    idx = paths.index_at(t)
    g = ts.solve_G(T - t)
    prices = npoly.polyval(paths.z[:, idx], g)
    values = np.exp(-paths.r_integral[:, idx]) * prices
    est, se = _mean_se(values)
    z_score = 0.0 if se == 0 else (est - target) / se
    return MartingaleReport(est, se, target, z_score)


def mc_power_price(paths: PathSet, theta: float, T: float) -> Tuple[float, float]:
    """Estimate E[S_T^theta] with its standard error."""
    if paths.s is None:
        raise MissingStockError("paths carry no stock; use simulate_joint")
    idx = paths.index_at(T)
    return _mean_se(paths.s[:, idx] ** float(theta))


def mc_call_price(paths: PathSet, K: float, T: float) -> Tuple[float, float]:
    """Estimate E[(S_T - K)^+] with its standard error."""
    if paths.s is None:
        raise MissingStockError("paths carry no stock; use simulate_joint")
    if K < 0:
        raise ConfigError(f"strike must be non-negative, got {K}")
    idx = paths.index_at(T)
    return _mean_se(np.maximum(paths.s[:, idx] - K, 0.0))


def bs_call_price(s0: float, K: float, T: float, sigma: float) -> float:
    """Zero-rate Black-Scholes call price."""
    if sigma <= 0 or T <= 0:
        return max(s0 - K, 0.0)
    sq = sigma * math.sqrt(T)
    d1 = (math.log(s0 / K) + 0.5 * sigma**2 * T) / sq
    return s0 * norm.cdf(d1) - K * norm.cdf(d1 - sq)


def implied_vol(call: float, s0: float, K: float, T: float) -> float:
    """Invert the zero-rate Black-Scholes formula for sigma.

    Root-bracketed search on [1e-6, 5] (the bracket is widened if the price
    corresponds to a volatility above 5); the result reproduces the input
    price to 1e-10.
    """
    if not (s0 > 0 and K > 0 and T > 0):
        raise OutOfBoundsError("need s0, K, T > 0")
    if not max(s0 - K, 0.0) < call < s0:
        raise OutOfBoundsError(
            f"call price {call} violates the bounds ({max(s0 - K, 0.0)}, {s0})"
        )
    lo_sig, hi_sig = 1e-6, 5.0
    f = lambda sig: bs_call_price(s0, K, T, sig) - call
    while f(hi_sig) < 0:
        hi_sig *= 2
        if hi_sig > 1e3:
            raise OutOfBoundsError("implied volatility above 1000; price too close to s0")
    return float(brentq(f, lo_sig, hi_sig, xtol=1e-14, rtol=8.9e-16))
