import math
from fractions import Fraction

import numpy as np
import pytest

from polyterm import RateModelSpec, TermStructure, Interval, build_family
from polyterm.errors import (
    ConfigError,
    DomainError,
    MissingStockError,
    OutOfBoundsError,
)
from polyterm.polynomials import Polynomial
from polyterm.simulation import (
    SimConfig,
    bs_call_price,
    implied_vol,
    mc_bond_price,
    mc_call_price,
    mc_martingale_check,
    mc_power_price,
    simulate_factor,
    simulate_joint,
)


def _cfg(**kw):
    base = dict(n_paths=256, dt=0.01, horizon=1.0, seed=7)
    base.update(kw)
    return SimConfig(**base)


# --- configuration ----------------------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(n_paths=1, dt=0.01, horizon=1.0, seed=1)
    with pytest.raises(ConfigError):
        SimConfig(n_paths=10, dt=0.0, horizon=1.0, seed=1)
    with pytest.raises(ConfigError):
        SimConfig(n_paths=10, dt=2.0, horizon=1.0, seed=1)
    with pytest.raises(ConfigError):
        SimConfig(n_paths=10, dt=0.01, horizon=1.0, seed=-1)
    with pytest.raises(ConfigError):
        SimConfig(n_paths=10, dt=0.01, horizon=1.0, seed=1, scheme="milstein")
    with pytest.raises(ConfigError):
        _ = SimConfig(n_paths=10, dt=0.3, horizon=1.0, seed=1).n_steps


def test_save_grid_contains_endpoints(family2):
    cfg = _cfg(dt=1e-3, horizon=5.0)
    paths = simulate_factor(family2, cfg, 0.05)
    assert paths.times[0] == 0.0
    assert paths.times[-1] == pytest.approx(5.0)
    for t in (0.5, 1.0, 2.0, 5.0):
        paths.index_at(t)  # must not raise


def test_index_at_off_grid(family2):
    paths = simulate_factor(family2, _cfg(), 0.05)
    with pytest.raises(ConfigError):
        paths.index_at(0.12345)


# --- determinism ------------------------------------------------------------


def test_bitwise_determinism(family2):
    a = simulate_factor(family2, _cfg(), 0.05)
    b = simulate_factor(family2, _cfg(), 0.05)
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_array_equal(a.r_integral, b.r_integral)


def test_seed_changes_output(family2):
    a = simulate_factor(family2, _cfg(seed=7), 0.05)
    b = simulate_factor(family2, _cfg(seed=8), 0.05)
    assert not np.array_equal(a.z, b.z)


def test_block_prefix_stability(family2):
    # the first block's paths do not depend on how many paths follow
    small = simulate_factor(family2, _cfg(n_paths=64, block_size=64), 0.05)
    large = simulate_factor(family2, _cfg(n_paths=256, block_size=64), 0.05)
    np.testing.assert_array_equal(small.z, large.z[:64])


def test_joint_determinism(vol7):
    a = simulate_joint(vol7, _cfg(), 0.025, 1.0)
    b = simulate_joint(vol7, _cfg(), 0.025, 1.0)
    np.testing.assert_array_equal(a.s, b.s)


# --- scheme correctness -----------------------------------------------------


def test_deterministic_decay_euler_error_scaling():
    # dZ = -Z dt exactly: Euler error vs e^{-1} should shrink ~2x per dt halving
    spec = RateModelSpec(
        n=1, a=Polynomial([0, -1]), b2=Polynomial(),
        R=Polynomial([0, 1]), domain=Interval(0.0, 2.0),
    )
    errs = []
    for dt in (0.02, 0.01, 0.005):
        cfg = SimConfig(n_paths=2, dt=dt, horizon=1.0, seed=3)
        paths = simulate_factor(spec, cfg, 1.0)
        errs.append(abs(paths.z[0, -1] - math.exp(-1.0)))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.1)


def test_constant_rate_integral_exact():
    # R = 5% constant: the left-endpoint quadrature of R dt is exact
    spec = RateModelSpec(
        n=1, a=Polynomial(), b2=Polynomial(),
        R=Polynomial([Fraction(1, 20)]), domain=Interval(0.0, 1.0),
    )
    paths = simulate_factor(spec, _cfg(), 0.5)
    assert paths.r_integral[:, -1] == pytest.approx(0.05, abs=1e-12)
    price, se = mc_bond_price(paths, spec, 1.0)
    assert price == pytest.approx(math.exp(-0.05), abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-15)


def test_domain_confinement():
    # family 3 has a bounded domain; clamping must keep every saved state inside
    spec = build_family("rate-family-3", alpha="0.3", beta="0.04", k="0.1", l="0.12")
    paths = simulate_factor(spec, _cfg(n_paths=512), 0.05)
    assert paths.z.min() >= 0.0
    assert paths.z.max() <= 0.1
    assert 0.0 <= paths.violation_rate <= 1.0


def test_z0_outside_domain(family2):
    with pytest.raises(DomainError):
        simulate_factor(family2, _cfg(), -0.1)


def test_joint_requires_positive_s0(vol7):
    with pytest.raises(DomainError):
        simulate_joint(vol7, _cfg(), 0.025, 0.0)


# --- estimators -------------------------------------------------------------


def test_mc_bond_requires_rate_paths(vol7, family2):
    paths = simulate_joint(vol7, _cfg(), 0.025, 1.0)
    with pytest.raises(ConfigError):
        mc_bond_price(paths, family2, 1.0)


def test_mc_bond_spec_mismatch(family2):
    other = build_family("rate-family-2", alpha="0.2", beta="0.05")
    paths = simulate_factor(family2, _cfg(), 0.05)
    with pytest.raises(ConfigError):
        mc_bond_price(paths, other, 1.0)


def test_mc_power_requires_stock(family2):
    paths = simulate_factor(family2, _cfg(), 0.05)
    with pytest.raises(MissingStockError):
        mc_power_price(paths, 0.5, 1.0)
    with pytest.raises(MissingStockError):
        mc_call_price(paths, 1.0, 1.0)


def test_martingale_check_at_zero(family2):
    ts = TermStructure(family2)
    paths = simulate_factor(family2, _cfg(), 0.05)
    rep = mc_martingale_check(paths, ts, 0.0, 1.0)
    assert rep.z_score == 0.0 and rep.estimate == rep.target


def test_martingale_check_validation(family2):
    ts = TermStructure(family2)
    paths = simulate_factor(family2, _cfg(), 0.05)
    with pytest.raises(ConfigError):
        mc_martingale_check(paths, ts, 1.0, 1.0)


def test_stock_is_martingale(vol7):
    # zero rates: E[S_T] = s0 within MC noise
    cfg = _cfg(n_paths=4096, dt=0.005)
    paths = simulate_joint(vol7, cfg, 0.025, 1.0)
    idx = paths.index_at(1.0)
    est = paths.s[:, idx].mean()
    se = paths.s[:, idx].std(ddof=1) / math.sqrt(cfg.n_paths)
    assert abs(est - 1.0) < 4 * se


# --- Black-Scholes utilities ------------------------------------------------


def test_bs_call_price_limits():
    assert bs_call_price(1.0, 1.0, 1.0, 0.0) == 0.0
    assert bs_call_price(2.0, 1.0, 0.0, 0.2) == 1.0
    # deep ITM approaches intrinsic, deep OTM approaches zero
    assert bs_call_price(1.0, 1e-8, 1.0, 0.2) == pytest.approx(1.0, abs=1e-6)
    assert bs_call_price(1.0, 100.0, 1.0, 0.2) < 1e-10


def test_implied_vol_round_trip():
    for sigma in (0.05, 0.2, 1.4, 6.0):
        call = bs_call_price(1.0, 1.1, 0.7, sigma)
        assert implied_vol(call, 1.0, 1.1, 0.7) == pytest.approx(sigma, abs=1e-8)


def test_implied_vol_atm_approximation():
    # ATM: call ~ s0 * sigma * sqrt(T/(2 pi))
    sigma = 0.2
    call = bs_call_price(1.0, 1.0, 1.0, sigma)
    assert call == pytest.approx(sigma / math.sqrt(2 * math.pi), abs=1e-3)


def test_implied_vol_bounds():
    with pytest.raises(OutOfBoundsError):
        implied_vol(1.5, 1.0, 1.0, 1.0)   # above s0
    with pytest.raises(OutOfBoundsError):
        implied_vol(0.0, 1.0, 2.0, 1.0)   # at the lower bound
    with pytest.raises(OutOfBoundsError):
        implied_vol(0.1, -1.0, 1.0, 1.0)


def test_mc_call_matches_black_scholes():
    # constant-variance vol spec: MC call must agree with the closed form
    from polyterm.models import VolModelSpec

    sigma2 = Fraction(4, 100)
    spec = VolModelSpec(
        N=2, h2=Polynomial([sigma2]), b2=Polynomial([0, 1]), bh=Polynomial(),
        a=Polynomial([Fraction(1, 2), -1]), nmap=lambda i: 0,
        domain=Interval(0.0, 2.0),
    )
    cfg = SimConfig(n_paths=20000, dt=0.005, horizon=1.0, seed=11)
    paths = simulate_joint(spec, cfg, 1.0, 1.0)
    call, se = mc_call_price(paths, 1.0, 1.0)
    want = bs_call_price(1.0, 1.0, 1.0, 0.2)
    assert abs(call - want) < 4 * se
