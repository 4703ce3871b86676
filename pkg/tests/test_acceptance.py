"""End-to-end acceptance gate.

Each test checks one release criterion at its stated tolerance and prints a
single PASS/FAIL line (written straight to the terminal so it shows through
pytest's capture).  Tolerances are pinned here and must not be loosened.
"""

import json
import math
import random
import subprocess
import sys
import time
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from conftest import ALL_FAMILIES, draw_family_params
from polyterm import (
    Interval,
    RateModelSpec,
    TermStructure,
    ThetaSolution,
    VolModelSpec,
    build_family,
    build_information_matrix,
    check_rate_constraints,
    check_vol_constraints,
    compute_Ai,
    compute_Bi,
    implied_forward_variance,
    power_price,
)
from polyterm.hjm import (
    bridge_from_vol_model,
    drift_residual,
    max_degree_feasible,
    replicate_min_from_power,
    replicate_power_from_calls,
)
from polyterm.modelio import save_model
from polyterm.polynomials import Polynomial
from polyterm.simulation import (
    SimConfig,
    mc_bond_price,
    mc_martingale_check,
    mc_power_price,
    simulate_factor,
    simulate_joint,
)
from polyterm.stationary import (
    family2_cdf,
    family2_norm_const,
    family2_x_density,
    ks_distance,
    stationary_density,
)


def _report(num, desc, ok):
    import conftest

    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {desc}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def vol43():
    """The reference volatility model used for the pricing oracle."""
    return build_family(
        "vol-example-7", N=100, c="0.0001", h0="0",
        alpha1="0.02", alpha2="0.06", beta="0", gamma="0.05",
    )


def test_criterion_1_constraint_suite():
    rng = random.Random(1)
    t0 = time.time()
    ok = True
    for name in ALL_FAMILIES:
        for _ in range(100):
            spec = build_family(name, **draw_family_params(name, rng))
            if isinstance(spec, RateModelSpec):
                rep = check_rate_constraints(spec)
            else:
                rep = check_vol_constraints(spec)
            ok &= rep.satisfied and all(v == 0 for v in rep.residuals.values())
    # single-coefficient perturbations must be rejected
    f2 = build_family("rate-family-2", alpha="0.1", beta="0.05")
    ok &= not check_rate_constraints(
        replace(f2, a=f2.a + Polynomial([0, 0, Fraction(1, 991)]))
    ).satisfied
    v7 = build_family("vol-example-7", N=10, c="0.01", h0="0",
                      alpha1="0.02", alpha2="0.06", beta="0", gamma="0.05")
    ok &= not check_vol_constraints(
        replace(v7, h2=v7.h2 + Polynomial([0, Fraction(1, 991)]))
    ).satisfied
    elapsed = time.time() - t0
    ok &= elapsed < 5.0
    _report(1, f"exact-zero residuals, 100 draws/family, {elapsed:.2f}s", ok)


def test_criterion_2_matrix_fixtures():
    F = Fraction
    f2 = build_family("rate-family-2", alpha="0.1", beta="0.05")
    ok = build_information_matrix(f2, exact=True) == [
        [F(0), F(1, 200), F(0)],
        [F(-1), F(-1, 10), F(1, 100)],
        [F(0), F(-1), F(-1, 5)],
    ]
    rng = random.Random(2)

    def symbolic(name, p):
        if name == "rate-family-1":
            al, be, k = p["alpha"], p["beta"], p["k"]
            return [[F(0), F(0), F(0)],
                    [-2 * al, -k * al, k * be],
                    [F(0), -al, -2 * k * al - be]]
        if name == "rate-family-3":
            al, be, k, l = p["alpha"], p["beta"], p["k"], p["l"]
            return [[F(0), al * be, F(0)],
                    [F(-1), -al, 2 * al * be + k * l],
                    [F(0), F(-1), -2 * al - k - l]]
        al, k = p["alpha"], p["k"]
        be = (2 * k + al) ** 2
        return [[F(0), k * be, F(0)],
                [F(0), -be, 2 * k * be],
                [F(-1), -k, -2 * be]]

    for name in ("rate-family-1", "rate-family-3", "rate-family-4"):
        for _ in range(20):
            params = draw_family_params(name, rng)
            spec = build_family(name, **params)
            ok &= build_information_matrix(spec, exact=True) == symbolic(name, params)
    _report(2, "information-matrix fixtures (exact rational equality)", ok)


def test_criterion_3_eigenvalue_fixture():
    rng = random.Random(3)
    worst = 0.0
    for _ in range(20):
        k = Fraction(rng.randint(1, 100), 100)
        alpha = Fraction(rng.randint(1, 100), 100)
        spec = build_family("rate-family-4", alpha=alpha, k=k)
        S = build_information_matrix(spec)
        beta, kf = float((2 * k + alpha) ** 2), float(k)
        expected = np.sort(np.concatenate(
            [[-beta], np.roots([1.0, 2 * beta, 2 * kf * kf * beta])]
        ).real)
        got = np.sort(np.linalg.eigvals(S).real)
        scale = max(1.0, np.abs(expected).max())
        worst = max(worst, np.abs(got - expected).max() / scale)
    _report(3, f"characteristic-polynomial eigenvalues, worst {worst:.2e} <= 1e-10",
            worst <= 1e-10)


def test_criterion_4_identity_residuals(vol43):
    rng = random.Random(4)
    worst_identity = 0.0
    worst_fd = 0.0
    rate_specs = [
        build_family("rate-family-1", alpha="0.1", beta="0.01", k="0.1"),
        build_family("rate-family-2", alpha="0.1", beta="0.05"),
        build_family("rate-family-3", alpha="0.3", beta="0.04", k="0.1", l="0.12"),
        build_family("rate-family-4", alpha="0.05", k="0.2"),
    ]
    for spec in rate_specs:
        ts = TermStructure(spec)
        A = [compute_Ai(spec, i).as_float() for i in range(spec.n + 1)]
        hi = spec.domain.hi if math.isfinite(spec.domain.hi) else 0.3
        for _ in range(100):
            x = rng.uniform(0.01, 3.0)
            z = rng.uniform(spec.domain.lo, hi)
            g, gdot = ts.solve_G(x), ts.solve_G_dot(x)
            powers = z ** np.arange(spec.n + 1)
            lhs = float(gdot @ powers)
            rhs = sum(float(g[i]) * A[i](z) for i in range(spec.n + 1))
            worst_identity = max(worst_identity, abs(lhs - rhs) / max(1.0, abs(lhs)))
        h = 1e-6
        for x in (0.2, 1.0, 2.5):
            fd = (ts.solve_G(x + h) - ts.solve_G(x - h)) / (2 * h)
            sg = ts.solve_G_dot(x)
            worst_fd = max(worst_fd,
                           np.abs(fd - sg).max() / max(1.0, np.abs(sg).max()))
    for i in (1, 50, 99):
        theta = Fraction(i, 100)
        sol = ThetaSolution(vol43, theta)
        B = [compute_Bi(vol43, j, theta).as_float() for j in range(sol.n_theta + 1)]
        for _ in range(100):
            x = rng.uniform(0.01, 3.0)
            z = rng.uniform(0.0, 0.05)
            k, kdot = sol.solve_K(x), sol.solve_K_dot(x)
            powers = z ** np.arange(sol.n_theta + 1)
            lhs = float(kdot @ powers)
            rhs = sum(float(k[j]) * B[j](z) for j in range(sol.n_theta + 1))
            worst_identity = max(worst_identity, abs(lhs - rhs) / max(1.0, abs(lhs)))
        h = 1e-6
        fd = (sol.solve_K(1.0 + h) - sol.solve_K(1.0 - h)) / (2 * h)
        sk = sol.solve_K_dot(1.0)
        worst_fd = max(worst_fd, np.abs(fd - sk).max() / max(1.0, np.abs(sk).max()))
    ok = worst_identity <= 1e-8 and worst_fd <= 1e-6
    _report(4, f"ODE identities {worst_identity:.2e} <= 1e-8, "
               f"FD derivative {worst_fd:.2e} <= 1e-6", ok)


def test_criterion_5_martingale_oracle():
    spec = build_family("rate-family-2", alpha="0.1", beta="0.05")
    ts = TermStructure(spec)
    t0 = time.time()
    cfg = SimConfig(n_paths=100_000, dt=1e-3, horizon=5.0, seed=42)
    paths = simulate_factor(spec, cfg, 0.05)
    ok = True
    detail = []
    for T in (1.0, 2.0, 5.0):
        analytic = ts.bond_price(T, 0.05)
        mc, se = mc_bond_price(paths, spec, T)
        z = abs(mc - analytic) / se
        detail.append(f"T={T:g}: |z|={z:.2f}")
        ok &= z < 3.0
    rep = mc_martingale_check(paths, ts, 0.5, 2.0)
    detail.append(f"mart(0.5,2): |z|={abs(rep.z_score):.2f}")
    ok &= abs(rep.z_score) < 3.0
    elapsed = time.time() - t0
    ok &= elapsed < 120.0
    _report(5, f"MC bond oracle 1e5 paths ({'; '.join(detail)}; {elapsed:.0f}s)", ok)


def test_criterion_6_vol_pricing_oracle(vol43):
    z0, s0 = 0.025, 1.0
    cfg = SimConfig(n_paths=50_000, dt=1e-3, horizon=1.0, seed=43)
    paths = simulate_joint(vol43, cfg, z0, s0)
    ok = True
    detail = []
    for i in (1, 99):
        theta = Fraction(i, 100)
        analytic = power_price(vol43, theta, 1.0, s0, z0)
        mc, se = mc_power_price(paths, float(theta), 1.0)
        z = abs(mc - analytic) / se
        detail.append(f"theta={theta}: |z|={z:.2f}")
        ok &= z < 3.0
    # instantaneous forward variance anchors the spot variance exactly
    h2 = vol43.h2.as_float()
    worst = max(
        abs(implied_forward_variance(vol43, Fraction(i, 100), 0.0, z) - h2(z))
        for i in (1, 50, 99) for z in (0.01, 0.025, 0.04)
    )
    ok &= worst <= 1e-12
    # volatility level sanity: sqrt(Z) fluctuates around ~15-20%
    sqrt_z = np.sqrt(paths.z).mean()
    detail.append(f"mean sqrt(Z)={sqrt_z:.3f}")
    ok &= paths.z.min() >= 0.0 and paths.z.max() <= 0.05 + 1e-12
    ok &= 0.1 <= sqrt_z <= 0.25
    _report(6, f"power-option oracle ({'; '.join(detail)}; fwd-var {worst:.1e})", ok)


def test_criterion_7_black_scholes_degeneracy():
    sigma2 = Fraction(4, 100)
    spec = VolModelSpec(
        N=4, h2=Polynomial([sigma2]), b2=Polynomial([0, 1]), bh=Polynomial(),
        a=Polynomial([Fraction(1, 2), -1]), nmap=lambda i: 0,
        domain=Interval(0.0, 2.0),
    )
    worst = 0.0
    for i in (1, 2, 3):
        theta = Fraction(i, 4)
        t = float(theta)
        for x in (0.5, 1.0, 4.0):
            for s in (0.5, 1.0, 2.0):
                want = s**t * math.exp(-t * (1 - t) * float(sigma2) * x / 2)
                got = power_price(spec, theta, x, s, 1.0)
                worst = max(worst, abs(got - want) / want)
    _report(7, f"Black-Scholes degeneracy, worst rel err {worst:.1e} <= 1e-12",
            worst <= 1e-12)


def test_criterion_8_stationary_suite():
    alpha, beta = 0.1, 0.05
    spec = build_family("rate-family-2", alpha=alpha, beta=beta)
    d = stationary_density(spec, support=Interval(1e-4, 1.0), mode_hint=beta)
    ok = abs(d.cdf_grid[-1] - 1.0) <= 1e-8
    # forward-equation (zero-flux) residual
    a, b2 = spec.a.as_float(), spec.b2.as_float()

    def flux(r, h=1e-5):
        gb2p = (d.pdf(r + h) * b2(r + h) - d.pdf(r - h) * b2(r - h)) / (2 * h)
        return d.pdf(r) * a(r) - 0.5 * gb2p

    scale = max(abs(d.pdf(r) * a(r)) for r in (0.03, 0.05, 0.08))
    fe = max(abs(flux(r)) for r in (0.03, 0.05, 0.08)) / scale
    ok &= fe <= 1e-4
    # closed-form vs quadrature
    dx = family2_x_density(alpha, beta)
    ok &= abs(family2_norm_const(alpha, beta) - dx.norm_const) <= 1e-8 * dx.norm_const
    cdf_err = max(
        abs(family2_cdf(alpha, beta, r) - (1.0 - dx.cdf(1.0 / r)))
        for r in (0.02, 0.04, 0.05, 0.08)
    )
    ok &= cdf_err <= 1e-8
    # long-run simulation against the stationary law
    cfg = SimConfig(n_paths=4096, dt=0.05, horizon=200.0, seed=44)
    paths = simulate_factor(spec, cfg, 0.05)
    ks = ks_distance(paths, d, burn_in=100.0)
    ok &= ks < 0.05
    _report(8, f"stationary suite (flux {fe:.1e}, cdf {cdf_err:.1e}, KS {ks:.3f})", ok)


def test_criterion_9_appendix_suite(vol43):
    worst_pow = max(
        abs(replicate_power_from_calls(s, th) - s**th)
        for s in (0.25, 1.0, 4.0) for th in (0.1, 0.5, 0.9)
    )
    ok = worst_pow <= 1e-6
    cases = [(0.5, 1.0, 0.3), (1.0, 1.0, 0.3), (2.0, 1.0, 0.3),
             (0.5, 1.0, 0.5), (1.0, 1.0, 0.5), (2.0, 1.0, 0.5),
             (0.8, 1.2, 0.7), (1.2, 0.8, 0.7), (1.0, 1.0, 0.7)]
    worst_min = max(
        abs(replicate_min_from_power(s, K, th) - min(s, K)) for s, K, th in cases
    )
    ok &= worst_min <= 1e-4
    ok &= max_degree_feasible(1, 0) and max_degree_feasible(2, 0)
    ok &= not any(max_degree_feasible(n, 0) for n in (3, 4, 5))
    worst_drift = 0.0
    for i in (1, 50):
        theta = Fraction(i, 100)
        fwd = bridge_from_vol_model(vol43, theta)
        samples = [(x, float(theta), z)
                   for x in (0.2, 1.0, 2.0) for z in (0.01, 0.025, 0.04)]
        worst_drift = max(worst_drift, drift_residual(fwd, samples))
    ok &= worst_drift <= 1e-5
    _report(9, f"replication {worst_pow:.1e}/{worst_min:.1e}, "
               f"bridge drift {worst_drift:.1e}", ok)


def test_criterion_10_cli_determinism(tmp_path):
    spec = build_family("rate-family-2", alpha="0.1", beta="0.05")
    model = tmp_path / "model.json"
    save_model(spec, model)
    outs = []
    for label in ("a", "b"):
        out = tmp_path / label
        cmd = [
            sys.executable, "-m", "polyterm.cli", "simulate",
            "--model", str(model), "--out", str(out),
            "--paths", "64", "--dt", "0.01", "--horizon", "0.5",
            "--z0", "0.05", "--seed", "99",
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    ok = names == sorted(p.name for p in outs[1].iterdir())
    for name in names:
        ok &= (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    _report(10, f"byte-identical CLI output trees ({len(names)} files)", ok)
