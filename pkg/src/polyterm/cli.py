"""Batch CLI: validate, solve, price, simulate, and verify models from files.

Every command reads a JSON model definition (see ``polyterm.modelio``),
writes deterministic CSV/JSON artifacts into ``--out``, and, for the report
commands, renders matplotlib figures next to the delimited output (disable
with ``--no-figures``).  Exit codes: 0 success, 2 validation failure
(constraint residuals are printed), 1 runtime error.  Errors also emit a
machine-readable JSON diagnostic on stderr.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import (
    ConstraintError,
    DegreeError,
    ParamError,
    PolytermError,
    SchemaError,
)
from .models import RateModelSpec, VolModelSpec, check_rate_constraints, check_vol_constraints
from .modelio import load_model, model_digest
from .simulation import SimConfig, implied_vol, mc_call_price, simulate_factor, simulate_joint
from .stationary import stationary_density
from .termstructure import TermStructure, build_information_matrix
from .volatility import ThetaSolution
from . import report as rp

_VALIDATION_ERRORS = (SchemaError, ConstraintError, DegreeError, ParamError)


def _fail(exc: Exception, code: int):
    diag = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(diag), err=True)
    sys.exit(code)


def _load(model_path: str):
    return load_model(model_path)


def _outdir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_float_list(text: str):
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise ParamError("expected a non-empty comma-separated list")
    return values


def _parse_theta_list(text: str):
    return [Fraction(v.strip()) for v in text.split(",") if v.strip()]


def _default_z0(spec, z0):
    if z0 is not None:
        spec.domain.require(z0, "z0")
        return z0
    if spec.domain.bounded:
        return spec.domain.midpoint
    raise ParamError("--z0 is required for models with an unbounded domain")


def _check(spec):
    if isinstance(spec, RateModelSpec):
        return check_rate_constraints(spec)
    return check_vol_constraints(spec)


def _manifest(outdir: Path, command: str, digest: str, files, extra=None):
    payload = {
        "tool": f"polyterm {__version__}",
        "command": command,
        "model": digest,
        "outputs": sorted(str(f.name) for f in files),
    }
    if extra:
        payload.update(extra)
    rp.write_json(outdir / "manifest.json", payload)


class _Cli(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except _VALIDATION_ERRORS as exc:
            _fail(exc, 2)
        except PolytermError as exc:
            _fail(exc, 1)
        except click.ClickException:
            raise
        except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 1
            _fail(exc, 1)


@click.group(cls=_Cli)
@click.version_option(__version__)
def main():
    """Polynomial interest-rate and stochastic-volatility model toolkit."""


_model_opt = click.option("--model", "model_path", required=True, type=click.Path())
_out_opt = click.option("--out", required=True, type=click.Path())
_figures_opt = click.option("--figures/--no-figures", default=True, show_default=True)
_seed_opt = click.option("--seed", default=20260826, show_default=True, type=int)
_z0_opt = click.option("--z0", default=None, type=float, help="initial factor value")


@main.command()
@_model_opt
@click.option("--out", default=None, type=click.Path())
def validate(model_path, out):
    """Check degree bounds and no-arbitrage constraints; print residuals."""
    spec = _load(model_path)
    rep = _check(spec)
    digest = model_digest(spec)
    payload = {
        "model": digest,
        "satisfied": rep.satisfied,
        "residuals": {k: str(v) for k, v in rep.residuals.items() if v != 0} or {},
    }
    if isinstance(spec, RateModelSpec) and rep.satisfied:
        matrix = build_information_matrix(spec, exact=True)
        payload["information_matrix"] = [[str(v) for v in row] for row in matrix]
    if out is not None:
        outdir = _outdir(out)
        rp.write_json(outdir / "validate.json", payload)
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if not rep.satisfied:
        nonzero = {k: str(v) for k, v in rep.residuals.items() if v != 0}
        raise ConstraintError(f"constraints violated: {nonzero}")


@main.command()
@_model_opt
@_out_opt
@click.option("--ttm-grid", default="0.25,0.5,1,2,3,5,7,10", show_default=True)
@click.option("--theta-list", default=None, help="vol models: thetas to solve")
@_figures_opt
def solve(model_path, out, ttm_grid, theta_list, figures):
    """Solve the coefficient ODEs and tabulate g_i (or k_i) on a grid."""
    spec = _load(model_path)
    outdir = _outdir(out)
    digest = model_digest(spec)
    xs = _parse_float_list(ttm_grid)
    comment = rp.provenance(model=digest)
    files = []
    if isinstance(spec, RateModelSpec):
        ts = TermStructure(spec)
        path = outdir / "coefficients.csv"
        rp.write_coefficient_csv(path, ts, xs, comment)
        files.append(path)
        if figures:
            dense = np.linspace(0.0, max(xs), 200)
            curves = np.array([ts.solve_G(x) for x in dense]).T
            fig = rp.line_figure(
                dense, curves, [f"g_{i}" for i in range(spec.n + 1)],
                "time to maturity", "coefficient", "bond-price coefficients",
            )
            fpath = outdir / "coefficients.png"
            rp.save_figure(fig, fpath)
            files.append(fpath)
    else:
        thetas = _parse_theta_list(theta_list) if theta_list else spec.thetas()[:1]
        for theta in thetas:
            sol = ThetaSolution(spec, theta)
            header = ["x"] + [f"k_{i}" for i in range(sol.n_theta + 1)]
            rows = [(x, *sol.solve_K(x)) for x in xs]
            path = outdir / f"coefficients_theta_{sol.index}_of_{spec.N}.csv"
            rp.write_csv(path, header, rows, comment)
            files.append(path)
    _manifest(outdir, "solve", digest, files)


@main.command()
@_model_opt
@_out_opt
@click.option("--ttm-grid", default="0.25,0.5,1,2,3,5,7,10", show_default=True)
@_z0_opt
@_figures_opt
def price(model_path, out, ttm_grid, z0, figures):
    """Tabulate bond prices and yields over a maturity grid."""
    _curve_command(model_path, out, ttm_grid, z0, figures, "price")


@main.command(name="yield")
@_model_opt
@_out_opt
@click.option("--ttm-grid", default="0.25,0.5,1,2,3,5,7,10", show_default=True)
@_z0_opt
@_figures_opt
def yield_cmd(model_path, out, ttm_grid, z0, figures):
    """Tabulate the yield curve over a maturity grid."""
    _curve_command(model_path, out, ttm_grid, z0, figures, "yield")


def _curve_command(model_path, out, ttm_grid, z0, figures, command):
    spec = _load(model_path)
    if not isinstance(spec, RateModelSpec):
        raise ParamError(f"{command} requires a rate model")
    z0 = _default_z0(spec, z0)
    outdir = _outdir(out)
    digest = model_digest(spec)
    ts = TermStructure(spec)
    ttms = _parse_float_list(ttm_grid)
    comment = rp.provenance(model=digest)
    path = outdir / f"{command}.csv"
    rp.write_yield_curve_csv(path, ts, ttms, z0, comment)
    files = [path]
    if figures:
        dense = np.linspace(min(ttms), max(ttms), 200)
        which = 1 if command == "price" else 2
        vals = [
            ts.bond_price(t, z0) if which == 1 else ts.yield_curve(t, z0)
            for t in dense
        ]
        fig = rp.line_figure(
            dense, [vals], [""], "time to maturity",
            "price" if which == 1 else "yield",
            f"{command} curve at z0={z0:g}",
        )
        fpath = outdir / f"{command}.png"
        rp.save_figure(fig, fpath)
        files.append(fpath)
    _manifest(outdir, command, digest, files, {"z0": z0})


@main.command()
@_model_opt
@_out_opt
@_seed_opt
@click.option("--paths", "n_paths", default=1000, show_default=True, type=int)
@click.option("--dt", default=1e-3, show_default=True, type=float)
@click.option("--horizon", default=1.0, show_default=True, type=float)
@_z0_opt
@click.option("--s0", default=1.0, show_default=True, type=float)
@_figures_opt
def simulate(model_path, out, seed, n_paths, dt, horizon, z0, s0, figures):
    """Simulate factor (rate models) or joint factor/stock (vol models) paths."""
    spec = _load(model_path)
    z0 = _default_z0(spec, z0)
    outdir = _outdir(out)
    digest = model_digest(spec)
    cfg = SimConfig(n_paths=n_paths, dt=dt, horizon=horizon, seed=seed)
    if isinstance(spec, VolModelSpec):
        paths = simulate_joint(spec, cfg, z0, s0)
    else:
        paths = simulate_factor(spec, cfg, z0)
    comment = rp.provenance(seed=seed, model=digest)
    csv_path = outdir / "paths.csv"
    rp.write_paths_csv(csv_path, paths, comment)
    report_path = outdir / "simulation.json"
    rp.write_json(
        report_path,
        {
            "n_paths": n_paths,
            "dt": dt,
            "horizon": horizon,
            "seed": seed,
            "z0": z0,
            "preclamp_violation_rate": paths.violation_rate,
        },
    )
    files = [csv_path, report_path]
    if figures:
        k = min(10, n_paths)
        fig = rp.line_figure(
            paths.times, list(paths.z[:k]), [""] * k,
            "t", "factor", "sample factor paths",
        )
        zfig = outdir / "paths_factor.png"
        rp.save_figure(fig, zfig)
        files.append(zfig)
        if paths.s is not None:
            fig = rp.line_figure(
                paths.times, list(paths.s[:k]), [""] * k,
                "t", "stock", "sample stock paths",
            )
            sfig = outdir / "paths_stock.png"
            rp.save_figure(fig, sfig)
            files.append(sfig)
    _manifest(outdir, "simulate", digest, files, {"seed": seed})


@main.command(name="stationary")
@_model_opt
@_out_opt
@_figures_opt
def stationary_cmd(model_path, out, figures):
    """Tabulate the stationary density/CDF of the factor diffusion."""
    spec = _load(model_path)
    outdir = _outdir(out)
    digest = model_digest(spec)
    density = stationary_density(spec)
    comment = rp.provenance(model=digest)
    path = outdir / "stationary.csv"
    rp.write_density_csv(path, density, comment)
    files = [path]
    if figures:
        fig = rp.line_figure(
            density.grid,
            [density.pdf(density.grid), density.cdf_grid],
            ["pdf", "cdf"], "y", "density / probability", "stationary law",
        )
        fpath = outdir / "stationary.png"
        rp.save_figure(fig, fpath)
        files.append(fpath)
    _manifest(outdir, "stationary", digest, files)


@main.command(name="power-price")
@_model_opt
@_out_opt
@click.option("--theta-list", required=True, help='e.g. "1/100,1/2,99/100"')
@click.option("--ttm-grid", default="0.25,0.5,1,2", show_default=True)
@click.option("--s0", default=1.0, show_default=True, type=float)
@_z0_opt
@_figures_opt
def power_price_cmd(model_path, out, theta_list, ttm_grid, s0, z0, figures):
    """Tabulate the analytic power-option price surface."""
    spec = _load(model_path)
    if not isinstance(spec, VolModelSpec):
        raise ParamError("power-price requires a vol model")
    z0 = _default_z0(spec, z0)
    outdir = _outdir(out)
    digest = model_digest(spec)
    thetas = _parse_theta_list(theta_list)
    ttms = _parse_float_list(ttm_grid)
    comment = rp.provenance(model=digest)
    path = outdir / "power_prices.csv"
    rp.write_power_surface_csv(path, spec, thetas, ttms, s0, z0, comment)
    files = [path]
    if figures:
        from .volatility import power_price as analytic

        dense = np.linspace(min(ttms), max(ttms), 100)
        curves = [[analytic(spec, th, t, s0, z0) for t in dense] for th in thetas]
        fig = rp.line_figure(
            dense, curves, [f"theta={th}" for th in thetas],
            "time to maturity", "power price", "power-option prices",
        )
        fpath = outdir / "power_prices.png"
        rp.save_figure(fig, fpath)
        files.append(fpath)
    _manifest(outdir, "power-price", digest, files, {"z0": z0, "s0": s0})


@main.command(name="implied-vol")
@_model_opt
@_out_opt
@_seed_opt
@click.option("--paths", "n_paths", default=20000, show_default=True, type=int)
@click.option("--dt", default=1e-3, show_default=True, type=float)
@click.option("--ttm-grid", default="0.25,0.5,1,2", show_default=True)
@click.option("--s0", default=1.0, show_default=True, type=float)
@click.option("--strike", default=None, type=float, help="default: at the money")
@_z0_opt
@_figures_opt
def implied_vol_cmd(model_path, out, seed, n_paths, dt, ttm_grid, s0, strike, z0, figures):
    """Monte Carlo call prices and Black-Scholes implied vols by maturity."""
    spec = _load(model_path)
    if not isinstance(spec, VolModelSpec):
        raise ParamError("implied-vol requires a vol model")
    z0 = _default_z0(spec, z0)
    K = s0 if strike is None else strike
    ttms = _parse_float_list(ttm_grid)
    horizon = max(ttms)
    stride = max(1, round(min(ttms) / dt))
    cfg = SimConfig(n_paths=n_paths, dt=dt, horizon=horizon, seed=seed, save_every=stride)
    paths = simulate_joint(spec, cfg, z0, s0)
    outdir = _outdir(out)
    digest = model_digest(spec)
    rows = []
    for T in ttms:
        call, se = mc_call_price(paths, K, T)
        sigma = implied_vol(call, s0, K, T)
        rows.append((T, call, se, sigma))
    comment = rp.provenance(seed=seed, model=digest)
    path = outdir / "implied_vol.csv"
    rp.write_csv(path, ["ttm", "call", "call_se", "implied_vol"], rows, comment)
    files = [path]
    if figures:
        fig = rp.line_figure(
            [r[0] for r in rows], [[r[3] for r in rows]], [""],
            "time to maturity", "implied volatility",
            f"implied vol term structure, K={K:g}",
        )
        fpath = outdir / "implied_vol.png"
        rp.save_figure(fig, fpath)
        files.append(fpath)
    _manifest(outdir, "implied-vol", digest, files, {"seed": seed, "strike": K})


@main.command(name="verify-hjm")
@_model_opt
@_out_opt
@_seed_opt
@click.option("--theta-list", default=None, help="grid thetas to bridge-check")
@click.option("--samples", default=50, show_default=True, type=int)
def verify_hjm(model_path, out, seed, theta_list, samples):
    """Residuals of the forward-variance no-arbitrage conditions."""
    from .hjm import (
        bridge_from_vol_model,
        drift_residual,
        replicate_power_from_calls,
        spot_variance_check,
    )

    spec = _load(model_path)
    if not isinstance(spec, VolModelSpec):
        raise ParamError("verify-hjm requires a vol model")
    outdir = _outdir(out)
    digest = model_digest(spec)
    thetas = _parse_theta_list(theta_list) if theta_list else [spec.thetas()[0]]
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    lo = spec.domain.lo
    hi = spec.domain.hi if spec.domain.bounded else lo + 1.0
    zlo, zhi = lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)
    results = {}
    for theta in thetas:
        fwd = bridge_from_vol_model(spec, theta)
        t = float(theta)
        pts = [
            (float(rng.uniform(0.05, 1.0)), t, float(rng.uniform(zlo, zhi)))
            for _ in range(samples)
        ]
        results[str(theta)] = {
            "drift_residual_max": drift_residual(fwd, pts),
            "spot_variance_residual_max": spot_variance_check(
                fwd, [(t, z) for _, _, z in pts]
            ),
        }
    repl = {
        f"s={s_val}": abs(replicate_power_from_calls(s_val, 0.5) - s_val**0.5)
        for s_val in (0.5, 1.0, 2.0)
    }
    payload = {
        "model": digest,
        "seed": seed,
        "bridge_residuals": results,
        "power_replication_abs_error": repl,
    }
    rp.write_json(outdir / "hjm_report.json", payload)
    _manifest(outdir, "verify-hjm", digest, [outdir / "hjm_report.json"], {"seed": seed})
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
