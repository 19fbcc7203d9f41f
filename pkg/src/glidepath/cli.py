"""Command-line front end.

Commands: ``frontier``, ``allocation``, ``moments``, ``validate``,
``solvents``.  Parameter files are flat ``key = value`` text with the ten
market parameter names.  Every option can also be supplied through an
environment variable with the ``GLIDEPATH_`` prefix (click's auto-envvar
convention, e.g. ``GLIDEPATH_FRONTIER_SEED``).

Exit codes: 0 success, 2 configuration or parameter validation failure,
3 numerical failure, 4 validation-gate failure.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click
import numpy as np

from .analytics import (
    allocation_table,
    closed_form_mean,
    closed_form_variance,
    efficient_frontier,
    frontier_anchor,
    mean_terms,
    variance_terms,
)
from .capmkt import MarketState, ModelParams, build_frame, zero_coupon_rate
from .errors import NumericError, ParameterError
from .mcsim import SimConfig, simulate
from .solver import infinite_nu_allocation, solve_optimal, strategy_path
from .spectral import LambdaMatrixCoeffs, solvents
from .variational import (
    StrategyPath,
    el_coefficients,
    horizon_mean_quadrature,
    horizon_variance_quadrature,
)

_PARAM_NAMES = (
    "kappa", "rbar", "sigma_r", "a", "b", "alpha", "xbar", "sigma_x", "sigma_S", "rho",
)

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_GATE = 4


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def load_params(path) -> ModelParams:
    """Parse a flat key=value parameter file into validated ModelParams."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read parameter file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _PARAM_NAMES:
            raise ParameterError(f"{path}:{lineno}: unknown parameter {key!r}")
        try:
            values[key] = float(val.strip())
        except ValueError as exc:
            raise ParameterError(f"{path}:{lineno}: bad number {val.strip()!r}") from exc
    missing = [n for n in _PARAM_NAMES if n not in values]
    if missing:
        raise ParameterError(f"{path}: missing parameters {missing}")
    return ModelParams(**values)


def builtin_params_path(name: str) -> Path:
    """Path of a bundled Table-style parameter set: ``slow`` or ``fast``."""
    return Path(__file__).parent / "data" / f"{name}.params"


def parse_nu_grid(spec: str):
    """Grid spec: ``log:lo:hi:n`` or a comma list; ``inf`` is the anchor."""
    spec = spec.strip()
    if spec.startswith("log:"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise ParameterError(f"bad nu-grid spec {spec!r}, want log:lo:hi:n")
        try:
            lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError as exc:
            raise ParameterError(f"bad nu-grid spec {spec!r}") from exc
        if not (0 < lo < hi and n >= 2):
            raise ParameterError(f"nu-grid needs 0 < lo < hi and n >= 2, got {spec!r}")
        return list(np.logspace(np.log10(hi), np.log10(lo), n))
    out = []
    for tok in spec.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok == "inf":
            out.append(float("inf"))
            continue
        try:
            val = float(tok)
        except ValueError as exc:
            raise ParameterError(f"bad nu value {tok!r} in grid spec") from exc
        if not val > 0:
            raise ParameterError(f"nu values must be positive, got {tok}")
        out.append(val)
    if not out:
        raise ParameterError("empty nu grid")
    return out


def _write_output(text: str, out):
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, newline="\n")


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _market_options(fn):
    fn = click.option("--params", "params_file", required=True,
                      type=click.Path(), help="key=value parameter file")(fn)
    fn = click.option("--r0", type=float, default=0.02, show_default=True,
                      help="initial short rate")(fn)
    fn = click.option("--x0", type=float, default=0.04, show_default=True,
                      help="initial equity surplus return")(fn)
    fn = click.option("--t", type=float, default=0.0, show_default=True,
                      help="start time (years)")(fn)
    fn = click.option("--s", type=float, default=10.0, show_default=True,
                      help="horizon date (years)")(fn)
    fn = click.option("--out", type=click.Path(), default=None,
                      help="output file (default: stdout)")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
                      default="csv", show_default=True)(fn)
    return fn


def _load(params_file, r0, x0, t, s):
    p = load_params(params_file)
    st = MarketState(r_t=r0, x_t=x0, t=t, s=s)
    return p, st


def _run(body):
    # uniform error-to-exit-code mapping; diagnostics go to stderr
    try:
        body()
    except ParameterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except NumericError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)


@click.group()
def cli():
    """Optimal deterministic strategies in a mean-reverting capital market."""


@cli.command()
@_market_options
@click.option("--nu-grid", "nu_grid_spec", default="log:1e-3:1e3:50",
              show_default=True, help="risk-aversion grid (log:lo:hi:n or list)")
def frontier(params_file, r0, x0, t, s, out, fmt, nu_grid_spec):
    """Efficient frontier: one row per risk aversion, plus the inf anchor."""

    def body():
        p, st = _load(params_file, r0, x0, t, s)
        grid = parse_nu_grid(nu_grid_spec)
        if not any(np.isinf(g) for g in grid):
            grid = [float("inf")] + grid
        failures = []
        points = efficient_frontier(p, st, grid, failures=failures)
        for nu, exc in failures:
            click.echo(f"skipped nu={_fmt(nu)}: {exc}", err=True)
        if fmt == "csv":
            text = _csv(
                ("nu", "ann_vol", "ann_mean"),
                [(pt.nu, pt.ann_vol, pt.ann_mean) for pt in points],
            )
        else:
            text = _json_text(
                {
                    "params": {k: getattr(p, k) for k in _PARAM_NAMES},
                    "horizon": st.horizon,
                    "state": {"r0": st.r_t, "x0": st.x_t, "t": st.t, "s": st.s},
                    "points": [
                        {
                            "nu": pt.nu,
                            "ann_vol": pt.ann_vol,
                            "ann_mean": pt.ann_mean,
                            "diagnostics": pt.diagnostics,
                        }
                        for pt in points
                    ],
                    "skipped": [{"nu": nu, "error": str(exc)} for nu, exc in failures],
                }
            )
        _write_output(text, out)

    _run(body)


@cli.command()
@_market_options
@click.option("--nu", type=float, default=None, help="risk aversion (finite)")
@click.option("--infinite-nu", is_flag=True, help="use the zero-variance bond strategy")
@click.option("--n-points", type=int, default=101, show_default=True)
def allocation(params_file, r0, x0, t, s, out, fmt, nu, infinite_nu, n_points):
    """Optimal factor allocation path, columns u, f_r, f_S."""

    def body():
        p, st = _load(params_file, r0, x0, t, s)
        if n_points < 2:
            raise ParameterError(f"--n-points must be >= 2, got {n_points}")
        if infinite_nu:
            us = np.linspace(st.t, st.s, n_points)
            table = np.column_stack([us, infinite_nu_allocation(p, us, st.s)])
        elif nu is not None:
            strategy = solve_optimal(p, st, nu)
            table = allocation_table(strategy, n_points)
        else:
            raise ParameterError("allocation needs --nu or --infinite-nu")
        rows = [tuple(float(v) for v in row) for row in table]
        if fmt == "csv":
            text = _csv(("u", "f_r", "f_S"), rows)
        else:
            text = _json_text({"columns": ["u", "f_r", "f_S"], "rows": rows})
        _write_output(text, out)

    _run(body)


def read_allocation_csv(path):
    """Parse an allocation CSV back into (header, rows-of-floats)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "u,f_r,f_S":
        raise ParameterError(f"{path}: not an allocation CSV (bad header)")
    rows = []
    for line in lines[1:]:
        if line:
            rows.append(tuple(float(v) for v in line.split(",")))
    return rows


@cli.command()
@_market_options
@click.option("--nu", type=float, default=None, help="risk aversion (finite)")
@click.option("--infinite-nu", is_flag=True)
def moments(params_file, r0, x0, t, s, out, fmt, nu, infinite_nu):
    """Closed-form and quadrature horizon moments for one strategy."""

    def body():
        p, st = _load(params_file, r0, x0, t, s)
        frame = build_frame(p, st)
        T = st.horizon
        if infinite_nu:
            path = StrategyPath(
                lambda u: infinite_nu_allocation(p, np.asarray(u), st.s),
                st.t, st.s, vectorized=True,
            )
            closed_mean = zero_coupon_rate(p, st.r_t, T) * T
            closed_var = 0.0
        elif nu is not None:
            strategy = solve_optimal(p, st, nu)
            path = strategy_path(strategy)
            closed_mean = closed_form_mean(strategy)
            closed_var = closed_form_variance(strategy)
        else:
            raise ParameterError("moments needs --nu or --infinite-nu")
        quad_mean = horizon_mean_quadrature(frame, p, st, path)
        quad_var = horizon_variance_quadrature(frame, p, st, path)
        record = {
            "nu": "inf" if infinite_nu else nu,
            "closed_mean": closed_mean,
            "closed_var": closed_var,
            "quad_mean": quad_mean,
            "quad_var": quad_var,
            "ann_mean": closed_mean / T,
            "ann_vol": float(np.sqrt(max(closed_var, 0.0) / T)),
        }
        if fmt == "csv":
            keys = list(record)
            text = _csv(keys, [tuple(record[k] for k in keys)])
        else:
            text = _json_text(record)
        _write_output(text, out)

    _run(body)


@cli.command("solvents")
@_market_options
@click.option("--nu", type=float, required=True)
def solvents_cmd(params_file, r0, x0, t, s, out, fmt, nu):
    """Spectral diagnostics: discriminant, branch, roots, residuals."""

    def body():
        p, st = _load(params_file, r0, x0, t, s)
        frame = build_frame(p, st)
        coeffs = el_coefficients(frame, p, st, nu)
        sol = solvents(LambdaMatrixCoeffs.from_el_coefficients(coeffs))
        lam = sol.lambdas
        eig = np.concatenate([np.linalg.eigvals(sol.S1), np.linalg.eigvals(sol.S2)])
        roots = np.concatenate([lam, -lam])
        order = np.lexsort((eig.imag, eig.real))
        order_r = np.lexsort((roots.imag, roots.real))
        completeness = float(np.abs(eig[order] - roots[order_r]).max())
        report = {
            "nu": nu,
            "discriminant": sol.D,
            "branch": sol.branch.value,
            "lambda1_sq": [sol.lambda_sq[0].real, sol.lambda_sq[0].imag],
            "lambda2_sq": [sol.lambda_sq[1].real, sol.lambda_sq[1].imag],
            "solvent_residuals": list(sol.solvent_residuals),
            "eigenvalue_completeness_error": completeness,
        }
        _write_output(_json_text(report), out)

    _run(body)


@cli.command()
@_market_options
@click.option("--nu", type=float, required=True)
@click.option("--paths", type=int, default=200_000, show_default=True)
@click.option("--dt", type=float, default=1.0 / 252.0, show_default=True)
@click.option("--seed", type=int, default=20240901, show_default=True)
@click.option("--antithetic/--no-antithetic", default=True, show_default=True)
@click.option("--check-allocation", "check_allocation", type=click.Path(), default=None,
              help="also verify an allocation CSV round-trips bit-exactly")
@click.option("--corrupt-k2", is_flag=True, hidden=True)
def validate(params_file, r0, x0, t, s, out, fmt, nu, paths, dt, seed, antithetic,
             check_allocation, corrupt_k2):
    """Oracle triangle: closed form vs quadrature vs Monte Carlo.

    Gates: closed/quadrature to relative 1e-6; closed/MC and quadrature/MC
    within 3 standard errors.  Exit 4 when any gate fails.
    """

    def body():
        p, st = _load(params_file, r0, x0, t, s)
        frame = build_frame(p, st)
        strategy = solve_optimal(p, st, nu)
        if corrupt_k2:  # negative-control hook for the exit-code contract
            strategy = dataclasses.replace(
                strategy, k2=strategy.k2 + np.array([1e-3, 1e-3])
            )
        path = strategy_path(strategy)
        closed_mean = closed_form_mean(strategy)
        closed_var = closed_form_variance(strategy)
        quad_mean = horizon_mean_quadrature(frame, p, st, path)
        quad_var = horizon_variance_quadrature(frame, p, st, path)
        sim = simulate(p, st, path, SimConfig(paths, dt, seed, antithetic))

        def rel(a, b):
            return abs(a - b) / max(abs(a), abs(b), 1e-12)

        gates = {
            "closed_vs_quad_mean": {
                "value": rel(closed_mean, quad_mean),
                "limit": 1e-6,
                "pass": bool(rel(closed_mean, quad_mean) <= 1e-6),
            },
            "closed_vs_quad_var": {
                "value": rel(closed_var, quad_var),
                "limit": 1e-6,
                "pass": bool(rel(closed_var, quad_var) <= 1e-6),
            },
            "closed_vs_mc_mean": {
                "value": abs(closed_mean - sim.mean_log),
                "limit": 3.0 * sim.se_mean,
                "pass": bool(abs(closed_mean - sim.mean_log) <= 3.0 * sim.se_mean),
            },
            "closed_vs_mc_var": {
                "value": abs(closed_var - sim.var_log),
                "limit": 3.0 * sim.se_var,
                "pass": bool(abs(closed_var - sim.var_log) <= 3.0 * sim.se_var),
            },
            "quad_vs_mc_mean": {
                "value": abs(quad_mean - sim.mean_log),
                "limit": 3.0 * sim.se_mean,
                "pass": bool(abs(quad_mean - sim.mean_log) <= 3.0 * sim.se_mean),
            },
            "quad_vs_mc_var": {
                "value": abs(quad_var - sim.var_log),
                "limit": 3.0 * sim.se_var,
                "pass": bool(abs(quad_var - sim.var_log) <= 3.0 * sim.se_var),
            },
        }
        report = {
            "nu": nu,
            "closed": {"mean": closed_mean, "var": closed_var},
            "quadrature": {"mean": quad_mean, "var": quad_var},
            "mc": {
                "mean": sim.mean_log,
                "var": sim.var_log,
                "se_mean": sim.se_mean,
                "se_var": sim.se_var,
                "n_effective": sim.n_effective,
            },
            "gates": gates,
        }
        if not (gates["closed_vs_quad_mean"]["pass"] and gates["closed_vs_quad_var"]["pass"]):
            # localize the disagreement rather than reconciling it
            report["closed_mean_terms"] = mean_terms(strategy)
            report["closed_var_terms"] = variance_terms(strategy)
        if check_allocation is not None:
            expected = Path(check_allocation).read_bytes()
            n_rows = len(read_allocation_csv(check_allocation))
            table = allocation_table(strategy, n_rows)
            regenerated = _csv(
                ("u", "f_r", "f_S"), [tuple(map(float, row)) for row in table]
            ).encode()
            report["allocation_roundtrip"] = {
                "pass": bool(regenerated == expected),
                "rows": n_rows,
            }
            gates["allocation_roundtrip"] = report["allocation_roundtrip"]
        verdict = all(g["pass"] for g in gates.values())
        report["verdict"] = "pass" if verdict else "fail"
        _write_output(_json_text(report), out)
        if not verdict:
            sys.exit(EXIT_GATE)

    _run(body)


def main():
    cli(auto_envvar_prefix="GLIDEPATH")


if __name__ == "__main__":
    main()
