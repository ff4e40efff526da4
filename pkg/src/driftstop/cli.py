"""Command-line front end.

Commands
--------
solve       value surface and boundary (surface.csv, boundary.csv, meta.json)
verify      integral-equation residual and shape checks (residual.csv, checks.json)
simulate    Monte Carlo value of each selling rule (estimates.csv)
sweep       boundaries and values across sigma or gamma (sweep.csv, boundaries.csv)
check       property suite for the configured prior (checks.json)
psi-table   dispersion on the solver grid (psi.csv)

Exit codes: 0 ok, 2 configuration error, 3 solver or engine error,
4 verification failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

from . import checks, export
from .config import RunConfig, load_config
from .errors import ConfigError, DriftStopError, PriorError
from .filtering import DispersionEvaluator, FilterModel, lipschitz_estimate
from .integral import residual
from .pde import common_grid, initial_value, psi_matrix, solve_value
from .priors import Normal, mean, prior_to_dict
from .simulate import BoundaryRule, improvement, naive_value, rule_set, simulate_value

log = logging.getLogger("driftstop")

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE, EXIT_VERIFY = 0, 2, 3, 4


class VerificationFailed(Exception):
    pass


def _solve(cfg: RunConfig, model: FilterModel | None = None, grid=None):
    model = model or cfg.model
    grid = grid or cfg.grid_spec(model)
    return solve_value(model, grid)


def cmd_solve(cfg: RunConfig, out: Path) -> None:
    model = cfg.model
    grid = cfg.grid_spec(model)
    started = time.perf_counter()
    surface, boundary = solve_value(model, grid)
    runtime = time.perf_counter() - started
    export.write_surface(out / "surface.csv", surface)
    export.write_boundary(out / "boundary.csv", boundary)
    meta = {
        "prior": prior_to_dict(cfg.prior),
        "sigma": cfg.sigma,
        "T": cfg.T,
        "discount_r": cfg.discount_r,
        "grid": dataclasses.asdict(grid),
        "x0": mean(cfg.prior),
        "value_at_x0": initial_value(surface, model),
        "h0": float(boundary.h[0]),
        "runtime_s": round(runtime, 3),
    }
    export.write_json(out / "meta.json", meta)
    log.info("v(0, x0) = %.6f, h(0) = %.6f", meta["value_at_x0"], meta["h0"])


def cmd_verify(cfg: RunConfig, out: Path) -> None:
    model = cfg.model
    surface, pde_boundary = _solve(cfg, model)
    boundary = export.read_boundary(cfg.boundary_csv) if cfg.boundary_csv else pde_boundary
    report = residual(model, boundary, cfg.T, engine=cfg.engine, mc=cfg.mc)
    export.write_csv(out / "residual.csv", ["t", "residual"], zip(report.t_nodes, report.residuals))
    found = (
        checks.surface_checks(surface)
        + checks.boundary_checks(boundary)
        + [checks.smooth_fit_check(surface, pde_boundary), checks.residual_check(report.max_abs, cfg.residual_tol)]
    )
    records, ok = checks.report(found)
    export.write_json(out / "checks.json", records)
    for c in found:
        log.info("%-30s %s measured=%.3e tol=%.3e", c.name, "pass" if c.passed else "FAIL", c.measured, c.tolerance)
    if not ok:
        raise VerificationFailed("hard checks failed: " + ", ".join(c.name for c in found if c.hard and not c.passed))


def cmd_simulate(cfg: RunConfig, out: Path) -> None:
    model = cfg.model
    boundary = export.read_boundary(cfg.boundary_csv) if cfg.boundary_csv else _solve(cfg, model)[1]
    rows = []
    for rule in rule_set(boundary):
        est = simulate_value(model, cfg.T, rule, cfg.sim)
        rows.append((rule.name, est.mean, est.stderr, est.n))
        log.info("%-10s %.6f +- %.6f", rule.name, est.mean, est.stderr)
    export.write_csv(out / "estimates.csv", ["rule", "mean", "stderr", "n"], rows)


def _sweep_models(cfg: RunConfig, axis: str, values: list[float]) -> list[FilterModel]:
    if axis == "sigma":
        return [FilterModel(cfg.prior, v) for v in values]
    if not isinstance(cfg.prior, Normal):
        raise ConfigError("a gamma sweep needs a normal prior")
    return [FilterModel(dataclasses.replace(cfg.prior, gamma=v), cfg.sigma) for v in values]


def cmd_sweep(cfg: RunConfig, out: Path, axis: str, values: list[float], mc_values: bool = False) -> None:
    if not values:
        raise ConfigError("sweep needs --values")
    models = _sweep_models(cfg, axis, values)
    n_t = int(cfg.grid.get("n_t", 2000))
    n_x = int(cfg.grid.get("n_x", 400))
    grid = common_grid(models, cfg.T, n_t, n_x)
    rows, curves = [], []
    for v, model in zip(values, models):
        surface, boundary = solve_value(model, grid)
        if mc_values:
            value = simulate_value(model, cfg.T, BoundaryRule(boundary), cfg.sim).mean
        else:
            value = initial_value(surface, model)
        naive = naive_value(model, cfg.T)
        rows.append((v, value, naive, improvement(model, cfg.T, boundary, value=value)))
        curves.extend((v, t, h) for t, h in zip(boundary.t_nodes, boundary.h))
    export.write_csv(out / "sweep.csv", [axis, "value_filtered", "value_naive", "improvement"], rows)
    export.write_csv(out / "boundaries.csv", [axis, "t", "h"], curves)


def cmd_check(cfg: RunConfig, out: Path) -> None:
    model = cfg.model
    found = checks.moment_checks(model) + checks.dispersion_checks(model, cfg.T)
    surface, boundary = _solve(cfg, model)
    found += checks.surface_checks(surface) + checks.boundary_checks(boundary)
    found.append(checks.smooth_fit_check(surface, boundary))
    if isinstance(model.prior, Normal):
        found.append(checks.residual_check(residual(model, boundary, cfg.T).max_abs, cfg.residual_tol))
    records, ok = checks.report(found)
    export.write_json(out / "checks.json", records)
    for c in found:
        log.info("%-30s %s", c.name, "pass" if c.passed else "FAIL")
    if not ok:
        raise VerificationFailed("property suite failed")


def cmd_psi_table(cfg: RunConfig, out: Path) -> None:
    model = cfg.model
    grid = cfg.grid_spec(model)
    psi = psi_matrix(model, grid, DispersionEvaluator(model))
    t, x = grid.t, grid.x
    export.write_csv(out / "psi.csv", ["t", "x", "psi"], ((t[i], x[j], psi[i, j]) for i in range(t.size) for j in range(x.size)))
    log.info("Lipschitz estimate of psi in x: %.4g", lipschitz_estimate(psi, x))


def _values(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values must be comma-separated numbers: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftstop", description="Optimal selling under a filtered drift.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON); default Normal(0, 0.5), sigma=0.2, T=1")
    common.add_argument("--out", help="output directory (overrides 'outputs')")
    common.add_argument("--seed", type=int, help="master seed for Monte Carlo")
    common.add_argument("--engine", choices=["gauss", "mc"], help="integral-equation expectation engine")
    common.add_argument("--boundary", help="boundary CSV (t,h) to verify or simulate instead of solving")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "simulate", "check", "psi-table"):
        sub.add_parser(name, parents=[common])
    sw = sub.add_parser("sweep", parents=[common])
    sw.add_argument("--axis", choices=["sigma", "gamma"], default=None)
    sw.add_argument("--values", help="comma-separated parameter values, e.g. 0.3,0.5,0.8")
    sw.add_argument("--mc", action="store_true", help="value each boundary by P-measure simulation")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, engine=args.engine, outputs=args.out, boundary_csv=args.boundary
        )
        if cfg.sim.seed < 0:
            raise ConfigError("seed must be non-negative")
        out = Path(cfg.outputs)
        if args.command == "solve":
            cmd_solve(cfg, out)
        elif args.command == "verify":
            cmd_verify(cfg, out)
        elif args.command == "simulate":
            cmd_simulate(cfg, out)
        elif args.command == "sweep":
            axis = args.axis or cfg.sweep.get("axis", "sigma")
            values = _values(args.values) if args.values else [float(v) for v in cfg.sweep.get("values", [])]
            cmd_sweep(cfg, out, axis, values, mc_values=args.mc)
        elif args.command == "check":
            cmd_check(cfg, out)
        elif args.command == "psi-table":
            cmd_psi_table(cfg, out)
    except (ConfigError, PriorError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except DriftStopError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
