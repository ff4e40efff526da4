"""Structural checks on solutions, reported as ``{name, pass, measured, tolerance}`` records."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filtering import FilterModel, dispersion, moment_inequality_value
from .pde import Boundary, ValueSurface, check_smooth_fit
from .priors import Discrete, TwoPoint, raw_moment


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    hard: bool = True

    def as_dict(self) -> dict:
        return {"name": self.name, "pass": bool(self.passed), "measured": float(self.measured), "tolerance": float(self.tolerance)}


def _at_least(name, measured, floor, hard=True):
    return Check(name, bool(measured >= floor), float(measured), float(floor), hard)


def _at_most(name, measured, ceiling, hard=True):
    return Check(name, bool(measured <= ceiling), float(measured), float(ceiling), hard)


def surface_checks(surface: ValueSurface) -> list[Check]:
    v = surface.v
    scale = float(np.max(np.abs(v)))
    d2 = v[:, 2:] - 2 * v[:, 1:-1] + v[:, :-2]
    return [
        _at_least("value_at_least_one", float(v.min()) - 1.0, -1e-12),
        _at_most("terminal_row_is_one", float(np.max(np.abs(v[-1] - 1.0))), 0.0),
        _at_least("rows_nondecreasing", float(np.min(np.diff(v, axis=1))), -1e-9),
        _at_least("rows_convex", float(d2.min()), -1e-7 * scale),
        _at_most("columns_nonincreasing", float(np.max(np.diff(v, axis=0))), 1e-9),
    ]


def boundary_checks(boundary: Boundary) -> list[Check]:
    h = boundary.h
    return [
        _at_least("boundary_nondecreasing", float(np.min(np.diff(h))), -1e-9),
        _at_most("boundary_nonpositive", float(h.max()), 0.0),
        _at_most("boundary_terminal_zero", abs(float(h[-1])), 0.0),
    ]


def smooth_fit_check(surface: ValueSurface, boundary: Boundary, tolerance: float = 0.1) -> Check:
    """Smooth-fit defect; informative only, since it vanishes as the grid is refined."""
    return _at_most("smooth_fit_defect", check_smooth_fit(surface, boundary), tolerance, hard=False)


def residual_check(max_abs: float, tolerance: float) -> Check:
    return _at_most("integral_equation_residual", max_abs, tolerance)


def dispersion_checks(model: FilterModel, T: float, n: int = 50) -> list[Check]:
    """Time-decay and curvature bound of ``psi`` on an ``n x n`` sample."""
    lo, hi = model.support
    if np.isfinite(lo):
        pad = max(0.02 * (hi - lo), 2e-3 * max(1.0, abs(lo), abs(hi)))
        xs = np.linspace(lo + pad, hi - pad, n)
    else:
        xs = np.linspace(-1.5, 1.5, n)
    ts = np.linspace(0.0, T, n)
    psi = dispersion(model, ts[:, None], xs[None, :])
    decay = float(np.max(np.diff(psi, axis=0)))
    hx = 1e-3 * np.maximum(1.0, np.abs(xs))
    d2 = (dispersion(model, ts[:, None], xs + hx) - 2 * psi + dispersion(model, ts[:, None], xs - hx)) / hx**2
    floor = -2.0 / model.sigma
    scale = max(1.0, float(np.max(np.abs(psi))))
    out = [
        _at_most("psi_nonincreasing_in_t", decay, 1e-9),
        _at_least("psi_curvature_bound", float(d2.min()) - floor, -1e-4 * scale),
    ]
    if isinstance(model.prior, TwoPoint):
        out.append(_at_most("psi_two_point_curvature_exact", float(np.max(np.abs(d2 - floor))), 1e-6))
    if np.isfinite(lo):
        bound = (hi - lo) ** 2 / (4 * model.sigma)
        out.append(_at_most("psi_bounded", float(psi.max()) - bound, 0.0))
    return out


def moment_checks(model: FilterModel) -> list[Check]:
    p = model.prior
    m = [raw_moment(p, k) for k in (1, 2, 3, 4)]
    val = moment_inequality_value(*m)
    out = [
        _at_least("moment_inequality", val, -1e-12),
        _at_least("jensen", m[1] - m[0] ** 2, 0.0),
    ]
    if isinstance(p, Discrete) and np.count_nonzero(p.weights > 0) >= 3:
        out.append(Check("moment_inequality_strict", bool(val > 0), float(val), 0.0))
    return out


def report(checks: list[Check]) -> tuple[list[dict], bool]:
    """JSON records and whether every hard check passed."""
    return [c.as_dict() for c in checks], all(c.passed for c in checks if c.hard)
