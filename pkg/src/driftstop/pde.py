"""Value function and stopping boundary by backward induction on a (t, x) grid.

The continuation value solves

    v_t + sigma psi v_x + 1/2 psi^2 v_xx + x v = 0,

which is stepped backwards with a theta-scheme (Crank-Nicolson unless the grid ratio is large);
after every step the value is projected onto ``v >= 1``.  Stopping is thus
allowed at grid times only, a Bermudan approximation whose exercise dates
coincide with the simulator's.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainTooNarrow, GridTooCoarse, OutOfGrid, StabilityViolation, SolverError
from .filtering import DispersionEvaluator, FilterModel
from .priors import Normal, mean

DEFAULT_N_T = 2000
DEFAULT_N_X = 400
NORMAL_HALF_WIDTH = 6.0
#: above this max(psi^2) dt / dx^2 the "auto" scheme drops from Crank-Nicolson to implicit Euler
CN_RATIO_LIMIT = 10.0


@dataclass(frozen=True)
class GridSpec:
    T: float
    n_t: int = DEFAULT_N_T
    x_lo: float = -3.0
    x_hi: float = 3.0
    n_x: int = DEFAULT_N_X

    def __post_init__(self):
        if not self.T > 0:
            raise SolverError("horizon T must be positive")
        if self.n_t < 2 or self.n_x < 3:
            raise SolverError("grid needs n_t >= 2 and n_x >= 3")
        if not self.x_lo < 0 < self.x_hi:
            raise SolverError(f"spatial domain must straddle 0 (got [{self.x_lo}, {self.x_hi}])")

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_x

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t + 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n_x + 1)


def default_grid(model: FilterModel, T: float = 1.0, n_t: int = DEFAULT_N_T, n_x: int = DEFAULT_N_X) -> GridSpec:
    """Spatial domain: prior mean +- 6 gamma for normal priors, the support shrunk by 1e-6 of its width otherwise."""
    prior = model.prior
    if isinstance(prior, Normal):
        x0, w = prior.m, NORMAL_HALF_WIDTH * prior.gamma
        lo, hi = min(x0 - w, -prior.gamma), max(x0 + w, prior.gamma)
    else:
        lo, hi = model.support
        delta = 1e-6 * (hi - lo)
        lo, hi = lo + delta, hi - delta
    return GridSpec(T=T, n_t=n_t, x_lo=lo, x_hi=hi, n_x=n_x)


def common_grid(models, T: float = 1.0, n_t: int = DEFAULT_N_T, n_x: int = DEFAULT_N_X) -> GridSpec:
    """Smallest grid containing every model's default domain, for nodewise comparisons."""
    grids = [default_grid(m, T, n_t, n_x) for m in models]
    return GridSpec(T, n_t, min(g.x_lo for g in grids), max(g.x_hi for g in grids), n_x)


@dataclass(frozen=True, eq=False)
class ValueSurface:
    grid: GridSpec
    v: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    @property
    def x(self) -> np.ndarray:
        return self.grid.x


@dataclass(frozen=True, eq=False)
class Boundary:
    t_nodes: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        t = np.array(self.t_nodes, dtype=float)
        h = np.array(self.h, dtype=float)
        if t.shape != h.shape or t.ndim != 1:
            raise SolverError("boundary times and levels must be 1-d and of equal length")
        t.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "t_nodes", t)
        object.__setattr__(self, "h", h)

    def __call__(self, t):
        return np.interp(t, self.t_nodes, self.h)

    def shifted(self, delta: float) -> "Boundary":
        return Boundary(self.t_nodes, self.h + delta)


def psi_matrix(model: FilterModel, grid: GridSpec, evaluator: DispersionEvaluator | None = None) -> np.ndarray:
    evaluator = evaluator or DispersionEvaluator(model)
    return evaluator.grid(grid.t, grid.x)


def _check_domain(model: FilterModel, grid: GridSpec) -> None:
    lo, hi = model.support
    if grid.x_lo < lo or grid.x_hi > hi:
        raise SolverError(f"grid [{grid.x_lo}, {grid.x_hi}] leaves the prior support [{lo}, {hi}]")


def operator_coefficients(sigma: float, psi: np.ndarray, x: np.ndarray, dx: float):
    """Row coefficients (L, D, U) of the generator plus the killing/creation rate ``x``.

    Central differences for the drift, switching to a forward (upwind)
    difference where the cell Peclet number exceeds 2, i.e. ``psi < sigma dx``.
    """
    a = 0.5 * psi**2 / dx**2
    b = sigma * psi
    central = psi >= sigma * dx
    L = np.where(central, a - b / (2 * dx), a)
    U = np.where(central, a + b / (2 * dx), a + b / dx)
    D = np.where(central, -2 * a, -2 * a - b / dx) + x[None, :]
    return L, D, U


def _check_dominance(L, D, U, dt, theta, grid: GridSpec) -> None:
    lo = -theta * dt * L[:-1, 1:-1]
    di = 1.0 - theta * dt * D[:-1, 1:-1]
    up = -theta * dt * U[:-1, 1:-1]
    # last interior row after eliminating the extrapolated top node
    di[:, -1] = di[:, -1] + 2 * up[:, -1]
    lo[:, -1] = lo[:, -1] - up[:, -1]
    up[:, -1] = 0.0
    slack = np.abs(di) - np.abs(lo) - np.abs(up)
    if np.any(slack < -1e-12):
        ratio = grid.dt / grid.dx**2
        raise GridTooCoarse(
            f"implicit system lost diagonal dominance (dt/dx^2 = {ratio:.4g}, "
            f"dt = {grid.dt:.3g}); refine the time step"
        )


def solve_value(
    model: FilterModel,
    grid: GridSpec,
    theta: float | str = "auto",
    psi: np.ndarray | None = None,
) -> tuple[ValueSurface, Boundary]:
    """Backward induction for the value surface and the stopping boundary.

    Boundary conditions: ``v = 1`` at ``x_lo`` (deep in the stopping region) and
    zero curvature at ``x_hi``.

    ``theta="auto"`` uses Crank-Nicolson unless ``max(psi^2) dt / dx^2`` exceeds
    ``CN_RATIO_LIMIT``; beyond that Crank-Nicolson rings at the exercise kink
    (it is not L-stable) and the fully implicit step is used instead.

    Raises
    ------
    GridTooCoarse
        The implicit tridiagonal system is not diagonally dominant.
    DomainTooNarrow
        The stopping region shrinks to the lowest node at some time, so the
        boundary lies at or below ``x_lo``.
    """
    _check_domain(model, grid)
    started = time.perf_counter()
    if psi is None:
        psi = psi_matrix(model, grid)
    x = grid.x
    if theta == "auto":
        ratio = float(np.max(psi) ** 2) * grid.dt / grid.dx**2
        theta = 0.5 if ratio <= CN_RATIO_LIMIT else 1.0
    theta = float(theta)
    if not 0.5 <= theta <= 1.0:
        raise SolverError("theta must lie in [0.5, 1]")
    L, D, U = operator_coefficients(model.sigma, psi, x, grid.dx)
    _check_dominance(L, D, U, grid.dt, theta, grid)
    v, kstop, frac = kernels.theta_sweep(L, D, U, grid.dt, theta)
    surface = ValueSurface(grid, v, {"runtime_s": time.perf_counter() - started, "theta": theta})
    return surface, boundary_from_sweep(grid, kstop, frac)


def boundary_from_sweep(grid: GridSpec, kstop: np.ndarray, frac: np.ndarray) -> Boundary:
    """Boundary from the per-row exercise edge reported by the sweep.

    In row ``i`` the continuation value is <= 1 on nodes ``1..k`` and crosses 1
    between ``x_k`` and ``x_{k+1}``; the crossing is located by linear
    interpolation.  The terminal row is set to ``h(T) = 0``.
    """
    x, dx = grid.x, grid.dx
    h = np.empty(grid.n_t + 1)
    for i in range(grid.n_t):
        k = int(kstop[i])
        if k < 0:
            raise DomainTooNarrow(f"no continuation region at t={grid.t[i]:.6g}; widen x_hi")
        if k == 0:
            raise DomainTooNarrow(
                f"stopping boundary reaches x_lo={grid.x_lo:.6g} at t={grid.t[i]:.6g}; widen the domain"
            )
        h[i] = min(x[k] + float(frac[i]) * dx, 0.0)
    h[-1] = 0.0
    return Boundary(grid.t, h)


def value_at(surface: ValueSurface, t: float, x: float) -> float:
    """Bilinear interpolation of the value surface."""
    g = surface.grid
    eps = 1e-12 * max(1.0, g.T, abs(g.x_lo), abs(g.x_hi))
    if not (-eps <= t <= g.T + eps and g.x_lo - eps <= x <= g.x_hi + eps):
        raise OutOfGrid(f"({t}, {x}) outside [0, {g.T}] x [{g.x_lo}, {g.x_hi}]")
    st = min(max(t / g.dt, 0.0), g.n_t)
    sx = min(max((x - g.x_lo) / g.dx, 0.0), g.n_x)
    i, j = min(int(st), g.n_t - 1), min(int(sx), g.n_x - 1)
    wt, wx = st - i, sx - j
    v = surface.v
    return float(
        (1 - wt) * ((1 - wx) * v[i, j] + wx * v[i, j + 1])
        + wt * ((1 - wx) * v[i + 1, j] + wx * v[i + 1, j + 1])
    )


def initial_value(surface: ValueSurface, model: FilterModel) -> float:
    """``v(0, prior mean)``, the value of the selling problem."""
    return value_at(surface, 0.0, mean(model.prior))


def check_smooth_fit(surface: ValueSurface, boundary: Boundary) -> float:
    """Largest one-sided slope ``(v(t, h + dx) - 1) / dx`` over rows with an interior boundary."""
    g = surface.grid
    worst = 0.0
    for i in range(g.n_t):
        hi = boundary.h[i]
        if g.x_lo < hi and hi + g.dx <= g.x_hi:
            row = surface.v[i]
            val = np.interp(hi + g.dx, g.x, row)
            worst = max(worst, (val - 1.0) / g.dx)
    return worst


def euler_lattice_value(
    model: FilterModel,
    grid: GridSpec,
    substeps: int | None = 1,
    evaluator: DispersionEvaluator | None = None,
) -> ValueSurface:
    """Explicit dynamic programming on the same lattice; an independent check of ``solve_value``.

    Each exercise interval is crossed in ``substeps`` explicit steps (``None``
    picks the smallest stable count per interval).  Projection onto ``v >= 1``
    happens at the grid times only, matching ``solve_value``.

    Raises
    ------
    StabilityViolation
        The requested substep count violates ``dt <= dx^2 / max(psi^2)``.
    """
    _check_domain(model, grid)
    evaluator = evaluator or DispersionEvaluator(model)
    x, dx, dt = grid.x, grid.dx, grid.dt
    t_nodes = grid.t
    psi_nodes = evaluator.grid(t_nodes, x)
    counts = []
    for i in range(grid.n_t):
        need = math.ceil(dt * float(np.max(psi_nodes[i] ** 2)) / dx**2 * (1 - 1e-12)) or 1
        if substeps is None:
            counts.append(max(need, 1))
        else:
            if substeps < need:
                raise StabilityViolation(
                    f"explicit step dt/{substeps} exceeds dx^2/max(psi^2); need dt <= {dx**2 / np.max(psi_nodes[i] ** 2):.4g}",
                    required_dt=dx**2 / float(np.max(psi_nodes[i] ** 2)),
                )
            counts.append(substeps)

    v = np.empty((grid.n_t + 1, grid.n_x + 1))
    v[-1] = 1.0
    row = v[-1].copy()
    for i in range(grid.n_t - 1, -1, -1):
        m = counts[i]
        h = dt / m
        taus = t_nodes[i] + h * np.arange(m - 1, -1, -1)
        rows_psi = psi_nodes[i][None, :] if m == 1 else evaluator.grid(taus, x)
        for psi in rows_psi:
            L, D, U = operator_coefficients(model.sigma, psi[None, :], x, dx)
            L, U = L[0] * h, U[0] * h
            mid = 1.0 + (D[0] - x) * h
            new = np.empty_like(row)
            new[1:-1] = (1.0 + x[1:-1] * h) * (L[1:-1] * row[:-2] + mid[1:-1] * row[1:-1] + U[1:-1] * row[2:])
            new[0] = 1.0
            new[-1] = 2 * new[-2] - new[-3]
            row = new
        np.maximum(row, 1.0, out=row)
        v[i] = row
    return ValueSurface(grid, v, {"substeps": counts})
