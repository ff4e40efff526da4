"""Monte Carlo values of selling rules.

Under P the drift is drawn from the prior and the price is simulated exactly
on the time grid; the posterior mean is read off the observation
``Y_k = ln S_k + sigma^2 t_k / 2``.  Under Q the posterior mean itself is
simulated by Euler steps and the payoff is ``exp(int_0^tau X ds)``.
Either way stopping is checked on the grid times only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, rng
from .errors import ConfigError
from .filtering import DispersionEvaluator, FilterModel, invert_mean
from .pde import Boundary, default_grid
from .priors import Normal, atoms, mean, terminal_mgf


@dataclass(frozen=True)
class BoundaryRule:
    """Sell the first time the posterior mean is at or below ``boundary``."""

    boundary: Boundary
    name = "boundary"


@dataclass(frozen=True)
class Immediate:
    name = "immediate"


@dataclass(frozen=True)
class Terminal:
    name = "terminal"


@dataclass(frozen=True)
class ZeroOrT:
    """Sell at 0 if ``E[exp(X T)] <= 1``, otherwise at ``T``."""

    name = "zero_or_t"


StoppingRule = BoundaryRule | Immediate | Terminal | ZeroOrT


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 400_000
    n_steps: int = 2000
    seed: int = 0
    measure: str = "P"

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ConfigError("n_paths and n_steps must be at least 1")
        if self.measure not in ("P", "Q"):
            raise ConfigError(f"measure must be 'P' or 'Q' (got {self.measure!r})")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 bits")


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int


def _estimate(payoffs: np.ndarray) -> Estimate:
    n = payoffs.size
    m = float(np.mean(payoffs))
    sd = float(np.std(payoffs, ddof=1)) if n > 1 else 0.0
    return Estimate(m, sd / math.sqrt(n), n)


def _resolve(model: FilterModel, T: float, rule) -> object:
    if isinstance(rule, ZeroOrT):
        return Immediate() if terminal_mgf(model.prior, T) <= 1.0 else Terminal()
    return rule


def _draw_drift(prior, gen: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(prior, Normal):
        return prior.m + prior.gamma * gen.standard_normal(n)
    u, w = atoms(prior)
    cdf = np.cumsum(w)
    idx = np.searchsorted(cdf, gen.random(n) * cdf[-1], side="right")
    return u[np.minimum(idx, u.size - 1)]


def stopping_levels(model: FilterModel, boundary: Boundary, t_grid: np.ndarray) -> np.ndarray:
    """Observation thresholds ``y*_k`` with ``f(t_k, y*_k) = h(t_k)``.

    ``f(t, .)`` is increasing, so ``X_k <= h(t_k)`` iff ``Y_k <= y*_k``.  Levels
    at or below the lower end of the support never trigger (``-inf``); the
    final entry is ``+inf`` since every path is sold at the horizon.
    """
    lo, hi = model.support
    h = boundary(t_grid[:-1])
    ystar = np.full(t_grid.size, np.inf)
    below = h <= lo
    above = h >= hi
    inner = ~(below | above)
    ystar[:-1][below] = -np.inf
    if np.any(inner):
        ystar[:-1][inner] = invert_mean(model, t_grid[:-1][inner], h[inner])
    return ystar


def simulate_value_P(model: FilterModel, T: float, rule, cfg: SimConfig, workers: int | None = None) -> Estimate:
    """Estimate ``E[S_tau]`` with ``S_0 = 1`` by exact simulation of the price."""
    rule = _resolve(model, T, rule)
    if isinstance(rule, Immediate):
        return Estimate(1.0, 0.0, cfg.n_paths)
    sigma = model.sigma
    if isinstance(rule, Terminal):
        n_steps = 1
        ystar = np.array([-np.inf, np.inf])
    else:
        n_steps = cfg.n_steps
        t_grid = np.linspace(0.0, T, n_steps + 1)
        ystar = stopping_levels(model, rule.boundary, t_grid)
    dt = T / n_steps
    first_stop = ystar[0] >= 0.0  # Y_0 = 0

    def block(b, n):
        drift = _draw_drift(model.prior, rng.block_generator(cfg.seed, rng.DRIFT, b), n)
        if first_stop:
            return np.ones(n)
        z = rng.block_generator(cfg.seed, rng.NORMALS, b).standard_normal((n, n_steps))
        return kernels.p_paths(drift, z, ystar, dt, sigma)

    payoffs = rng.run_blocks(block, cfg.n_paths, np.empty(cfg.n_paths), workers)
    return _estimate(payoffs)


def _psi_table(model: FilterModel, T: float, n_steps: int, n_x: int = 400):
    t_grid = np.linspace(0.0, T, n_steps + 1)
    if isinstance(model.prior, Normal):
        xg = np.array([0.0, 1.0])
        tab = DispersionEvaluator(model).grid(t_grid[:-1], xg[:1])
        return tab, 0.0, 1.0, -np.inf, np.inf
    grid = default_grid(model, T, n_t=2, n_x=n_x)
    xg = grid.x
    tab = DispersionEvaluator(model).grid(t_grid[:-1], xg)
    return tab, float(xg[0]), float(grid.dx), float(xg[0]), float(xg[-1])


def simulate_value_Q(model: FilterModel, T: float, rule, cfg: SimConfig, workers: int | None = None) -> Estimate:
    """Estimate ``E^Q[exp(int_0^tau X ds)]`` with Euler steps for the posterior mean."""
    rule = _resolve(model, T, rule)
    if isinstance(rule, Immediate):
        return Estimate(1.0, 0.0, cfg.n_paths)
    n_steps = cfg.n_steps
    t_grid = np.linspace(0.0, T, n_steps + 1)
    if isinstance(rule, Terminal):
        hk = np.full(n_steps, -np.inf)
    else:
        hk = rule.boundary(t_grid[:-1])
    tab, xg0, dxg, lo, hi = _psi_table(model, T, n_steps)
    x0 = mean(model.prior)
    dt = T / n_steps

    def block(b, n):
        z = rng.block_generator(cfg.seed, rng.NORMALS, b).standard_normal((n, n_steps))
        return kernels.q_paths(x0, z, tab, xg0, dxg, hk, dt, model.sigma, lo, hi)

    payoffs = rng.run_blocks(block, cfg.n_paths, np.empty(cfg.n_paths), workers)
    return _estimate(payoffs)


def simulate_value(model: FilterModel, T: float, rule, cfg: SimConfig, workers: int | None = None) -> Estimate:
    fn = simulate_value_P if cfg.measure == "P" else simulate_value_Q
    return fn(model, T, rule, cfg, workers)


def naive_value(model: FilterModel, T: float) -> float:
    """Best of selling now and selling at the horizon: ``max(1, E[exp(X T)])``."""
    return max(1.0, terminal_mgf(model.prior, T))


def improvement(
    model: FilterModel,
    T: float,
    boundary: Boundary,
    cfg: SimConfig | None = None,
    value: float | None = None,
) -> float:
    """Relative gain of the boundary rule over ``naive_value``.

    The rule's value is ``value`` when given (e.g. read off a PDE surface),
    otherwise the P-measure estimate under ``cfg``.
    """
    if value is None:
        value = simulate_value_P(model, T, BoundaryRule(boundary), cfg or SimConfig()).mean
    base = naive_value(model, T)
    return (value - base) / base


RULES = {"immediate": Immediate, "terminal": Terminal, "zero_or_t": ZeroOrT}


def rule_set(boundary: Boundary | None):
    rules = [Immediate(), Terminal(), ZeroOrT()]
    if boundary is not None:
        rules.append(BoundaryRule(boundary))
    return rules


__all__ = [
    "BoundaryRule",
    "Immediate",
    "Terminal",
    "ZeroOrT",
    "SimConfig",
    "Estimate",
    "simulate_value",
    "simulate_value_P",
    "simulate_value_Q",
    "naive_value",
    "improvement",
    "stopping_levels",
    "rule_set",
]
