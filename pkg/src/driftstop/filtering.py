"""Posterior law of the drift given the observation process.

With ``Y_t = X t + sigma W_t`` the posterior of ``X`` given ``Y_t = y`` is the
prior reweighted by ``exp((2 u y - u^2 t) / (2 sigma^2))``.  Its mean
``f(t, y)`` is strictly increasing in ``y``; the diffusion coefficient of the
posterior-mean process at level ``x`` is ``psi(t, x) = Var_{t, y_x(t)}(X) / sigma``
where ``y_x(t)`` inverts ``f(t, .)``.

All functions broadcast over array-valued ``t``, ``y`` and ``x``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketFailure, DegenerateParameter, NumericalUnderflow, OutOfSupport
from .priors import Normal, Prior, TwoPoint, atoms, support_interval, validate

#: psi is set to zero within this distance of a finite support endpoint
ENDPOINT_CLAMP = 1e-9
_BRACKET_LIMIT = 1e9


@dataclass(frozen=True)
class FilterModel:
    prior: Prior
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DegenerateParameter(f"sigma must be positive (got {self.sigma})")
        validate(self.prior)

    @property
    def support(self) -> tuple[float, float]:
        return support_interval(self.prior)


def _normal_posterior(model: FilterModel, t, y):
    p: Normal = model.prior  # type: ignore[assignment]
    s2, g2 = model.sigma**2, p.gamma**2
    denom = s2 + t * g2
    return (s2 * p.m + g2 * y) / denom, s2 * g2 / denom


def _atom_probabilities(model: FilterModel, t, y) -> tuple[np.ndarray, np.ndarray]:
    """Posterior atom probabilities, shape ``broadcast(t, y).shape + (n_atoms,)``."""
    u, w = atoms(model.prior)
    keep = w > 0
    u, logw = u[keep], np.log(w[keep])
    t = np.asarray(t, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    logits = logw + (2.0 * u * y - u * u * t) / (2.0 * model.sigma**2)
    top = logits.max(axis=-1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise NumericalUnderflow("posterior weights are not finite for the requested (t, y)")
    p = np.exp(logits - top)
    p /= p.sum(axis=-1, keepdims=True)
    return u, p


def posterior_moments(model: FilterModel, t, y) -> tuple[np.ndarray, ...]:
    """Raw posterior moments ``E_{t,y}[X^k]`` for k = 1..4."""
    if isinstance(model.prior, Normal):
        mu, var = _normal_posterior(model, np.asarray(t, float), np.asarray(y, float))
        mu, var = np.broadcast_arrays(mu, var)
        return (
            mu,
            mu * mu + var,
            mu**3 + 3 * mu * var,
            mu**4 + 6 * mu * mu * var + 3 * var * var,
        )
    u, p = _atom_probabilities(model, t, y)
    return tuple((p * u**k).sum(axis=-1) for k in (1, 2, 3, 4))


def posterior_moment(model: FilterModel, t, y, k: int):
    if k not in (1, 2, 3, 4):
        raise ValueError("k must be in 1..4")
    out = posterior_moments(model, t, y)[k - 1]
    return float(out) if np.ndim(out) == 0 else out


def _mean_and_variance(model: FilterModel, t, y):
    if isinstance(model.prior, Normal):
        mu, var = _normal_posterior(model, t, y)
        return np.broadcast_arrays(mu, var)
    u, p = _atom_probabilities(model, t, y)
    mu = (p * u).sum(axis=-1)
    var = (p * (u - mu[..., None]) ** 2).sum(axis=-1)
    return mu, var


def posterior_mean(model: FilterModel, t, y):
    """Posterior mean ``f(t, y)`` of the drift."""
    mu, _ = _mean_and_variance(model, np.asarray(t, float), np.asarray(y, float))
    return float(mu) if np.ndim(mu) == 0 else mu


def posterior_variance(model: FilterModel, t, y):
    _, var = _mean_and_variance(model, np.asarray(t, float), np.asarray(y, float))
    return float(var) if np.ndim(var) == 0 else var


def _check_in_support(model: FilterModel, x: np.ndarray) -> None:
    lo, hi = model.support
    if np.any(~np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
        raise OutOfSupport(f"drift value outside the prior support [{lo}, {hi}]")


def invert_mean(model: FilterModel, t, x, tol: float | None = None):
    """Observation value ``y`` with ``f(t, y) = x``.

    The bracket is grown geometrically from ``y = 0`` and then shrunk by
    bisection; Newton steps (``df/dy = Var / sigma^2``) are taken whenever they
    stay inside the bracket.  The default tolerance is ``1e-10 * max(1, |x|)`` on
    ``|f(t, y) - x|``, but iteration continues to machine precision when it can.
    """
    t_arr, x_arr = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
    _check_in_support(model, x_arr)
    s2 = model.sigma**2
    tol_arr = (1e-10 if tol is None else tol) * np.maximum(1.0, np.abs(x_arr))

    f0, _ = _mean_and_variance(model, t_arr, np.zeros_like(x_arr))
    up = x_arr >= f0
    a = np.zeros_like(x_arr)
    b = np.zeros_like(x_arr)
    step = np.ones_like(x_arr)
    todo = np.ones(x_arr.shape, dtype=bool)
    # grow brackets: [a, b] with f(a) <= x <= f(b)
    while np.any(todo):
        probe = np.where(up, step, -step)
        fp, _ = _mean_and_variance(model, t_arr, probe)
        reached = np.where(up, fp >= x_arr, fp <= x_arr)
        newly = todo & reached
        a = np.where(newly & up, np.where(step > 1, probe / 2, 0.0), a)
        b = np.where(newly & up, probe, b)
        a = np.where(newly & ~up, probe, a)
        b = np.where(newly & ~up, np.where(step > 1, probe / 2, 0.0), b)
        todo &= ~reached
        if np.any(todo & (step > _BRACKET_LIMIT)):
            raise BracketFailure(
                "could not bracket the observation value; the drift value is too close "
                "to an endpoint of the prior support"
            )
        step = np.where(todo, step * 2.0, step)

    y = 0.5 * (a + b)
    eps = np.finfo(float).eps
    for _ in range(200):
        fy, var = _mean_and_variance(model, t_arr, y)
        r = fy - x_arr
        a = np.where(r <= 0, y, a)
        b = np.where(r >= 0, y, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = y - r * s2 / var
        ok = np.isfinite(newton) & (newton > a) & (newton < b)
        y_new = np.where(ok, newton, 0.5 * (a + b))
        y_new = np.where(r == 0, y, y_new)
        width = b - a
        if np.all((np.abs(y_new - y) <= 2 * eps * np.maximum(1.0, np.abs(y))) | (width <= 0)):
            y = y_new
            break
        y = y_new
    fy, _ = _mean_and_variance(model, t_arr, y)
    if np.any(np.abs(fy - x_arr) > tol_arr):
        raise BracketFailure("root finder did not reach the requested tolerance on f(t, y) = x")
    return float(y) if y.ndim == 0 else y


def dispersion(model: FilterModel, t, x):
    """Diffusion coefficient ``psi(t, x)`` of the posterior-mean process."""
    t_arr, x_arr = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
    _check_in_support(model, x_arr)
    prior, sigma = model.prior, model.sigma
    if isinstance(prior, Normal):
        out = np.full(x_arr.shape, 0.0) + sigma * prior.gamma**2 / (sigma**2 + t_arr * prior.gamma**2)
    else:
        lo, hi = model.support
        edge = (x_arr - lo <= ENDPOINT_CLAMP) | (hi - x_arr <= ENDPOINT_CLAMP)
        if isinstance(prior, TwoPoint):
            out = (prior.h - x_arr) * (x_arr - prior.l) / sigma
        else:
            out = np.zeros(x_arr.shape)
            inner = ~edge
            if np.any(inner):
                y = invert_mean(model, t_arr[inner], x_arr[inner])
                out[inner] = posterior_variance(model, t_arr[inner], y) / sigma
        out = np.where(edge, 0.0, np.maximum(out, 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass
class DispersionEvaluator:
    """Memoising front end for ``dispersion`` on grids.

    Rows are keyed by ``(t, x-grid)`` so repeated requests from the PDE solver,
    the simulator and the CLI reuse one computation.  Results do not depend on
    cache state, so concurrent callers see the values a sequential run would.
    """

    model: FilterModel
    _rows: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def grid(self, t_nodes, x_nodes) -> np.ndarray:
        t_nodes = np.asarray(t_nodes, float).ravel()
        x_nodes = np.asarray(x_nodes, float).ravel()
        xkey = x_nodes.tobytes()
        with self._lock:
            missing = [t for t in t_nodes if (t, xkey) not in self._rows]
        if missing:
            tm = np.array(missing)
            values = dispersion(self.model, tm[:, None], x_nodes[None, :])
            with self._lock:
                for t, row in zip(missing, values):
                    row = np.array(row)
                    row.setflags(write=False)
                    self._rows.setdefault((t, xkey), row)
        with self._lock:
            return np.array([self._rows[(t, xkey)] for t in t_nodes])

    def __call__(self, t: float, x):
        x = np.atleast_1d(np.asarray(x, float))
        return self.grid([t], x)[0]


def moment_inequality_value(m1: float, m2: float, m3: float, m4: float) -> float:
    """``m4 m2 + 2 m3 m2 m1 - m4 m1^2 - m3^2 - m2^3``; non-negative for raw moments of any law."""
    return m4 * m2 + 2 * m3 * m2 * m1 - m4 * m1 * m1 - m3 * m3 - m2**3


def lipschitz_estimate(psi: np.ndarray, x_nodes: np.ndarray) -> float:
    """Largest finite-difference slope of ``psi`` in x over a grid."""
    psi = np.atleast_2d(psi)
    slopes = np.abs(np.diff(psi, axis=1)) / np.diff(np.asarray(x_nodes, float))
    return float(slopes.max()) if slopes.size else 0.0
