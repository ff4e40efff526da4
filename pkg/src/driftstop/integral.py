"""Integral equation for the stopping boundary.

Started from ``X_t = c`` the posterior mean satisfies, under Q,

    E[exp(int_t^T X du)] = 1 + int_t^T E[exp(int_t^s X du) X_s 1{X_s <= h(s)}] ds

exactly when ``c = h(t)`` and ``h`` is the optimal boundary.  The left side
minus the right side equals ``v(t, c) - 1`` for the true boundary, so it is a
certificate for a candidate boundary (``residual``) and, marched backwards in
time, a way to construct one (``solve_fixed_point``).

For normal priors ``psi`` depends on ``t`` only, so ``(X_s, I_s)`` with
``I_s = int_t^s X du`` is jointly Gaussian with moments in closed form and the
expectations reduce to quadrature.  Other priors go through Monte Carlo.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import kernels, rng
from .errors import EngineUnavailable, NoRootInBracket, WrongPriorKind
from .filtering import DispersionEvaluator, FilterModel
from .pde import Boundary, default_grid
from .priors import Normal

log = logging.getLogger(__name__)

DEFAULT_NODES = 64
HEAD_INTERVALS = 16
_SERIES_CUTOFF = 0.05
_WINDOW = 12.0


# ---------------------------------------------------------------------------
# joint law of (X_s, I_s) for a normal prior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianLawQ:
    """Moments of ``(X_s, I_s)`` under Q started from ``X_{t0} = x0``."""

    t0: float
    x0: float
    s: np.ndarray
    mean_x: np.ndarray
    var_x: np.ndarray
    mean_I: np.ndarray
    var_I: np.ndarray
    cov_xI: np.ndarray


def _series(r, coef):
    out = np.zeros_like(r)
    p = np.ones_like(r)
    for k, c in enumerate(coef):
        if k:
            p = p * r
        out = out + c * p
    return out


_K = np.arange(25)
_FACT = np.array([math.factorial(int(k)) for k in _K], dtype=float)
# e^r - 1 - r
_C_EM = np.where(_K >= 2, 1.0 / _FACT, 0.0)
# e^r (r - 1) + 1
_C_MI = np.where(_K >= 2, (_K - 1) / _FACT, 0.0)
# e^{2r} - 1 - 2 r e^r
_C_VI = np.where(_K >= 3, (2.0**_K - 2 * _K) / _FACT, 0.0)


def _phi_em(r):
    return np.where(np.abs(r) < _SERIES_CUTOFF, _series(r, _C_EM), np.expm1(r) - r)


def _phi_mi(r):
    return np.where(np.abs(r) < _SERIES_CUTOFF, _series(r, _C_MI), np.exp(r) * (r - 1.0) + 1.0)


def _phi_vi(r):
    return np.where(
        np.abs(r) < _SERIES_CUTOFF, _series(r, _C_VI), np.expm1(2 * r) - 2 * r * np.exp(r)
    )


def gaussian_law(model: FilterModel, t0: float, x0: float, s) -> GaussianLawQ:
    """Joint Gaussian law of ``(X_s, I_s)`` for a normal prior.

    With ``c(u) = sigma^2 + u gamma^2`` and ``r = ln(c(s) / c(t0))``::

        mean_x = x0 + sigma^2 r
        var_x  = sigma^2 gamma^2 / c(t0) * (1 - e^{-r})
        mean_I = x0 (s - t0) + sigma^2 c(t0) / gamma^2 * (e^r (r - 1) + 1)
        cov_xI = sigma^2 (e^r - 1 - r)
        var_I  = sigma^2 c(t0) / gamma^2 * (e^{2r} - 1 - 2 r e^r)

    Small ``r`` uses Taylor series to avoid cancellation.
    """
    prior = model.prior
    if not isinstance(prior, Normal):
        raise WrongPriorKind(f"closed-form law needs a normal prior, got {prior.kind}")
    s = np.asarray(s, dtype=float)
    if np.any(s < t0):
        raise ValueError("s must not precede t0")
    s2, g2 = model.sigma**2, prior.gamma**2
    c0 = s2 + t0 * g2
    r = np.log1p(g2 * (s - t0) / c0)
    scale = s2 * c0 / g2
    fields = dict(
        s=s,
        mean_x=x0 + s2 * r,
        var_x=s2 * g2 / c0 * -np.expm1(-r),
        mean_I=x0 * (s - t0) + scale * _phi_mi(r),
        var_I=scale * _phi_vi(r),
        cov_xI=s2 * _phi_em(r),
    )
    if s.ndim == 0:
        fields = {k: float(v) for k, v in fields.items()}
    return GaussianLawQ(t0=float(t0), x0=float(x0), **fields)


# ---------------------------------------------------------------------------
# expectation engine
# ---------------------------------------------------------------------------


def _rules(nodes: int):
    gh_x, gh_w = np.polynomial.hermite.hermgauss(nodes)
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)
    return math.sqrt(2.0) * gh_x, gh_w / math.sqrt(math.pi), gl_x, gl_w


_RULE_CACHE: dict[int, tuple] = {}


def _rule(nodes: int):
    if nodes not in _RULE_CACHE:
        _RULE_CACHE[nodes] = _rules(nodes)
    return _RULE_CACHE[nodes]


def gauss_expectation(mean_x, var_x, mean_I, var_I, cov_xI, h, nodes: int = DEFAULT_NODES):
    """``E[exp(I) X 1{X <= h}]`` for jointly Gaussian ``(X, I)``.

    Whitening gives ``X = m_x + s_x z1`` and
    ``I = m_I + a z1 + b z2`` with ``a = cov / s_x`` and ``b^2 = var_I - a^2``.
    The tensor Hermite rule in ``(z1, z2)`` is replaced in the ``z1`` direction
    by Gauss-Legendre on the truncated range ``z1 <= (h - m_x) / s_x``, which
    carries the indicator exactly; the ``z2`` direction keeps Gauss-Hermite.
    Because the integrand factorises, the double sum is a product of two
    single sums.
    """
    gh_z, gh_w, gl_x, gl_w = _rule(nodes)
    mx, vx, mI, vI, cxi, h = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (mean_x, var_x, mean_I, var_I, cov_xI, h))
    )
    out = np.zeros(mx.shape)
    sx = np.sqrt(np.maximum(vx, 0.0))
    point = sx <= 1e-14 * np.maximum(1.0, np.abs(mx))
    # degenerate law: X and I are constants
    out[point] = np.where(mx[point] <= h[point], np.exp(mI[point]) * mx[point], 0.0)
    live = ~point
    if not np.any(live):
        return out
    sx_l, mx_l, h_l = sx[live], mx[live], h[live]
    a = cxi[live] / sx_l
    b = np.sqrt(np.maximum(vI[live] - a * a, 0.0))
    herm = np.exp(b[:, None] * gh_z[None, :]) @ gh_w
    zstar = np.where(np.isfinite(h_l), (h_l - mx_l) / np.where(sx_l > 0, sx_l, 1.0), -np.inf)
    lo = a - _WINDOW
    hi = np.minimum(zstar, a + _WINDOW)
    width = np.maximum(hi - lo, 0.0)
    z = lo[:, None] + 0.5 * width[:, None] * (gl_x[None, :] + 1.0)
    dens = np.exp(a[:, None] * z - 0.5 * z * z) / math.sqrt(2.0 * math.pi)
    inner = (dens * (mx_l[:, None] + sx_l[:, None] * z)) @ gl_w * (0.5 * width)
    out[live] = np.exp(mI[live]) * herm * inner
    return out


def gauss_expectation_exact(mean_x, var_x, mean_I, var_I, cov_xI, h):
    """Closed form of ``gauss_expectation``; used as a test oracle."""
    from scipy.special import ndtr

    mx, vx, mI, vI, cxi, h = (np.asarray(a, dtype=float) for a in (mean_x, var_x, mean_I, var_I, cov_xI, h))
    sx = np.sqrt(vx)
    mt = mx + cxi
    z = (h - mt) / sx
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return np.exp(mI + 0.5 * vI) * (mt * ndtr(z) - sx * pdf)


# ---------------------------------------------------------------------------
# Monte Carlo engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo settings for the integral equation.

    ``n_paths`` counts antithetic pairs; ``stride`` selects every k-th boundary
    node for the residual (the terminal node is always included).
    """

    n_paths: int = 200_000
    seed: int = 0
    stride: int = 100
    n_x: int = 400


def _mc_setup(model: FilterModel, boundary: Boundary, n_x: int):
    grid = default_grid(model, float(boundary.t_nodes[-1]), n_t=2, n_x=n_x)
    xg = grid.x
    psi_tab = DispersionEvaluator(model).grid(boundary.t_nodes, xg)
    return xg, psi_tab


def _mc_residual_at(model, boundary, i, mc: MCConfig, xg, psi_tab):
    t = boundary.t_nodes
    h = boundary.h
    n = len(t) - 1 - i
    if n == 0:
        return 0.0
    dt_all = np.diff(t[i:])
    if not np.allclose(dt_all, dt_all[0], rtol=1e-9, atol=0.0):
        raise EngineUnavailable("Monte Carlo engine needs a uniform boundary grid")
    dt = float(dt_all[0])
    c = float(h[i])
    hk = np.array(h[i:], dtype=float)
    tab = np.ascontiguousarray(psi_tab[i:-1])
    lo, hi = float(xg[0]), float(xg[-1])
    dxg = float(xg[1] - xg[0])
    n_blocks = (mc.n_paths + rng.BLOCK - 1) // rng.BLOCK
    terms = np.zeros((n_blocks, n + 1))
    lhs = np.zeros(n_blocks)
    for b, start, stop in rng.blocks(mc.n_paths):
        gen = rng.block_generator(mc.seed, rng.IE_PATHS, (i << 20) | b)
        z = gen.standard_normal((stop - start, n))
        terms[b], lhs[b] = kernels.ie_moments(c, z, tab, lo, dxg, hk, dt, model.sigma, lo, hi)
    count = 2.0 * mc.n_paths
    term = terms.sum(axis=0) / count
    term[0] = 0.5 * c  # limit of the integrand as s -> t when started on the boundary
    integral = dt * (term.sum() - 0.5 * (term[0] + term[-1]))
    return float(lhs.sum() / count - 1.0 - integral)


# ---------------------------------------------------------------------------
# residual and fixed point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    t_nodes: np.ndarray
    residuals: np.ndarray
    max_abs: float


def _quadrature_points(t: np.ndarray, h: np.ndarray, i: int, c: float):
    """Nodes ``s``, boundary levels ``h(s)`` and weights for ``int_{t_i}^T ds``.

    Near ``s = t_i`` the integrand behaves like ``const + O(sqrt(s - t_i))``;
    the first ``HEAD_INTERVALS`` intervals are integrated in ``w = sqrt(s - t_i)``
    with 4-point Gauss-Legendre panels aligned to the nodes.  The rest uses
    Simpson's rule per interval, with ``h`` linear between nodes.
    """
    n = len(t) - 1 - i
    hv = np.array(h[i:], dtype=float)
    hv[0] = c
    tv = t[i:]
    k_head = min(HEAD_INTERVALS, n)
    gx, gw = np.polynomial.legendre.leggauss(4)
    W = np.sqrt(tv[: k_head + 1] - tv[0])
    half = 0.5 * np.diff(W)
    w = (0.5 * (W[:-1] + W[1:]))[:, None] + half[:, None] * gx[None, :]
    s_head = tv[0] + w * w
    wt_head = half[:, None] * gw[None, :] * 2.0 * w
    frac = (s_head - tv[:k_head, None]) / (tv[1 : k_head + 1] - tv[:k_head])[:, None]
    h_head = hv[:k_head, None] * (1 - frac) + hv[1 : k_head + 1, None] * frac
    parts_s = [s_head.ravel()]
    parts_h = [h_head.ravel()]
    parts_w = [wt_head.ravel()]
    if n > k_head:
        te, he = tv[k_head:], hv[k_head:]
        dt = np.diff(te)
        ends = np.zeros(len(te))
        ends[:-1] += dt / 6.0
        ends[1:] += dt / 6.0
        parts_s += [te, 0.5 * (te[:-1] + te[1:])]
        parts_h += [he, 0.5 * (he[:-1] + he[1:])]
        parts_w += [ends, 4.0 * dt / 6.0]
    return np.concatenate(parts_s), np.concatenate(parts_h), np.concatenate(parts_w)


def _gauss_residual_at(model, t, h, i, c, nodes):
    if i == len(t) - 1:
        return 0.0
    s, hs, wq = _quadrature_points(t, h, i, c)
    law = gaussian_law(model, t[i], c, s)
    vals = gauss_expectation(law.mean_x, law.var_x, law.mean_I, law.var_I, law.cov_xI, hs, nodes)
    end = gaussian_law(model, t[i], c, t[-1])
    lhs = math.exp(float(end.mean_I) + 0.5 * float(end.var_I))
    return lhs - 1.0 - float(vals @ wq)


def ie_rhs_term(
    model: FilterModel,
    t: float,
    h_curve: Boundary,
    s,
    x0: float | None = None,
    engine: str = "gauss",
    nodes: int = DEFAULT_NODES,
):
    """Integrand ``E^Q[exp(int_t^s X du) X_s 1{X_s <= h(s)}]`` started from ``X_t = x0``.

    ``x0`` defaults to ``h(t)``.  Only the Gaussian engine evaluates single
    terms; the Monte Carlo engine works on whole residuals.
    """
    if engine != "gauss":
        raise EngineUnavailable("single integrand values are only available from the gauss engine")
    if not isinstance(model.prior, Normal):
        raise EngineUnavailable(
            f"no closed-form law for a {model.prior.kind} prior; use the Monte Carlo engine"
        )
    x0 = float(h_curve(t)) if x0 is None else float(x0)
    s_arr = np.asarray(s, dtype=float)
    law = gaussian_law(model, t, x0, s_arr)
    out = gauss_expectation(law.mean_x, law.var_x, law.mean_I, law.var_I, law.cov_xI, h_curve(s_arr), nodes)
    return float(out) if out.ndim == 0 else out


def residual(
    model: FilterModel,
    boundary: Boundary,
    T: float | None = None,
    engine: str = "gauss",
    nodes: int = DEFAULT_NODES,
    mc: MCConfig | None = None,
) -> ResidualReport:
    """Left side minus right side of the integral equation at the boundary nodes.

    The ``gauss`` engine evaluates every node; the ``mc`` engine every
    ``mc.stride``-th node plus the terminal one.
    """
    t = boundary.t_nodes
    h = boundary.h
    if T is not None and not math.isclose(float(t[-1]), T, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError(f"boundary ends at {t[-1]}, not at T={T}")
    if engine == "gauss":
        if not isinstance(model.prior, Normal):
            raise EngineUnavailable(
                f"the gauss engine needs a normal prior (got {model.prior.kind}); use --engine mc"
            )
        idx = np.arange(len(t))
        res = np.array([_gauss_residual_at(model, t, h, i, float(h[i]), nodes) for i in idx])
    elif engine == "mc":
        if mc is None:
            raise EngineUnavailable("Monte Carlo engine requested without a configuration")
        xg, psi_tab = _mc_setup(model, boundary, mc.n_x)
        idx = np.unique(np.r_[np.arange(0, len(t), max(1, mc.stride)), len(t) - 1])
        res = np.array([_mc_residual_at(model, boundary, int(i), mc, xg, psi_tab) for i in idx])
    else:
        raise EngineUnavailable(f"unknown engine {engine!r}")
    res[-1] = 0.0
    return ResidualReport(t[idx].copy(), res, float(np.max(np.abs(res))))


def solve_fixed_point(
    model: FilterModel,
    T: float,
    n_t: int = 1000,
    x_lo: float | None = None,
    tol: float = 1e-8,
    nodes: int = DEFAULT_NODES,
) -> Boundary:
    """March the integral equation backwards from ``h(T) = 0``.

    At each node the residual ``F(c)`` vanishes for every ``c`` inside the
    stopping region and is positive above it, so the boundary is taken as the
    largest ``c`` with ``F(c) <= tol / 2``, located by Brent's method between a
    point where ``F`` is below that level and ``h(t_{i+1})``.  If ``F`` is
    already below it at ``h(t_{i+1})`` the boundary is flat there.

    Raises
    ------
    NoRootInBracket
        The bracket had to be widened below ``x_lo``.
    """
    if not isinstance(model.prior, Normal):
        raise WrongPriorKind("the fixed-point solver needs a normal prior")
    if n_t < 50:
        raise ValueError("n_t must be at least 50")
    if x_lo is None:
        x_lo = default_grid(model, T).x_lo
    t = np.linspace(0.0, T, n_t + 1)
    h = np.zeros(n_t + 1)
    level = 0.5 * tol
    for i in range(n_t - 1, -1, -1):
        upper = h[i + 1]

        def F(c, i=i):
            return _gauss_residual_at(model, t, h, i, c, nodes) - level

        f_up = F(upper)
        if f_up <= 0.0:
            h[i] = upper
            continue
        margin = 0.05
        lower = upper - margin
        while F(lower) > 0.0:
            if lower <= x_lo:
                raise NoRootInBracket(
                    f"no sign change of the residual above x_lo={x_lo:.6g} at t={t[i]:.6g}",
                    bracket=(float(x_lo), float(upper)),
                )
            margin *= 2.0
            lower = max(upper - margin, x_lo)
        h[i] = brentq(F, lower, upper, xtol=1e-12, rtol=1e-12)
    return Boundary(t, h)
