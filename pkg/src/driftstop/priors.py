"""Prior distributions for the unknown drift.

Four kinds are supported: a two-point law, a normal law, a finite discrete
law and a quadrature law (a density sampled on nodes with integration
weights).  Discrete and quadrature priors share the same machinery; every
posterior quantity for them is a weighted sum over the nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Union

import numpy as np

from .errors import (
    DegenerateParameter,
    PriorError,
    ShiftBreaksSignMass,
    SignMassViolation,
    UnsupportedKind,
)

WEIGHT_TOL = 1e-12


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TwoPoint:
    """Drift equals ``h`` with probability ``pi`` and ``l`` otherwise."""

    l: float
    h: float
    pi: float

    kind = "two_point"


@dataclass(frozen=True)
class Normal:
    m: float
    gamma: float

    kind = "normal"


@dataclass(frozen=True, eq=False)
class Discrete:
    points: np.ndarray
    weights: np.ndarray

    kind = "discrete"

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen_array(self.points))
        object.__setattr__(self, "weights", _frozen_array(self.weights))

    def __eq__(self, other):
        return (
            type(other) is type(self)
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.kind, self.points.tobytes(), self.weights.tobytes()))


@dataclass(frozen=True, eq=False)
class Quadrature(Discrete):
    """Density sampled at ``points`` (the nodes); weights are normalised on construction."""

    kind = "quadrature"

    def __post_init__(self):
        super().__post_init__()
        w = self.weights
        if w.size and np.all(np.isfinite(w)) and w.sum() > 0:
            object.__setattr__(self, "weights", _frozen_array(w / w.sum()))

    @property
    def nodes(self) -> np.ndarray:
        return self.points


Prior = Union[TwoPoint, Normal, Discrete, Quadrature]


def quadrature_prior(
    density: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, n: int = 201
) -> Quadrature:
    """Sample ``density`` on ``n`` equispaced nodes of ``[lo, hi]`` with Simpson weights."""
    if n < 3 or not lo < hi:
        raise DegenerateParameter("quadrature prior needs n >= 3 and lo < hi")
    if n % 2 == 0:
        n += 1
    nodes = np.linspace(lo, hi, n)
    simpson = np.ones(n)
    simpson[1:-1:2] = 4.0
    simpson[2:-1:2] = 2.0
    dens = np.asarray(density(nodes), dtype=float)
    if np.any(dens < 0) or not np.all(np.isfinite(dens)):
        raise DegenerateParameter("density must be finite and non-negative on the nodes")
    weights = simpson * dens
    keep = weights > 0
    return Quadrature(nodes[keep], weights[keep])


def atoms(prior: Prior) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and probabilities of a finitely supported prior."""
    if isinstance(prior, TwoPoint):
        return np.array([prior.l, prior.h]), np.array([1.0 - prior.pi, prior.pi])
    if isinstance(prior, Discrete):
        return prior.points, prior.weights
    raise UnsupportedKind(f"{prior.kind} prior has no finite atom representation")


def _check_parameters(prior: Prior) -> None:
    if isinstance(prior, TwoPoint):
        if not all(math.isfinite(v) for v in (prior.l, prior.h, prior.pi)):
            raise DegenerateParameter("two-point parameters must be finite")
        if not prior.l < prior.h:
            raise DegenerateParameter(f"two-point prior needs l < h (got l={prior.l}, h={prior.h})")
        if not 0.0 < prior.pi < 1.0:
            raise DegenerateParameter(f"two-point prior needs 0 < pi < 1 (got {prior.pi})")
    elif isinstance(prior, Normal):
        if not (math.isfinite(prior.m) and math.isfinite(prior.gamma)):
            raise DegenerateParameter("normal parameters must be finite")
        if not prior.gamma > 0:
            raise DegenerateParameter(f"normal prior needs gamma > 0 (got {prior.gamma})")
    elif isinstance(prior, Discrete):
        p, w = prior.points, prior.weights
        if p.size == 0 or p.shape != w.shape:
            raise DegenerateParameter("points and weights must be non-empty and of equal length")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(w))):
            raise DegenerateParameter("points and weights must be finite")
        if np.any(w < 0):
            raise DegenerateParameter("weights must be non-negative")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise DegenerateParameter(f"weights must sum to 1 (sum={w.sum()!r})")
    else:
        raise UnsupportedKind(f"unknown prior type {type(prior).__name__}")


def _sign_masses(prior: Prior) -> tuple[float, float]:
    if isinstance(prior, Normal):
        return 1.0, 1.0
    u, w = atoms(prior)
    return float(w[u < 0].sum()), float(w[u > 0].sum())


def validate(prior: Prior) -> Prior:
    """Check every invariant of ``prior`` and return it unchanged.

    Raises
    ------
    DegenerateParameter
        Bad parameters (``gamma <= 0``, ``l >= h``, weights not a probability vector).
    SignMassViolation
        No mass strictly below zero or strictly above zero.  Selling at time 0 or at
        the horizon is then optimal and there is nothing to solve.
    """
    _check_parameters(prior)
    neg, pos = _sign_masses(prior)
    if neg <= 0.0:
        raise SignMassViolation("prior has no mass on (-inf, 0): selling at the horizon is optimal")
    if pos <= 0.0:
        raise SignMassViolation("prior has no mass on (0, inf): selling immediately is optimal")
    # Integrability of exp(a u^2) holds for finite supports and, for the
    # normal law, for any a < 1/(2 gamma^2); nothing else is representable.
    return prior


def raw_moment(prior: Prior, k: int) -> float:
    """``E[X**k]`` for ``k`` in 0..4."""
    if k not in (0, 1, 2, 3, 4):
        raise ValueError("only raw moments of order 0..4 are available")
    if isinstance(prior, Normal):
        m, g2 = prior.m, prior.gamma**2
        return (1.0, m, m * m + g2, m**3 + 3 * m * g2, m**4 + 6 * m * m * g2 + 3 * g2 * g2)[k]
    if isinstance(prior, TwoPoint):
        return (1.0 - prior.pi) * prior.l**k + prior.pi * prior.h**k
    u, w = atoms(prior)
    if k == 0:
        return float(w.sum())
    return float(np.dot(w, u**k))


def shift_prior(prior: Prior, r: float, *, check: bool = True) -> Prior:
    """Law of ``X - r``; used to fold a constant discount rate into the drift.

    With ``check`` the result must still put mass on both sides of zero,
    otherwise ``ShiftBreaksSignMass`` is raised.
    """
    if not math.isfinite(r):
        raise DegenerateParameter("shift must be finite")
    if isinstance(prior, TwoPoint):
        out: Prior = TwoPoint(prior.l - r, prior.h - r, prior.pi)
    elif isinstance(prior, Normal):
        out = Normal(prior.m - r, prior.gamma)
    elif isinstance(prior, Discrete):
        out = type(prior)(prior.points - r, prior.weights)
    else:
        raise UnsupportedKind(f"unknown prior type {type(prior).__name__}")
    if check:
        try:
            validate(out)
        except SignMassViolation as exc:
            raise ShiftBreaksSignMass(
                f"shifting by r={r} leaves a trivial problem: {exc}"
            ) from exc
    return out


def support_interval(prior: Prior) -> tuple[float, float]:
    """Endpoints of the smallest closed interval containing the support."""
    if isinstance(prior, Normal):
        return -math.inf, math.inf
    if isinstance(prior, TwoPoint):
        return prior.l, prior.h
    u, w = atoms(prior)
    u = u[w > 0]
    return float(u.min()), float(u.max())


def epsilon_extension(prior: Prior, epsilon: float, sigma: float) -> Prior:
    """Prior ``xi`` at time ``-epsilon`` whose time-0 posteriors reproduce those of ``prior``.

    Weights are tilted by ``exp(epsilon u^2 / (2 sigma^2))`` and renormalised.
    """
    if not isinstance(prior, Discrete):
        raise UnsupportedKind(
            f"epsilon extension needs a discrete or quadrature prior, got {prior.kind}"
        )
    if epsilon < 0 or sigma <= 0:
        raise DegenerateParameter("epsilon must be >= 0 and sigma > 0")
    u, w = prior.points, prior.weights
    with np.errstate(divide="ignore"):
        logw = np.log(w) + epsilon * u * u / (2.0 * sigma * sigma)
    logw -= logw.max()
    new = np.exp(logw)
    new /= new.sum()
    return type(prior)(u, new)


def mean(prior: Prior) -> float:
    return raw_moment(prior, 1)


def terminal_mgf(prior: Prior, T: float) -> float:
    """``E[exp(X T)]``."""
    if isinstance(prior, Normal):
        return math.exp(prior.m * T + 0.5 * (prior.gamma * T) ** 2)
    u, w = atoms(prior)
    return float(np.dot(w, np.exp(u * T)))


def prior_from_dict(data: dict[str, Any]) -> Prior:
    """Build a prior from its JSON form, e.g. ``{"kind": "normal", "m": -0.1, "gamma": 0.5}``."""
    try:
        kind = data["kind"]
        if kind == "normal":
            return Normal(float(data["m"]), float(data["gamma"]))
        if kind == "two_point":
            return TwoPoint(float(data["l"]), float(data["h"]), float(data["pi"]))
        if kind == "discrete":
            return Discrete(data["points"], data["weights"])
        if kind == "quadrature":
            return Quadrature(data.get("nodes", data.get("points")), data["weights"])
    except (KeyError, TypeError) as exc:
        raise PriorError(f"malformed prior description {data!r}: {exc}") from exc
    raise UnsupportedKind(f"unknown prior kind {kind!r}")


def prior_to_dict(prior: Prior) -> dict[str, Any]:
    if isinstance(prior, Normal):
        return {"kind": "normal", "m": prior.m, "gamma": prior.gamma}
    if isinstance(prior, TwoPoint):
        return {"kind": "two_point", "l": prior.l, "h": prior.h, "pi": prior.pi}
    if isinstance(prior, Quadrature):
        return {"kind": "quadrature", "nodes": prior.points.tolist(), "weights": prior.weights.tolist()}
    return {"kind": "discrete", "points": prior.points.tolist(), "weights": prior.weights.tolist()}
