import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from driftstop.errors import (
    DegenerateParameter,
    ShiftBreaksSignMass,
    SignMassViolation,
    UnsupportedKind,
)
from driftstop.priors import (
    Discrete,
    Normal,
    Quadrature,
    TwoPoint,
    epsilon_extension,
    prior_from_dict,
    prior_to_dict,
    quadrature_prior,
    raw_moment,
    shift_prior,
    support_interval,
    terminal_mgf,
    validate,
)

THIRD = [1 / 3, 1 / 3, 1 / 3]


def test_validate_accepts_symmetric_priors():
    assert validate(TwoPoint(-1, 1, 0.5)) == TwoPoint(-1, 1, 0.5)
    validate(Discrete([-1, 0, 1], THIRD))
    validate(Normal(-0.1, 0.5))


@pytest.mark.parametrize(
    "prior",
    [TwoPoint(0.1, 0.5, 0.5), TwoPoint(-0.5, -0.1, 0.3), Discrete([0.0, 1.0], [0.5, 0.5])],
)
def test_validate_rejects_one_sided_priors(prior):
    with pytest.raises(SignMassViolation):
        validate(prior)


@pytest.mark.parametrize(
    "prior",
    [
        Normal(0.0, 0.0),
        Normal(0.0, -1.0),
        TwoPoint(1.0, -1.0, 0.5),
        TwoPoint(-1.0, 1.0, 1.0),
        Discrete([-1, 1], [0.6, 0.6]),
        Discrete([-1, 1], [1.5, -0.5]),
        Discrete([-1, 1, 2], [0.5, 0.5]),
    ],
)
def test_validate_rejects_degenerate_parameters(prior):
    with pytest.raises(DegenerateParameter):
        validate(prior)


def test_raw_moment_examples():
    assert raw_moment(TwoPoint(-1, 1, 0.5), 2) == 1.0
    assert raw_moment(Normal(0, 0.5), 4) == pytest.approx(0.1875, abs=1e-15)
    assert raw_moment(Discrete([-1, 0, 1], THIRD), 3) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        raw_moment(Normal(0, 1), 5)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_normal_moments_match_quadrature(k):
    m, g = -0.1, 0.5
    dens = lambda u: math.exp(-0.5 * ((u - m) / g) ** 2) / (g * math.sqrt(2 * math.pi))
    expected = quad(lambda u: u**k * dens(u), -np.inf, np.inf, epsabs=1e-13)[0]
    assert raw_moment(Normal(m, g), k) == pytest.approx(expected, abs=1e-12)


def test_shift_examples():
    assert shift_prior(Normal(0.1, 0.5), 0.1) == Normal(0.0, 0.5)
    assert shift_prior(TwoPoint(-1, 1, 0.5), 0.0) == TwoPoint(-1, 1, 0.5)
    with pytest.raises(ShiftBreaksSignMass):
        shift_prior(TwoPoint(-1, 1, 0.5), 2.0)
    # transient one-sided priors are allowed when unchecked
    p = shift_prior(TwoPoint(-1, 1, 0.5), 2.0, check=False)
    assert (p.l, p.h) == (-3.0, -1.0)


def test_support_interval():
    assert support_interval(TwoPoint(-1, 1, 0.5)) == (-1, 1)
    assert support_interval(Normal(0.3, 2.0)) == (-math.inf, math.inf)
    assert support_interval(Discrete([-0.3, 0.2], [0.5, 0.5])) == (-0.3, 0.2)


def test_epsilon_extension_examples():
    sym = epsilon_extension(Discrete([-1, 1], [0.5, 0.5]), 0.3, 0.7)
    np.testing.assert_allclose(sym.weights, [0.5, 0.5], atol=1e-15)
    tilted = epsilon_extension(Discrete([0, 1], [0.5, 0.5]), 0.08, 0.2)
    np.testing.assert_allclose(tilted.weights, [1 / (1 + math.e), math.e / (1 + math.e)], atol=1e-12)
    np.testing.assert_allclose(tilted.weights, [0.2689, 0.7311], atol=1e-4)
    same = epsilon_extension(Discrete([-1, 0, 2], [0.2, 0.5, 0.3]), 0.0, 0.2)
    np.testing.assert_allclose(same.weights, [0.2, 0.5, 0.3], atol=1e-15)
    with pytest.raises(UnsupportedKind):
        epsilon_extension(Normal(0, 1), 0.1, 0.2)


def test_epsilon_extension_reproduces_time_zero_posterior():
    from driftstop.filtering import FilterModel, posterior_mean

    prior = Discrete([-0.8, -0.1, 0.4, 1.2], [0.1, 0.4, 0.3, 0.2])
    eps, sigma = 0.25, 0.3
    xi = epsilon_extension(prior, eps, sigma)
    # posterior of xi after eps time units at level y equals the posterior of prior at (0, y)
    for y in (-0.4, 0.0, 0.7):
        a = posterior_mean(FilterModel(prior, sigma), 0.0, y)
        b = posterior_mean(FilterModel(xi, sigma), eps, y)
        assert a == pytest.approx(b, abs=1e-12)


def test_quadrature_prior_normalises():
    q = quadrature_prior(lambda u: np.exp(-u * u), -2.0, 2.0, 101)
    assert isinstance(q, Quadrature)
    assert raw_moment(q, 0) == pytest.approx(1.0, abs=1e-12)
    assert raw_moment(q, 1) == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_array_equal(q.nodes, q.points)


def test_terminal_mgf():
    assert terminal_mgf(Normal(-0.1, 0.5), 1.0) == pytest.approx(math.exp(0.025), rel=1e-15)
    assert terminal_mgf(TwoPoint(-1, 1, 0.5), 1.0) == pytest.approx(math.cosh(1.0), rel=1e-15)


@pytest.mark.parametrize(
    "prior",
    [Normal(-0.1, 0.5), TwoPoint(-1, 1, 0.3), Discrete([-1, 0, 2], [0.2, 0.5, 0.3]), Quadrature([-1, 0, 1], [1, 2, 1])],
)
def test_json_round_trip(prior):
    assert prior_from_dict(prior_to_dict(prior)) == prior


def test_discrete_is_immutable():
    p = Discrete([-1, 1], [0.5, 0.5])
    with pytest.raises(ValueError):
        p.points[0] = 3.0


# ---- properties ------------------------------------------------------------


@st.composite
def discrete_priors(draw, min_atoms=2, max_atoms=8):
    n = draw(st.integers(min_atoms, max_atoms))
    neg = draw(st.lists(st.floats(-3, -0.01), min_size=1, max_size=n - 1))
    pos = draw(st.lists(st.floats(0.01, 3), min_size=n - len(neg), max_size=n - len(neg)))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n)))
    return Discrete(neg + pos, w / w.sum())


@given(discrete_priors())
def test_zeroth_moment_is_one(p):
    assert raw_moment(p, 0) == pytest.approx(1.0, abs=1e-12)


@given(discrete_priors(), st.floats(-0.009, 0.009))
def test_shift_round_trip(p, r):
    back = shift_prior(shift_prior(p, r), -r)
    np.testing.assert_allclose(back.points, p.points, atol=1e-12)
    np.testing.assert_array_equal(back.weights, p.weights)


@given(st.floats(-2, 2), st.floats(0.01, 2), st.floats(-1, 1))
def test_normal_shift_round_trip(m, g, r):
    back = shift_prior(shift_prior(Normal(m, g), r), -r)
    assert back.m == pytest.approx(m, abs=1e-12) and back.gamma == g


@given(discrete_priors())
def test_jensen(p):
    gap = raw_moment(p, 2) - raw_moment(p, 1) ** 2
    assert gap > 0


@settings(max_examples=50)
@given(discrete_priors(), st.floats(0.0, 2.0), st.floats(0.05, 1.0))
def test_epsilon_extension_keeps_nodes(p, eps, sigma):
    xi = epsilon_extension(p, eps, sigma)
    np.testing.assert_array_equal(xi.points, p.points)
    assert np.all(xi.weights >= 0)
    assert xi.weights.sum() == pytest.approx(1.0, abs=1e-12)
