import math

import numpy as np
import pytest

from driftstop import rng
from driftstop.errors import ConfigError
from driftstop.filtering import FilterModel, posterior_mean
from driftstop.pde import Boundary, initial_value
from driftstop.priors import Discrete, Normal, TwoPoint
from driftstop.simulate import (
    BoundaryRule,
    Immediate,
    SimConfig,
    Terminal,
    ZeroOrT,
    improvement,
    naive_value,
    rule_set,
    simulate_value,
    stopping_levels,
)


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(n_paths=0)
    with pytest.raises(ConfigError):
        SimConfig(measure="R")
    with pytest.raises(ConfigError):
        SimConfig(seed=-1)


@pytest.mark.parametrize("measure", ["P", "Q"])
def test_immediate_is_exactly_one(measure):
    est = simulate_value(FilterModel(Normal(0, 0.5), 0.2), 1.0, Immediate(), SimConfig(1000, 10, measure=measure))
    assert est.mean == 1.0 and est.stderr == 0.0


@pytest.mark.parametrize(
    "prior, expected",
    [(Normal(0.0, 0.5), math.exp(0.125)), (TwoPoint(-1.0, 1.0, 0.5), math.cosh(1.0))],
)
def test_terminal_matches_mgf(prior, expected):
    est = simulate_value(FilterModel(prior, 0.2), 1.0, Terminal(), SimConfig(100_000, 1, seed=5))
    assert abs(est.mean - expected) < 4 * est.stderr


def test_terminal_under_q():
    m = FilterModel(Normal(0.0, 0.5), 0.2)
    est = simulate_value(m, 1.0, Terminal(), SimConfig(40_000, 200, seed=2, measure="Q"))
    assert abs(est.mean - math.exp(0.125)) < 4 * est.stderr + 2e-3


def test_naive_values():
    assert naive_value(FilterModel(Normal(-0.1, 0.5), 0.3), 1.0) == pytest.approx(1.0253151205244289, abs=1e-12)
    assert naive_value(FilterModel(TwoPoint(-1, 1, 0.5), 0.3), 1.0) == pytest.approx(1.5430806348152437, abs=1e-12)
    assert naive_value(FilterModel(Normal(-0.5, 0.1), 0.3), 1.0) == 1.0


def test_zero_or_t_picks_the_better_end():
    cfg = SimConfig(20_000, 1, seed=4)
    bad = FilterModel(Normal(-0.5, 0.1), 0.3)
    assert simulate_value(bad, 1.0, ZeroOrT(), cfg).mean == 1.0
    good = FilterModel(Normal(-0.1, 0.5), 0.3)
    assert simulate_value(good, 1.0, ZeroOrT(), cfg) == simulate_value(good, 1.0, Terminal(), cfg)


def test_stopping_levels_invert_the_filter():
    m = FilterModel(TwoPoint(-1.0, 1.0, 0.5), 0.3)
    b = Boundary([0.0, 0.5, 1.0], [-0.6, -0.3, 0.0])
    t = np.linspace(0.0, 1.0, 11)
    y = stopping_levels(m, b, t)
    assert y[-1] == np.inf
    np.testing.assert_allclose(posterior_mean(m, t[:-1], y[:-1]), b(t[:-1]), atol=1e-10)
    deep = stopping_levels(m, Boundary([0.0, 1.0], [-2.0, -2.0]), t)
    assert np.all(deep[:-1] == -np.inf)


def test_boundary_at_prior_mean_sells_at_once():
    m = FilterModel(Normal(0.0, 0.5), 0.2)
    b = Boundary([0.0, 1.0], [0.0, 0.0])
    assert simulate_value(m, 1.0, BoundaryRule(b), SimConfig(5000, 50)).mean == 1.0


def test_reproducible_across_workers():
    m = FilterModel(Discrete([-0.5, 0.2, 0.6], [0.3, 0.4, 0.3]), 0.3)
    b = Boundary([0.0, 1.0], [-0.2, 0.0])
    cfg = SimConfig(3 * rng.BLOCK + 17, 100, seed=11)
    a = simulate_value(m, 1.0, BoundaryRule(b), cfg, workers=1)
    c = simulate_value(m, 1.0, BoundaryRule(b), cfg, workers=4)
    assert a == c
    assert simulate_value(m, 1.0, BoundaryRule(b), SimConfig(cfg.n_paths, 100, seed=12)) != a


def test_block_generators_are_distinct():
    x = rng.block_generator(0, rng.NORMALS, 0).standard_normal(4)
    y = rng.block_generator(0, rng.NORMALS, 1).standard_normal(4)
    z = rng.block_generator(0, rng.DRIFT, 0).standard_normal(4)
    assert not np.allclose(x, y) and not np.allclose(x, z)
    assert [b for b, _, _ in rng.blocks(2 * rng.BLOCK + 1)] == [0, 1, 2]


def test_boundary_rule_p_and_q_agree(normal_model, normal_solution):
    surface, boundary = normal_solution
    v = initial_value(surface, normal_model)
    p = simulate_value(normal_model, 1.0, BoundaryRule(boundary), SimConfig(40_000, 500, seed=7))
    q = simulate_value(normal_model, 1.0, BoundaryRule(boundary), SimConfig(40_000, 500, seed=7, measure="Q"))
    assert abs(p.mean - q.mean) < 4 * math.hypot(p.stderr, q.stderr)
    # a discretely monitored rule cannot beat the optimal value by more than noise
    assert p.mean < v + 4 * p.stderr


def test_improvement(normal_solution):
    m = FilterModel(Normal(-0.1, 0.5), 0.2)
    base = naive_value(m, 1.0)
    assert improvement(m, 1.0, normal_solution[1], value=base * 1.1) == pytest.approx(0.1)


def test_rule_set_names():
    assert [r.name for r in rule_set(None)] == ["immediate", "terminal", "zero_or_t"]
    assert rule_set(Boundary([0, 1], [0, 0]))[-1].name == "boundary"
