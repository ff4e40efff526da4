import numpy as np
import pytest

from driftstop import kernels
from driftstop.errors import DomainTooNarrow, GridTooCoarse, OutOfGrid, SolverError, StabilityViolation
from driftstop.filtering import FilterModel, dispersion
from driftstop.pde import (
    Boundary,
    GridSpec,
    check_smooth_fit,
    common_grid,
    default_grid,
    euler_lattice_value,
    initial_value,
    operator_coefficients,
    psi_matrix,
    solve_value,
    value_at,
)
from driftstop.priors import Discrete, Normal, TwoPoint


def test_grid_validation():
    with pytest.raises(SolverError):
        GridSpec(T=1.0, n_t=1)
    with pytest.raises(SolverError):
        GridSpec(T=1.0, x_lo=0.1, x_hi=1.0)
    g = GridSpec(T=2.0, n_t=4, x_lo=-1, x_hi=1, n_x=4)
    assert g.dt == 0.5 and g.dx == 0.5
    np.testing.assert_allclose(g.x, [-1, -0.5, 0, 0.5, 1])


def test_default_grids():
    g = default_grid(FilterModel(Normal(-0.1, 0.5), 0.2))
    assert (g.x_lo, g.x_hi) == pytest.approx((-3.1, 2.9))
    g = default_grid(FilterModel(TwoPoint(-1, 1, 0.5), 0.2))
    assert (g.x_lo, g.x_hi) == pytest.approx((-1 + 2e-6, 1 - 2e-6))
    c = common_grid([FilterModel(Normal(0, gm), 0.2) for gm in (0.3, 0.8)])
    assert (c.x_lo, c.x_hi) == pytest.approx((-4.8, 4.8))


def test_grid_must_stay_in_support():
    m = FilterModel(TwoPoint(-1, 1, 0.5), 0.2)
    with pytest.raises(SolverError):
        solve_value(m, GridSpec(1.0, 100, -1.5, 1.0, 50))


def test_terminal_row_and_lower_bound(normal_solution):
    surface, boundary = normal_solution
    np.testing.assert_array_equal(surface.v[-1], 1.0)
    assert surface.v.min() == 1.0
    assert boundary.h[-1] == 0.0
    assert np.all(boundary.h <= 0)
    assert np.all(np.diff(boundary.h) >= -1e-9)


def test_value_regression(normal_model, normal_solution):
    # frozen from the default solve; the Monte Carlo and explicit-lattice tests check it independently
    surface, boundary = normal_solution
    assert initial_value(surface, normal_model) == pytest.approx(1.2280843366880152, abs=1e-10)
    assert boundary.h[0] == pytest.approx(-0.6067316077219517, abs=1e-10)


def test_value_at(normal_solution):
    surface, _ = normal_solution
    g = surface.grid
    assert value_at(surface, g.t[7], g.x[123]) == surface.v[7, 123]
    assert value_at(surface, g.T, 0.37) == 1.0
    with pytest.raises(OutOfGrid):
        value_at(surface, 0.5, g.x_hi + 0.1)
    with pytest.raises(OutOfGrid):
        value_at(surface, -0.1, 0.0)


def test_value_at_bilinear_on_affine_data():
    from driftstop.pde import ValueSurface

    g = GridSpec(1.0, 4, -1.0, 1.0, 4)
    v = 2.0 + 3.0 * g.t[:, None] - 0.5 * g.x[None, :]
    s = ValueSurface(g, v)
    t, x = 0.5 * (g.t[1] + g.t[2]), 0.5 * (g.x[2] + g.x[3])
    assert value_at(s, t, x) == pytest.approx(2.0 + 3.0 * t - 0.5 * x, abs=1e-14)


def test_stopping_region_is_flat(normal_solution):
    surface, boundary = normal_solution
    g = surface.grid
    for i in range(0, g.n_t, 97):
        below = g.x <= boundary.h[i] - g.dx
        np.testing.assert_array_equal(surface.v[i, below], 1.0)


def test_smooth_fit_defect_positive_and_small(normal_solution):
    surface, boundary = normal_solution
    d = check_smooth_fit(surface, boundary)
    assert 0 <= d < 0.1


def test_domain_too_narrow():
    m = FilterModel(Normal(0, 0.5), 0.2)
    with pytest.raises(DomainTooNarrow):
        solve_value(m, GridSpec(1.0, 200, -0.3, 3.0, 100))


def test_grid_too_coarse():
    m = FilterModel(Normal(0, 0.5), 0.2)
    with pytest.raises(GridTooCoarse, match="dt/dx"):
        solve_value(m, GridSpec(1.0, 2, -3.0, 10.0, 100), theta=0.5)


def test_auto_theta(normal_solution, two_point_solution):
    assert normal_solution[0].meta["theta"] == 0.5
    assert two_point_solution[0].meta["theta"] == 1.0


def test_operator_upwinds_small_dispersion():
    x = np.linspace(-1, 1, 5)
    psi = np.array([[0.0, 0.1, 2.0, 0.1, 0.0]])
    L, D, U = operator_coefficients(0.2, psi, x, 0.5)
    assert np.all(L >= 0) and np.all(U >= 0)
    # zero dispersion leaves only the reaction term
    assert D[0, 0] == x[0] and L[0, 0] == 0 and U[0, 0] == 0


def test_explicit_requires_stable_step():
    m = FilterModel(Normal(0, 0.5), 0.2)
    g = default_grid(m, 1.0, n_t=4000, n_x=400)
    with pytest.raises(StabilityViolation) as exc:
        euler_lattice_value(m, g, substeps=1)
    assert exc.value.required_dt == pytest.approx(g.dx**2 / 1.25**2)


def test_explicit_lattice_one_step():
    m = FilterModel(Normal(0, 0.5), 0.2)
    g = GridSpec(0.001, 2, -3.0, 3.0, 60)
    s = euler_lattice_value(m, g, substeps=None)
    np.testing.assert_array_equal(s.v[-1], 1.0)
    assert np.all(s.v[-2][g.x > 0.5] > 1.0)
    mid = (g.x > 0.5) & (g.x < 2.5)
    np.testing.assert_allclose(s.v[-2][mid], 1 + g.x[mid] * g.dt, rtol=1e-12)


def test_explicit_matches_crank_nicolson_on_coarse_grid():
    m = FilterModel(Normal(0, 0.5), 0.2)
    g = GridSpec(1.0, 1000, -3.0, 3.0, 120)
    cn, _ = solve_value(m, g)
    ex = euler_lattice_value(m, g, substeps=8)
    # the explicit reaction step is first order, so compare relative to v
    assert np.max(np.abs(cn.v - ex.v) / cn.v) < 2e-3


def test_gamma_ordering():
    models = [FilterModel(Normal(0, gm), 0.2) for gm in (0.3, 0.5, 0.8)]
    g = common_grid(models, 1.0, n_t=500, n_x=200)
    sols = [solve_value(m, g) for m in models]
    for (s1, b1), (s2, b2) in zip(sols, sols[1:]):
        assert np.all(s1.v <= s2.v + 1e-6)
        assert np.all(b2.h <= b1.h + 1e-12)


def test_two_point_value_decreases_in_sigma():
    vals = []
    for sigma in (0.3, 0.5, 0.8, 1.0):
        m = FilterModel(TwoPoint(-1, 1, 0.5), sigma)
        s, _ = solve_value(m, default_grid(m, 1.0, n_t=500, n_x=200))
        vals.append(initial_value(s, m))
    assert np.all(np.diff(vals) <= 0)


def test_two_point_comparison_bound():
    mu = FilterModel(Discrete([-1.0, -0.2, 0.3, 1.0], [0.2, 0.3, 0.3, 0.2]), 0.3)
    eta = FilterModel(TwoPoint(-1.0, 1.0, 0.5), 0.3)
    g = GridSpec(1.0, 400, -1 + 2e-6, 1 - 2e-6, 160)
    # psi_mu <= psi_eta on the grid, hence v_mu <= v_eta
    x = g.x[1:-1]
    assert np.all(dispersion(mu, 0.3, x) <= dispersion(eta, 0.3, x) + 1e-12)
    s_mu, b_mu = solve_value(mu, g)
    s_eta, b_eta = solve_value(eta, g)
    # the last column carries the zero-curvature truncation
    inner = g.x <= 0.95
    assert np.all(s_mu.v[:, inner] <= s_eta.v[:, inner] + 1e-6)
    assert np.all(b_eta.h <= b_mu.h + 1e-12)


def test_boundary_object():
    b = Boundary([0.0, 0.5, 1.0], [-0.4, -0.2, 0.0])
    assert b(0.25) == pytest.approx(-0.3)
    np.testing.assert_allclose(b.shifted(-0.1).h, [-0.5, -0.3, -0.1])
    with pytest.raises(ValueError):
        b.h[0] = 1.0
    with pytest.raises(SolverError):
        Boundary([0.0, 1.0], [0.0])


def test_psi_matrix_shape(normal_model):
    g = default_grid(normal_model, 1.0, n_t=10, n_x=20)
    p = psi_matrix(normal_model, g)
    assert p.shape == (11, 21)
    np.testing.assert_allclose(p[0], 1.25)


@pytest.mark.parametrize("theta", [0.5, 1.0])
def test_sweep_kernels_agree(theta):
    m = FilterModel(TwoPoint(-0.5, 0.8, 0.4), 0.3)
    g = default_grid(m, 1.0, n_t=300, n_x=120)
    L, D, U = operator_coefficients(m.sigma, psi_matrix(m, g), g.x, g.dx)
    v1, k1, f1 = kernels.theta_sweep_loop(L, D, U, g.dt, theta)
    v2, k2, f2 = kernels.theta_sweep_numpy(L, D, U, g.dt, theta)
    np.testing.assert_allclose(v1, v2, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(k1, k2)
    np.testing.assert_allclose(f1, f2, atol=1e-9)
