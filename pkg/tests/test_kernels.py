import numpy as np
import pytest

from driftstop import kernels
from driftstop.filtering import DispersionEvaluator, FilterModel
from driftstop.pde import default_grid
from driftstop.priors import Discrete, Normal


def _p_inputs(seed=0, n=500, k=60):
    g = np.random.default_rng(seed)
    drift = g.normal(0, 0.5, n)
    z = g.standard_normal((n, k))
    ystar = np.r_[np.linspace(-0.3, -0.01, k), np.inf]
    return drift, z, ystar, 1.0 / k, 0.3


def test_p_paths_parity():
    args = _p_inputs()
    np.testing.assert_allclose(kernels.p_paths_loop(*args), kernels.p_paths_numpy(*args), rtol=1e-12)


def test_p_paths_never_stopping_is_gbm():
    drift, z, _, dt, sigma = _p_inputs(n=10, k=5)
    out = kernels.p_paths_numpy(np.zeros(10), z, np.full(6, -np.inf), dt, sigma)
    expected = np.exp(sigma * np.sqrt(dt) * z.sum(axis=1) - 0.5 * sigma**2)
    np.testing.assert_allclose(out, expected, rtol=1e-12)


def _q_inputs(prior, k=80):
    m = FilterModel(prior, 0.3)
    g = default_grid(m, 1.0, n_t=2, n_x=100)
    t = np.linspace(0.0, 1.0, k + 1)
    tab = DispersionEvaluator(m).grid(t, g.x)
    z = np.random.default_rng(1).standard_normal((300, k))
    hk = np.linspace(-0.4, 0.0, k + 1)
    return 0.0, z, tab, float(g.x[0]), g.dx, hk, 1.0 / k, 0.3, float(g.x[0]), float(g.x[-1])


@pytest.mark.parametrize("name", ["q_paths", "ie_moments"])
def test_path_kernels_parity(name):
    args = list(_q_inputs(Discrete([-0.8, 0.1, 0.7], [0.3, 0.3, 0.4])))
    args[0] = 0.05
    if name == "q_paths":
        args[2] = np.ascontiguousarray(args[2][:-1])
        args[5] = args[5][:-1]
        a = kernels.q_paths_loop(*args)
        b = kernels.q_paths_numpy(*args)
        np.testing.assert_allclose(a, b, rtol=1e-10)
    else:
        args[0] = -0.3
        args[2] = np.ascontiguousarray(args[2][:-1])
        ta, la = kernels.ie_moments_loop(*args)
        tb, lb = kernels.ie_moments_numpy(*args)
        np.testing.assert_allclose(ta, tb, rtol=1e-9, atol=1e-12)
        assert la == pytest.approx(lb, rel=1e-10)


def test_env_flag_selects_numpy(monkeypatch):
    import importlib

    from driftstop import _accel

    monkeypatch.setenv("DRIFTSTOP_NO_NUMBA", "1")
    try:
        importlib.reload(_accel)
        importlib.reload(kernels)
        assert not _accel.USE_NUMBA
        assert kernels.theta_sweep is kernels.theta_sweep_numpy
    finally:
        monkeypatch.delenv("DRIFTSTOP_NO_NUMBA")
        importlib.reload(_accel)
        importlib.reload(kernels)
    assert kernels.theta_sweep is kernels.theta_sweep_loop


def test_normal_table_is_constant_in_x():
    tab = DispersionEvaluator(FilterModel(Normal(0, 0.5), 0.2)).grid(np.array([0.0, 1.0]), np.array([-1.0, 1.0]))
    np.testing.assert_allclose(tab[:, 0], tab[:, 1])
