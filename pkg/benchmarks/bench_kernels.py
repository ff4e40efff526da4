"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 3]

The numba variants are warmed up once so compile time is not counted.
"""
import argparse
import time

import numpy as np

from driftstop import kernels
from driftstop.filtering import DispersionEvaluator, FilterModel
from driftstop.pde import default_grid, operator_coefficients, psi_matrix
from driftstop.priors import Discrete, Normal


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return min(times)


def cases():
    m = FilterModel(Normal(0.0, 0.5), 0.2)
    g = default_grid(m, 1.0)
    L, D, U = operator_coefficients(m.sigma, psi_matrix(m, g), g.x, g.dx)
    yield "theta_sweep 2000x400", kernels.theta_sweep_loop, kernels.theta_sweep_numpy, (L, D, U, g.dt, 0.5)

    r = np.random.default_rng(0)
    n, k = 20_000, 1000
    drift = r.normal(0.0, 0.5, n)
    z = r.standard_normal((n, k))
    ystar = np.r_[np.linspace(-0.3, -0.01, k), np.inf]
    yield f"p_paths {n}x{k}", kernels.p_paths_loop, kernels.p_paths_numpy, (drift, z, ystar, 1.0 / k, 0.2)

    dm = FilterModel(Discrete([-0.8, 0.1, 0.7], [0.3, 0.3, 0.4]), 0.3)
    dg = default_grid(dm, 1.0, n_t=2, n_x=400)
    tab = DispersionEvaluator(dm).grid(np.linspace(0.0, 1.0, k + 1)[:-1], dg.x)
    hk = np.linspace(-0.4, 0.0, k)
    args = (0.05, z, tab, float(dg.x[0]), dg.dx, hk, 1.0 / k, 0.3, float(dg.x[0]), float(dg.x[-1]))
    yield f"q_paths {n}x{k}", kernels.q_paths_loop, kernels.q_paths_numpy, args


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':<26}{'numba s':>10}{'numpy s':>10}{'speedup':>10}")
    for name, fast, slow, a in cases():
        fast(*a)
        tf = _best(fast, a, args.repeat)
        ts = _best(slow, a, args.repeat)
        print(f"{name:<26}{tf:>10.4f}{ts:>10.4f}{ts / tf:>10.1f}")


if __name__ == "__main__":
    main()
