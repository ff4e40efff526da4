"""Inner loops: the backward theta-scheme sweep and the Monte Carlo path loops.

Each kernel has a ``*_loop`` form (explicit loops, compiled by numba) and a
``*_numpy`` form (vectorised).  The public names pick one of the two according
to ``driftstop._accel.USE_NUMBA``; both are importable for benchmarking and
cross-checking.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_banded

from ._accel import njit, pick

# ---------------------------------------------------------------------------
# backward theta-scheme with projection onto v >= 1
# ---------------------------------------------------------------------------
#
# Operator rows: (A v)_j = L_j v_{j-1} + D_j v_j + U_j v_{j+1}, one row of
# coefficients per time node.  Node 0 carries v = 1; node N is eliminated with
# v_N = 2 v_{N-1} - v_{N-2} (zero curvature).
#
# Besides the projected surface the sweep returns, per row, the last node k of
# the block {continuation value <= 1} that starts at node 1, and the fraction
# in [0, 1] at which the continuation value crosses 1 on [x_k, x_{k+1}]
# (linear interpolation).  k = 0 means node 1 already continues; k = -1 means
# no node continues.


def _theta_sweep_loop(L, D, U, dt, theta):
    n_t1, n1 = L.shape
    N = n1 - 1
    m = N - 1
    v = np.empty((n_t1, n1))
    for j in range(n1):
        v[n_t1 - 1, j] = 1.0
    kstop = np.full(n_t1, -1, dtype=np.int64)
    frac = np.zeros(n_t1)
    a = np.empty(m)
    b = np.empty(m)
    c = np.empty(m)
    r = np.empty(m)
    cp = np.empty(m)
    dp = np.empty(m)
    for i in range(n_t1 - 2, -1, -1):
        old = v[i + 1]
        for k in range(m):
            j = k + 1
            r[k] = old[j] + (1.0 - theta) * dt * (
                L[i + 1, j] * old[j - 1] + D[i + 1, j] * old[j] + U[i + 1, j] * old[j + 1]
            )
            a[k] = -theta * dt * L[i, j]
            b[k] = 1.0 - theta * dt * D[i, j]
            c[k] = -theta * dt * U[i, j]
        r[0] -= a[0] * 1.0
        a[0] = 0.0
        b[m - 1] += 2.0 * c[m - 1]
        a[m - 1] -= c[m - 1]
        c[m - 1] = 0.0
        # Thomas algorithm
        cp[0] = c[0] / b[0]
        dp[0] = r[0] / b[0]
        for k in range(1, m):
            den = b[k] - a[k] * cp[k - 1]
            cp[k] = c[k] / den
            dp[k] = (r[k] - a[k] * dp[k - 1]) / den
        row = v[i]
        row[m] = dp[m - 1]
        for k in range(m - 2, -1, -1):
            row[k + 1] = dp[k] - cp[k] * row[k + 2]
        row[0] = 1.0
        row[N] = 2.0 * row[N - 1] - row[N - 2]
        k = 0
        while k < N and row[k + 1] <= 1.0:
            k += 1
        if k < N:
            kstop[i] = k
            if k > 0:
                frac[i] = (1.0 - row[k]) / (row[k + 1] - row[k])
        for j in range(1, N + 1):
            if row[j] < 1.0:
                row[j] = 1.0
    return v, kstop, frac


def _theta_sweep_numpy(L, D, U, dt, theta):
    n_t1, n1 = L.shape
    N = n1 - 1
    v = np.empty((n_t1, n1))
    v[-1] = 1.0
    kstop = np.full(n_t1, -1, dtype=np.int64)
    frac = np.zeros(n_t1)
    ab = np.zeros((3, N - 1))
    for i in range(n_t1 - 2, -1, -1):
        old = v[i + 1]
        r = old[1:N] + (1.0 - theta) * dt * (
            L[i + 1, 1:N] * old[:N - 1] + D[i + 1, 1:N] * old[1:N] + U[i + 1, 1:N] * old[2:]
        )
        a = -theta * dt * L[i, 1:N]
        b = 1.0 - theta * dt * D[i, 1:N]
        c = -theta * dt * U[i, 1:N]
        r[0] -= a[0]
        b[-1] += 2.0 * c[-1]
        a[-1] -= c[-1]
        ab[0, 1:] = c[:-1]
        ab[1] = b
        ab[2, :-1] = a[1:]
        row = v[i]
        row[1:N] = solve_banded((1, 1), ab, r, check_finite=False)
        row[0] = 1.0
        row[N] = 2.0 * row[N - 1] - row[N - 2]
        cont = np.flatnonzero(row[1:] > 1.0)
        if cont.size:
            k = int(cont[0])
            kstop[i] = k
            if k > 0:
                frac[i] = (1.0 - row[k]) / (row[k + 1] - row[k])
        np.maximum(row, 1.0, out=row)
    return v, kstop, frac


theta_sweep_loop = njit(_theta_sweep_loop)
theta_sweep = pick(theta_sweep_loop, _theta_sweep_numpy)
theta_sweep_numpy = _theta_sweep_numpy


# ---------------------------------------------------------------------------
# paths under the physical measure
# ---------------------------------------------------------------------------
#
# Stopping rule in observation space: stop at the first grid index k with
# Y_k <= ystar[k].  Because f(t, .) is strictly increasing this is the same as
# the posterior mean falling to the boundary.  ystar[-1] = +inf.


def _p_paths_loop(drift, normals, ystar, dt, sigma):
    n_paths, n_steps = normals.shape
    out = np.empty(n_paths)
    sq = sigma * math.sqrt(dt)
    half = 0.5 * sigma * sigma
    for p in range(n_paths):
        y = 0.0
        k = 0
        while k < n_steps and y > ystar[k]:
            y += drift[p] * dt + sq * normals[p, k]
            k += 1
        out[p] = math.exp(y - half * k * dt)
    return out


def _p_paths_numpy(drift, normals, ystar, dt, sigma):
    n_paths, n_steps = normals.shape
    incr = drift[:, None] * dt + sigma * math.sqrt(dt) * normals
    y = np.zeros((n_paths, n_steps + 1))
    np.cumsum(incr, axis=1, out=y[:, 1:])
    stop = y <= ystar[None, :]
    stop[:, -1] = True
    k = stop.argmax(axis=1)
    return np.exp(y[np.arange(n_paths), k] - 0.5 * sigma * sigma * k * dt)


p_paths_loop = njit(_p_paths_loop)
p_paths = pick(p_paths_loop, _p_paths_numpy)
p_paths_numpy = _p_paths_numpy


# ---------------------------------------------------------------------------
# Euler paths of the posterior mean under Q
# ---------------------------------------------------------------------------
#
# dX = sigma psi dt + psi dZ, psi read from a table psi_tab[k, :] on the
# uniform x-grid xg0 + dxg * j; values are clipped to [lo, hi].


def _interp_row(row, xg0, dxg, x):
    n = row.shape[0]
    if n == 1:
        return row[0]
    s = (x - xg0) / dxg
    if s <= 0.0:
        return row[0]
    if s >= n - 1:
        return row[n - 1]
    j = int(s)
    w = s - j
    return row[j] * (1.0 - w) + row[j + 1] * w


_interp_row_jit = njit(_interp_row)


def _q_paths_loop(x0, normals, psi_tab, xg0, dxg, hk, dt, sigma, lo, hi):
    n_paths, n_steps = normals.shape
    out = np.empty(n_paths)
    sq = math.sqrt(dt)
    for p in range(n_paths):
        x = x0
        acc = 0.0
        k = 0
        while k < n_steps and x > hk[k]:
            psi = _interp_row_jit(psi_tab[k], xg0, dxg, x)
            xn = x + sigma * psi * dt + psi * sq * normals[p, k]
            if xn < lo:
                xn = lo
            elif xn > hi:
                xn = hi
            acc += 0.5 * (x + xn) * dt
            x = xn
            k += 1
        out[p] = math.exp(acc)
    return out


def _interp_rows_numpy(row, xg0, dxg, x):
    if row.shape[0] == 1:
        return np.full(x.shape, row[0])
    return np.interp(x, xg0 + dxg * np.arange(row.shape[0]), row)


def _q_paths_numpy(x0, normals, psi_tab, xg0, dxg, hk, dt, sigma, lo, hi):
    n_paths, n_steps = normals.shape
    x = np.full(n_paths, float(x0))
    acc = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    sq = math.sqrt(dt)
    for k in range(n_steps):
        alive &= x > hk[k]
        if not alive.any():
            break
        psi = _interp_rows_numpy(psi_tab[k], xg0, dxg, x)
        xn = np.clip(x + sigma * psi * dt + psi * sq * normals[:, k], lo, hi)
        acc = np.where(alive, acc + 0.5 * (x + xn) * dt, acc)
        x = np.where(alive, xn, x)
    return np.exp(acc)


q_paths_loop = njit(_q_paths_loop)
q_paths = pick(q_paths_loop, _q_paths_numpy)
q_paths_numpy = _q_paths_numpy


# ---------------------------------------------------------------------------
# integral-equation moments by simulation (antithetic pairs)
# ---------------------------------------------------------------------------
#
# From x0 at grid index 0 (of the sub-grid handed in), accumulates per step
#   term[k] = sum over paths of exp(I_k) X_k 1{X_k <= hk[k]}
# and lhs = sum of exp(I_n).  Each normal row drives a path and its mirror.


def _ie_moments_loop(x0, normals, psi_tab, xg0, dxg, hk, dt, sigma, lo, hi):
    n_paths, n_steps = normals.shape
    term = np.zeros(n_steps + 1)
    lhs = 0.0
    sq = math.sqrt(dt)
    for p in range(n_paths):
        for sgn in (1.0, -1.0):
            x = x0
            acc = 0.0
            if x <= hk[0]:
                term[0] += x
            for k in range(n_steps):
                psi = _interp_row_jit(psi_tab[k], xg0, dxg, x)
                xn = x + sigma * psi * dt + sgn * psi * sq * normals[p, k]
                if xn < lo:
                    xn = lo
                elif xn > hi:
                    xn = hi
                acc += 0.5 * (x + xn) * dt
                x = xn
                if x <= hk[k + 1]:
                    term[k + 1] += math.exp(acc) * x
            lhs += math.exp(acc)
    return term, lhs


def _ie_moments_numpy(x0, normals, psi_tab, xg0, dxg, hk, dt, sigma, lo, hi):
    n_paths, n_steps = normals.shape
    z = np.concatenate([normals, -normals])
    x = np.full(2 * n_paths, float(x0))
    acc = np.zeros(2 * n_paths)
    term = np.zeros(n_steps + 1)
    term[0] = 2 * n_paths * x0 if x0 <= hk[0] else 0.0
    sq = math.sqrt(dt)
    for k in range(n_steps):
        psi = _interp_rows_numpy(psi_tab[k], xg0, dxg, x)
        xn = np.clip(x + sigma * psi * dt + psi * sq * z[:, k], lo, hi)
        acc += 0.5 * (x + xn) * dt
        x = xn
        term[k + 1] = np.sum(np.where(x <= hk[k + 1], np.exp(acc) * x, 0.0))
    return term, float(np.exp(acc).sum())


ie_moments_loop = njit(_ie_moments_loop)
ie_moments = pick(ie_moments_loop, _ie_moments_numpy)
ie_moments_numpy = _ie_moments_numpy
