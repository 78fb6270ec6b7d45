"""Compiled inner loops for the row-relaxation solver and the path simulator.

Everything here is numba-compiled and deliberately free of Python objects:
the callers in fd.py and mc.py translate specs into plain scalars and arrays.
Scalar codes: omega_kind 0 = constant 1, 1 = tanh, 2 = shifted tanh.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Row status codes returned by the relaxation kernel.
ROW_CONVERGED = 0
ROW_MAX_ITERS = 1

# Path status codes shared with the Monte Carlo driver.
PATH_RUNNING = 0
PATH_HIT = 1
PATH_EXPIRED = 2


@njit(cache=True, inline="always")
def _omega(kind, kappa, v):
    if kind == 0:
        return 1.0
    if kind == 1:
        return 0.5 * (1.0 + math.tanh(v / kappa))
    return 0.5 * (1.0 + math.tanh((v - 0.5) / kappa))


@njit(cache=True, nogil=True)
def relax_row(values, j, delta, c, R, eta, omega_kind, kappa,
              use_filter, filter_zero, is_gamma, f_j,
              w, tol, check_every, max_iters, snap):
    """Iterate row j of the nodal field to its fixed point in place.

    Sweeps i = 0..N with the damped point update, re-evaluating the
    upwind-selected nonlinearity and the high-order correction from the
    freshest iterate. Convergence is declared when the change accumulated
    over `check_every` sweeps stays below tol at every node (the snapshot
    comparison makes the effective per-sweep threshold stricter than tol).

    Rows 0..j-1 must already be final. Returns (sweeps, last_change, status).
    """
    N = values.shape[0] - 1
    h = 1.0 / N
    z = j * h
    beta = 2.0 * delta / (1.0 - delta)
    czr = 2.0 * delta * R * (beta * z + 1.0) * z
    eps = math.sqrt(h)

    for i in range(N + 1):
        snap[i] = values[i, j]

    it = 0
    change = 0.0
    while it < max_iters:
        for i in range(N + 1):
            if is_gamma and i == N:
                # data node: the payoff value is imposed exactly
                values[N, j] = f_j
                continue
            x = i * h
            q = 2.0 * delta * z + 1.0 - delta - x
            d = 0.5 * c * c * x * (1.0 - x) / (h * h)
            if q >= 0.0:
                A = d
                B = d + q / h
            else:
                A = d - q / h
                B = d
            vc = values[i, j]
            vb = values[i, j - 1] if j >= 1 else 0.0
            if omega_kind == 0:
                ob = 1.0
            else:
                ob = _omega(omega_kind, kappa, vc if vc >= vb else vb)
            C = czr * ob / h
            vm = values[i - 1, j] if i >= 1 else 0.0
            vp = values[i + 1, j] if i <= N - 1 else 0.0

            G = 0.0
            if use_filter:
                if 3 <= i <= N - 3:
                    if q >= 0.0:
                        d1x = (vp - vc) / h
                        d2x = (-11.0 / 6.0 * vc + 3.0 * values[i + 1, j]
                               - 1.5 * values[i + 2, j]
                               + (1.0 / 3.0) * values[i + 3, j]) / h
                    else:
                        d1x = (vc - vm) / h
                        d2x = (11.0 / 6.0 * vc - 3.0 * values[i - 1, j]
                               + 1.5 * values[i - 2, j]
                               - (1.0 / 3.0) * values[i - 3, j]) / h
                    y = q * (d2x - d1x) / eps
                    if filter_zero or y > 1.0 or y < -1.0:
                        y = 0.0
                    G += eps * y
                if j >= 3:
                    d1z = (vc - vb) / h
                    d2z = (11.0 / 6.0 * vc - 3.0 * values[i, j - 1]
                           + 1.5 * values[i, j - 2]
                           - (1.0 / 3.0) * values[i, j - 3]) / h
                    y = (-czr * ob) * (d2z - d1z) / eps
                    if filter_zero or y > 1.0 or y < -1.0:
                        y = 0.0
                    G += eps * y

            num = A * vm + B * vp + C * vb + G
            den = eta + A + B + C
            values[i, j] = w * vc + (1.0 - w) * num / den

        it += 1
        if it % check_every == 0:
            change = 0.0
            for i in range(N + 1):
                diff = abs(values[i, j] - snap[i])
                if diff > change:
                    change = diff
                snap[i] = values[i, j]
            if change < tol:
                return it, change, ROW_CONVERGED

    return it, change, ROW_MAX_ITERS


@njit(cache=True, nogil=True)
def solve_grid(values, delta, c, R, eta, omega_kind, kappa,
               use_filter, filter_zero, gamma_mask, f_vals,
               w, tol, check_every, max_iters):
    """Solve the full field row by row from j = 0 upward, in place.

    Each row couples only to the already-final row below it, so a single
    bottom-up cascade suffices. Stops at the first row that fails to
    converge. Returns (per-row sweep counts, per-row final changes, status,
    index of the failed row or -1).
    """
    N = values.shape[0] - 1
    iters = np.zeros(N + 1, np.int64)
    resid = np.zeros(N + 1, np.float64)
    snap = np.empty(N + 1, np.float64)
    for j in range(N + 1):
        it, change, status = relax_row(
            values, j, delta, c, R, eta, omega_kind, kappa,
            use_filter, filter_zero, gamma_mask[j], f_vals[j],
            w, tol, check_every, max_iters, snap,
        )
        iters[j] = it
        resid[j] = change
        if status != ROW_CONVERGED:
            return iters, resid, ROW_MAX_ITERS, j
    return iters, resid, ROW_CONVERGED, -1


@njit(cache=True, inline="always")
def _bilerp(vals, x, z):
    """Bilinear interpolation on the unit square, clamped to the grid."""
    N = vals.shape[0] - 1
    fx = x * N
    fz = z * N
    if fx < 0.0:
        fx = 0.0
    elif fx > N:
        fx = float(N)
    if fz < 0.0:
        fz = 0.0
    elif fz > N:
        fz = float(N)
    i0 = int(fx)
    j0 = int(fz)
    if i0 > N - 1:
        i0 = N - 1
    if j0 > N - 1:
        j0 = N - 1
    tx = fx - i0
    tz = fz - j0
    v00 = vals[i0, j0]
    v10 = vals[i0 + 1, j0]
    v01 = vals[i0, j0 + 1]
    v11 = vals[i0 + 1, j0 + 1]
    return (v00 * (1.0 - tx) + v10 * tx) * (1.0 - tz) \
        + (v01 * (1.0 - tx) + v11 * tx) * tz


@njit(cache=True, nogil=True)
def em_system_block(x, z, status, tau, z_at_tau, lower_touch, incs,
                    k0, block_steps, n_steps, dt, t_max,
                    delta, c, R, field_mode, omega_kind, kappa, field_vals):
    """Advance every running path by up to block_steps Euler steps.

    The hit test (x >= 1) runs before each step, so a path that starts on or
    beyond the upper boundary records tau = 0. Crossings that would only be
    visible at t = t_max are not counted as hits, keeping tau < t_max for
    every hit. A step landing at or below 0 is clamped to 0 and flagged
    (expected never under the parameter invariants). incs[p, s] is the
    N(0, dt) increment for path p at global step k0 + s.
    """
    n = x.shape[0]
    beta = 2.0 * delta / (1.0 - delta)
    for p in range(n):
        if status[p] != PATH_RUNNING:
            continue
        xp = x[p]
        zp = z[p]
        k = k0
        for s in range(block_steps):
            if k >= n_steps:
                status[p] = PATH_EXPIRED
                tau[p] = t_max
                z_at_tau[p] = zp
                break
            if xp >= 1.0:
                status[p] = PATH_HIT
                tau[p] = k * dt
                z_at_tau[p] = zp
                break
            if field_mode:
                ov = _omega(omega_kind, kappa, _bilerp(field_vals, xp, zp))
            else:
                ov = 1.0
            dx = 2.0 * delta * zp + 1.0 - delta - xp
            dz = -2.0 * delta * R * (beta * zp + 1.0) * zp * ov
            xn = xp + dx * dt + c * math.sqrt(max(0.0, xp * (1.0 - xp))) * incs[p, s]
            zn = zp + dz * dt
            if zn < 0.0:
                zn = 0.0
            elif zn > 1.0:
                zn = 1.0
            if xn <= 0.0:
                xn = 0.0
                lower_touch[p] = True
            xp = xn
            zp = zn
            k += 1
        x[p] = xp
        z[p] = zp


@njit(cache=True, nogil=True)
def em_jacobi_block(x, status, tau, lower_touch, incs,
                    k0, block_steps, n_steps, dt, t_max, b, c):
    """Advance running paths of the constant-source diffusion dX = (b - X)dt
    + c*sqrt(X(1-X))dB by up to block_steps Euler steps.

    Same stepping, hit, and clamping rules as em_system_block, so a path fed
    the same increments is directly comparable step by step.
    """
    n = x.shape[0]
    for p in range(n):
        if status[p] != PATH_RUNNING:
            continue
        xp = x[p]
        k = k0
        for s in range(block_steps):
            if k >= n_steps:
                status[p] = PATH_EXPIRED
                tau[p] = t_max
                break
            if xp >= 1.0:
                status[p] = PATH_HIT
                tau[p] = k * dt
                break
            xn = xp + (b - xp) * dt + c * math.sqrt(max(0.0, xp * (1.0 - xp))) * incs[p, s]
            if xn <= 0.0:
                xn = 0.0
                lower_touch[p] = True
            xp = xn
            k += 1
        x[p] = xp
