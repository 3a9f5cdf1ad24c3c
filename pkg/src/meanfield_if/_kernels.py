"""Compiled inner loops for the Fokker-Planck solver.

One step of the scheme, for nodes y_0 = y_min < ... < y_M = 1 with p_0 = p_M = 0:

1. diffusion (theta-scheme) and upwind transport by the drift b in flux form;
2. a rigid shift of the profile to the right by s = alpha * (firing increment),
   integer cells exactly plus a fractional first-order upwind remainder, with
   everything pushed past y = 1 counted as fired;
3. optional re-injection of the fired mass at the reset node.

Mass leaving through y = 1 and y = y_min is accounted exactly per step.
"""

import numpy as np
from numba import njit

PRESCRIBED, LAGGED, SWEEPS, CASCADE = 0, 1, 2, 3


@njit(cache=True)
def _top_mass(q, M, dy, s):
    """Mass pushed past y = 1 by a right shift of size s (piecewise linear in s)."""
    if s <= 0.0:
        return 0.0
    c = s / dy
    m = int(c)
    f = c - m
    tot = 0.0
    i = 0
    while i < m and i < M - 1:
        tot += q[M - 1 - i]
        i += 1
    if m < M - 1:
        tot += f * q[M - 1 - m]
    return tot * dy


@njit(cache=True)
def _cascade_root(q, M, dy, alpha, D):
    """Smallest x >= D with x = D + X(alpha x), X = _top_mass, by walking the linear pieces."""
    if alpha <= 0.0 or D <= 0.0:
        return D
    m = int(alpha * D / dy)
    C = 0.0  # mass of the top m nodes
    i = 0
    while i < m and i < M - 1:
        C += q[M - 1 - i] * dy
        i += 1
    while m < M - 1:
        qm = q[M - 1 - m]
        x_end = (m + 1) * dy / alpha
        C_next = C + qm * dy
        if D + C_next - x_end <= 0.0:
            slope = alpha * qm
            if slope < 1.0:
                x = (D + C - m * dy * qm) / (1.0 - slope)
            else:
                x = x_end
            lo = m * dy / alpha
            if x < lo:
                x = lo
            if x < D:
                x = D
            return x
        C = C_next
        m += 1
    return D + C


@njit(cache=True)
def _apply_shift(q, out, M, dy, s):
    """out <- q shifted right by s; returns the mass that crossed y = 1."""
    exited = _top_mass(q, M, dy, s)
    c = s / dy
    m = int(c)
    f = c - m
    for j in range(M + 1):
        out[j] = 0.0
    for j in range(1, M):
        src = j - m
        v = 0.0
        if src >= 1:
            v += (1.0 - f) * q[src]
        if src - 1 >= 1:
            v += f * q[src - 1]
        out[j] = v
    return exited


@njit(cache=True)
def _thomas_const(rhs, n, a, b, cp, dp, x):
    """Solve the constant tridiagonal system (a, b, a) x = rhs of size n."""
    cp[0] = a / b
    dp[0] = rhs[0] / b
    for i in range(1, n):
        den = b - a * cp[i - 1]
        cp[i] = a / den
        dp[i] = (rhs[i] - a * dp[i - 1]) / den
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]


@njit(cache=True)
def evolve(p, dy, dt, nsteps, theta, bface, j_reset, reinject, coupling, alpha, shifts,
           max_sweeps, step_tol, flux_order, snap_steps, snaps, exits, leaks, flux, shift_out):
    """Advance ``p`` in place over ``nsteps`` steps.

    Outputs (preallocated): exits[k], leaks[k] mass through y = 1 and y_min during
    step k; flux[k] stencil firing rate at t_k (k = 0..nsteps); shift_out[k] the
    shift applied in step k; snaps[i] the profile at step snap_steps[i].
    """
    M = p.shape[0] - 1
    r = 0.5 * dt / (dy * dy)
    lam = dt / dy
    q = np.empty(M + 1)
    tmp = np.empty(M + 1)
    n_int = M - 1
    rhs = np.empty(n_int)
    cp = np.empty(n_int)
    dpv = np.empty(n_int)
    sol = np.empty(n_int)
    fl = np.empty(M)
    snap_i = 0
    while snap_i < snap_steps.shape[0] and snap_steps[snap_i] == 0:
        snaps[snap_i, :] = p
        snap_i += 1
    prev_exit = 0.0
    for k in range(nsteps):
        # stencil firing rate at t_k
        if flux_order == 2:
            g = (4.0 * p[M - 1] - p[M - 2]) / (4.0 * dy)
        else:
            g = 0.5 * p[M - 1] / dy
        flux[k] = g if g > 0.0 else 0.0
        # transport by b in flux form, faces j+1/2 for j = 0..M-1
        for j in range(M):
            bj = bface[j]
            if bj > 0.0:
                fl[j] = bj * p[j]
            else:
                fl[j] = bj * p[j + 1]
        exit_b = dt * fl[M - 1] if fl[M - 1] > 0.0 else 0.0
        leak_b = -dt * fl[0] if fl[0] < 0.0 else 0.0
        # diffusion, explicit part
        ex = 1.0 - theta
        for j in range(1, M):
            q[j] = p[j] + ex * r * (p[j + 1] - 2.0 * p[j] + p[j - 1]) - lam * (fl[j] - fl[j - 1])
        q[0] = 0.0
        q[M] = 0.0
        exit_d = ex * 0.5 * dt * p[M - 1] / dy
        leak_d = ex * 0.5 * dt * p[1] / dy
        if theta > 0.0:
            for j in range(n_int):
                rhs[j] = q[j + 1]
            _thomas_const(rhs, n_int, -theta * r, 1.0 + 2.0 * theta * r, cp, dpv, sol)
            for j in range(n_int):
                q[j + 1] = sol[j]
            exit_d += theta * 0.5 * dt * q[M - 1] / dy
            leak_d += theta * 0.5 * dt * q[1] / dy
        D = exit_d + exit_b
        # coupling shift
        if coupling == PRESCRIBED:
            s = shifts[k]
        elif coupling == LAGGED:
            s = alpha * prev_exit
        elif coupling == SWEEPS:
            x = D + _top_mass(q, M, dy, alpha * prev_exit)
            for _ in range(max_sweeps):
                xn = D + _top_mass(q, M, dy, alpha * x)
                done = abs(xn - x) < step_tol
                x = xn
                if done:
                    break
            s = alpha * x
        else:
            s = alpha * _cascade_root(q, M, dy, alpha, D)
        if s > 0.0:
            X = _apply_shift(q, tmp, M, dy, s)
            for j in range(M + 1):
                q[j] = tmp[j]
        else:
            X = 0.0
        total_exit = D + X
        clip = 0.0
        for j in range(1, M):
            if q[j] < 0.0:
                clip -= q[j] * dy
                q[j] = 0.0
        if reinject:
            q[j_reset] += total_exit / dy
        for j in range(M + 1):
            p[j] = q[j]
        exits[k] = total_exit
        leaks[k] = leak_d + leak_b - clip
        shift_out[k] = s
        prev_exit = total_exit
        while snap_i < snap_steps.shape[0] and snap_steps[snap_i] == k + 1:
            snaps[snap_i, :] = p
            snap_i += 1
    if flux_order == 2:
        g = (4.0 * p[M - 1] - p[M - 2]) / (4.0 * dy)
    else:
        g = 0.5 * p[M - 1] / dy
    flux[nsteps] = g if g > 0.0 else 0.0
