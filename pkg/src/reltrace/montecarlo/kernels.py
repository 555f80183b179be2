"""Compiled path simulators.

Every kernel reseeds numba's generator from the seed it is handed, so a
chunk of paths is a pure function of (seed, inputs).  Domains arrive as the
(kind code, parameter array) pair produced by ``Domain.kernel_spec``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

REJECTED = -1.0


@njit(cache=True)
def positive_stable_unit(a):
    """Kanter's representation: exp(-lambda^a) Laplace transform at time 1."""
    u = 0.0
    while u <= 0.0 or u >= math.pi:
        u = math.pi * np.random.random()
    e = -math.log(1.0 - np.random.random())
    za = (math.sin(a * u) / math.sin(u)) ** (1.0 / (1.0 - a)) * math.sin((1.0 - a) * u) / math.sin(a * u)
    return (za / e) ** ((1.0 - a) / a)


@njit(cache=True)
def tempered_increment(a, c, dt, max_tries):
    """Exponentially tilted positive a-stable increment over time dt.

    Returns REJECTED if ``max_tries`` proposals all fail.
    """
    scale = dt ** (1.0 / a)
    for _ in range(max_tries):
        s = scale * positive_stable_unit(a)
        if c == 0.0 or np.random.random() < math.exp(-c * s):
            return s
    return REJECTED


@njit(cache=True)
def signed_distance(kind, spec, x, y):
    """Distance to the complement, negative (or zero) outside."""
    if kind == 1:
        return spec[2] - math.sqrt((x - spec[0]) ** 2 + (y - spec[1]) ** 2)
    if kind == 2:
        d = math.inf
        for i in range(spec.shape[0] // 3):
            v = spec[3 * i] * x + spec[3 * i + 1] * y - spec[3 * i + 2]
            if v < d:
                d = v
        return d
    if kind == 3:
        return x
    return math.inf


@njit(cache=True)
def _row_log(logv, slopes, i, rho, rho_lo, rho_step):
    ncol = logv.shape[1]
    if rho < rho_lo:
        w = rho / rho_lo
        return (1.0 - w) * logv[i, 0] + w * logv[i, 1]
    q = math.log(rho / rho_lo) / rho_step
    j = int(q)
    if j >= ncol - 2:
        return logv[i, ncol - 1] + slopes[i] * (q - (ncol - 2)) * rho_step
    f = q - j
    return (1.0 - f) * logv[i, 1 + j] + f * logv[i, 2 + j]


@njit(cache=True)
def stack_density(s, r, logv, slopes, meta):
    """p^m(s, r) from a unit-time density stack (see ``DensityStack``)."""
    alpha, dim, mass = meta[0], meta[1], meta[2]
    rho_lo, rho_step, mu_lo, mu_step = meta[3], meta[4], meta[5], meta[6]
    sc = s ** (1.0 / alpha)
    rho = r / sc
    nrows = logv.shape[0]
    mu = mass * s
    if nrows == 1 or mu == 0.0:
        lg = _row_log(logv, slopes, 0, rho, rho_lo, rho_step)
    elif mu < mu_lo:
        w = mu / mu_lo
        lg = (1.0 - w) * _row_log(logv, slopes, 0, rho, rho_lo, rho_step) + w * _row_log(
            logv, slopes, 1, rho, rho_lo, rho_step)
    else:
        k = math.log(mu / mu_lo) / mu_step
        i = int(k)
        if i > nrows - 3:
            i = nrows - 3
        if i < 0:
            i = 0
        f = k - i
        lg = (1.0 - f) * _row_log(logv, slopes, 1 + i, rho, rho_lo, rho_step) + f * _row_log(
            logv, slopes, 2 + i, rho, rho_lo, rho_step)
    return math.exp(lg) / sc ** dim


@njit(cache=True)
def _step_size(dist, base, refine, kmax, alpha, remaining):
    dt = base
    k = 0
    while k < kmax and dist < 3.0 * dt ** (1.0 / alpha):
        dt *= refine
        k += 1
    if dt > remaining:
        dt = remaining
    return dt


@njit(cache=True)
def exit_paths(kind, spec, starts, t, alpha, c, base, refine, kmax, antithetic, max_tries, seed,
               logv, slopes, meta, contrib, tau, ex, ey):
    """One path per row of ``starts`` (pairs of rows when antithetic).

    Fills the remainder contribution p^m(t - tau, |X_tau - x|) (0 if the path
    survives to t), the exit time (inf if censored) and the exit position.
    Returns the number of rejected subordinator draws (0 on success).
    """
    np.random.seed(seed)
    a = 0.5 * alpha
    n = starts.shape[0]
    step = 2 if antithetic else 1
    for p0 in range(0, n, step):
        npair = min(step, n - p0)
        xs = np.empty(2)
        ys = np.empty(2)
        alive = np.zeros(2, dtype=np.bool_)
        for q in range(npair):
            xs[q] = starts[p0 + q, 0]
            ys[q] = starts[p0 + q, 1]
            alive[q] = True
            contrib[p0 + q] = 0.0
            tau[p0 + q] = math.inf
            ex[p0 + q] = math.nan
            ey[p0 + q] = math.nan
        time = 0.0
        while time < t:
            dist = math.inf
            for q in range(npair):
                if alive[q]:
                    d = signed_distance(kind, spec, xs[q], ys[q])
                    if d < dist:
                        dist = d
            dt = _step_size(dist, base, refine, kmax, alpha, t - time)
            s = tempered_increment(a, c, dt, max_tries)
            if s == REJECTED:
                return 1
            g = math.sqrt(2.0 * s)
            n1 = np.random.standard_normal()
            n2 = np.random.standard_normal()
            time += dt
            for q in range(npair):
                if not alive[q]:
                    continue
                sign = 1.0 if q == 0 else -1.0
                xs[q] += sign * g * n1
                ys[q] += sign * g * n2
                if signed_distance(kind, spec, xs[q], ys[q]) <= 0.0:
                    alive[q] = False
                    idx = p0 + q
                    tau[idx] = time
                    ex[idx] = xs[q]
                    ey[idx] = ys[q]
                    if time < t:
                        r = math.sqrt((xs[q] - starts[idx, 0]) ** 2 + (ys[q] - starts[idx, 1]) ** 2)
                        contrib[idx] = stack_density(t - time, r, logv, slopes, meta)
            any_alive = False
            for q in range(npair):
                any_alive = any_alive or alive[q]
            if not any_alive:
                break
    return 0


@njit(cache=True)
def halfspace_levels(levels, t, alpha, c, base, refine, kmax, antithetic, max_tries, seed,
                     logv, slopes, meta, contrib):
    """Half-space remainders at all start depths ``levels`` from one path.

    A path from the origin serves every depth r_j: it has left
    {x_1 > -r_j} once its first coordinate drops below -r_j, and the
    contribution p(t - tau_j, |Y_tau_j|) does not otherwise depend on r_j.
    ``contrib`` has shape (n_paths, n_levels).
    """
    np.random.seed(seed)
    a = 0.5 * alpha
    n = contrib.shape[0]
    nl = levels.shape[0]
    step = 2 if antithetic else 1
    for p0 in range(0, n, step):
        npair = min(step, n - p0)
        xs = np.zeros(2)
        ys = np.zeros(2)
        nxt = np.zeros(2, dtype=np.int64)
        for q in range(npair):
            for j in range(nl):
                contrib[p0 + q, j] = 0.0
        time = 0.0
        while time < t:
            dist = math.inf
            for q in range(npair):
                if nxt[q] < nl:
                    d = xs[q] + levels[nxt[q]]
                    if d < dist:
                        dist = d
            if dist == math.inf:
                break
            dt = _step_size(dist, base, refine, kmax, alpha, t - time)
            s = tempered_increment(a, c, dt, max_tries)
            if s == REJECTED:
                return 1
            g = math.sqrt(2.0 * s)
            n1 = np.random.standard_normal()
            n2 = np.random.standard_normal()
            time += dt
            for q in range(npair):
                sign = 1.0 if q == 0 else -1.0
                xs[q] += sign * g * n1
                ys[q] += sign * g * n2
                while nxt[q] < nl and xs[q] <= -levels[nxt[q]]:
                    if time < t:
                        r = math.sqrt(xs[q] ** 2 + ys[q] ** 2)
                        contrib[p0 + q, nxt[q]] = stack_density(t - time, r, logv, slopes, meta)
                    nxt[q] += 1
    return 0


@njit(cache=True)
def _radial_interp(grid, vals, r):
    if r <= grid[0]:
        return vals[0]
    n = grid.shape[0]
    if r >= grid[n - 1]:
        return vals[n - 1]
    j = np.searchsorted(grid, r) - 1
    f = (r - grid[j]) / (grid[j + 1] - grid[j])
    return (1.0 - f) * vals[j] + f * vals[j + 1]


@njit(cache=True)
def jump_exit_paths(kind, spec, x0, y0, t1, t2, alpha, c, base, refine, kmax, max_tries, seed,
                    target, k_grid, k_vals, n, hit, post):
    """Exit bookkeeping for the Ikeda-Watanabe comparison.

    ``hit[i]`` is 1 when path i leaves D at a time in (t1, t2) landing in the
    annulus ``target`` (center x, center y, r_in, r_out); a negative r_out
    means the whole complement.  ``post[i]`` is the post-exit occupation
    int_{max(t1, tau)}^{t2} K(Y_s) 1_D(Y_s) ds of the freely continued path,
    with K tabulated radially about the target center.
    """
    np.random.seed(seed)
    a = 0.5 * alpha
    for i in range(n):
        x, y = x0, y0
        time = 0.0
        exited = False
        hit[i] = 0.0
        post[i] = 0.0
        while time < t2:
            if not exited:
                dist = signed_distance(kind, spec, x, y)
                dt = _step_size(dist, base, refine, kmax, alpha, t2 - time)
            else:
                dt = base if base < t2 - time else t2 - time
                # left-endpoint occupation over [time, time + dt] clipped to [t1, t2]
                lo = time if time > t1 else t1
                hi = time + dt
                if hi > lo and signed_distance(kind, spec, x, y) > 0.0:
                    rr = math.sqrt((x - target[0]) ** 2 + (y - target[1]) ** 2)
                    post[i] += (hi - lo) * _radial_interp(k_grid, k_vals, rr)
            s = tempered_increment(a, c, dt, max_tries)
            if s == REJECTED:
                return 1
            g = math.sqrt(2.0 * s)
            x += g * np.random.standard_normal()
            y += g * np.random.standard_normal()
            time += dt
            if not exited and signed_distance(kind, spec, x, y) <= 0.0:
                exited = True
                if t1 < time < t2:
                    if target[3] < 0.0:
                        hit[i] = 1.0
                    else:
                        rr = math.sqrt((x - target[0]) ** 2 + (y - target[1]) ** 2)
                        if target[2] < rr < target[3]:
                            hit[i] = 1.0
    return 0
