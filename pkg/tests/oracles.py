"""Independent reference computations used only by the tests."""

import math

import numpy as np


def jacobi_eigenvalues(A, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi rotations on a small symmetric matrix."""
    a = np.array(A, dtype=float)
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol * np.linalg.norm(a):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * rp - s * rq, s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * cp - s * cq, s * cp + c * cq
    return np.sort(np.diag(a))


def cauchy_density_2d(t, r, m=0.0):
    """Closed-form alpha = 1 density in the plane (relativistic Cauchy for m > 0)."""
    rho = math.sqrt(t * t + r * r)
    if m == 0.0:
        return t / (2.0 * math.pi * rho**3)
    return t * math.exp(m * t - m * rho) * (1.0 + m * rho) / (2.0 * math.pi * rho**3)


def cauchy_levy_2d(r, m=0.0):
    """J^m for alpha = 1, d = 2: the t -> 0 limit of p(t, r) / t."""
    return math.exp(-m * r) * (1.0 + m * r) / (2.0 * math.pi * r**3)


def stable_zero_density(alpha, t, d=2):
    """p^0(t, 0) = Gamma(d/alpha) / (alpha 2^(d-1) pi^(d/2) Gamma(d/2) t^(d/alpha))."""
    return math.gamma(d / alpha) / (alpha * 2 ** (d - 1) * math.pi ** (d / 2) * math.gamma(d / 2)) * t ** (-d / alpha)


def lattice_sum(s, n_max=400):
    """sum over nonzero (i, j) of (i^2 + j^2)^(-s/2), with an integral tail correction."""
    i = np.arange(-n_max, n_max + 1)
    r2 = (i[:, None] ** 2 + i[None, :] ** 2).astype(float)
    r2[n_max, n_max] = np.inf
    inside = r2 <= n_max**2
    total = float(np.sum(r2[inside] ** (-s / 2)))
    # area-weighted remainder beyond radius n_max + 1/2 (midpoint rule for the lattice)
    R = n_max + 0.5
    return total + 2.0 * math.pi * R ** (2 - s) / (s - 2)
