"""Radial Fourier kernels J0, J1 and their zeros, plus Wynn's epsilon algorithm.

Only the orders needed by the d = 2 Hankel reduction are provided.  Small
arguments use the ascending series, large arguments the Hankel asymptotic
expansion; the switch at x = 14 keeps both below ~1e-12 absolute error.
"""

from __future__ import annotations

import math

import numpy as np

_SWITCH = 14.0
_NSERIES = 60
_NASYM = 24


def _series(x: np.ndarray, order: int) -> np.ndarray:
    q = -0.25 * x * x
    term = np.ones_like(x) if order == 0 else 0.5 * x
    total = term.copy()
    for k in range(1, _NSERIES):
        term = term * q / (k * (k + order))
        total += term
    return total


def _asym_coeffs(order: int) -> list[float]:
    mu = 4.0 * order * order
    out = [1.0]
    for k in range(1, _NASYM):
        out.append(out[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    return out


_ASYM = {0: _asym_coeffs(0), 1: _asym_coeffs(1)}


def _asymptotic(x: np.ndarray, order: int) -> np.ndarray:
    c = _ASYM[order]
    inv = 1.0 / x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for k in range(_NASYM):
        term = c[k] * inv**k
        if k % 2 == 0:
            p += (-1) ** (k // 2) * term
        else:
            q += (-1) ** (k // 2) * term
    chi = x - (0.5 * order + 0.25) * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _bessel(order: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax < _SWITCH
    out[small] = _series(ax[small], order)
    out[~small] = _asymptotic(ax[~small], order)
    if order == 1:
        out = np.where(x < 0, -out, out)
    return out if out.ndim else float(out)


def j0(x):
    """Bessel function of the first kind, order 0."""
    return _bessel(0, x)


def j1(x):
    """Bessel function of the first kind, order 1."""
    return _bessel(1, x)


def j0_zeros(n: int) -> np.ndarray:
    """First ``n`` positive zeros of J0 (McMahon start, Newton polish)."""
    k = np.arange(1, n + 1, dtype=float)
    b = (k - 0.25) * math.pi
    z = b + 1.0 / (8 * b) - 124.0 / (3 * (8 * b) ** 3) + 120928.0 / (15 * (8 * b) ** 5)
    for _ in range(6):
        # J0' = -J1
        z = z + j0(z) / j1(z)
    return z


def wynn_epsilon(partial_sums) -> tuple[float, float]:
    """Accelerated limit of a sequence of partial sums and a crude error.

    The error is the gap between the two highest-order even columns.
    """
    s = [float(v) for v in partial_sums]
    n = len(s)
    if n < 3:
        return s[-1], abs(s[-1] - s[-2]) if n > 1 else math.inf
    prev = [0.0] * (n + 1)
    cur = s[:]
    evens = [s[-1]]
    for col in range(1, n):
        nxt = []
        for i in range(len(cur) - 1):
            diff = cur[i + 1] - cur[i]
            if diff == 0.0:
                nxt.append(math.inf)
            else:
                nxt.append(prev[i + 1] + 1.0 / diff)
        prev, cur = cur, nxt
        if not cur:
            break
        if col % 2 == 0 and math.isfinite(cur[-1]):
            evens.append(cur[-1])
    best = evens[-1]
    err = abs(evens[-1] - evens[-2]) if len(evens) > 1 else math.inf
    return best, err
