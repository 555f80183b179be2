"""Free transition density by radial Fourier inversion.

For an isotropic exponent the d-dimensional inversion reduces to a single
oscillatory integral in s = |xi| against cos (d = 1), J0 (d = 2) or
sin(x)/x (d = 3).  The integral is split at the kernel zeros; the resulting
alternating series is summed directly while the envelope is still
significant and otherwise accelerated with Wynn's epsilon.  Far-tail values,
where the absolute tolerance says nothing about relative accuracy, come from
the positive subordination integral instead.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import QuadratureError
from ..params import ProcessParams
from .bessel import j0, j0_zeros, wynn_epsilon
from .exponent import _scaled_exponent, checked_quad, density_at_zero
from .subordination import subordinated_density

_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)
_PREFACTOR = {1: 1.0 / math.pi, 2: 1.0 / (2.0 * math.pi), 3: 1.0 / (2.0 * math.pi**2)}
_BLOCK = 256
_MAX_DIRECT = 4096
# below this multiple of tol (unit time) the oscillatory sum loses relative accuracy
TAIL_SWITCH = 1e6
_J0_ZEROS = j0_zeros(_MAX_DIRECT + 8)


def _kernel(dim: int, x):
    if dim == 1:
        return np.cos(x)
    if dim == 2:
        return j0(x)
    return np.sinc(x / math.pi)


def _kernel_zeros(dim: int, rho: float, n: int) -> np.ndarray:
    k = np.arange(1, n + 1, dtype=float)
    if dim == 1:
        z = (k - 0.5) * math.pi
    elif dim == 2:
        z = _J0_ZEROS[:n]
    else:
        z = k * math.pi
    return z / rho


def _envelope(dim: int, alpha: float, mu: float, rho: float, s: float) -> float:
    """Bound on |integrand| times the half-period at s."""
    amp = 1.0 if dim == 1 else (math.sqrt(2.0 / (math.pi * rho * s)) if dim == 2 else 1.0 / (rho * s))
    return math.exp(-float(_scaled_exponent(alpha, mu, s))) * s ** (dim - 1) * amp * math.pi / rho


def _hankel_unit_time(alpha: float, mu: float, dim: int, rho: float, tol: float) -> tuple[float, float]:
    """(value, error) of p^mu(1, rho) for rho > 0 before the d-prefactor."""

    def g_vec(s):
        return np.exp(-_scaled_exponent(alpha, mu, s)) * s ** (dim - 1) * _kernel(dim, rho * s)

    def g(s):
        return float(g_vec(np.array([s]))[0])

    zeros = _kernel_zeros(dim, rho, _MAX_DIRECT + 1)
    first = zeros[0]
    pts = [p for p in (0.5, 2.0, 8.0, 30.0) if p < first]
    head, head_err = checked_quad(g, 0.0, first, tol / 4, what="free_density", points=pts or None)
    partial = [head]
    err = head_err
    total = head
    done = False
    for start in range(0, _MAX_DIRECT, _BLOCK):
        lo = zeros[start : start + _BLOCK]
        hi = zeros[start + 1 : start + _BLOCK + 1]
        half = 0.5 * (hi - lo)
        nodes = lo[:, None] + half[:, None] * (_GL_X[None, :] + 1.0)
        pieces = (g_vec(nodes) * _GL_W[None, :]).sum(axis=1) * half
        for k, piece in enumerate(pieces):
            total += piece
            partial.append(total)
            if abs(piece) < 1e-3 * tol and _envelope(dim, alpha, mu, rho, hi[k]) < 1e-3 * tol:
                done = True
                break
        if done:
            break
    if done:
        return total, err
    # slowly decaying envelope: accelerate the alternating tail
    tail = partial[-40:]
    acc, acc_err = wynn_epsilon(tail)
    acc2, _ = wynn_epsilon(partial[-41:-1])
    acc_err = max(acc_err, abs(acc - acc2))
    # the alternating tail is bounded by the envelope at the last zero; prefer
    # the plain partial sum when that bound beats the accelerated estimate
    direct_err = _envelope(dim, alpha, mu, rho, float(zeros[len(partial) - 1]))
    if not (acc_err <= direct_err) or not math.isfinite(acc):
        acc, acc_err = total, direct_err
    err += acc_err
    if not math.isfinite(acc) or err > tol * max(1.0, abs(acc)):
        raise QuadratureError(f"free_density: error estimate {err:.3g} exceeds {tol:.3g}", acc, err)
    return acc, err


def free_density(params: ProcessParams, t: float, r: float, tol: float = 1e-9) -> float:
    """p^m(t, x) at |x| = r by radial Fourier inversion.

    Computed at unit time with mass ``m t`` and rescaled, so ``tol`` is an
    absolute tolerance on the unit-time density (relative once that density
    exceeds one).  Unit-time values below ``TAIL_SWITCH * tol`` are taken from
    the subordination mixture, which stays relatively accurate in the far tail.
    Raises :class:`QuadratureError` with the best estimate and achieved error
    when the oscillatory sum misses the tolerance.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not r >= 0:
        raise ValueError("r must be nonnegative")
    if r == 0.0:
        return density_at_zero(params, t, tol=min(tol, 1e-10))
    a, d = params.alpha, params.dim
    s = t ** (1.0 / a)
    pref = _PREFACTOR[d]
    try:
        val, _ = _hankel_unit_time(a, params.mass * t, d, r / s, tol / pref)
    except QuadratureError as exc:
        est = None if exc.estimate is None else exc.estimate * pref * s ** (-d)
        err = None if exc.error is None else exc.error * pref * s ** (-d)
        raise QuadratureError(str(exc), est, err) from None
    if val * pref < TAIL_SWITCH * tol:
        return float(subordinated_density(params, t, r)[0])
    return val * pref * s ** (-d)
