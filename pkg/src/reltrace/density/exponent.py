"""Characteristic exponent and the non-oscillatory density at the origin."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from ..errors import QuadratureError
from ..params import ProcessParams, sphere_measure


def char_exponent(params: ProcessParams, xi_norm):
    """Phi(xi) = (|xi|^2 + m^(2/alpha))^(alpha/2) - m, vectorised over ``xi_norm``.

    Evaluated through expm1/log1p so that small |xi| at positive mass keeps
    full relative precision.
    """
    xi = np.asarray(xi_norm, dtype=float)
    if np.any(xi < 0):
        raise ValueError("xi_norm must be nonnegative")
    a, m = params.alpha, params.mass
    if m == 0.0:
        out = xi**a
    elif params.mass_scale == 0.0:
        out = _underflow_exponent(a, m, xi)
    else:
        c = params.mass_scale
        out = m * np.expm1(0.5 * a * np.log1p(xi * xi / c))
    return out if out.ndim else float(out)


def _underflow_exponent(alpha: float, mu: float, u):
    # mu^(2/alpha) below the smallest double: Phi = u^alpha - mu to working precision
    return np.maximum(np.asarray(u, dtype=float) ** alpha - mu, 0.0)


def _scaled_exponent(alpha: float, mu: float, u):
    """Phi for mass ``mu`` (time-1 scaling), array input."""
    if mu == 0.0:
        return u**alpha
    c = mu ** (2.0 / alpha)
    if c == 0.0:
        return _underflow_exponent(alpha, mu, u)
    # overflow to +inf is harmless: only exp(-Phi) = 0 is ever used
    with np.errstate(over="ignore"):
        return mu * np.expm1(0.5 * alpha * np.log1p(u * u / c))


def _mass_deficit(alpha: float, mu: float, u):
    """u^alpha - Phi_mu(u) >= 0, without cancellation."""
    u = np.asarray(u, dtype=float)
    c = mu ** (2.0 / alpha)
    ua = u**alpha
    if c == 0.0:
        return np.minimum(ua, mu)
    small = u * u < c
    out = np.empty_like(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        us = u[small]
        out[small] = ua[small] - mu * np.expm1(0.5 * alpha * np.log1p(us * us / c))
        ub = u[~small]
        out[~small] = mu - ua[~small] * np.expm1(0.5 * alpha * np.log1p(c / (ub * ub)))
    return out


def checked_quad(func, a, b, tol, what="integral", **kwargs):
    """scipy ``quad`` that raises :class:`QuadratureError` above the tolerance.

    The bound is ``tol * max(1, |value|)``: absolute for O(1) integrals,
    relative for the large unit-time values met at small alpha and d = 3.
    """
    kwargs.setdefault("limit", 400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(func, a, b, epsabs=tol, epsrel=1e-13, **kwargs)
    if not math.isfinite(val) or err > tol * max(1.0, abs(val)):
        raise QuadratureError(f"{what}: error estimate {err:.3g} exceeds {tol:.3g}", val, err)
    return val, err


def _zero_point_integral(alpha: float, mu: float, dim: int, tol: float) -> float:
    # substitute v = u^alpha; integrand v^(d/alpha - 1) exp(-Phi_mu(v^(1/alpha))) / alpha
    p = dim / alpha - 1.0

    def f(v):
        return v**p * math.exp(-float(_scaled_exponent(alpha, mu, v ** (1.0 / alpha)))) / alpha

    total = 0.0
    for lo, hi in ((0.0, 1.0), (1.0, 10.0), (10.0, 60.0), (60.0, math.inf)):
        val, _ = checked_quad(f, lo, hi, tol / 4, what="density_at_zero")
        total += val
    return total


def density_at_zero(params: ProcessParams, t: float, tol: float = 1e-10) -> float:
    """p^m(t, 0) by radial quadrature of exp(-t Phi) against s^(d-1).

    The integral is evaluated at unit time with mass ``m t`` and rescaled by
    t^(-d/alpha); ``tol`` is the absolute tolerance at unit time.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    mu = params.mass * t
    cd = sphere_measure(params.dim) / (2.0 * math.pi) ** params.dim
    integral = _zero_point_integral(params.alpha, mu, params.dim, tol / cd)
    return t ** (-params.dim / params.alpha) * cd * integral


def zero_point_difference(params: ProcessParams, t: float, tol: float = 1e-10) -> float:
    """p^m(t, 0) - p^0(t, 0) from a single nonnegative integrand.

    Integrating exp(-Phi_mu) - exp(-u^alpha) directly avoids the cancellation
    of two large, nearly equal zero-point values at small t.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    a, d = params.alpha, params.dim
    mu = params.mass * t
    if mu == 0.0:
        return 0.0
    cd = sphere_measure(d) / (2.0 * math.pi) ** d
    p = d / a - 1.0

    def f(v):
        u = v ** (1.0 / a)
        tilt = float(_mass_deficit(a, mu, np.array([u]))[0])
        # exp(-Phi_mu) - exp(-u^a) = exp(-u^a) expm1(u^a - Phi_mu)
        return v**p * math.exp(-v) * math.expm1(tilt) / a

    total = 0.0
    for lo, hi in ((0.0, 1.0), (1.0, 10.0), (10.0, 60.0), (60.0, math.inf)):
        val, _ = checked_quad(f, lo, hi, tol / (4 * cd), what="zero_point_difference")
        total += val
    return t ** (-d / a) * cd * total
