"""Heat kernel through Brownian subordination.

X^m_t has the law of B_{2T_t}, where T is a tempered positive (alpha/2)-stable
subordinator.  The transition density is therefore a positive mixture of
Gaussians, which gives a non-oscillatory route to p^m(1, rho) used for the
Monte Carlo tables and as an independent check of the Fourier inversion.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from ..params import ProcessParams

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _theta_nodes(a: float):
    """Quadrature on (0, pi) uniform in log(theta) and in log(pi - theta).

    Near pi the Zolotarev function grows like (pi - theta)^(-1/(1-a)), so the
    integrand peak has width ~(1-a) in the log variable; panels scale with it.
    """
    width = min(0.5, max(0.02, 4.0 * (1.0 - a)))
    edges = np.arange(0.0, 40.0 + width, width)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        xs.append(lo + half * (_GL_X + 1.0))
        ws.append(half * _GL_W)
    s = np.concatenate(xs)
    w = np.concatenate(ws)
    # theta = (pi/2) exp(-s) on the left half, pi - (pi/2) exp(-s) on the right
    dist = 0.5 * np.pi * np.exp(-s)
    theta = np.concatenate([dist, np.pi - dist])
    weights = np.concatenate([dist * w, dist * w])
    return theta, weights


def log_zolotarev_a(a: float, theta):
    """log A(theta), A = [sin(a th)/sin th]^(1/(1-a)) sin((1-a) th)/sin(a th)."""
    th = np.asarray(theta, dtype=float)
    return (np.log(np.sin(a * th)) - np.log(np.sin(th))) / (1.0 - a) + np.log(
        np.sin((1.0 - a) * th) / np.sin(a * th)
    )


def zolotarev_a(a: float, theta):
    with np.errstate(over="ignore"):
        return np.exp(log_zolotarev_a(a, theta))


def _series_pdf(a: float, u: np.ndarray, nterms: int = 120) -> np.ndarray:
    # convergent expansion in u^(-a); used where u^(-a) is small
    k = np.arange(1, nterms + 1, dtype=float)
    logc = special.gammaln(a * k + 1.0) - special.gammaln(k + 1.0)
    sgn = np.where(k % 2 == 1, 1.0, -1.0) * np.sin(np.pi * a * k)
    lu = np.log(u)[:, None]
    terms = sgn * np.exp(logc - (a * k + 1.0) * lu)
    return terms.sum(axis=1) / np.pi


def _zolotarev_pdf(a: float, u: np.ndarray) -> np.ndarray:
    theta, tw = _theta_nodes(a)
    logA = log_zolotarev_a(a, theta)
    logx = (-a / (1.0 - a)) * np.log(u)
    integral = np.empty_like(u)
    with np.errstate(over="ignore"):
        for i in range(0, u.size, 256):
            # A exp(-A x) in log form; overflowing A x gives exp(-inf) = 0
            z = logA[None, :] - np.exp(logA[None, :] + logx[i : i + 256, None])
            integral[i : i + 256] = np.exp(z) @ tw / np.pi
    return a / (1.0 - a) * u ** (-1.0 / (1.0 - a)) * integral


def positive_stable_pdf(a: float, u) -> np.ndarray:
    """Density of the positive a-stable law with Laplace transform exp(-lambda^a).

    Zolotarev's integral representation below the switch point, the
    convergent series in u^(-a) above it.
    """
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.zeros_like(u)
    switch = 0.5 ** (-1.0 / a)
    pos = u > 0
    big = pos & (u >= switch)
    small = pos & (u < switch)
    if big.any():
        out[big] = _series_pdf(a, u[big])
    if small.any():
        out[small] = _zolotarev_pdf(a, u[small])
    return out


class SubordinatorGrid:
    """Log-spaced quadrature in the subordinator variable u at unit time.

    Holds the untilted (alpha/2)-stable weights on the grid so that densities
    for many (mass, radius) pairs reduce to matrix products.
    """

    def __init__(self, alpha: float, dim: int, per_decade: int | None = None, rho_max: float = 1e4):
        a = alpha / 2.0
        self.alpha, self.dim, self.a = alpha, dim, a
        A0 = a ** (a / (1.0 - a)) * (1.0 - a)
        # below u_lo the Zolotarev integrand is below exp(-745)
        u_lo = (A0 / 745.0) ** ((1.0 - a) / a)
        u_hi = max(1e16, 1e4 * rho_max**2)
        if per_decade is None:
            # the left edge rises like exp(-c u^(-a/(1-a))); resolve it in log u
            per_decade = max(60, int(math.ceil(12.0 / (1.0 - a))))
        n = int(math.ceil(per_decade * math.log10(u_hi / u_lo))) + 1
        self.log_u = np.linspace(math.log(u_lo), math.log(u_hi), n)
        self.u = np.exp(self.log_u)
        h = self.log_u[1] - self.log_u[0]
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        # trapezoid in log u: du = u dlog u
        self.weights = w * self.u * positive_stable_pdf(a, self.u)
        self.u_hi = u_hi
        self.rho_max = rho_max

    def tail_constant(self) -> float:
        return self.a / math.gamma(1.0 - self.a)

    def density(self, mu, rho) -> np.ndarray:
        """p^mu(1, rho) for arrays ``mu`` (rows) and ``rho`` (columns)."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        if rho.size and rho.max() > self.rho_max:
            raise ValueError("rho exceeds the grid's rho_max")
        d, al = self.dim, self.alpha
        u = self.u
        gauss = (4.0 * np.pi * u[:, None]) ** (-0.5 * d) * np.exp(-(rho[None, :] ** 2) / (4.0 * u[:, None]))
        c = mu ** (2.0 / al)
        tilt = np.exp(mu[:, None] - c[:, None] * u[None, :])
        body = (tilt * self.weights[None, :]) @ gauss
        # analytic tail beyond u_hi, where the stable density is ~ C u^(-1-a)
        # and the Gaussian factor is flat; only material when mu = 0
        uh = self.u_hi
        p = 0.5 * d + self.a
        tail = (4.0 * np.pi) ** (-0.5 * d) * self.tail_constant() * uh ** (-p) / p
        tail = tail * np.exp(mu - c * uh)
        return body + tail[:, None]


_GRID_CACHE: dict = {}


def _grid(alpha: float, dim: int, rho_max: float) -> SubordinatorGrid:
    key = (alpha, dim)
    g = _GRID_CACHE.get(key)
    if g is None or g.rho_max < rho_max:
        g = SubordinatorGrid(alpha, dim, rho_max=max(rho_max, 1e4))
        _GRID_CACHE[key] = g
    return g


def subordinated_density(params: ProcessParams, t: float, r) -> np.ndarray:
    """p^m(t, r) as a Gaussian mixture over the subordinator, vectorised in r."""
    if not t > 0:
        raise ValueError("t must be positive")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    s = t ** (1.0 / params.alpha)
    rho = r / s
    g = _grid(params.alpha, params.dim, float(rho.max()) if rho.size else 1.0)
    vals = g.density([params.mass * t], rho)[0]
    return vals * s ** (-params.dim)
