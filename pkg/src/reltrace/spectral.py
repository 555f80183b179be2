"""Lattice discretization of the killed generator and its low spectrum.

The negative generator restricted to D acts on f (zero outside D) as

    (A f)(x) = f(x) [PV int_D J(x - y) dy + kappa_D(x)] - int_D f(y) J(x - y) dy.

On the lattice hZ^2 the integrals over D become sums over the interior
points.  Plain lattice sums of the singular kernel get the small-xi
curvature of the symbol wrong at order h^(2 - alpha); a five-point
Laplacian stencil with coefficient ``stencil_coefficient`` restores it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy import linalg, special
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .density.exponent import density_at_zero
from .errors import ConvergenceError, GridTooCoarseError, TailTooHeavyError, UnsupportedDomainError, ValidationError
from .geometry import Domain
from .levy import killing_rates, levy_density, ray_tail
from .params import ProcessParams

MIN_POINTS = 100
BOUNDARY_EPS = 1e-9
DENSE_LIMIT = 4000
LANCZOS_MAX_K = 600
RESIDUAL_TOL = 1e-8
TAIL_FRACTION = 5e-3


@lru_cache(maxsize=None)
def epstein_zeta(s: float) -> float:
    """sum over Z^2 minus the origin of |j|^(-s), continued to s < 2.

    Uses the factorisation 4 zeta(s/2) beta(s/2) with Dirichlet's beta.
    """
    s2 = mpmath.mpf(s) / 2
    beta = mpmath.power(4, -s2) * (mpmath.zeta(s2, 0.25) - mpmath.zeta(s2, 0.75))
    return float(4 * mpmath.zeta(s2) * beta)


def stencil_coefficient(params: ProcessParams, h: float) -> float:
    """c_h with c_h (-Delta_h) matching the lattice-sum curvature defect.

    The lattice sum sum_j h^2 J(|jh|)(1 - cos(xi . jh)) undershoots
    |xi|^alpha by -(A Z(alpha)/4) h^(2 - alpha) |xi|^2 for small xi, where
    Z is the continued lattice zeta; Z(alpha) < 0 so c_h > 0.
    """
    return -0.25 * params.levy_constant * epstein_zeta(params.alpha) * h ** (2.0 - params.alpha)


@dataclass(frozen=True)
class GridDiscretization:
    """Interior points of hZ^2 in D; row i of the generator is ``points[i]``."""

    h: float
    points: np.ndarray
    lattice: np.ndarray

    @property
    def size(self) -> int:
        return len(self.points)

    def index(self, ij) -> int:
        """Row of the lattice point (i, j), or -1 if it is not interior."""
        hit = np.nonzero((self.lattice[:, 0] == ij[0]) & (self.lattice[:, 1] == ij[1]))[0]
        return int(hit[0]) if len(hit) else -1


def build_grid(domain: Domain, h: float) -> GridDiscretization:
    if not domain.bounded:
        raise UnsupportedDomainError("spectral discretization needs a bounded domain")
    if not h > 0:
        raise ValidationError("h must be positive")
    x0, y0, x1, y1 = domain.bounding_box()
    i = np.arange(math.floor(x0 / h), math.ceil(x1 / h) + 1)
    j = np.arange(math.floor(y0 / h), math.ceil(y1 / h) + 1)
    I, Jg = np.meshgrid(i, j, indexing="ij")
    lat = np.column_stack([I.ravel(), Jg.ravel()])
    pts = lat * h
    # the domain is open: lattice points on the boundary up to rounding are excluded
    keep = domain.distance(pts) > BOUNDARY_EPS * h
    if keep.sum() < MIN_POINTS:
        raise GridTooCoarseError(f"only {int(keep.sum())} interior points at h={h}; need {MIN_POINTS}")
    return GridDiscretization(float(h), pts[keep], lat[keep])


_KAPPA_CACHE: dict = {}


def _kappa(params: ProcessParams, domain: Domain, grid: GridDiscretization) -> np.ndarray:
    key = (params, repr(domain), grid.h)
    if key not in _KAPPA_CACHE:
        _KAPPA_CACHE[key] = killing_rates(params, domain, grid.points)
    return _KAPPA_CACHE[key]


def _offset_weights(params: ProcessParams, h: float, n1: int, n2: int) -> np.ndarray:
    """h^2 J(|(a, b) h|) for 0 <= a <= n1, 0 <= b <= n2 (0 at the origin)."""
    a, b = np.meshgrid(np.arange(n1 + 1), np.arange(n2 + 1), indexing="ij")
    r = np.hypot(a, b) * h
    w = np.zeros_like(r)
    nz = r > 0
    w[nz] = h * h * levy_density(params, r[nz])
    return w


def assemble_killed_generator(params: ProcessParams, domain: Domain, h: float,
                              grid: GridDiscretization | None = None) -> np.ndarray:
    """Dense symmetric matrix of the negative killed generator on ``build_grid(domain, h)``."""
    params.require_dim(2)
    grid = grid or build_grid(domain, h)
    lat = grid.lattice
    span = lat.max(axis=0) - lat.min(axis=0)
    w = _offset_weights(params, h, int(span[0]), int(span[1]))
    n = grid.size
    A = np.empty((n, n))
    for lo in range(0, n, 512):
        d = np.abs(lat[lo:lo + 512, None, :] - lat[None, :, :])
        A[lo:lo + 512] = -w[d[..., 0], d[..., 1]]
    c = stencil_coefficient(params, h) / (h * h)
    diag = -A.sum(axis=1) + _kappa(params, domain, grid) + 4.0 * c
    # nearest lattice neighbours carry the stencil's off-diagonal part
    nb = w[1, 0]
    A[np.isclose(A, -nb, rtol=0, atol=1e-15 * nb) & (A != 0)] -= c
    A[np.diag_indices(n)] = diag
    return A


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    h: float
    size: int
    residuals: np.ndarray

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1 or len(ev) == 0:
            raise ValidationError("spectrum needs at least one eigenvalue")
        if np.any(np.diff(ev) < 0):
            raise ValidationError("eigenvalues must be nondecreasing")
        object.__setattr__(self, "eigenvalues", ev)


def _inf_norm(A: np.ndarray) -> float:
    # symmetric: equals the 1-norm and bounds the 2-norm from above
    return float(np.abs(A).sum(axis=1).max())


def eigen_spectrum(A: np.ndarray, k: int | None = None, h: float = math.nan) -> Spectrum:
    """The k smallest eigenvalues with per-pair residual checks.

    Dense LAPACK for N <= DENSE_LIMIT or large k; shift-invert Lanczos
    (ARPACK) for large N with k <= LANCZOS_MAX_K.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("A must be square")
    n = A.shape[0]
    k = n if k is None else int(k)
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= N = {n}")
    if not np.array_equal(A, A.T):
        raise ValidationError("A must be exactly symmetric")
    norm = _inf_norm(A)
    if n > DENSE_LIMIT and k <= LANCZOS_MAX_K:
        try:
            vals, vecs = eigsh(A, k=k, sigma=0.0, which="LM", tol=1e-12, ncv=min(n, max(2 * k + 1, 64)))
        except ArpackNoConvergence as exc:
            raise ConvergenceError("Lanczos did not converge", {"converged": len(exc.eigenvalues), "k": k}) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    else:
        driver = "evd" if k == n else "evr"
        vals, vecs = linalg.eigh(A, subset_by_index=None if k == n else [0, k - 1], driver=driver)
    res = np.linalg.norm(A @ vecs - vecs * vals[None, :], axis=0)
    bad = res > RESIDUAL_TOL * norm
    if np.any(bad):
        raise ConvergenceError("eigenpair residual above tolerance",
                               {"worst": float(res.max()), "bound": RESIDUAL_TOL * norm, "count": int(bad.sum())})
    return Spectrum(vals, float(h), n, res)


def compute_spectrum(params: ProcessParams, domain: Domain, h: float, k: int | None = None) -> Spectrum:
    grid = build_grid(domain, h)
    A = assemble_killed_generator(params, domain, h, grid)
    return eigen_spectrum(A, k, h)


@dataclass(frozen=True)
class TraceValue:
    value: float
    tail_bound: float

    @property
    def relative_tail(self) -> float:
        return self.tail_bound / self.value


def weyl_fit(spec: Spectrum, dim: int = 2, alpha: float = 1.0) -> float:
    """c in N(lambda) ~ c lambda^(d/alpha), from the upper half of the computed spectrum."""
    ev = spec.eigenvalues
    if spec.k < 4:
        return spec.k / ev[-1] ** (dim / alpha)
    idx = np.arange(spec.k // 2, spec.k)
    return float(np.median((idx + 1) / ev[idx] ** (dim / alpha)))


def trace_from_spectrum(spec: Spectrum, t: float, domain: Domain, params: ProcessParams) -> TraceValue:
    """sum_{n<=k} exp(-lambda_n t) with a Weyl-envelope bound on the omitted tail.

    When the full discrete spectrum is present the tail is zero.
    """
    if not t > 0:
        raise ValidationError("t must be positive")
    ev = spec.eigenvalues
    part = float(np.sum(np.exp(-t * ev)))
    if spec.k == spec.size:
        return TraceValue(part, 0.0)
    s = params.dim / params.alpha
    c = weyl_fit(spec, params.dim, params.alpha)
    # int_{lambda_k}^inf exp(-lambda t) d(c lambda^s)
    tail = c * s * t ** (-s) * math.gamma(s) * float(special.gammaincc(s, t * ev[-1]))
    if tail > TAIL_FRACTION * part:
        raise TailTooHeavyError(f"truncation tail {tail:.3g} exceeds {TAIL_FRACTION:.1%} of {part:.4g}; "
                                "raise k or t")
    return TraceValue(part, tail)


@lru_cache(maxsize=64)
def _lattice_symbol(params: ProcessParams, h: float, n: int = 256) -> np.ndarray:
    """Symbol of the infinite-lattice operator on the n x n Brillouin-zone grid."""
    half = n // 2 - 1
    w = _offset_weights(params, h, half, half)
    full = np.zeros((n, n))
    a = np.arange(-half, half + 1)
    full[np.ix_(a % n, a % n)] = w[np.abs(a)[:, None], np.abs(a)[None, :]]
    r = np.hypot(a[:, None], a[None, :])
    full[np.ix_(a % n, a % n)] *= (r <= half)
    total = full.sum()
    sym = total - np.real(np.fft.fft2(full))
    # kernel mass beyond the truncation disk; its cosine part averages out
    sym += 2.0 * math.pi * float(ray_tail(params, half * h))
    th = 2.0 * math.pi * np.fft.fftfreq(n)
    c = stencil_coefficient(params, h) / (h * h)
    sym += c * (4.0 - 2.0 * np.cos(th)[:, None] - 2.0 * np.cos(th)[None, :])
    return sym


def lattice_free_term(params: ProcessParams, h: float, t: float) -> float:
    """Diagonal of exp(-t A) for the infinite-lattice operator, per unit area."""
    params.require_dim(2)
    sym = _lattice_symbol(params, float(h))
    return float(np.mean(np.exp(-t * sym))) / (h * h)


def corrected_trace(spec: Spectrum, t: float, domain: Domain, params: ProcessParams) -> TraceValue:
    """Trace with the lattice free term swapped for the continuum one.

    Z_c = Z_h - N h^2 q_h(t) + |D| p(t, 0): the bulk lattice artefact is
    known exactly from the lattice symbol and removed.
    """
    raw = trace_from_spectrum(spec, t, domain, params)
    h = spec.h
    shift = -spec.size * h * h * lattice_free_term(params, h, t) + domain.area * density_at_zero(params, t)
    return TraceValue(raw.value + shift, raw.tail_bound)


def weyl_counting(spec: Spectrum, lam: float) -> int:
    """N(lambda) = #{n : lambda_n <= lambda} over the computed eigenvalues."""
    return int(np.searchsorted(spec.eigenvalues, lam, side="right"))


def trust_ceiling(spectra, threshold: float = 0.03) -> int:
    """Number of leading eigenvalues on which successive refinements agree within ``threshold``.

    ``spectra`` is ordered from coarse to fine; every consecutive pair is
    compared and the smallest agreeing prefix is returned.
    """
    spectra = list(spectra)
    if len(spectra) < 2:
        raise ValidationError("need at least two refinements")
    ceiling = min(s.k for s in spectra)
    for a, b in zip(spectra[:-1], spectra[1:]):
        n = min(a.k, b.k)
        rel = np.abs(a.eigenvalues[:n] - b.eigenvalues[:n]) / b.eigenvalues[:n]
        bad = np.nonzero(rel > threshold)[0]
        ceiling = min(ceiling, int(bad[0]) if len(bad) else n)
    return ceiling
