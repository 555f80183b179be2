"""Tabulated radial densities and their on-disk cache.

Two products live here.  :class:`RadialDensityTable` is p^m(t, .) at one
time.  :class:`DensityStack` serves the Monte Carlo kernels: by the scaling
p^m(s, r) = s^(-d/alpha) p^{ms}(1, r s^(-1/alpha)) every time s maps to the
unit-time density at mass mu = m s, so one stack over a geometric mu-grid
covers all exit times.
"""

from __future__ import annotations

import hashlib
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..artifacts import SCHEMA_VERSION
from ..errors import CacheVersionError, QuadratureError, TableRangeError, ValidationError
from ..params import ProcessParams
from .exponent import density_at_zero
from .hankel import free_density
from .subordination import _grid

CACHE_VERSION = 3
CACHE_ENV = "RELTRACE_CACHE_DIR"
TAIL_CUTOFF = 1e-14
VALUE_FLOOR = 1e-250


def _levy_stable(params: ProcessParams, r):
    # J^0 upper-bounds J^m; enough to place the outer table radius
    return params.levy_constant * np.asarray(r, dtype=float) ** (-params.dim - params.alpha)


def outer_radius(params: ProcessParams, t: float, cutoff: float = TAIL_CUTOFF) -> float:
    """Radius beyond which t J(r) < cutoff (J^0 bound, so valid for every m)."""
    return (t * params.levy_constant / cutoff) ** (1.0 / (params.dim + params.alpha))


@dataclass(frozen=True)
class RadialDensityTable:
    params: ProcessParams
    time: float
    radii: np.ndarray
    values: np.ndarray
    tail_exponent: float
    tolerance: float = 1e-9
    _log: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or len(r) < 3:
            raise ValidationError("radii and values must be matching 1-d arrays")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValidationError("radii must start at 0 and increase")
        if np.any(v <= 0):
            raise ValidationError("table values must be strictly positive")
        # unimodality, up to the construction tolerance
        slack = self.tolerance * self.time ** (-self.params.dim / self.params.alpha)
        if np.any(np.diff(v) > slack):
            raise ValidationError("table values must be nonincreasing in radius")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_log", np.log(v))

    def __call__(self, r):
        """Interpolated density: linear in log-density, in log r past the first node."""
        rr = np.asarray(r, dtype=float)
        if np.any(rr < 0):
            raise ValidationError("radius must be nonnegative")
        out = np.empty(rr.shape)
        radii, logv = self.radii, self._log
        inner = rr < radii[1]
        w = rr[inner] / radii[1]
        out[inner] = (1 - w) * logv[0] + w * logv[1]
        mid = ~inner & (rr <= radii[-1])
        out[mid] = np.interp(np.log(rr[mid]), np.log(radii[1:]), logv[1:])
        far = rr > radii[-1]
        out[far] = logv[-1] - self.tail_exponent * np.log(rr[far] / radii[-1])
        res = np.exp(out)
        return res if res.ndim else float(res)

    def cache_key(self) -> str:
        return cache_key(self.params, self.time, self.tolerance)


def cache_key(params: ProcessParams, t: float, tol: float) -> str:
    # the output schema is part of the key: a schema bump orphans old tables
    text = f"v{CACHE_VERSION}|s{SCHEMA_VERSION}|{params.alpha!r}|{params.mass!r}|{params.dim}|{float(t)!r}|{float(tol)!r}"
    return hashlib.sha256(text.encode()).hexdigest()[:24]


def table_radii(params: ProcessParams, t: float, per_decade: int = 96) -> np.ndarray:
    lo = t ** (1.0 / params.alpha) / 100.0
    hi = max(outer_radius(params, t), 10 * lo)
    n = int(math.ceil(per_decade * math.log10(hi / lo))) + 1
    return np.concatenate([[0.0], np.geomspace(lo, hi, n)])


def build_density_table(
    params: ProcessParams,
    t: float,
    tol: float = 1e-9,
    per_decade: int = 96,
    cache_dir=None,
    n_checks: int = 3,
) -> RadialDensityTable:
    """Tabulate p^m(t, .) on the geometric grid, reading/writing the cache.

    Values come from the subordination mixture; a few radii are re-evaluated
    by Fourier inversion and must agree within ``tol`` (unit-time scale).
    """
    if not t > 0:
        raise ValidationError("t must be positive")
    if cache_dir is not None:
        hit = load_table(params, t, tol, cache_dir)
        if hit is not None:
            return hit
    radii = table_radii(params, t, per_decade)
    scale = t ** (1.0 / params.alpha)
    g = _grid(params.alpha, params.dim, float(radii[-1] / scale))
    values = g.density([params.mass * t], radii / scale)[0] * scale ** (-params.dim)
    unit = t ** (-params.dim / params.alpha)
    zero = density_at_zero(params, t, tol=min(tol, 1e-10))
    if abs(values[0] - zero) > tol * unit * max(1.0, zero / unit):
        raise QuadratureError("table value at 0 disagrees with density_at_zero", values[0], abs(values[0] - zero))
    for idx in np.linspace(1, len(radii) // 3, n_checks).astype(int):
        ref = free_density(params, t, float(radii[idx]), tol=tol)
        if abs(values[idx] - ref) > 10 * tol * unit * max(1.0, ref / unit):
            raise QuadratureError("subordination and Fourier routes disagree", values[idx], abs(values[idx] - ref))
    values = np.maximum.accumulate(values[::-1])[::-1]
    # with m > 0 the decay is exponential and the power-law outer radius overshoots;
    # drop the underflowed end of the grid
    keep = values > VALUE_FLOOR * unit
    radii, values = radii[keep], values[keep]
    tail = -math.log(values[-1] / values[-2]) / math.log(radii[-1] / radii[-2])
    table = RadialDensityTable(params, float(t), radii, values, tail, tol)
    if cache_dir is not None:
        save_table(table, cache_dir)
    return table


def _atomic_savez(path: Path, **arrays):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_table(table: RadialDensityTable, cache_dir) -> Path:
    path = Path(cache_dir) / f"density_{table.cache_key()}.npz"
    p = table.params
    _atomic_savez(
        path,
        version=np.array(CACHE_VERSION),
        meta=np.array([p.alpha, p.mass, p.dim, table.time, table.tolerance, table.tail_exponent]),
        radii=table.radii,
        values=table.values,
    )
    return path


def load_table(params: ProcessParams, t: float, tol: float, cache_dir):
    path = Path(cache_dir) / f"density_{cache_key(params, t, tol)}.npz"
    if not path.exists():
        return None
    with np.load(path) as z:
        version = int(z["version"])
        if version != CACHE_VERSION:
            raise CacheVersionError(f"{path.name}: cache version {version}, expected {CACHE_VERSION}")
        meta = z["meta"]
        if (meta[0], meta[1], int(meta[2]), meta[3], meta[4]) != (params.alpha, params.mass, params.dim, t, tol):
            raise CacheVersionError(f"{path.name}: header does not match the requested key")
        return RadialDensityTable(params, float(t), z["radii"].copy(), z["values"].copy(), float(meta[5]), float(tol))


@dataclass(frozen=True)
class DensityStack:
    """log p^mu(1, rho) on a (mu, rho) grid for the compiled path kernels.

    Row 0 is mu = 0; rows 1.. are mu_lo * 10^(k/per_decade) up to mass *
    horizon.  Column 0 is rho = 0; columns 1.. are geometric from ``rho_lo``.
    """

    alpha: float
    dim: int
    mass: float
    horizon: float
    log_values: np.ndarray
    rho_lo: float
    rho_step: float
    mu_lo: float
    mu_step: float
    tail_slopes: np.ndarray

    @property
    def n_rho(self) -> int:
        return self.log_values.shape[1] - 1

    @property
    def mu_hi(self) -> float:
        if self.log_values.shape[0] == 1:
            return 0.0
        return self.mu_lo * math.exp(self.mu_step * (self.log_values.shape[0] - 2))

    def kernel_arrays(self):
        return (self.log_values, self.tail_slopes,
                np.array([self.alpha, float(self.dim), self.mass, self.rho_lo, self.rho_step, self.mu_lo, self.mu_step]))

    def density(self, s, r):
        """p^m(s, r) by the same interpolation the kernels use (vectorised)."""
        from ..montecarlo.kernels import stack_density

        s = np.broadcast_to(np.asarray(s, dtype=float), np.shape(r))
        r = np.asarray(r, dtype=float)
        lv, ts, meta = self.kernel_arrays()
        out = np.array([stack_density(float(a), float(b), lv, ts, meta) for a, b in zip(s.ravel(), r.ravel())])
        if self.mass * float(np.max(s, initial=0.0)) > self.mu_hi * (1 + 1e-12) and self.mass > 0:
            raise TableRangeError("time beyond the stack horizon")
        return out.reshape(np.shape(r))


def stack_key(alpha: float, dim: int, mass: float, horizon: float) -> str:
    text = f"stack-v{CACHE_VERSION}|s{SCHEMA_VERSION}|{alpha!r}|{dim}|{mass!r}|{float(horizon)!r}"
    return hashlib.sha256(text.encode()).hexdigest()[:24]


def build_density_stack(
    params: ProcessParams,
    horizon: float,
    rho_per_decade: int = 96,
    mu_per_decade: int = 64,
    mu_lo: float = 1e-6,
    cache_dir=None,
) -> DensityStack:
    """Unit-time density stack covering exit-time gaps s in (0, horizon]."""
    a, d, m = params.alpha, params.dim, params.mass
    if cache_dir is not None:
        path = Path(cache_dir) / f"stack_{stack_key(a, d, m, horizon)}.npz"
        if path.exists():
            with np.load(path) as z:
                if int(z["version"]) != CACHE_VERSION:
                    raise CacheVersionError(f"{path.name}: stale cache version")
                f = z["scalars"]
                return DensityStack(a, d, m, float(horizon), z["log_values"].copy(), f[0], f[1], f[2], f[3],
                                    z["tail_slopes"].copy())
    rho_lo = 1e-2
    rho_hi = outer_radius(params.stable(), 1.0)
    n_rho = int(math.ceil(rho_per_decade * math.log10(rho_hi / rho_lo))) + 1
    rho = np.concatenate([[0.0], np.geomspace(rho_lo, rho_hi, n_rho)])
    rho_step = math.log(rho[2] / rho[1])
    mu_top = m * horizon
    if mu_top > mu_lo:
        n_mu = int(math.ceil(mu_per_decade * math.log10(mu_top / mu_lo))) + 1
        mus = np.concatenate([[0.0], mu_lo * np.exp(np.arange(n_mu) * math.log(10) / mu_per_decade)])
    else:
        mus = np.array([0.0])
    g = _grid(a, d, float(rho_hi))
    vals = g.density(mus, rho)
    vals = np.maximum(vals, 1e-300)
    logv = np.log(np.minimum.accumulate(vals, axis=1))
    slopes = (logv[:, -1] - logv[:, -2]) / rho_step
    stack = DensityStack(a, d, m, float(horizon), logv, rho_lo, rho_step, mu_lo, math.log(10) / mu_per_decade, slopes)
    if cache_dir is not None:
        _atomic_savez(
            Path(cache_dir) / f"stack_{stack_key(a, d, m, horizon)}.npz",
            version=np.array(CACHE_VERSION),
            scalars=np.array([rho_lo, rho_step, mu_lo, stack.mu_step]),
            log_values=logv,
            tail_slopes=slopes,
        )
    return stack
