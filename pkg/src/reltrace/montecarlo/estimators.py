"""Monte Carlo estimators of exit functionals and killed-semigroup remainders."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..density.exponent import density_at_zero
from ..density.subordination import subordinated_density
from ..density.tables import CACHE_ENV, DensityStack, build_density_stack
from ..errors import (DomainError, ExcessiveRejectionError, GeometryError, TailFitError, UnsupportedDomainError,
                      ValidationError)
from ..geometry import Annulus, ConvexPolygon, Disk, Domain, HalfSpace
from ..levy import ray_tail
from ..params import ProcessParams
from . import kernels
from .samplers import MIN_ACCEPTANCE, check_acceptance

MAX_TRIES = int(10 / MIN_ACCEPTANCE)
STRATA = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class PathConfig:
    n_paths: int
    base_step: float
    boundary_refine: float = 0.5
    seed: int = 0
    antithetic: bool = False
    max_refine: int = 12
    chunk_size: int = 1024
    workers: int = 1

    def __post_init__(self):
        if int(self.n_paths) < 1:
            raise ValidationError("n_paths must be at least 1")
        if not self.base_step > 0:
            raise ValidationError("base_step must be positive")
        if not 0.0 < self.boundary_refine < 1.0:
            raise ValidationError("boundary_refine must lie in (0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.chunk_size < 2 or self.chunk_size % 2:
            raise ValidationError("chunk_size must be even and >= 2")
        if int(self.max_refine) < 0 or int(self.workers) < 1:
            raise ValidationError("max_refine >= 0 and workers >= 1 required")

    @property
    def bias_note(self) -> str:
        return (f"dt={self.base_step:g}*{self.boundary_refine:g}^k (k<={self.max_refine}) "
                f"while delta<3dt^(1/alpha)")

    def with_step(self, step: float) -> "PathConfig":
        from dataclasses import replace
        return replace(self, base_step=step)


@dataclass(frozen=True)
class ExitSample:
    tau: float
    exit_position: tuple
    alive: bool


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    n_effective: int
    bias_note: str = ""

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValidationError("stderr must be nonnegative")

    def combined_stderr(self, other: "EstimateWithError") -> float:
        return math.hypot(self.stderr, other.stderr)


def _chunk_seed(*keys: int) -> int:
    # numba's legacy generator takes a 32-bit seed
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, dtype=np.uint32)[0])


def _map(func, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


_STACKS: dict = {}


def density_stack(params: ProcessParams, horizon: float, cache_dir=None) -> DensityStack:
    """Stack covering p^m(s, .) for s <= horizon; memoised per process."""
    key = (params.alpha, params.dim, params.mass, float(horizon))
    st = _STACKS.get(key)
    if st is None:
        cache_dir = cache_dir or os.environ.get(CACHE_ENV)
        st = build_density_stack(params, horizon, cache_dir=cache_dir)
        _STACKS[key] = st
    return st


def _require_planar(params: ProcessParams):
    if params.dim != 2:
        raise UnsupportedDomainError("path simulation is implemented for d = 2")


def _pair_means(x: np.ndarray, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return x
    n = len(x) - len(x) % 2
    out = 0.5 * (x[0:n:2] + x[1:n:2])
    return np.concatenate([out, x[n:]]) if n < len(x) else out


def _summarise(samples: np.ndarray, note: str) -> EstimateWithError:
    n = len(samples)
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return EstimateWithError(mean, se, n, note)


# --- bounded domains -------------------------------------------------------

def _exit_task(task):
    (kind, spec, starts, t, alpha, c, cfg_tuple, seed, lv, ts, meta) = task
    base, refine, kmax, anti = cfg_tuple
    n = len(starts)
    contrib, tau, ex, ey = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
    status = kernels.exit_paths(kind, spec, starts, t, alpha, c, base, refine, kmax, anti, MAX_TRIES, seed,
                                lv, ts, meta, contrib, tau, ex, ey)
    if status:
        raise ExcessiveRejectionError("subordinator proposals exhausted; shrink base_step")
    return contrib, tau, ex, ey


def _run_exits(params, domain, starts, t, cfg, stream, cache_dir=None):
    _require_planar(params)
    check_acceptance(params, cfg.base_step)
    stack = density_stack(params, t, cache_dir)
    lv, ts, meta = stack.kernel_arrays()
    kind, spec = domain.kernel_spec()
    cfg_tuple = (cfg.base_step, cfg.boundary_refine, cfg.max_refine, cfg.antithetic)
    tasks = []
    for ci, lo in enumerate(range(0, len(starts), cfg.chunk_size)):
        chunk = np.ascontiguousarray(starts[lo:lo + cfg.chunk_size])
        tasks.append((kind, spec, chunk, t, params.alpha, params.mass_scale, cfg_tuple,
                      _chunk_seed(cfg.seed, *stream, ci), lv, ts, meta))
    parts = _map(_exit_task, tasks, cfg.workers)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


def _check_start(domain: Domain, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise DomainError("start point must be planar")
    if not domain.contains(x):
        raise DomainError(f"start point {x.tolist()} is not inside the domain")
    return x


def simulate_exits(params: ProcessParams, domain: Domain, x, horizon: float, cfg: PathConfig) -> list:
    """Raw exit records for ``cfg.n_paths`` paths from x, censored at ``horizon``."""
    x = _check_start(domain, x)
    starts = np.tile(x, (cfg.n_paths, 1))
    _, tau, ex, ey = _run_exits(params, domain, starts, horizon, cfg, (1,))
    return [ExitSample(float(tt), (float(a), float(b)), not math.isfinite(tt)) for tt, a, b in zip(tau, ex, ey)]


def estimate_r_D(params: ProcessParams, domain: Domain, t: float, x, cfg: PathConfig,
                 cache_dir=None) -> EstimateWithError:
    """E_x[t > tau; p^m(t - tau, X_tau, x)] with its standard error."""
    if not t > 0:
        raise ValidationError("t must be positive")
    x = _check_start(domain, x)
    starts = np.tile(x, (cfg.n_paths, 1))
    contrib, *_ = _run_exits(params, domain, starts, t, cfg, (2,), cache_dir)
    return _summarise(_pair_means(contrib, cfg.antithetic), cfg.bias_note)


# --- half-space ----------------------------------------------------------------

def _halfspace_task(task):
    levels, t, alpha, c, cfg_tuple, seed, lv, ts, meta, n, weights = task
    base, refine, kmax, anti = cfg_tuple
    contrib = np.empty((n, len(levels)))
    status = kernels.halfspace_levels(levels, t, alpha, c, base, refine, kmax, anti, MAX_TRIES, seed,
                                      lv, ts, meta, contrib)
    if status:
        raise ExcessiveRejectionError("subordinator proposals exhausted; shrink base_step")
    if anti:
        m = n - n % 2
        contrib = np.vstack([0.5 * (contrib[0:m:2] + contrib[1:m:2]), contrib[m:]])
    q = contrib @ weights if weights is not None else np.zeros(len(contrib))
    return (contrib.sum(axis=0), (contrib**2).sum(axis=0), float(q.sum()), float((q**2).sum()), len(contrib))


def _halfspace_sums(params, t, levels, cfg, weights=None, stream=(3,), cache_dir=None):
    _require_planar(params)
    check_acceptance(params, cfg.base_step)
    levels = np.asarray(levels, dtype=float)
    if np.any(levels <= 0) or np.any(np.diff(levels) <= 0):
        raise ValidationError("half-space depths must be positive and increasing")
    stack = density_stack(params, t, cache_dir)
    lv, ts, meta = stack.kernel_arrays()
    cfg_tuple = (cfg.base_step, cfg.boundary_refine, cfg.max_refine, cfg.antithetic)
    tasks = []
    for ci, lo in enumerate(range(0, cfg.n_paths, cfg.chunk_size)):
        n = min(cfg.chunk_size, cfg.n_paths - lo)
        tasks.append((levels, t, params.alpha, params.mass_scale, cfg_tuple, _chunk_seed(cfg.seed, *stream, ci),
                      lv, ts, meta, n, weights))
    parts = _map(_halfspace_task, tasks, cfg.workers)
    s1 = np.sum([p[0] for p in parts], axis=0)
    s2 = np.sum([p[1] for p in parts], axis=0)
    q1 = math.fsum(p[2] for p in parts)
    q2 = math.fsum(p[3] for p in parts)
    n = sum(p[4] for p in parts)
    return s1, s2, q1, q2, n


def _moments_to_estimate(s1, s2, n, note):
    mean = s1 / n
    var = np.maximum(s2 / n - mean**2, 0.0) * n / max(n - 1, 1)
    return mean, np.sqrt(var / n)


def estimate_f_H_profile(params: ProcessParams, t: float, r_levels, cfg: PathConfig,
                         cache_dir=None) -> list:
    """f_H^m(t, r) at every depth in ``r_levels`` from a single path ensemble."""
    if not t > 0:
        raise ValidationError("t must be positive")
    s1, s2, _, _, n = _halfspace_sums(params, t, r_levels, cfg, cache_dir=cache_dir)
    mean, se = _moments_to_estimate(s1, s2, n, cfg.bias_note)
    return [EstimateWithError(max(float(m), 0.0), float(s), n, cfg.bias_note) for m, s in zip(mean, se)]


def estimate_f_H(params: ProcessParams, t: float, r: float, cfg: PathConfig, cache_dir=None) -> EstimateWithError:
    """f_H^m(t, r) = r_H^m(t, (r, 0), (r, 0)) for H = {x_1 > 0}."""
    if not r > 0:
        raise ValidationError("r must be positive")
    return estimate_f_H_profile(params, t, [r], cfg, cache_dir)[0]


def default_c2_grid(r_max: float = 8.0) -> np.ndarray:
    return np.concatenate([np.linspace(0.01, 0.1, 10)[:-1], np.geomspace(0.1, r_max, 40)])


def _c2_weights(r_grid: np.ndarray, d: int, alpha: float):
    """Linear functional: trapezoid on [r_1, r_max] plus the fitted power tail."""
    w = np.zeros(len(r_grid))
    h = np.diff(r_grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    # left node of the sliver trapezoid [0, r_1]
    w[0] += 0.5 * r_grid[0]
    p = d + alpha
    rmax = r_grid[-1]
    tail = rmax ** (1.0 - p) / (p - 1.0)
    for j in range(-3, 0):
        # c = mean_j f(r_j) r_j^p
        w[j] += tail * r_grid[j] ** p / 3.0
    return w


def compute_C2(alpha: float, d: int, cfg: PathConfig, r_grid=None, cache_dir=None) -> EstimateWithError:
    """C2 = int_0^inf f_H^0(1, r) dr at one base step.

    Trapezoid over ``r_grid`` with the value p^0(1, 0) at r = 0, and the tail
    beyond r_max from c r^(-d-alpha) fitted on the last three nodes.
    """
    params = ProcessParams(alpha, 0.0, d)
    r_grid = default_c2_grid() if r_grid is None else np.asarray(r_grid, dtype=float)
    if r_grid[0] <= 0 or r_grid[-1] < 4 or np.any(np.diff(r_grid) <= 0):
        raise ValidationError("r_grid must be increasing, positive and reach r_max >= 4")
    w = _c2_weights(r_grid, d, alpha)
    s1, s2, q1, q2, n = _halfspace_sums(params, 1.0, r_grid, cfg, weights=w, stream=(4,), cache_dir=cache_dir)
    mean, se = _moments_to_estimate(s1, s2, n, "")
    last = mean[-3:]
    if np.any(last <= 0):
        raise TailFitError("non-positive f_H at the tail nodes")
    slope = np.polyfit(np.log(r_grid[-3:]), np.log(last), 1)[0]
    # the far field decays like r^(-d-2 alpha); the r^(-d-alpha) tail is then an upper
    # bound, and it fails only if the last nodes decay visibly slower than that
    if np.any(np.diff(last) >= 0) or slope > -0.65 * (d + alpha):
        raise TailFitError(f"tail slope {slope:.3f} does not show r^(-{d + alpha:g}) decay")
    sliver = 0.5 * r_grid[0] * density_at_zero(params, 1.0)
    qm = q1 / n
    qse = math.sqrt(max(q2 / n - qm * qm, 0.0) / max(n - 1, 1))
    return EstimateWithError(float(qm + sliver), qse, n, cfg.bias_note)


def compute_C2_extrapolated(alpha: float, d: int, cfg: PathConfig, r_grid=None, cache_dir=None):
    """Richardson in the base step: 2 C(h/2) - C(h), assuming O(h) step bias.

    Returns (extrapolated, coarse, fine).
    """
    coarse = compute_C2(alpha, d, cfg, r_grid, cache_dir)
    fine = compute_C2(alpha, d, cfg.with_step(0.5 * cfg.base_step), r_grid, cache_dir)
    val = 2.0 * fine.value - coarse.value
    se = math.hypot(2.0 * fine.stderr, coarse.stderr)
    note = f"richardson({cfg.base_step:g},{0.5 * cfg.base_step:g})"
    return EstimateWithError(max(val, 0.0), se, coarse.n_effective + fine.n_effective, note), coarse, fine


# --- domain-integrated remainder -------------------------------------------

def strata_edges(domain: Domain, t: float, alpha: float) -> list:
    s = t ** (1.0 / alpha)
    cap = domain.inradius
    edges = [0.0] + [min(q * s, cap) for q in STRATA] + [cap]
    out = [edges[0]]
    for e in edges[1:]:
        if e > out[-1]:
            out.append(e)
    return out


def estimate_trace_remainder(params: ProcessParams, domain: Domain, t: float, cfg: PathConfig,
                             cache_dir=None) -> EstimateWithError:
    """int_D r_D^m(t, x, x) dx, stratified in delta_D(x) / t^(1/alpha)."""
    if not domain.bounded:
        raise UnsupportedDomainError("trace remainder needs a bounded domain")
    if not t > 0:
        raise ValidationError("t must be positive")
    edges = strata_edges(domain, t, params.alpha)
    s = t ** (1.0 / params.alpha)
    areas = np.array([domain.shell_area(a, b) for a, b in zip(edges[:-1], edges[1:])])
    # the integrand decays like (1 + q/s)^(-d-alpha) away from the boundary
    weight = areas * (1.0 + np.array(edges[:-1]) / s) ** (-(params.dim + params.alpha))
    alloc = np.maximum(np.floor(cfg.n_paths * weight / weight.sum()).astype(int), 16)
    alloc += alloc % 2
    total, var, n_eff = 0.0, 0.0, 0
    for k, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 5, k]))
        m = alloc[k]
        pts = domain.sample_shell(lo, hi, m // 2 if cfg.antithetic else m, rng)
        starts = np.repeat(pts, 2, axis=0) if cfg.antithetic else pts
        contrib, *_ = _run_exits(params, domain, starts, t, cfg, (6, k), cache_dir)
        samples = _pair_means(contrib, cfg.antithetic)
        est = _summarise(samples, "")
        total += areas[k] * float(np.mean(samples))
        var += (areas[k] * est.stderr) ** 2
        n_eff += len(samples)
    return EstimateWithError(float(total), math.sqrt(var), n_eff, cfg.bias_note + "; strata " + ",".join(
        f"{e:.4g}" for e in edges))


# --- Ikeda-Watanabe -------------------------------------------------------------

_GL32 = np.polynomial.legendre.leggauss(32)


def _annulus_kernel_table(params: ProcessParams, target: Annulus, r_max: float, n: int = 241):
    """K(rho) = int_target J(|y - z|) dz for |y - center| = rho < r_in."""
    th = np.linspace(0.0, 2.0 * math.pi, 257)[:-1]
    w = 2.0 * math.pi / len(th)
    grid = np.linspace(0.0, r_max, n)
    vals = np.empty(n)
    for i, rho in enumerate(grid):
        b = rho * np.cos(th)
        r1 = -b + np.sqrt(b * b - (rho * rho - target.r_in**2))
        r2 = -b + np.sqrt(b * b - (rho * rho - target.r_out**2))
        vals[i] = w * float(np.sum(ray_tail(params, r1) - ray_tail(params, r2)))
    return grid, vals


def _free_term(params, domain, x, target, grid, vals, t1, t2):
    """int_{t1}^{t2} ds int_D p(s, x, y) K(y) dy in polar coordinates about x."""
    gx, gw = _GL32
    ns = 24
    sx, sw = np.polynomial.legendre.leggauss(ns)
    s_nodes = t1 + 0.5 * (t2 - t1) * (sx + 1.0)
    s_w = 0.5 * (t2 - t1) * sw
    phis = np.linspace(0.0, 2.0 * math.pi, 129)[:-1]
    pw = 2.0 * math.pi / len(phis)
    rexit = domain.ray_exit(x, phis)
    total = 0.0
    for s, ws in zip(s_nodes, s_w):
        scale = s ** (1.0 / params.alpha)
        inner = 0.0
        for phi, re in zip(phis, rexit):
            # geometric radial panels resolve the kernel at scale s^(1/alpha)
            edges = np.concatenate([[0.0], np.geomspace(min(scale / 20, re / 2), re, 12)])
            lo, hi = edges[:-1], edges[1:]
            half = 0.5 * (hi - lo)
            rr = (lo[:, None] + half[:, None] * (gx[None, :] + 1.0)).ravel()
            ww = (half[:, None] * gw[None, :]).ravel()
            y = x[None, :] + rr[:, None] * np.array([math.cos(phi), math.sin(phi)])[None, :]
            k = np.interp(np.hypot(y[:, 0] - target.center[0], y[:, 1] - target.center[1]), grid, vals)
            p = subordinated_density(params, float(s), rr)
            inner += pw * float(np.sum(ww * p * k * rr))
        total += ws * inner
    return total


def _iw_task(task):
    kind, spec, x, t1, t2, alpha, c, cfg_tuple, seed, tgt, kg, kv, n = task
    base, refine, kmax = cfg_tuple
    hit, post = np.empty(n), np.empty(n)
    status = kernels.jump_exit_paths(kind, spec, x[0], x[1], t1, t2, alpha, c, base, refine, kmax, MAX_TRIES,
                                     seed, tgt, kg, kv, n, hit, post)
    if status:
        raise ExcessiveRejectionError("subordinator proposals exhausted; shrink base_step")
    return hit, post


def _domain_reach(domain: Domain, center) -> float:
    c = np.asarray(center, dtype=float)
    if isinstance(domain, Disk):
        return float(np.hypot(*(np.asarray(domain.center) - c))) + domain.radius
    if isinstance(domain, ConvexPolygon):
        return float(np.max(np.hypot(*(domain.vertices - c).T)))
    raise UnsupportedDomainError("Ikeda-Watanabe check needs a bounded disk or polygon")


def ikeda_watanabe_check(params: ProcessParams, domain: Domain, target, t1: float, t2: float, cfg: PathConfig,
                         x=None):
    """Both sides of the jump-exit formula for paths started at x.

    Left: frequency of {t1 < tau < t2, X_tau in target}.  Right:
    int_D int_{t1}^{t2} p_D(s, x, y) ds K(y) dy with p_D = p - r_D; the free
    part by quadrature and the r_D part by the strong Markov property, as the
    occupation of D by the freely continued path after tau.  With
    ``target=None`` (the whole complement) the right side is an independent
    estimate of P(t1 < tau < t2).  Independent seed streams on each side.
    """
    _require_planar(params)
    if not 0 <= t1 <= t2:
        raise ValidationError("need 0 <= t1 <= t2")
    if isinstance(domain, HalfSpace) or not domain.bounded:
        raise UnsupportedDomainError("Ikeda-Watanabe check needs a bounded domain")
    if x is None:
        x = np.array(domain.center) if isinstance(domain, Disk) else domain.vertices.mean(axis=0)
    x = _check_start(domain, x)
    if t1 == t2:
        zero = EstimateWithError(0.0, 0.0, 0, "empty time window")
        return zero, zero
    check_acceptance(params, cfg.base_step)
    kind, spec = domain.kernel_spec()
    if target is None:
        tgt = np.array([0.0, 0.0, 0.0, -1.0])
        kg, kv = np.zeros(2), np.zeros(2)
    else:
        if not isinstance(target, Annulus):
            raise UnsupportedDomainError("targets are annuli (or None for the complement)")
        reach = _domain_reach(domain, target.center)
        if reach >= target.r_in:
            raise GeometryError("target must keep a positive distance from the domain")
        tgt = target.kernel_spec()
        kg, kv = _annulus_kernel_table(params, target, reach)
    cfg_tuple = (cfg.base_step, cfg.boundary_refine, cfg.max_refine)

    def run(stream):
        tasks = []
        for ci, lo in enumerate(range(0, cfg.n_paths, cfg.chunk_size)):
            n = min(cfg.chunk_size, cfg.n_paths - lo)
            tasks.append((kind, spec, x, float(t1), float(t2), params.alpha, params.mass_scale, cfg_tuple,
                          _chunk_seed(cfg.seed, stream, ci), tgt, kg, kv, n))
        parts = _map(_iw_task, tasks, cfg.workers)
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    hit_l, _ = run(7)
    left = _summarise(hit_l, cfg.bias_note)
    hit_r, post = run(8)
    if target is None:
        right = _summarise(hit_r, cfg.bias_note + "; direct exit frequency")
    else:
        free = _free_term(params, domain, x, target, kg, kv, float(t1), float(t2))
        est = _summarise(post, "")
        right = EstimateWithError(float(free - np.mean(post)), est.stderr, len(post),
                                  cfg.bias_note + "; free term by quadrature minus post-exit occupation")
    return left, right
