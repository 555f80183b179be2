"""Invariant suite behind the ``verify`` subcommand.

Every check is a two-route comparison or a property with a stated
tolerance; Monte Carlo checks use 3 standard errors.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .density.exponent import char_exponent
from .density.hankel import free_density
from .geometry import Annulus, Disk
from .levy import PsiProfile, levy_density, psi, psi_fast, sigma_mass
from .montecarlo.estimators import (EstimateWithError, PathConfig, estimate_f_H_profile, estimate_r_D,
                                    ikeda_watanabe_check)
from .montecarlo.samplers import sample_increment
from .params import ProcessParams


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _z(a, b) -> float:
    se = math.hypot(a.stderr, b.stderr)
    return abs(a.value - b.value) / se if se > 0 else (0.0 if a.value == b.value else math.inf)


def check_characteristic_function(seed: int = 11, n: int = 200_000):
    out = []
    rng = np.random.default_rng(seed)
    for p, t in ((ProcessParams(1.0, 0.0), 0.3), (ProcessParams(1.0, 1.0), 0.5), (ProcessParams(1.5, 0.5), 0.2)):
        x = sample_increment(p, t, rng, n)[:, 0]
        for xi in (0.5, 2.0, 5.0):
            c = np.cos(xi * x)
            emp, se = float(c.mean()), float(c.std(ddof=1) / math.sqrt(n))
            exact = math.exp(-t * char_exponent(p, xi))
            z = abs(emp - exact) / se
            out.append(("characteristic_function", f"alpha={p.alpha},m={p.mass},t={t},xi={xi}", z <= 3.0,
                        f"empirical {emp:.6f} exact {exact:.6f} z={z:.2f}"))
    return out


def check_sigma_mass():
    out = []
    for p in (ProcessParams(1.0, 1.0), ProcessParams(0.5, 2.0), ProcessParams(1.5, 0.3)):
        s = sigma_mass(p)
        out.append(("sigma_mass", f"alpha={p.alpha},m={p.mass}", abs(s - p.mass) <= 1e-6,
                    f"l={s:.12g} m={p.mass}"))
    return out


def check_levy_domination():
    out = []
    r = np.geomspace(1e-3, 50.0, 200)
    for p in (ProcessParams(1.0, 1.0), ProcessParams(0.5, 2.0), ProcessParams(1.5, 0.3)):
        jm = levy_density(p, r)
        j0 = levy_density(p.stable(), r)
        ok = bool(np.all(jm <= j0 * (1 + 1e-12)))
        out.append(("levy_domination", f"alpha={p.alpha},m={p.mass}", ok, f"max J^m/J^0 = {np.max(jm / j0):.12f}"))
    return out


def check_psi():
    out = []
    for p in (ProcessParams(1.0, 1.0), ProcessParams(0.5, 2.0), ProcessParams(1.5, 0.3)):
        prof = PsiProfile.for_params(p)
        a = prof.order
        out.append(("psi", f"psi(0) order={a}", psi(prof, 0.0) == 1.0, f"psi(0) = {psi(prof, 0.0)!r}"))
        # envelope c^-1 <= psi e^r r^(-(d+alpha-1)/2) <= c on [1, inf): the ratio settles to
        # its Bessel limit with the first asymptotic correction as the only drift
        limit = math.sqrt(math.pi / 2.0) * 2.0 ** (1.0 - a) / math.gamma(a)
        rr = np.array([5.0, 10.0, 20.0, 40.0, 80.0])
        ratio = np.array([psi(prof, x) * math.exp(x) * x ** (0.5 - a) for x in rr]) / limit
        bound = (4 * a * a - 1) / (8 * rr)
        ok = bool(np.all(np.abs(ratio - 1.0) <= 1.5 * np.abs(bound) + 1e-9))
        out.append(("psi", f"envelope order={a}", ok, "ratio-1: " + " ".join(f"{v - 1:.2e}" for v in ratio)))
        grid = np.geomspace(1e-3, 100.0, 400)
        v = psi_fast(prof, grid)
        ok = bool(np.all(np.diff(v) <= 1e-15) and np.all(v <= 1.0))
        out.append(("psi", f"monotone order={a}", ok, f"min {v.min():.3e}"))
    return out


def check_density_scaling():
    """p^m(t, r) = m^(d/alpha) p^1(m t, m^(1/alpha) r): two independent evaluations."""
    out = []
    for a, m, t, r in ((1.0, 2.0, 0.3, 0.4), (1.4, 0.5, 0.7, 1.1), (0.8, 3.0, 0.2, 0.25)):
        lhs = free_density(ProcessParams(a, m), t, r)
        rhs = m ** (2 / a) * free_density(ProcessParams(a, 1.0), m * t, m ** (1 / a) * r)
        err = abs(lhs - rhs) / max(1.0, abs(lhs))
        out.append(("scaling", f"density alpha={a},m={m}", err <= 1e-8, f"{lhs:.12g} vs {rhs:.12g}"))
    return out


def check_remainder_scaling(cfg: PathConfig):
    """r^1 on m^(1/alpha) D at t equals m^(-d/alpha) r^m on D at t/m (independent seeds)."""
    out = []
    a, m, t = 1.0, 2.0, 0.2
    s = m ** (1 / a)
    x = np.array([0.85, 0.0])
    lhs = estimate_r_D(ProcessParams(a, 1.0), Disk(s), t, s * x, cfg)
    rhs0 = estimate_r_D(ProcessParams(a, m), Disk(1.0), t / m, x, _reseed(cfg, 1))
    f = m ** (-2 / a)
    rhs = EstimateWithError(f * rhs0.value, f * rhs0.stderr, rhs0.n_effective)
    z = _z(lhs, rhs)
    out.append(("scaling", "remainder disk alpha=1 m=2", z <= 3.0,
                f"{lhs.value:.5g}+-{lhs.stderr:.2g} vs {rhs.value:.5g}+-{rhs.stderr:.2g} z={z:.2f}"))
    return out


def _reseed(cfg: PathConfig, k: int) -> PathConfig:
    return replace(cfg, seed=cfg.seed + 7919 * k)


def check_ikeda_watanabe(cfg: PathConfig):
    out = []
    p = ProcessParams(1.0, 0.5)
    for tgt, label in ((Annulus(1.5, 3.0), "annulus(1.5,3)"), (None, "complement")):
        left, right = ikeda_watanabe_check(p, Disk(1.0), tgt, 0.05, 0.3, cfg)
        z = _z(left, right)
        out.append(("ikeda_watanabe", label, z <= 3.0,
                    f"left {left.value:.5g}+-{left.stderr:.2g} right {right.value:.5g}+-{right.stderr:.2g} z={z:.2f}"))
    return out


def check_domination(cfg: PathConfig):
    """r^m <= e^(2 l t) r^0 with l = m (sigma-mass), up to 3 combined stderr."""
    out = []
    t = 0.1
    for m in (0.5, 2.0):
        for x in ((0.9, 0.0), (0.5, 0.3)):
            rm = estimate_r_D(ProcessParams(1.0, m), Disk(1.0), t, x, cfg)
            r0 = estimate_r_D(ProcessParams(1.0, 0.0), Disk(1.0), t, x, _reseed(cfg, 2))
            f = math.exp(2 * m * t)
            slack = 3.0 * math.hypot(rm.stderr, f * r0.stderr)
            out.append(("domination", f"m={m},x={x}", rm.value <= f * r0.value + slack,
                        f"r^m {rm.value:.5g} <= {f * r0.value:.5g} + {slack:.2g}"))
    return out


def check_bound_shape(cfg: PathConfig):
    """r_H^m(t,x,x) / min(t^(-d/alpha), t psi(m^(1/alpha) delta)/delta^(d+alpha)) stays bounded."""
    p = ProcessParams(1.0, 1.0)
    prof = PsiProfile.for_params(p)
    sups = []
    for t in (0.05, 0.1, 0.2):
        # same shape window at every t: delta from t^(1/alpha)/100 to 10 t^(1/alpha)
        delta = t ** (1.0 / p.alpha) * np.geomspace(0.01, 10.0, 10)
        est = estimate_f_H_profile(p, t, delta, cfg)
        bound = np.minimum(t ** (-2.0 / p.alpha),
                           t * psi_fast(prof, p.length_scale * delta) / delta ** (2 + p.alpha))
        ratio = np.array([e.value for e in est]) / bound
        sups.append(float(ratio.max()))
    spread = max(sups) / min(sups)
    return [("bound_shape", "half-space m=1 t in {0.05,0.1,0.2}", spread <= 2.0,
             "sup ratios " + " ".join(f"{s:.4g}" for s in sups) + f" spread {spread:.3f}")]


def check_determinism(cfg: PathConfig):
    p = ProcessParams(1.0, 0.5)
    a = estimate_r_D(p, Disk(1.0), 0.1, (0.8, 0.1), cfg)
    b = estimate_r_D(p, Disk(1.0), 0.1, (0.8, 0.1), cfg)
    same = a.value == b.value and a.stderr == b.stderr
    return [("determinism", "estimate_r_D rerun", same, f"{a.value!r} vs {b.value!r}")]


def run_suite(quick: bool = True, seed: int = 2024) -> list:
    """All invariant checks; ``quick`` sizes the Monte Carlo for a few minutes."""
    n = 20_000 if quick else 100_000
    cfg = PathConfig(n, 0.002, seed=seed, antithetic=False, chunk_size=2048)
    groups = [
        check_characteristic_function,
        check_sigma_mass,
        check_levy_domination,
        check_psi,
        check_density_scaling,
        lambda: check_remainder_scaling(cfg),
        lambda: check_ikeda_watanabe(PathConfig(2 * n, 0.002, seed=seed + 1, chunk_size=2048)),
        lambda: check_domination(cfg),
        lambda: check_bound_shape(PathConfig(n, 0.002, seed=seed + 2, antithetic=True, chunk_size=2048)),
        lambda: check_determinism(PathConfig(4096, 0.005, seed=seed + 3)),
    ]
    results = []
    for g in groups:
        t0 = time.time()
        rows = g()
        dt = (time.time() - t0) / max(len(rows), 1)
        results.extend(CheckResult(*r, seconds=dt) for r in rows)
    return results
