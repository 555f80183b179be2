"""Small-time expansion of p^m(t,0) - p^0(t,0) and its uniform limit in m."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ..params import ProcessParams
from .exponent import zero_point_difference


def intermediate_count(alpha: float) -> int:
    """Largest integer k with k < 2/alpha."""
    return int(math.ceil(2.0 / alpha)) - 1


@dataclass(frozen=True)
class ExpansionTerms:
    k: int
    partial_sums: list = field(default_factory=list)
    numeric_difference: float = 0.0
    prediction: float = 0.0
    residual: float = 0.0


def density_diff_expansion(params: ProcessParams, t: float, tol: float = 1e-10) -> ExpansionTerms:
    """Compare p^m(t,0) - p^0(t,0) with its truncated power series in m t.

    The prediction is t^(-d/alpha) C1 sum_{n<=k} (m t)^n / n!; the residual
    should be O(t^((2-d)/alpha)) as t -> 0.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    k = intermediate_count(params.alpha)
    mu = params.mass * t
    scale = t ** (-params.dim / params.alpha) * params.c1
    sums, acc, term = [], 0.0, 1.0
    for n in range(1, k + 1):
        term *= mu / n
        acc += term
        sums.append(scale * acc)
    diff = zero_point_difference(params, t, tol=tol)
    pred = sums[-1] if sums else 0.0
    return ExpansionTerms(k=k, partial_sums=sums, numeric_difference=diff, prediction=pred, residual=diff - pred)


def uniform_convergence_gap(
    params_base: ProcessParams,
    mass_list,
    t_window,
    n_grid: int = 33,
    tol: float = 1e-8,
) -> list:
    """sup over t in [L, M] of p^m(t,0) - p^0(t,0), for each m in ``mass_list``.

    A dense t-grid locates the maximum, which is then polished by a bounded
    scalar search on the neighbouring grid cells.
    """
    lo, hi = (float(v) for v in t_window)
    if not 0.0 < lo < hi:
        raise ValueError("t_window must satisfy 0 < L < M")
    grid = np.linspace(lo, hi, n_grid)
    out = []
    for m in mass_list:
        p = params_base.with_mass(float(m))
        if p.mass == 0.0:
            out.append(0.0)
            continue

        def gap(t, p=p):
            return zero_point_difference(p, float(t), tol=tol)

        vals = np.array([gap(t) for t in grid])
        i = int(np.argmax(vals))
        best = float(vals[i])
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
        if 0 < i < n_grid - 1:
            res = optimize.minimize_scalar(lambda s: -gap(s), bounds=(a, b), method="bounded",
                                           options={"xatol": 1e-10 * (hi - lo)})
            best = max(best, -float(res.fun))
        out.append(best)
    return out
