"""Vectorised subordinator and increment samplers on numpy Generators.

The compiled kernels use the same transforms one draw at a time.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ExcessiveRejectionError, ValidationError
from ..params import ProcessParams

MIN_ACCEPTANCE = 1e-4


def sample_positive_stable(index: float, t: float, rng: np.random.Generator, size=None):
    """Positive ``index``-stable variables with E exp(-lambda S) = exp(-t lambda^index)."""
    if not 0.0 < index < 1.0:
        raise ValidationError("index must lie in (0, 1)")
    if not t > 0:
        raise ValidationError("t must be positive")
    a = index
    u = np.pi * rng.uniform(size=size)
    u = np.where(u <= 0.0, np.pi * 0.5, u)
    e = rng.exponential(size=size)
    za = (np.sin(a * u) / np.sin(u)) ** (1.0 / (1.0 - a)) * np.sin((1.0 - a) * u) / np.sin(a * u)
    return t ** (1.0 / a) * (za / e) ** ((1.0 - a) / a)


def acceptance_probability(params: ProcessParams, dt: float) -> float:
    """Acceptance rate of the tilting step, exp(-m dt)."""
    return math.exp(-params.mass * dt)


def check_acceptance(params: ProcessParams, dt: float) -> None:
    if acceptance_probability(params, dt) < MIN_ACCEPTANCE:
        raise ExcessiveRejectionError(
            f"tilting acceptance exp(-m dt) = {acceptance_probability(params, dt):.3g} < {MIN_ACCEPTANCE}; "
            "shrink the time step")


def sample_tempered_subordinator(params: ProcessParams, dt: float, rng: np.random.Generator, size=None,
                                 return_acceptance: bool = False):
    """Increments with E exp(-lambda T) = exp(-dt[(lambda + m^(2/alpha))^(alpha/2) - m]).

    Positive (alpha/2)-stable proposals are kept with probability
    exp(-m^(2/alpha) S); the overall acceptance rate is exp(-m dt).
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    a = 0.5 * params.alpha
    n = 1 if size is None else int(np.prod(size))
    c = params.mass_scale
    if c == 0.0:
        out = sample_positive_stable(a, dt, rng, size=n)
        acc = 1.0
    else:
        check_acceptance(params, dt)
        p = acceptance_probability(params, dt)
        chunks, kept, proposed = [], 0, 0
        while kept < n:
            m = int(1.2 * (n - kept) / p) + 16
            s = sample_positive_stable(a, dt, rng, size=m)
            keep = s[rng.uniform(size=m) < np.exp(-c * s)]
            chunks.append(keep)
            kept += len(keep)
            proposed += m
        out = np.concatenate(chunks)[:n]
        acc = kept / proposed
    out = out[0] if size is None else out.reshape(size)
    return (out, acc) if return_acceptance else out


def sample_increment(params: ProcessParams, dt: float, rng: np.random.Generator, size=None):
    """X step = sqrt(2T) N_d with characteristic function exp(-dt Phi)."""
    n = 1 if size is None else int(size)
    t = np.atleast_1d(sample_tempered_subordinator(params, dt, rng, size=n))
    z = rng.standard_normal((n, params.dim))
    out = np.sqrt(2.0 * t)[:, None] * z
    return out[0] if size is None else out
