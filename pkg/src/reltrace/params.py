"""Process parameters and the closed-form constants derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ValidationError

ALPHA_MAX = 1.95


def sphere_measure(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim, 2 pi^(d/2) / Gamma(d/2)."""
    return 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)


def levy_constant(dim: int, alpha: float) -> float:
    """Normalising constant of the isotropic stable Levy density r^(-d-alpha)."""
    return (
        alpha
        * 2.0 ** (alpha - 1.0)
        * math.pi ** (-dim / 2.0)
        * math.gamma((dim + alpha) / 2.0)
        / math.gamma(1.0 - alpha / 2.0)
    )


def zero_point_constant(alpha: float, dim: int) -> float:
    """p^0(1, 0) = omega_d Gamma(d/alpha) / ((2 pi)^d alpha).

    This is the volume constant of the trace expansion and the prefactor of
    every intermediate mass term.
    """
    return sphere_measure(dim) * math.gamma(dim / alpha) / ((2.0 * math.pi) ** dim * alpha)


@dataclass(frozen=True)
class ProcessParams:
    """Stability index, mass and ambient dimension of X^m.

    ``mass == 0`` selects the rotationally symmetric stable process.
    """

    alpha: float
    mass: float = 0.0
    dim: int = 2

    def __post_init__(self):
        a, m, d = self.alpha, self.mass, self.dim
        if not (isinstance(a, (int, float)) and math.isfinite(a)) or not 0.0 < a < 2.0:
            raise ValidationError(f"alpha must lie in (0, 2), got {a!r}")
        if a > ALPHA_MAX:
            raise ValidationError(f"alpha > {ALPHA_MAX} is not supported (got {a})")
        if not (isinstance(m, (int, float)) and math.isfinite(m)) or m < 0.0:
            raise ValidationError(f"mass must be a finite number >= 0, got {m!r}")
        if d not in (1, 2, 3):
            raise ValidationError(f"dim must be 1, 2 or 3, got {d!r}")
        object.__setattr__(self, "alpha", float(a))
        object.__setattr__(self, "mass", float(m))
        object.__setattr__(self, "dim", int(d))

    @property
    def c1(self) -> float:
        return zero_point_constant(self.alpha, self.dim)

    @property
    def levy_constant(self) -> float:
        return levy_constant(self.dim, self.alpha)

    @property
    def mass_scale(self) -> float:
        """m^(2/alpha): the exponential tilt of the subordinator."""
        return self.mass ** (2.0 / self.alpha)

    @property
    def length_scale(self) -> float:
        """m^(1/alpha): the inverse tempering length of the Levy density."""
        return self.mass ** (1.0 / self.alpha)

    def with_mass(self, mass: float) -> "ProcessParams":
        return replace(self, mass=mass)

    def stable(self) -> "ProcessParams":
        return replace(self, mass=0.0)

    def require_dim(self, *dims: int) -> None:
        if self.dim not in dims:
            raise ValidationError(f"operation requires dim in {dims}, got {self.dim}")
