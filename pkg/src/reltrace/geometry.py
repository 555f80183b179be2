"""Planar domains: distance to the complement, inner domains, ray exits and
the boundary-layer functional."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density.exponent import checked_quad
from .errors import DomainError, GeometryError, UnsupportedDomainError

# integer codes shared with the Monte Carlo kernels
KIND_PLANE, KIND_DISK, KIND_POLYGON, KIND_HALFSPACE = 0, 1, 2, 3


def _as_points(x) -> tuple[np.ndarray, bool]:
    p = np.asarray(x, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[-1] != 2:
        raise DomainError("points must be planar")
    return p, single


class Domain:
    """Common interface; concrete kinds below."""

    kind = "abstract"
    bounded = True
    complement_empty = False

    @property
    def area(self) -> float:
        raise NotImplementedError

    @property
    def perimeter(self) -> float:
        raise NotImplementedError

    @property
    def c11_characteristics(self):
        return None

    @property
    def inradius(self) -> float:
        raise NotImplementedError

    def distance(self, x):
        """Euclidean distance to the complement (0 outside)."""
        raise NotImplementedError

    def contains(self, x):
        d = self.distance(x)
        return d > 0 if np.ndim(d) else bool(d > 0)

    def ray_exit(self, x, theta) -> np.ndarray:
        raise NotImplementedError

    def angular_features(self, x):
        """(breaks, peaks, peak widths) for angular quadrature around ``x``."""
        raise NotImplementedError

    def kernel_spec(self) -> tuple[int, np.ndarray]:
        """(kind code, parameter array) for the compiled path kernels."""
        raise NotImplementedError

    def inner(self, q: float) -> "Domain":
        """D_q = {x in D : delta(x) > q} as a domain of the same family."""
        raise UnsupportedDomainError(f"{self.kind} has no inner-domain construction")

    def inner_area(self, q: float) -> float:
        return self.inner(q).area if q < self.inradius else 0.0

    def inner_perimeter(self, q: float) -> float:
        return self.inner(q).perimeter if q < self.inradius else 0.0

    def bounding_box(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def sample_uniform(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.sample_shell(0.0, math.inf, n, rng)

    def sample_shell(self, q_lo: float, q_hi: float, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform points with q_lo <= delta < q_hi, by rejection from a box."""
        if not self.bounded:
            raise UnsupportedDomainError("sampling requires a bounded domain")
        x0, y0, x1, y1 = self.inner(q_lo).bounding_box() if q_lo > 0 else self.bounding_box()
        out = np.empty((0, 2))
        while len(out) < n:
            m = max(1024, 2 * (n - len(out)))
            cand = np.column_stack([rng.uniform(x0, x1, m), rng.uniform(y0, y1, m)])
            d = self.distance(cand)
            keep = cand[(d >= q_lo) & (d < q_hi) & (d > 0)]
            out = np.vstack([out, keep])
        return out[:n]

    def shell_area(self, q_lo: float, q_hi: float) -> float:
        return self.inner_area(q_lo) - (self.inner_area(q_hi) if math.isfinite(q_hi) else 0.0)


@dataclass(frozen=True)
class Disk(Domain):
    radius: float = 1.0
    center: tuple = (0.0, 0.0)
    kind = "disk"

    def __post_init__(self):
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise GeometryError("disk radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def area(self):
        return math.pi * self.radius**2

    @property
    def perimeter(self):
        return 2.0 * math.pi * self.radius

    @property
    def c11_characteristics(self):
        # interior/exterior ball radius R; unit normal is 1/R-Lipschitz
        return (self.radius, 1.0 / self.radius)

    @property
    def inradius(self):
        return self.radius

    def distance(self, x):
        p, single = _as_points(x)
        d = self.radius - np.hypot(p[:, 0] - self.center[0], p[:, 1] - self.center[1])
        d = np.maximum(d, 0.0)
        return float(d[0]) if single else d

    def ray_exit(self, x, theta):
        th = np.asarray(theta, dtype=float)
        ox, oy = x[0] - self.center[0], x[1] - self.center[1]
        b = ox * np.cos(th) + oy * np.sin(th)
        c = ox * ox + oy * oy - self.radius**2
        return -b + np.sqrt(b * b - c)

    def angular_features(self, x):
        ox, oy = x[0] - self.center[0], x[1] - self.center[1]
        delta = self.radius - math.hypot(ox, oy)
        th0 = math.atan2(oy, ox) if (ox or oy) else 0.0
        width = 0.5 * math.sqrt(max(delta, 1e-300) / self.radius)
        if width >= 0.5:
            return np.array([]), np.array([th0]), np.array([math.pi / 4])
        # near the boundary the exit distance changes on the scale sqrt(delta/R)
        # both around the nearest direction and around the two tangent directions
        peaks = np.array([th0, th0 + 0.5 * math.pi, th0 - 0.5 * math.pi])
        return np.array([]), peaks, np.full(3, width)

    def kernel_spec(self):
        return KIND_DISK, np.array([self.center[0], self.center[1], self.radius])

    def inner(self, q):
        if not 0 <= q < self.radius:
            raise GeometryError("q must lie in [0, radius)")
        return Disk(self.radius - q, self.center)

    def inner_area(self, q):
        return math.pi * max(self.radius - q, 0.0) ** 2

    def inner_perimeter(self, q):
        return 2.0 * math.pi * max(self.radius - q, 0.0)

    def bounding_box(self):
        cx, cy = self.center
        r = self.radius
        return cx - r, cy - r, cx + r, cy + r

    def sample_shell(self, q_lo, q_hi, n, rng):
        r_hi = self.radius - q_lo
        r_lo = max(self.radius - q_hi, 0.0)
        rad = np.sqrt(rng.uniform(r_lo * r_lo, r_hi * r_hi, n))
        ang = rng.uniform(0.0, 2.0 * math.pi, n)
        return np.column_stack([self.center[0] + rad * np.cos(ang), self.center[1] + rad * np.sin(ang)])


def _halfplane_vertices(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Vertices of the convex region {n_i . y >= c_i}, edges in the given order."""
    k = len(normals)
    verts = []
    for i in range(k):
        j = (i - 1) % k
        a = np.array([normals[j], normals[i]])
        verts.append(np.linalg.solve(a, np.array([offsets[j], offsets[i]])))
    return np.array(verts)


class ConvexPolygon(Domain):
    """Convex polygon; vertices are reordered counter-clockwise if needed."""

    kind = "polygon"

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least three planar vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon vertices must be finite")
        signed = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if signed < 0:
            v = v[::-1].copy()
        e = np.roll(v, -1, axis=0) - v
        lens = np.hypot(e[:, 0], e[:, 1])
        if np.any(lens == 0):
            raise GeometryError("repeated polygon vertex")
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        if np.any(cross <= 0):
            raise GeometryError("only strictly convex polygons are supported")
        turning = np.sum(np.arctan2(cross, np.sum(e * np.roll(e, -1, axis=0), axis=1)))
        if abs(turning - 2 * math.pi) > 1e-9:
            raise GeometryError("polygon is not simple")
        self.vertices = v
        self.normals = np.column_stack([-e[:, 1], e[:, 0]]) / lens[:, None]
        self.offsets = np.sum(self.normals * v, axis=1)
        self._area = abs(signed)
        self._perimeter = float(lens.sum())

    def __repr__(self):
        return f"ConvexPolygon({self.vertices.tolist()})"

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash((type(self).__name__, self.vertices.tobytes()))

    @property
    def area(self):
        return self._area

    @property
    def perimeter(self):
        return self._perimeter

    @property
    def inradius(self) -> float:
        # largest q with a nonempty offset region: LP via bisection on feasibility
        lo, hi = 0.0, 0.5 * math.sqrt(self._area)
        hi = max(hi, 1.0)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self._offset_nonempty(mid):
                lo = mid
            else:
                hi = mid
        return lo

    def _offset_nonempty(self, q):
        try:
            v = _halfplane_vertices(self.normals, self.offsets + q)
        except np.linalg.LinAlgError:
            return False
        e = np.roll(v, -1, axis=0) - v
        # a valid offset keeps every edge parallel to its original direction
        t = np.column_stack([self.normals[:, 1], -self.normals[:, 0]])
        return bool(np.all(np.sum(e * t, axis=1) > 1e-14))

    def distance(self, x):
        p, single = _as_points(x)
        d = p @ self.normals.T - self.offsets[None, :]
        out = np.maximum(d.min(axis=1), 0.0)
        return float(out[0]) if single else out

    def ray_exit(self, x, theta):
        th = np.asarray(theta, dtype=float)
        e = np.stack([np.cos(th), np.sin(th)], axis=-1)
        ne = e @ self.normals.T
        gap = self.normals @ np.asarray(x, dtype=float) - self.offsets
        with np.errstate(divide="ignore"):
            rho = np.where(ne < 0, gap[None, :] / -ne, np.inf) if th.ndim else np.where(ne < 0, gap / -ne, np.inf)
        return rho.min(axis=-1)

    def angular_features(self, x):
        rel = self.vertices - np.asarray(x)[None, :]
        breaks = np.arctan2(rel[:, 1], rel[:, 0])
        feet = np.arctan2(-self.normals[:, 1], -self.normals[:, 0])
        return breaks, feet, np.full(len(feet), math.pi / 8)

    def kernel_spec(self):
        return KIND_POLYGON, np.column_stack([self.normals, self.offsets]).ravel()

    def inner(self, q):
        if q == 0:
            return self
        if not q < self.inradius:
            raise GeometryError("q must be below the inradius")
        # parallel edges can collapse; drop edges whose offset length vanishes
        normals, offsets = self.normals, self.offsets + q
        for _ in range(len(normals)):
            v = _halfplane_vertices(normals, offsets)
            e = np.roll(v, -1, axis=0) - v
            t = np.column_stack([normals[:, 1], -normals[:, 0]])
            keep = np.sum(e * t, axis=1) > 1e-12
            if keep.all():
                return ConvexPolygon(v)
            normals, offsets = normals[keep], offsets[keep]
        raise GeometryError("offset polygon degenerated")

    def bounding_box(self):
        v = self.vertices
        return v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max()


class Rectangle(ConvexPolygon):
    """[0, a] x [0, b] with a corner at the origin; Lipschitz boundary only."""

    kind = "rectangle"

    def __init__(self, a: float, b: float):
        if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
            raise GeometryError("rectangle sides must be positive")
        self.a, self.b = float(a), float(b)
        super().__init__([(0.0, 0.0), (a, 0.0), (a, b), (0.0, b)])

    def __repr__(self):
        return f"Rectangle({self.a}, {self.b})"

    @property
    def inradius(self):
        return 0.5 * min(self.a, self.b)

    def inner_area(self, q):
        return max(self.a - 2 * q, 0.0) * max(self.b - 2 * q, 0.0)

    def inner_perimeter(self, q):
        if q >= self.inradius:
            return 0.0
        return 2.0 * (self.a - 2 * q) + 2.0 * (self.b - 2 * q)


@dataclass(frozen=True)
class HalfSpace(Domain):
    """{x : x_1 > 0}; only meaningful for the half-space remainder."""

    kind = "halfspace"
    bounded = False

    @property
    def area(self):
        return math.inf

    @property
    def perimeter(self):
        return math.inf

    @property
    def inradius(self):
        return math.inf

    def distance(self, x):
        p, single = _as_points(x)
        d = np.maximum(p[:, 0], 0.0)
        return float(d[0]) if single else d

    def ray_exit(self, x, theta):
        c = np.cos(np.asarray(theta, dtype=float))
        with np.errstate(divide="ignore"):
            return np.where(c < 0, x[0] / -c, np.inf)

    def angular_features(self, x):
        return np.array([0.5 * math.pi, 1.5 * math.pi]), np.array([math.pi]), np.array([0.25])

    def kernel_spec(self):
        return KIND_HALFSPACE, np.zeros(1)

    def inner(self, q):
        raise UnsupportedDomainError("inner domains of the half-space are not modelled")


@dataclass(frozen=True)
class WholePlane(Domain):
    kind = "plane"
    bounded = False
    complement_empty = True

    @property
    def area(self):
        return math.inf

    @property
    def perimeter(self):
        return 0.0

    @property
    def inradius(self):
        return math.inf

    def distance(self, x):
        p, single = _as_points(x)
        d = np.full(len(p), np.inf)
        return float(d[0]) if single else d

    def ray_exit(self, x, theta):
        return np.full(np.shape(theta), np.inf)

    def kernel_spec(self):
        return KIND_PLANE, np.zeros(1)


@dataclass(frozen=True)
class Annulus:
    """Target set {r_in < |y - c| < r_out} for jump-exit bookkeeping."""

    r_in: float
    r_out: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not 0 <= self.r_in < self.r_out:
            raise GeometryError("annulus needs 0 <= r_in < r_out")

    def contains(self, y):
        p, single = _as_points(y)
        r = np.hypot(p[:, 0] - self.center[0], p[:, 1] - self.center[1])
        out = (r > self.r_in) & (r < self.r_out)
        return bool(out[0]) if single else out

    def kernel_spec(self):
        return np.array([self.center[0], self.center[1], self.r_in, self.r_out])


@dataclass(frozen=True)
class InnerDomain:
    """D_q = {x in D : delta_D(x) > q}."""

    parent: Domain
    q: float = 0.0
    region: Domain = field(init=False, repr=False)

    def __post_init__(self):
        if self.q < 0:
            raise GeometryError("q must be nonnegative")
        object.__setattr__(self, "region", self.parent if self.q == 0 else self.parent.inner(self.q))

    def contains(self, x):
        d = self.parent.distance(x)
        return d > self.q if np.ndim(d) else bool(d > self.q)

    @property
    def area(self):
        return self.parent.inner_area(self.q)

    @property
    def perimeter(self):
        return self.parent.inner_perimeter(self.q)


def distance_to_complement(domain: Domain, x):
    return domain.distance(x)


def inner_boundary_measure(domain: Domain, q: float) -> float:
    """|boundary of D_q| for C^{1,1} domains, checked against the ball sandwich."""
    ch = domain.c11_characteristics
    if ch is None:
        raise UnsupportedDomainError(f"{domain.kind} has no C^{{1,1}} characteristics")
    r0 = ch[0]
    if not 0 <= q < min(r0, domain.inradius):
        raise GeometryError("q must lie in [0, r0)")
    value = domain.inner_perimeter(q)
    per = domain.perimeter
    lo, hi = (r0 - q) / r0 * per, r0 / (r0 - q) * per
    if not lo * (1 - 1e-12) <= value <= hi * (1 + 1e-12):
        raise GeometryError(f"inner boundary measure {value} outside [{lo}, {hi}]")
    return value


def boundary_layer_functional(domain: Domain, f, eta: float, breaks=(), tol: float = 1e-10) -> float:
    """(1/eta) int_D f(delta(x)/eta) dx by shell integration.

    With L(q) the length of the level set {delta = q}, the integral equals
    int_0^{q_max/eta} f(u) L(eta u) du.  L is exact for disks and rectangles
    and comes from the offset polygon otherwise.  ``breaks`` lists points of
    nonsmoothness of f (e.g. the jump of an indicator).
    """
    if not domain.bounded:
        raise UnsupportedDomainError("boundary-layer functional needs a bounded domain")
    if not eta > 0:
        raise ValueError("eta must be positive")
    umax = domain.inradius / eta

    def integrand(u):
        return f(u) * domain.inner_perimeter(eta * u)

    pts = sorted(b for b in breaks if 0 < b < umax)
    edges = [0.0, *pts]
    # geometric panels keep slowly decaying f well resolved
    k = 1.0
    while k < umax:
        edges.append(k)
        k *= 4.0
    edges = sorted(set(edges + [umax]))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = checked_quad(integrand, lo, hi, tol, what="boundary_layer_functional")
        total += val
    return total


def parse_domain(text: str) -> Domain:
    """'disk:R', 'rectangle:a,b', 'polygon:x1,y1;x2,y2;...', 'halfspace' or 'plane'."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "disk":
            return Disk(float(rest))
        if kind == "rectangle":
            a, b = (float(v) for v in rest.split(","))
            return Rectangle(a, b)
        if kind == "polygon":
            pts = [tuple(float(c) for c in p.split(",")) for p in rest.split(";") if p.strip()]
            return ConvexPolygon(pts)
    except (ValueError, TypeError) as exc:
        raise GeometryError(f"cannot parse domain {text!r}: {exc}") from None
    if kind == "halfspace":
        return HalfSpace()
    if kind == "plane":
        return WholePlane()
    raise GeometryError(f"unknown domain kind {kind!r}")


def format_domain(domain: Domain) -> str:
    if isinstance(domain, Disk):
        return f"disk:{domain.radius!r}"
    if isinstance(domain, Rectangle):
        return f"rectangle:{domain.a!r},{domain.b!r}"
    if isinstance(domain, ConvexPolygon):
        return "polygon:" + ";".join(f"{x!r},{y!r}" for x, y in domain.vertices)
    return domain.kind
