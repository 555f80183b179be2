import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from reltrace.errors import GeometryError, UnsupportedDomainError
from reltrace.geometry import (ConvexPolygon, Disk, HalfSpace, InnerDomain, Rectangle, boundary_layer_functional,
                               distance_to_complement, format_domain, inner_boundary_measure, parse_domain)

HEXAGON = [(math.cos(k * math.pi / 3) + 0.2, math.sin(k * math.pi / 3) - 0.1) for k in range(6)]


def test_disk_and_rectangle_invariants():
    d = Disk(1.3)
    assert d.area == pytest.approx(math.pi * 1.69) and d.perimeter == pytest.approx(2 * math.pi * 1.3)
    assert d.c11_characteristics[0] == 1.3
    r = Rectangle(2.0, 1.0)
    assert (r.area, r.perimeter, r.c11_characteristics) == (2.0, 6.0, None)


def test_polygon_orientation_and_shoelace():
    cw = list(reversed(HEXAGON))
    p = ConvexPolygon(cw)
    ref = shapely.Polygon(HEXAGON)
    assert p.area == pytest.approx(ref.area, rel=1e-14)
    assert p.perimeter == pytest.approx(ref.length, rel=1e-14)
    v = p.vertices
    assert 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]) > 0


def test_polygon_rejections():
    with pytest.raises(GeometryError):
        ConvexPolygon([(0, 0), (1, 0), (0.5, 0.2), (1, 1), (0, 1)])
    with pytest.raises(GeometryError):
        ConvexPolygon([(0, 0), (1, 0)])


def test_distance_examples():
    assert distance_to_complement(Disk(1.0), (0.0, 0.0)) == 1.0
    assert distance_to_complement(Rectangle(2.0, 1.0), (0.3, 0.2)) == pytest.approx(0.2)
    assert distance_to_complement(HalfSpace(), (0.37, -4.0)) == pytest.approx(0.37)
    assert distance_to_complement(Disk(1.0), (2.0, 0.0)) == 0.0


@pytest.mark.parametrize("domain", [Rectangle(2.0, 1.0), ConvexPolygon(HEXAGON)], ids=["rectangle", "hexagon"])
def test_polygon_distance_against_shapely(domain):
    rng = np.random.default_rng(3)
    x0, y0, x1, y1 = domain.bounding_box()
    pts = np.column_stack([rng.uniform(x0, x1, 10_000), rng.uniform(y0, y1, 10_000)])
    got = domain.distance(pts)
    poly = shapely.Polygon(domain.vertices)
    ring = poly.exterior
    inside = shapely.contains_xy(poly, pts[:, 0], pts[:, 1])
    ref = np.where(inside, shapely.distance(ring, shapely.points(pts)), 0.0)
    np.testing.assert_allclose(got, ref, atol=1e-9)


def test_disk_distance_random_points():
    rng = np.random.default_rng(4)
    d = Disk(0.7, (0.1, -0.3))
    pts = rng.uniform(-1, 1, size=(10_000, 2))
    ref = np.maximum(0.7 - np.hypot(pts[:, 0] - 0.1, pts[:, 1] + 0.3), 0.0)
    np.testing.assert_allclose(d.distance(pts), ref, atol=1e-12)


def test_inner_domain_of_disk_is_disk():
    d = Disk(1.0)
    inner = d.inner(0.25)
    assert isinstance(inner, Disk) and inner.radius == pytest.approx(0.75)
    assert d.inner(0.0).radius == 1.0
    q = InnerDomain(d, 0.25)
    assert q.contains((0.7, 0.0)) and not q.contains((0.8, 0.0))


def test_inner_boundary_measure_examples():
    d = Disk(1.0)
    assert inner_boundary_measure(d, 0.0) == pytest.approx(2 * math.pi)
    v = inner_boundary_measure(d, 0.25)
    assert v == pytest.approx(1.5 * math.pi) and 0.75 * 2 * math.pi <= v <= 4 / 3 * 2 * math.pi
    v = inner_boundary_measure(d, 0.5)
    assert v == pytest.approx(math.pi) and abs(v - 2 * math.pi) <= 8 * math.pi * 0.5
    with pytest.raises(UnsupportedDomainError):
        inner_boundary_measure(Rectangle(2.0, 1.0), 0.1)


def test_boundary_layer_indicator_examples():
    ind = lambda u: 1.0 if u < 1 else 0.0
    got = boundary_layer_functional(Disk(1.0), ind, 0.1, breaks=(1.0,))
    assert got == pytest.approx(1.9 * math.pi, rel=1e-9)
    got = boundary_layer_functional(Rectangle(2.0, 1.0), ind, 0.01, breaks=(1.0,))
    assert got == pytest.approx(6 - 4 * 0.01, rel=1e-9)


def test_boundary_layer_exponential_against_shell_oracle():
    # independent route: (1/eta) int_0^R f(q/eta) 2 pi (R - q) dq for the disk
    f = lambda u: math.exp(-u)
    for eta in (0.1, 0.05, 0.02):
        ref = integrate.quad(lambda q: f(q / eta) * 2 * math.pi * (1 - q), 0, 1, epsabs=1e-13, limit=200)[0] / eta
        assert boundary_layer_functional(Disk(1.0), f, eta) == pytest.approx(ref, rel=1e-9)


def test_boundary_layer_polygon_against_offset_areas():
    # level-set length of the hexagon from shapely buffers, differentiated numerically
    hexa = ConvexPolygon(HEXAGON)
    poly = shapely.Polygon(HEXAGON)
    eta = 0.05
    f = lambda u: math.exp(-u)
    q = np.linspace(0, hexa.inradius, 4001)
    area = np.array([poly.buffer(-x, join_style="mitre").area for x in q])
    # (1/eta) int f(delta/eta) dx = (1/eta) int f(q/eta) (-dA/dq) dq
    dens = -np.gradient(area, q)
    ref = integrate.trapezoid(np.exp(-q / eta) * dens, q) / eta
    assert boundary_layer_functional(hexa, f, eta) == pytest.approx(ref, rel=2e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(0.0, 1.0))
def test_rectangle_inner_perimeter_closed_form(a, b, frac):
    r = Rectangle(a, b)
    q = frac * 0.999 * min(a, b) / 2
    assert r.inner_perimeter(q) == pytest.approx(2 * (a - 2 * q) + 2 * (b - 2 * q), rel=1e-12)
    assert r.inner_area(q) == pytest.approx((a - 2 * q) * (b - 2 * q), rel=1e-12, abs=1e-14)


def test_parse_and_format_round_trip():
    for text in ("disk:1.5", "rectangle:2.0,1.0", "halfspace"):
        d = parse_domain(text)
        assert parse_domain(format_domain(d)) == d
    with pytest.raises(GeometryError):
        parse_domain("ellipse:1,2")
    with pytest.raises(GeometryError):
        parse_domain("disk:abc")
