import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import jacobi_eigenvalues, lattice_sum
from reltrace import spectral
from reltrace.density import density_at_zero
from reltrace.errors import GridTooCoarseError, TailTooHeavyError, ValidationError
from reltrace.geometry import Disk, Rectangle
from reltrace.montecarlo import PathConfig, estimate_trace_remainder
from reltrace.params import ProcessParams
from reltrace.spectral import (Spectrum, assemble_killed_generator, build_grid, compute_spectrum, corrected_trace,
                               eigen_spectrum, epstein_zeta, lattice_free_term, trace_from_spectrum, trust_ceiling,
                               weyl_counting)

P1 = ProcessParams(1.0)


@pytest.fixture(scope="module")
def disk_spec():
    return compute_spectrum(P1, Disk(1.0), 0.05)


def test_epstein_zeta_against_lattice_sum():
    for s in (3.0, 4.0):
        assert epstein_zeta(s) == pytest.approx(lattice_sum(s), rel=1e-5)


def test_grid_points_inside_and_count():
    g = build_grid(Disk(1.0), 0.05)
    d = Disk(1.0).distance(g.points)
    assert np.all(d > 0)
    assert abs(g.size - math.pi / 0.05**2) <= 2 * math.pi / 0.05
    assert g.index(tuple(g.lattice[7])) == 7
    with pytest.raises(GridTooCoarseError):
        build_grid(Disk(1.0), 0.2)


def test_generator_structure():
    A = assemble_killed_generator(ProcessParams(1.3, 0.4), Rectangle(2.0, 1.0), 0.1)
    assert np.array_equal(A, A.T)
    off = A - np.diag(np.diag(A))
    assert np.all(off <= 0) and np.all(np.diag(A) > 0)
    # killing makes every row sum positive: strictly diagonally dominant, hence positive definite
    assert np.all(A.sum(axis=1) > 0)


def test_eigen_spectrum_trivial_cases():
    s = eigen_spectrum(np.array([[2.5]]))
    assert s.eigenvalues.tolist() == [2.5]
    s = eigen_spectrum(np.diag([3.0, 1.0, 2.0]))
    assert s.eigenvalues.tolist() == [1.0, 2.0, 3.0]


def test_eigen_spectrum_against_jacobi():
    rng = np.random.default_rng(0)
    B = rng.normal(size=(50, 50))
    A = B + B.T
    s = eigen_spectrum(A)
    assert s.eigenvalues.sum() == pytest.approx(np.trace(A), abs=1e-9)
    np.testing.assert_allclose(s.eigenvalues, jacobi_eigenvalues(A), atol=1e-8)
    assert np.all(s.residuals <= 1e-8 * np.abs(A).sum(axis=1).max())


def test_generator_spectrum_against_jacobi():
    A = assemble_killed_generator(P1, Disk(1.0), 0.15)
    s = eigen_spectrum(A, k=10)
    np.testing.assert_allclose(s.eigenvalues, jacobi_eigenvalues(A)[:10], rtol=1e-10)


def test_lanczos_route_matches_dense(monkeypatch):
    A = assemble_killed_generator(P1, Disk(1.0), 0.08)
    dense = eigen_spectrum(A, k=20)
    monkeypatch.setattr(spectral, "DENSE_LIMIT", 100)
    sparse = eigen_spectrum(A, k=20)
    np.testing.assert_allclose(sparse.eigenvalues, dense.eigenvalues, rtol=1e-9)


def test_ground_state_positive_and_simple(disk_spec):
    ev = disk_spec.eigenvalues
    assert ev[0] > 0 and ev[1] - ev[0] > 1e-6 * ev[0]
    assert np.all(np.diff(ev) >= 0)


def test_grid_convergence_ground_state():
    a = compute_spectrum(P1, Disk(1.0), 0.1, k=1).eigenvalues[0]
    b = compute_spectrum(P1, Disk(1.0), 0.05, k=1).eigenvalues[0]
    assert abs(a - b) / b < 0.02


def test_domain_monotonicity():
    a = compute_spectrum(P1, Disk(1.0), 0.06, k=1).eigenvalues[0]
    b = compute_spectrum(P1, Disk(0.9), 0.06, k=1).eigenvalues[0]
    assert a < b


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_mass_shift_lower_bound(m):
    l0 = compute_spectrum(P1, Disk(1.0), 0.08, k=1).eigenvalues[0]
    lm = compute_spectrum(ProcessParams(1.0, m), Disk(1.0), 0.08, k=1).eigenvalues[0]
    assert l0 - m <= lm <= l0


def test_trace_examples(disk_spec):
    dom = Disk(1.0)
    z = [trace_from_spectrum(disk_spec, t, dom, P1).value for t in (0.1, 0.2, 0.4, 0.8)]
    assert all(a > b for a, b in zip(z, z[1:]))
    big = trace_from_spectrum(disk_spec, 30.0, dom, P1).value
    assert big / math.exp(-disk_spec.eigenvalues[0] * 30.0) == pytest.approx(1.0, abs=1e-6)


def test_trace_tail_bound_and_guard():
    dom = Disk(1.0)
    part = compute_spectrum(P1, dom, 0.05, k=300)
    tv = trace_from_spectrum(part, 0.3, dom, P1)
    assert 0 < tv.tail_bound <= 5e-3 * tv.value
    full = compute_spectrum(P1, dom, 0.05)
    exact = trace_from_spectrum(full, 0.3, dom, P1)
    assert exact.tail_bound == 0.0
    # the envelope bound covers the omitted modes
    assert exact.value - tv.value <= 1.5 * tv.tail_bound
    with pytest.raises(TailTooHeavyError):
        trace_from_spectrum(compute_spectrum(P1, dom, 0.05, k=20), 0.05, dom, P1)


def test_weyl_counting_examples(disk_spec):
    ev = disk_spec.eigenvalues
    assert weyl_counting(disk_spec, 0.5 * ev[0]) == 0
    assert weyl_counting(disk_spec, ev[0]) == 1
    assert weyl_counting(disk_spec, ev[-1]) == disk_spec.k


def test_trust_ceiling():
    a = Spectrum(np.array([1.0, 2.0, 3.0, 4.0]), 0.1, 4, np.zeros(4))
    b = Spectrum(np.array([1.01, 2.02, 3.5, 4.0]), 0.07, 4, np.zeros(4))
    assert trust_ceiling([a, b]) == 2
    with pytest.raises(ValidationError):
        trust_ceiling([a])


def test_lattice_free_term_approaches_continuum():
    t = 0.2
    cont = density_at_zero(P1, t)
    errs = [abs(lattice_free_term(P1, h, t) - cont) / cont for h in (0.1, 0.05, 0.025)]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 0.01


def test_spectral_trace_matches_mc_remainder():
    """t^2 (|D| p(t,0) - Z(t)) against t^2 times the MC domain-integrated remainder."""
    dom = Disk(1.0)
    fine = compute_spectrum(P1, dom, 0.035)
    coarse = compute_spectrum(P1, dom, 0.05)
    cfg = PathConfig(20_000, 0.005, seed=31, chunk_size=2048, antithetic=True)
    for t in (0.15, 0.2):
        free = dom.area * density_at_zero(P1, t)
        zf = corrected_trace(fine, t, dom, P1).value
        zc = corrected_trace(coarse, t, dom, P1).value
        spec_val = t**2 * (free - zf)
        spec_err = t**2 * abs(zf - zc)
        mc = estimate_trace_remainder(P1, dom, t, cfg)
        assert abs(spec_val - t**2 * mc.value) <= 3 * math.hypot(spec_err, t**2 * mc.stderr)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**31))
def test_eigen_spectrum_random_spd(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, n))
    A = B @ B.T + n * np.eye(n)
    s = eigen_spectrum(A)
    assert s.eigenvalues[0] > 0
    assert s.eigenvalues.sum() == pytest.approx(np.trace(A), rel=1e-12)


def test_grid_excludes_points_on_the_boundary_up_to_rounding():
    h = 0.1 / math.sqrt(2)
    g = build_grid(Disk(1.0), h)
    assert np.all(Disk(1.0).distance(g.points) > 1e-9 * h)
    assert np.all(np.isfinite(assemble_killed_generator(P1, Disk(1.0), h, g)))
