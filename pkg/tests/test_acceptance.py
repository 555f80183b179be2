"""Acceptance criteria 1-8, one PASS/FAIL line each.

Run under pytest (lines go to the terminal reporter) or directly with
``python tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest

from reltrace.asymptotics import TraceCurve, fit_coefficients, predict_expansion
from reltrace.cli import frozen_c2
from reltrace.density import density_diff_expansion, uniform_convergence_gap
from reltrace.geometry import Disk, Rectangle, boundary_layer_functional
from reltrace.montecarlo import PathConfig, estimate_f_H_profile
from reltrace.params import ProcessParams
from reltrace.spectral import compute_spectrum, trace_from_spectrum, trust_ceiling, weyl_counting
from reltrace.verify import run_suite

H = 0.025
P1 = ProcessParams(1.0)
DISK = Disk(1.0)
_WRITE = [print]


@pytest.fixture(autouse=True)
def _reporter(request):
    tr = request.config.pluginmanager.get_plugin("terminalreporter")
    _WRITE[0] = (lambda s: tr.write_line(s)) if tr is not None else print
    yield
    _WRITE[0] = print


def report(n: int, ok: bool, detail: str):
    _WRITE[0](f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


_SPECTRA = {}


def disk_spectrum():
    # full spectrum at h = 0.025 (N = 5013 modes, well above the 300 required)
    if "disk" not in _SPECTRA:
        _SPECTRA["disk"] = compute_spectrum(P1, DISK, H)
    return _SPECTRA["disk"]


def test_criterion_1_volume_term():
    spec = disk_spectrum()
    ts = [0.15, 0.125, 0.1]
    vals = [t * t * trace_from_spectrum(spec, t, DISK, P1).value for t in ts]
    errs = [abs(v - 0.5) / 0.5 for v in vals]
    ok = spec.k >= 300 and errs[0] <= 0.10 and all(b < a for a, b in zip(errs, errs[1:]))
    report(1, ok, "t^2 Z(t) at t=" + ", ".join(f"{t:g}: {v:.4f} ({e:.1%})" for t, v, e in zip(ts, vals, errs)))


def test_criterion_2_intermediate_mass_terms():
    parts, ok = [], True
    for alpha in (0.5, 1.0):
        p = ProcessParams(alpha, 1.0)
        scaled, floor = [], True
        for t in (0.1, 0.05, 0.025):
            e = density_diff_expansion(p, t, tol=1e-10)
            scaled.append(e.residual * t ** (p.dim / alpha) / t ** (2 / alpha))
            # residual indistinguishable from zero at the quadrature tolerance
            floor &= abs(e.residual) <= 1e-9 * abs(e.numeric_difference)
        a = np.abs(scaled)
        variation = (a.max() - a.min()) / a.max() if a.max() > 0 else 0.0
        good = floor or variation < 0.25
        ok &= good
        parts.append(f"alpha={alpha:g}: scaled residuals {', '.join(f'{s:.2e}' for s in scaled)}"
                     + (" (at quadrature floor)" if floor else f" variation {variation:.1%}"))
    report(2, ok, "; ".join(parts))


def test_criterion_3_surface_term_and_c2():
    c2 = frozen_c2(1.0)
    spec = disk_spectrum()
    t = np.linspace(0.1, 0.3, 9)
    z = [trace_from_spectrum(spec, x, DISK, P1).value for x in t]
    pred = predict_expansion(P1, DISK, c2["value"])
    # the window spans a factor 3, below the fitter's default factor-4 guard
    rep = fit_coefficients(TraceCurve.from_arrays(t, z), pred, fix=("volume",), with_residual=False, min_span=3.0)
    fitted = -rep.group("surface").fitted
    target = c2["value"] * 2 * math.pi
    err = abs(fitted - target) / target
    report(3, err <= 0.15, f"fitted {fitted:.4f} vs C2*2pi {target:.4f} (C2={c2['value']:.5f}+-{c2['stderr']:.1e}, "
                           f"{c2['paths_per_step']:.0e} paths/step), off {err:.1%}")


def test_criterion_4_lipschitz_rectangle():
    c2 = frozen_c2(1.4)
    p = ProcessParams(1.4)
    rect = Rectangle(2.0, 1.0)
    h = H / math.sqrt(2)
    spec = compute_spectrum(p, rect, h)
    t = np.geomspace(0.05, 0.4, 12)
    z = [trace_from_spectrum(spec, x, rect, p).value for x in t]
    pred = predict_expansion(p, rect, c2["value"])
    assert pred.domain_class == "Lipschitz" and not any(x.label.startswith("intermediate") for x in pred.terms)
    # corner contributions enter at t^(2/alpha) in t^(d/alpha) Z: fitted as a nuisance column
    rep = fit_coefficients(TraceCurve.from_arrays(t, z), pred, extra_exponents=(2 / 1.4,), with_residual=False)
    g = rep.group("surface")
    err = g.relative_discrepancy
    report(4, err <= 0.15, f"fitted surface {g.fitted:.4f} vs -6 C2(1.4) {g.predicted:.4f} "
                           f"(C2={c2['value']:.5f}, h={h:.4f}, N={spec.size}), off {err:.1%}")


def test_criterion_5_weyl_law():
    coarse = compute_spectrum(P1, DISK, H, k=300)
    fine = compute_spectrum(P1, DISK, H / math.sqrt(2), k=300)
    ceiling = trust_ceiling([coarse, fine])
    n = 100
    ratios = [weyl_counting(s, s.eigenvalues[n - 1]) / s.eigenvalues[n - 1] ** 2 for s in (coarse, fine)]
    err = abs(ratios[1] - 0.25) / 0.25
    drift = abs(ratios[1] - ratios[0]) / ratios[1]
    ok = ceiling >= n and err <= 0.10 and drift < 0.03
    report(5, ok, f"N/lambda^2 at n={n}: {ratios[1]:.4f} (target 0.25, off {err:.1%}), drift {drift:.2%}, "
                  f"trusted up to n={ceiling}")


def test_criterion_6_probabilistic_identities():
    results = run_suite(quick=True, seed=2024)
    failed = [f"{r.suite}/{r.name}" for r in results if not r.passed]
    secs = sum(r.seconds for r in results)
    ok = not failed and secs < 600
    report(6, ok, f"{len(results) - len(failed)}/{len(results)} checks passed in {secs:.0f} s"
                  + (f"; failed: {', '.join(failed)}" if failed else ""))


def test_criterion_7_boundary_layer_functional():
    eta = 0.02
    fs = {"exp(-r)": (lambda u: math.exp(-u), ()),
          "(1+r)^-2": (lambda u: (1 + u) ** -2, ()),
          "indicator": (lambda u: 1.0 if u < 1 else 0.0, (1.0,))}
    lines, ok = [], True
    for dom in (DISK, Rectangle(2.0, 1.0)):
        for name, (f, br) in fs.items():
            limit = dom.perimeter * 1.0  # each f integrates to 1 on (0, inf)
            v = boundary_layer_functional(dom, f, eta, breaks=br)
            # family f^eta = f (1 + eta r / (1 + r)): f^eta <= 2 f and f^eta -> f uniformly
            fam = boundary_layer_functional(dom, lambda u, f=f: f(u) * (1 + eta * u / (1 + u)), eta, breaks=br)
            e1, e2 = abs(v / limit - 1), abs(fam / limit - 1)
            # the 1e-12 slack only absorbs rounding when the exact error equals the tolerance
            good = e1 <= 0.02 + 1e-12 and e2 <= 0.03 + 1e-12
            ok &= good
            lines.append(f"{type(dom).__name__.lower()}/{name}: {e1:.2%}, family {e2:.2%}{'' if good else ' X'}")
    report(7, ok, "; ".join(lines))


def test_criterion_8_uniform_convergence():
    gaps = uniform_convergence_gap(P1, [0.4, 0.2, 0.1], (0.5, 1.0))
    gap_ok = all(b < a for a, b in zip(gaps, gaps[1:])) and gaps[-1] > 0
    r = [0.5, 1.0, 2.0]
    cfg = dict(n_paths=100_000, base_step=0.005, antithetic=True, chunk_size=4096)
    base = estimate_f_H_profile(P1, 1.0, r, PathConfig(seed=1, **cfg))
    diffs = []
    for k, t in enumerate((0.4, 0.2, 0.1)):
        est = estimate_f_H_profile(ProcessParams(1.0, t), 1.0, r, PathConfig(seed=2 + k, **cfg))
        diffs.append([(abs(e.value - b.value), math.hypot(e.stderr, b.stderr)) for e, b in zip(est, base)])
    fh_ok = True
    for i in range(len(r)):
        seq = [d[i] for d in diffs]
        fh_ok &= all(b[0] <= a[0] + 3 * math.hypot(a[1], b[1]) for a, b in zip(seq, seq[1:]))
    prof = "; ".join(f"r={x:g}: " + ", ".join(f"{d[i][0]:.1e}" for d in diffs) for i, x in enumerate(r))
    report(8, gap_ok and fh_ok, f"density gaps {', '.join(f'{g:.4f}' for g in gaps)}; |f_H^tm - f_H^0| {prof}")


if __name__ == "__main__":
    status = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            status = 1
    sys.exit(status)
