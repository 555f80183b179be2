"""Command-line experiment runner.

Each subcommand reads a run config (the shipped ``default.ini`` unless
``--config`` is given), applies flag overrides, writes CSV/JSON artifacts
into the output directory and appends a RunManifest line to
``manifest.jsonl`` there.

Exit status: 0 on success, 2 on validation failure, 3 on a numerical
convergence failure (or a failed invariant under ``verify``).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import RunManifest, append_manifest, file_digest, read_csv, run_digest, utc_now, write_csv, \
    write_json
from .asymptotics import ExpansionPrediction, TraceCurve, fit_coefficients, predict_expansion, residual_order
from .config import SCHEMA, RunConfig, coerce, load_config, parse_config
from .density.exponent import density_at_zero
from .density.tables import CACHE_ENV, build_density_table
from .errors import ConfigError, NumericalError, ValidationError
from .geometry import format_domain, parse_domain
from .levy import PsiProfile, killing_rates, levy_density, psi_fast
from .montecarlo.estimators import (PathConfig, compute_C2, compute_C2_extrapolated, default_c2_grid,
                                    estimate_f_H_profile, estimate_trace_remainder)
from .params import ProcessParams
from .spectral import compute_spectrum, corrected_trace, trace_from_spectrum, trust_ceiling, weyl_counting

SUBCOMMANDS = ("density", "levy", "fh", "c2", "trace-mc", "trace-spectral", "weyl", "fit", "verify")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
# keys that do not change any computed value and stay out of the run digest
_NON_PARAMETERS = ("out", "cache_dir", "workers")


def default_config_text() -> str:
    return resources.files("reltrace").joinpath("data", "default.ini").read_text(encoding="utf-8")


def frozen_c2(alpha: float) -> dict:
    """Shipped step-extrapolated C2 estimate for ``alpha`` (d = 2)."""
    name = f"c2_alpha{float(alpha)!r}.json"
    res = resources.files("reltrace").joinpath("data", name)
    if not res.is_file():
        raise ValidationError(f"no frozen C2 for alpha={alpha}; pass --c2 or run the c2 subcommand")
    return json.loads(res.read_text(encoding="utf-8"))


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("reltrace").joinpath("data", name)))


# --- argument handling -----------------------------------------------------

def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config file (default: the shipped default.ini)")
    for key, (_, kind) in SCHEMA.items():
        if kind == "bool":
            common.add_argument(_flag(key), dest=key, default=None, action=argparse.BooleanOptionalAction)
        else:
            common.add_argument(_flag(key), dest=key, default=None, metavar=kind.upper())
    parser = argparse.ArgumentParser(prog="reltrace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"reltrace {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = load_config(args.config) if args.config else parse_config(default_config_text())
    overrides = {k: coerce(k, getattr(args, k)) for k in SCHEMA if getattr(args, k, None) is not None}
    return base.with_overrides(**overrides)


def parameter_set(cfg: RunConfig) -> dict:
    return {k: v for k, v in cfg.to_dict().items() if k not in _NON_PARAMETERS}


def _params(cfg: RunConfig) -> ProcessParams:
    return ProcessParams(cfg.alpha, cfg.mass, cfg.dim)


def _paths(cfg: RunConfig) -> PathConfig:
    return PathConfig(cfg.paths, cfg.step, seed=cfg.seed, antithetic=cfg.antithetic,
                      chunk_size=cfg.chunk_size, workers=cfg.workers)


def _cache_dir(cfg: RunConfig):
    return cfg.cache_dir or os.environ.get(CACHE_ENV) or None


def _t_grid(cfg: RunConfig):
    t = sorted(cfg.t_grid)
    if not t or t[0] <= 0:
        raise ValidationError("t_grid must hold positive times")
    return t


# --- subcommands -------------------------------------------------------------
# each returns {file name: (columns, rows)} or {file name: json object}

def cmd_density(cfg):
    p = _params(cfg)
    rows = []
    for t in _t_grid(cfg):
        tab = build_density_table(p, t, tol=cfg.tolerance, cache_dir=_cache_dir(cfg))
        rows += [(t, float(r), float(v)) for r, v in zip(tab.radii, tab.values)]
    d = p.dim
    return {"density.csv": ([("t", "time"), ("r", "length"), ("density", f"length^-{d}")], rows)}


def cmd_levy(cfg):
    p = _params(cfg)
    r = np.asarray(cfg.r_grid, dtype=float) if cfg.r_grid else np.geomspace(1e-3, 20.0, 120)
    jm = levy_density(p, r)
    j0 = levy_density(p.stable(), r)
    ps = psi_fast(PsiProfile.for_params(p), p.length_scale * r)
    unit = f"length^-{p.dim}-alpha"
    out = {"levy.csv": ([("r", "length"), ("Jm", unit), ("J0", unit), ("ratio", "1"), ("psi", "1")],
                        list(zip(r.tolist(), jm.tolist(), j0.tolist(), (jm / j0).tolist(), np.asarray(ps).tolist())))}
    dom = parse_domain(cfg.domain)
    if dom.bounded and p.dim == 2:
        # points from an interior centre along +x towards the boundary
        x0, y0, x1, y1 = dom.bounding_box()
        c = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])
        reach = float(dom.ray_exit(c, np.array([0.0]))[0])
        pts = c + np.outer(np.linspace(0.02, 0.98, 25) * reach, [1.0, 0.0])
        kap = killing_rates(p, dom, pts)
        delta = np.asarray(dom.distance(pts), dtype=float)
        out["kappa.csv"] = ([("x", "length"), ("y", "length"), ("delta", "length"), ("kappa", "time^-1")],
                            list(zip(pts[:, 0].tolist(), pts[:, 1].tolist(), delta.tolist(), kap.tolist())))
    return out


def _mc_columns(value_unit):
    return [("value", value_unit), ("stderr", value_unit), ("n_paths", "1"), ("step", "time"), ("seed", "1")]


def cmd_fh(cfg):
    p = _params(cfg)
    pc = _paths(cfg)
    r = np.asarray(cfg.r_grid, dtype=float) if cfg.r_grid else default_c2_grid()
    rows = []
    for t in _t_grid(cfg):
        for rr, e in zip(r, estimate_f_H_profile(p, t, r, pc, cache_dir=_cache_dir(cfg))):
            rows.append((t, float(rr), e.value, e.stderr, pc.n_paths, pc.base_step, pc.seed))
    return {"fh.csv": ([("t", "time"), ("r", "length")] + _mc_columns(f"length^-{p.dim}"), rows)}


def cmd_c2(cfg):
    pc = _paths(cfg)
    r = np.asarray(cfg.r_grid, dtype=float) if cfg.r_grid else None
    a, d = cfg.alpha, cfg.dim
    if cfg.extrapolate:
        ext, coarse, fine = compute_C2_extrapolated(a, d, pc, r, cache_dir=_cache_dir(cfg))
        rows = [("coarse", a, d, coarse.value, coarse.stderr, pc.n_paths, pc.base_step, pc.seed),
                ("fine", a, d, fine.value, fine.stderr, pc.n_paths, 0.5 * pc.base_step, pc.seed),
                # the Richardson value is the zero-step limit
                ("extrapolated", a, d, ext.value, ext.stderr, 2 * pc.n_paths, 0.0, pc.seed)]
    else:
        e = compute_C2(a, d, pc, r, cache_dir=_cache_dir(cfg))
        rows = [("single", a, d, e.value, e.stderr, pc.n_paths, pc.base_step, pc.seed)]
    cols = [("label", "-"), ("alpha", "1"), ("dim", "1")] + _mc_columns(f"length^{1 - d}")
    return {"c2.csv": (cols, rows)}


def cmd_trace_mc(cfg):
    p = _params(cfg)
    dom = parse_domain(cfg.domain)
    pc = _paths(cfg)
    rows = []
    for t in _t_grid(cfg):
        free = float(dom.area) * density_at_zero(p, t)
        rem = estimate_trace_remainder(p, dom, t, pc, cache_dir=_cache_dir(cfg))
        rows.append((t, free - rem.value, rem.stderr, rem.value, free, pc.n_paths, pc.base_step, pc.seed,
                     "montecarlo"))
    cols = ([("t", "time"), ("value", "1"), ("stderr", "1"), ("remainder", "1"), ("free_term", "1"),
             ("n_paths", "1"), ("step", "time"), ("seed", "1"), ("source", "-")])
    return {"trace.csv": (cols, rows)}


def _spectrum(cfg, h):
    k = cfg.eigs if cfg.eigs > 0 else None
    return compute_spectrum(_params(cfg), parse_domain(cfg.domain), h, k)


def _spectrum_rows(spec):
    return [(i + 1, float(v), spec.h, float(r)) for i, (v, r) in enumerate(zip(spec.eigenvalues, spec.residuals))]


_SPECTRUM_COLS = [("index", "1"), ("eigenvalue", "time^-1"), ("h", "length"), ("residual", "time^-1")]


def cmd_trace_spectral(cfg):
    p = _params(cfg)
    dom = parse_domain(cfg.domain)
    spec = _spectrum(cfg, cfg.grid_h)
    rows = []
    for t in _t_grid(cfg):
        raw = trace_from_spectrum(spec, t, dom, p)
        cor = corrected_trace(spec, t, dom, p)
        rows.append((t, raw.value, raw.tail_bound, cor.value, spec.h, spec.size, spec.k, "spectral"))
    cols = [("t", "time"), ("value", "1"), ("stderr", "1"), ("corrected", "1"), ("h", "length"),
            ("n_points", "1"), ("k", "1"), ("source", "-")]
    return {"spectrum.csv": (_SPECTRUM_COLS, _spectrum_rows(spec)), "trace.csv": (cols, rows)}


def cmd_weyl(cfg):
    p = _params(cfg)
    dom = parse_domain(cfg.domain)
    s = p.dim / p.alpha
    coarse = _spectrum(cfg, cfg.grid_h)
    fine = _spectrum(cfg, cfg.grid_h / math.sqrt(2.0))
    ceiling = trust_ceiling([coarse, fine])
    const = p.c1 * float(dom.area) / math.gamma(s + 1.0)
    n = min(coarse.k, fine.k)
    rows = []
    for i in range(n):
        lc, lf = float(coarse.eigenvalues[i]), float(fine.eigenvalues[i])
        rc = weyl_counting(coarse, lc) / lc**s
        rf = weyl_counting(fine, lf) / lf**s
        rows.append((i + 1, lc, lf, rc, rf, abs(rf - rc) / rf))
    cols = [("n", "1"), ("eigenvalue_coarse", "time^-1"), ("eigenvalue_fine", "time^-1"),
            ("ratio_coarse", f"time^{s:g}"), ("ratio_fine", f"time^{s:g}"), ("drift", "1")]
    summary = {"weyl_constant": const, "trust_ceiling": ceiling, "h_coarse": coarse.h, "h_fine": fine.h,
               "index": cfg.weyl_index}
    j = cfg.weyl_index
    if j <= n:
        row = rows[j - 1]
        summary.update(ratio_coarse=row[3], ratio_fine=row[4], drift=row[5],
                       relative_error=abs(row[4] - const) / const, resolved=j <= ceiling)
    return {"spectrum_coarse.csv": (_SPECTRUM_COLS, _spectrum_rows(coarse)),
            "spectrum_fine.csv": (_SPECTRUM_COLS, _spectrum_rows(fine)),
            "weyl.csv": (cols, rows), "weyl.json": summary}


def load_curve(path, column: str = "value") -> TraceCurve:
    cols = read_csv(path)
    if "t" not in cols or column not in cols:
        raise ValidationError(f"{path}: needs columns t and {column}")
    t = np.array(cols["t"], dtype=float)
    v = np.array(cols[column], dtype=float)
    se = np.array(cols["stderr"], dtype=float) if "stderr" in cols and column == "value" else None
    source = cols["source"][0] if cols.get("source") else "spectral"
    order = np.argsort(t)
    return TraceCurve.from_arrays(t[order], v[order], None if se is None else se[order], source=source)


def cmd_fit(cfg):
    if not cfg.curve:
        raise ConfigError("fit needs a curve (--curve)")
    curve = load_curve(cfg.curve, cfg.curve_column)
    if cfg.prediction:
        with open(cfg.prediction, encoding="utf-8") as fh:
            pred = ExpansionPrediction.from_dict(json.load(fh))
        c2 = None
    else:
        c2 = cfg.c2 if cfg.c2 > 0 else frozen_c2(cfg.alpha)["value"]
        pred = predict_expansion(_params(cfg), parse_domain(cfg.domain), c2)
    fix = ("volume",) if cfg.fix_volume else ()
    report = fit_coefficients(curve, pred, fix=fix, extra_exponents=cfg.extra_exponents, min_span=cfg.min_span)
    res = residual_order(curve, pred, min_span=cfg.min_span)
    out = report.to_dict()
    out.update(prediction=pred.to_dict(), c2=c2, curve=str(cfg.curve), curve_column=cfg.curve_column,
               residual={"slope": res.slope, "expected": res.expected, "inconclusive": res.inconclusive,
                         "ratio_decreasing": res.ratio_decreasing, "passes": res.passes()})
    rel = {}
    for g in report.groups:
        if g.predicted != 0:
            rel["+".join(g.labels)] = abs(g.fitted - g.predicted) / abs(g.predicted)
    out["relative_discrepancy"] = rel
    return {"fit.json": out}


def cmd_verify(cfg):
    from .verify import run_suite
    results = run_suite(quick=True, seed=cfg.seed)
    rows = [(r.suite, r.name, r.passed, r.detail, round(r.seconds, 3)) for r in results]
    suites = {}
    for r in results:
        s = suites.setdefault(r.suite, {"checks": 0, "passed": 0})
        s["checks"] += 1
        s["passed"] += int(r.passed)
    summary = {"suites": {k: dict(v, all_passed=v["checks"] == v["passed"]) for k, v in suites.items()},
               "all_passed": all(r.passed for r in results), "seed": cfg.seed}
    cols = [("suite", "-"), ("check", "-"), ("passed", "bool"), ("detail", "-"), ("seconds", "s")]
    return {"verify.csv": (cols, rows), "verify.json": summary}


COMMANDS = {"density": cmd_density, "levy": cmd_levy, "fh": cmd_fh, "c2": cmd_c2, "trace-mc": cmd_trace_mc,
            "trace-spectral": cmd_trace_spectral, "weyl": cmd_weyl, "fit": cmd_fit, "verify": cmd_verify}


def _write_outputs(out_dir: Path, name: str, outputs: dict, digest: str) -> dict:
    digests = {}
    for fname, payload in outputs.items():
        path = out_dir / fname
        if fname.endswith(".csv"):
            cols, rows = payload
            write_csv(path, cols, rows, name, digest)
        else:
            write_json(path, dict(payload, manifest=digest))
        digests[fname] = file_digest(path)
    return digests


def run(subcommand: str, cfg: RunConfig, stream=None) -> int:
    """Execute one subcommand; returns the exit status."""
    # resolved per call so redirected or captured stdout is honoured
    stream = sys.stdout if stream is None else stream
    if subcommand not in COMMANDS:
        raise ValidationError(f"unknown subcommand {subcommand!r}")
    out_dir = Path(cfg.out)
    params = parameter_set(cfg)
    man = RunManifest(subcommand, params, __version__, utc_now())
    status = EXIT_OK
    try:
        # normalise the domain text early so bad specs fail as validation errors
        format_domain(parse_domain(cfg.domain))
        outputs = COMMANDS[subcommand](cfg)
        man.outputs = _write_outputs(out_dir, subcommand, outputs, run_digest(subcommand, params))
        if subcommand == "verify" and not outputs["verify.json"]["all_passed"]:
            status = EXIT_NUMERICAL
        for fname in man.outputs:
            print(out_dir / fname, file=stream)
        if subcommand == "verify":
            for suite, s in outputs["verify.json"]["suites"].items():
                print(f"{suite}: {s['passed']}/{s['checks']} {'passed' if s['all_passed'] else 'FAILED'}",
                      file=stream)
    except ValidationError as exc:
        print(f"reltrace {subcommand}: validation error: {exc}", file=sys.stderr)
        status = EXIT_VALIDATION
    except NumericalError as exc:
        print(f"reltrace {subcommand}: numerical failure: {exc}", file=sys.stderr)
        status = EXIT_NUMERICAL
    man.finished = utc_now()
    man.status = status
    try:
        append_manifest(out_dir, man)
    except OSError as exc:
        print(f"reltrace {subcommand}: cannot write manifest: {exc}", file=sys.stderr)
        status = status or EXIT_VALIDATION
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ValidationError as exc:
        print(f"reltrace: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run(args.subcommand, cfg)


if __name__ == "__main__":
    sys.exit(main())
