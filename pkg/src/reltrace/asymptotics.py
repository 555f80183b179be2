"""Predicted small-time trace expansions and regression of observed trace curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficiencyError, UnsupportedDomainError, ValidationError
from .geometry import Domain
from .params import ProcessParams

EXPONENT_TOL = 1e-9
# XtX squares the condition number; beyond ~1/sqrt(eps) the covariance is noise
MAX_CONDITION = 1e8


def _near_int(x: float) -> int | None:
    r = round(x)
    return int(r) if abs(x - r) < 1e-12 * max(1.0, abs(x)) else None


def intermediate_counts(alpha: float) -> tuple[int, int]:
    """(k, j): k the largest integer < 2/alpha, j the largest integer <= 1/alpha."""
    if not 0.0 < alpha < 2.0:
        raise ValidationError("alpha must lie in (0, 2)")
    two, one = 2.0 / alpha, 1.0 / alpha
    n2 = _near_int(two)
    k = n2 - 1 if n2 is not None else int(math.floor(two))
    n1 = _near_int(one)
    j = n1 if n1 is not None else int(math.floor(one))
    return k, j


@dataclass(frozen=True)
class Term:
    t_exponent: float
    coefficient: float
    label: str


@dataclass(frozen=True)
class ExpansionPrediction:
    terms: tuple
    error_exponent: float
    domain_class: str
    dim: int = 2
    alpha: float = 1.0

    def shifted(self, term: Term) -> float:
        """Exponent of the term in t^(d/alpha) Z(t)."""
        return term.t_exponent + self.dim / self.alpha

    def term(self, label: str) -> Term:
        for t in self.terms:
            if t.label == label:
                return t
        raise KeyError(label)

    def evaluate(self, t, scaled: bool = True):
        """Sum of the terms; ``scaled`` multiplies by t^(d/alpha)."""
        t = np.asarray(t, dtype=float)
        out = sum(c.coefficient * t ** self.shifted(c) for c in self.terms)
        return out if scaled else out * t ** (-self.dim / self.alpha)

    def to_dict(self) -> dict:
        return {"terms": [[t.t_exponent, t.coefficient, t.label] for t in self.terms],
                "error_exponent": self.error_exponent, "domain_class": self.domain_class,
                "dim": self.dim, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "ExpansionPrediction":
        terms = tuple(Term(float(e), float(c), str(lab)) for e, c, lab in d["terms"])
        return cls(terms, float(d["error_exponent"]), str(d["domain_class"]), int(d["dim"]), float(d["alpha"]))


def predict_expansion(params: ProcessParams, domain: Domain, C2: float) -> ExpansionPrediction:
    """Volume, surface and mass terms of the small-time trace expansion.

    C^{1,1} domains (those reporting C^{1,1} characteristics) carry k
    intermediate terms and an O(t^(2/alpha)) error in t^(d/alpha) Z; other
    bounded Lipschitz domains carry j terms and a little-o(t^(1/alpha)) error.
    """
    if not C2 > 0:
        raise ValidationError("C2 must be positive")
    try:
        area, perim = float(domain.area), float(domain.perimeter)
    except (NotImplementedError, UnsupportedDomainError) as exc:
        raise UnsupportedDomainError("domain lacks area/perimeter for a prediction") from exc
    if not domain.bounded or not (math.isfinite(area) and math.isfinite(perim)):
        raise UnsupportedDomainError("domain lacks area/perimeter for a prediction")
    a, d, m = params.alpha, params.dim, params.mass
    k, j = intermediate_counts(a)
    c11 = domain.c11_characteristics is not None
    n_mass = k if c11 else j
    vol = params.c1 * area
    terms = [Term(-d / a, vol, "volume"), Term((1.0 - d) / a, -C2 * perim, "surface")]
    if m > 0:
        for n in range(1, n_mass + 1):
            terms.append(Term(n - d / a, vol * m**n / math.factorial(n), f"intermediate-{n}"))
    err = (2.0 - d) / a if c11 else (1.0 - d) / a
    return ExpansionPrediction(tuple(terms), err, "C11" if c11 else "Lipschitz", d, a)


@dataclass(frozen=True)
class TraceSample:
    t: float
    value: float
    stderr: float = 0.0
    source: str = "spectral"


@dataclass(frozen=True)
class TraceCurve:
    samples: tuple

    def __post_init__(self):
        s = tuple(self.samples)
        if not s:
            raise ValidationError("empty trace curve")
        for x in s:
            if x.source not in ("spectral", "montecarlo"):
                raise ValidationError(f"unknown source {x.source!r}")
            if not x.stderr >= 0:
                raise ValidationError("stderr must be nonnegative")
        t = np.array([x.t for x in s])
        v = np.array([x.value for x in s])
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValidationError("t must be positive and strictly increasing")
        if np.any(v <= 0):
            raise ValidationError("trace values must be positive")
        # MC values may wiggle within noise; spectral values must decrease strictly
        se = np.array([x.stderr for x in s])
        if np.any(np.diff(v) > 3.0 * (se[1:] + se[:-1])):
            raise ValidationError("trace values must decrease in t")
        object.__setattr__(self, "samples", s)

    @property
    def t(self) -> np.ndarray:
        return np.array([x.t for x in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([x.value for x in self.samples])

    @property
    def stderr(self) -> np.ndarray:
        return np.array([x.stderr for x in self.samples])

    @classmethod
    def from_arrays(cls, t, values, stderr=None, source="spectral") -> "TraceCurve":
        stderr = np.zeros(len(t)) if stderr is None else stderr
        return cls(tuple(TraceSample(float(a), float(b), float(c), source) for a, b, c in zip(t, values, stderr)))


@dataclass(frozen=True)
class FitGroup:
    exponent: float
    labels: tuple
    fitted: float
    sigma: float
    predicted: float

    @property
    def merged(self) -> bool:
        return len(self.labels) > 1

    @property
    def discrepancy(self) -> float:
        return self.fitted - self.predicted

    @property
    def relative_discrepancy(self) -> float:
        return abs(self.discrepancy) / abs(self.predicted) if self.predicted else math.inf


@dataclass(frozen=True)
class FitReport:
    groups: tuple
    covariance: np.ndarray
    fixed: tuple
    n_samples: int
    weighted: bool
    residual_slope: float | None = None
    notes: tuple = field(default_factory=tuple)

    def group(self, label: str) -> FitGroup:
        for g in self.groups:
            if label in g.labels:
                return g
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "groups": [{"exponent": g.exponent, "labels": list(g.labels), "fitted": g.fitted, "sigma": g.sigma,
                        "predicted": g.predicted, "discrepancy": g.discrepancy, "merged": g.merged}
                       for g in self.groups],
            "covariance": np.asarray(self.covariance).tolist(),
            "fixed": list(self.fixed), "n_samples": self.n_samples, "weighted": self.weighted,
            "residual_slope": self.residual_slope, "notes": list(self.notes),
        }


def _groups(prediction: ExpansionPrediction, labels) -> list:
    """Terms bucketed by shifted exponent, in order of first appearance."""
    out = []
    for term in prediction.terms:
        if term.label not in labels:
            continue
        e = prediction.shifted(term)
        for g in out:
            if abs(g[0] - e) < EXPONENT_TOL:
                g[1].append(term)
                break
        else:
            out.append([e, [term]])
    return out


def _check_window(curve: TraceCurve, min_span: float = 4.0):
    if len(curve.samples) < 4:
        raise ValidationError("need at least 4 samples")
    t = curve.t
    if t[-1] < min_span * t[0] * (1 - 1e-12):
        raise ValidationError(f"samples must span at least a factor {min_span:g} in t")


def fit_coefficients(curve: TraceCurve, prediction: ExpansionPrediction, fix=(), extra_exponents=(),
                     with_residual: bool = True, min_span: float = 4.0) -> FitReport:
    """Weighted least squares of t^(d/alpha) Z(t) on the predicted exponents.

    Terms sharing an exponent are merged into one coefficient and compared
    with their summed prediction.  Labels in ``fix`` are held at their
    predicted values; ``extra_exponents`` adds nuisance columns t^e (shifted
    scale) reported with label ``extra-<e>``.  ``min_span`` is the required
    ratio between the largest and smallest t.
    """
    _check_window(curve, min_span)
    fix = tuple(fix)
    labels = {t.label for t in prediction.terms}
    unknown = set(fix) - labels
    if unknown:
        raise ValidationError(f"unknown term labels {sorted(unknown)}")
    t = curve.t
    s = prediction.dim / prediction.alpha
    y = curve.values * t**s
    for lab in fix:
        term = prediction.term(lab)
        y = y - term.coefficient * t ** prediction.shifted(term)
    groups = _groups(prediction, labels - set(fix))
    for e in extra_exponents:
        if any(abs(g[0] - e) < EXPONENT_TOL for g in groups):
            raise RankDeficiencyError(f"extra exponent {e} duplicates a predicted one")
        groups.append([float(e), [Term(e - s, 0.0, f"extra-{e:g}")]])
    if not groups:
        raise ValidationError("nothing left to fit")
    X = np.column_stack([t ** g[0] for g in groups])
    se = curve.stderr * t**s
    weighted = bool(np.all(se > 0)) and any(x.source == "montecarlo" for x in curve.samples)
    w = 1.0 / se**2 if weighted else np.ones(len(t))
    sw = np.sqrt(w)
    Xw, yw = X * sw[:, None], y * sw
    scale = np.linalg.norm(Xw, axis=0)
    Xs = Xw / scale
    _, sv, vt = np.linalg.svd(Xs, full_matrices=False)
    if len(t) < X.shape[1] or sv[-1] <= 0 or sv[0] / sv[-1] > MAX_CONDITION:
        raise RankDeficiencyError(
            f"design with exponents {[round(g[0], 6) for g in groups]} is not separable on t in [{t[0]:g}, {t[-1]:g}]")
    coef_s, *_ = np.linalg.lstsq(Xs, yw, rcond=None)
    coef = coef_s / scale
    cov_s = (vt.T / sv**2) @ vt
    dof = len(t) - X.shape[1]
    if not weighted:
        rss = float(np.sum((yw - Xs @ coef_s) ** 2))
        cov_s = cov_s * (rss / dof if dof > 0 else 0.0)
    cov = cov_s / np.outer(scale, scale)
    out = []
    for i, (e, terms) in enumerate(groups):
        out.append(FitGroup(e, tuple(x.label for x in terms), float(coef[i]), float(math.sqrt(max(cov[i, i], 0.0))),
                            float(sum(x.coefficient for x in terms))))
    notes = tuple(f"merged {'+'.join(g.labels)} at exponent {g.exponent:g}" for g in out if g.merged)
    slope = None
    if with_residual:
        slope = residual_order(curve, prediction, min_span=min_span).slope
    return FitReport(tuple(out), cov, fix, len(t), weighted, slope, notes)


@dataclass(frozen=True)
class ResidualOrder:
    slope: float | None
    expected: float
    inconclusive: bool
    ratio_decreasing: bool | None
    domain_class: str

    def passes(self, margin: float = 0.3) -> bool:
        if self.inconclusive:
            return False
        if self.domain_class == "C11":
            return self.slope >= self.expected - margin
        return bool(self.ratio_decreasing)


def residual_order(curve: TraceCurve, prediction: ExpansionPrediction, floor: float = 1e-12,
                   min_span: float = 4.0) -> ResidualOrder:
    """Log-log slope of |t^(d/alpha) Z(t) - prediction| over the sample window.

    Residuals at or below the noise floor (3 stderr, or ``floor`` relative
    to the value) make the check inconclusive rather than failed.
    """
    _check_window(curve, min_span)
    t = curve.t
    s = prediction.dim / prediction.alpha
    y = curve.values * t**s
    res = np.abs(y - prediction.evaluate(t))
    noise = np.maximum(3.0 * curve.stderr * t**s, floor * np.abs(y))
    ok = res > noise
    expected = prediction.error_exponent + s
    if ok.sum() < 3:
        return ResidualOrder(None, expected, True, None, prediction.domain_class)
    slope = float(np.polyfit(np.log(t[ok]), np.log(res[ok]), 1)[0])
    ratio = res[ok] / t[ok] ** (1.0 / prediction.alpha)
    # t increases along the curve, so the ratio must fall as t decreases
    decreasing = bool(np.all(np.diff(ratio) > 0))
    return ResidualOrder(slope, expected, False, decreasing, prediction.domain_class)
