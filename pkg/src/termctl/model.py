"""Domain types shared by every module.

All types are frozen value objects. Constructors reject bundles that
violate their invariants; ``validate_regime`` reports every problem of a
possibly invalid bundle without raising.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Mapping, Optional, Union

import numpy as np

from .errors import PreconditionError


class MomentClass(str, Enum):
    POLYNOMIAL_MOMENTS = "POLYNOMIAL_MOMENTS"
    EXPONENTIAL_MOMENTS = "EXPONENTIAL_MOMENTS"
    BOUNDED = "BOUNDED"


class CovarianceKind(str, Enum):
    BATCH_MEANS = "BATCH_MEANS"
    SAMPLE_COV = "SAMPLE_COV"
    ANALYTIC = "ANALYTIC"


def format_float(x) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _raise_if(violations):
    if violations:
        raise PreconditionError("; ".join(violations))


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _finite_number(v):
    try:
        return math.isfinite(float(v))
    except (TypeError, ValueError):
        return False


# ---------------------------------------------------------------- chain output

@dataclass(frozen=True)
class ChainOutput:
    """T x d matrix of feature evaluations f(X_t), rows are time steps."""

    values: np.ndarray
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise PreconditionError("values must be a non-empty T x d matrix")
        if not np.all(np.isfinite(v)):
            raise PreconditionError("values must be finite")
        if not _is_int(self.seed) or not 0 <= int(self.seed) < 2**64:
            raise PreconditionError("seed must be a 64-bit unsigned integer")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, ChainOutput):
            return NotImplemented
        return (self.seed == other.seed and self.label == other.label
                and self.values.shape == other.values.shape
                and bool(np.array_equal(self.values, other.values)))

    def to_csv(self, path):
        """Write ``t,f1,...,fd`` rows. Run metadata goes into a leading
        ``#`` comment line so plain CSV readers can skip it."""
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps({"seed": self.seed, "label": self.label}) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + ["f%d" % (i + 1) for i in range(self.d)])
            for t, row in enumerate(self.values, start=1):
                w.writerow([t] + [format_float(x) for x in row])

    @classmethod
    def from_csv(cls, path) -> "ChainOutput":
        meta = {}
        rows = []
        with open(path, newline="") as fh:
            lines = []
            for line in fh:
                if line.startswith("#"):
                    try:
                        meta.update(json.loads(line[1:]))
                    except ValueError:
                        pass
                    continue
                if line.strip():
                    lines.append(line)
        reader = csv.reader(lines)
        header = next(reader, None)
        if header is None or header[0].strip() != "t":
            raise PreconditionError("chain CSV must start with a 't,f1,...,fd' header")
        for rec in reader:
            rows.append([float(x) for x in rec[1:]])
        if not rows:
            raise PreconditionError("chain CSV has no rows")
        return cls(np.array(rows), seed=int(meta.get("seed", 0)),
                   label=str(meta.get("label", "")))


# ---------------------------------------------------------------- drift specs

def geometric_violations(lam, b, upsilon_C, m0=1):
    out = []
    if not (_finite_number(lam) and 0 < float(lam) < 1):
        out.append("lambda must lie in (0,1)")
    if not (_finite_number(b) and float(b) > 0):
        out.append("b must be positive")
    if not (_finite_number(upsilon_C) and float(upsilon_C) > 0):
        out.append("upsilon_C must be positive")
    if not (_is_int(m0) and m0 >= 1):
        out.append("m0 must be a positive integer")
    return out


def polynomial_violations(c, b, eta, upsilon_C, m0=1):
    out = []
    if not (_finite_number(c) and float(c) > 0):
        out.append("c must be positive")
    if not (_finite_number(b) and float(b) > 0):
        out.append("b must be positive")
    if not (_finite_number(eta) and 0 < float(eta) < 1):
        out.append("eta must lie in (0,1)")
    if not (_finite_number(upsilon_C) and float(upsilon_C) > 0):
        out.append("upsilon_C must be positive")
    if not (_is_int(m0) and m0 >= 1):
        out.append("m0 must be a positive integer")
    return out


@dataclass(frozen=True)
class GeometricDriftSpec:
    """PV <= lam V + b 1_C, with upsilon_C = sup_C V."""

    lam: float
    b: float
    upsilon_C: float
    m0: int = 1

    kind = "geometric"

    def __post_init__(self):
        _raise_if(geometric_violations(self.lam, self.b, self.upsilon_C, self.m0))

    def to_dict(self):
        return {"kind": "geometric", "lambda": float(self.lam), "b": float(self.b),
                "upsilon_C": float(self.upsilon_C), "m0": int(self.m0)}


@dataclass(frozen=True)
class PolynomialDriftSpec:
    """PV <= V - c V^eta + b 1_C, with upsilon_C = sup_C V."""

    c: float
    b: float
    eta: float
    upsilon_C: float
    m0: int = 1

    kind = "polynomial"

    def __post_init__(self):
        _raise_if(polynomial_violations(self.c, self.b, self.eta, self.upsilon_C, self.m0))

    def to_dict(self):
        return {"kind": "polynomial", "c": float(self.c), "b": float(self.b),
                "eta": float(self.eta), "upsilon_C": float(self.upsilon_C),
                "m0": int(self.m0)}


DriftSpec = Union[GeometricDriftSpec, PolynomialDriftSpec]


# ---------------------------------------------------------------- minorisation

@dataclass(frozen=True)
class SmallSet:
    """Membership predicate plus an optional bounding box."""

    contains: Callable[[np.ndarray], np.ndarray]
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    label: str = ""

    @classmethod
    def box(cls, lower, upper, label="box"):
        lo = _readonly(np.atleast_1d(lower))
        hi = _readonly(np.atleast_1d(upper))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise PreconditionError("box needs lower < upper coordinatewise")

        def contains(x):
            x = np.asarray(x, dtype=float)
            if x.ndim == 1 and lo.size > 1:
                x = x[None, :]
            x = x.reshape(-1, lo.size)
            return np.all((x >= lo) & (x <= hi), axis=1)

        return cls(contains, lo, hi, label)

    @property
    def diameter(self):
        if self.lower is None:
            return math.nan
        return float(np.linalg.norm(self.upper - self.lower))

    def to_dict(self):
        if self.lower is None:
            return {"label": self.label}
        return {"label": self.label, "lower": [float(v) for v in self.lower],
                "upper": [float(v) for v in self.upper]}


@dataclass(frozen=True)
class SmallMeasure:
    """Normalised density accessor and sampler for the small measure nu."""

    density: Callable[[np.ndarray], np.ndarray]
    sample: Callable[[np.random.Generator, int], np.ndarray]
    label: str = ""


@dataclass(frozen=True)
class MinorisationSpec:
    """P^{m0}(x, .) >= alpha 1_C(x) nu(.)"""

    alpha: float
    m0: int = 1
    small_set: Optional[SmallSet] = None
    nu: Optional[SmallMeasure] = None

    def __post_init__(self):
        _raise_if(minorisation_violations(self.alpha, self.m0))

    def to_dict(self):
        out = {"alpha": float(self.alpha), "m0": int(self.m0)}
        if self.small_set is not None and self.small_set.lower is not None:
            out["small_set"] = self.small_set.to_dict()
        return out


def minorisation_violations(alpha, m0=1):
    out = []
    if not (_finite_number(alpha) and 0 < float(alpha) <= 1):
        out.append("alpha must lie in (0,1]")
    if not (_is_int(m0) and m0 >= 1):
        out.append("minorisation m0 must be a positive integer")
    return out


# ---------------------------------------------------------------- moments

def moment_violations(p, epsilon, M, moment_class):
    out = []
    if not (_finite_number(p) and float(p) > 2):
        out.append("p must exceed 2")
    elif not (_finite_number(epsilon) and 0 < float(epsilon) <= 1 / float(p)):
        out.append("epsilon must lie in (0, 1/p]")
    if not (_finite_number(M) and float(M) >= 0):
        out.append("M must be a nonnegative number")
    try:
        MomentClass(moment_class)
    except ValueError:
        out.append("moment_class must be one of %s" % [m.value for m in MomentClass])
    return out


@dataclass(frozen=True)
class MomentSpec:
    """sup_i pi(|f_i|^{p+epsilon}) <= M."""

    p: float
    epsilon: float
    M: float = 1.0
    moment_class: MomentClass = MomentClass.POLYNOMIAL_MOMENTS
    M_estimated: bool = False

    def __post_init__(self):
        _raise_if(moment_violations(self.p, self.epsilon, self.M, self.moment_class))
        object.__setattr__(self, "moment_class", MomentClass(self.moment_class))

    def to_dict(self):
        return {"p": float(self.p), "epsilon": float(self.epsilon), "M": float(self.M),
                "moment_class": self.moment_class.value,
                "M_estimated": bool(self.M_estimated)}


def estimate_moment_bound(output, p, epsilon) -> float:
    """Empirical max over coordinates of mean |f_i|^{p+epsilon}."""
    v = output.values if isinstance(output, ChainOutput) else np.atleast_2d(output)
    return float(np.max(np.mean(np.abs(v) ** (p + epsilon), axis=0)))


# ---------------------------------------------------------------- regime

@dataclass(frozen=True)
class RegimeParams:
    drift: DriftSpec
    minorisation: MinorisationSpec
    moments: MomentSpec
    dim_state: int = 1
    dim_feature: int = 1
    a: float = 1.0
    trace_ratio: float = 1.0
    sigma0: float = 1.0
    theta0: float = 0.25
    eps_bar: Optional[float] = None

    def __post_init__(self):
        _raise_if(_regime_scalar_violations(
            self.dim_state, self.dim_feature, self.a, self.trace_ratio,
            self.sigma0, self.theta0))

    @property
    def one_step(self) -> bool:
        return self.minorisation.m0 == 1

    @property
    def geometric(self) -> bool:
        return isinstance(self.drift, GeometricDriftSpec)

    @property
    def m0(self) -> int:
        return self.minorisation.m0

    def to_dict(self):
        return {
            "drift": self.drift.to_dict(),
            "minorisation": self.minorisation.to_dict(),
            "moments": self.moments.to_dict(),
            "dim_state": int(self.dim_state),
            "dim_feature": int(self.dim_feature),
            "a": float(self.a),
            "trace_ratio": float(self.trace_ratio),
            "sigma0": float(self.sigma0),
            "theta0": float(self.theta0),
            "eps_bar": None if self.eps_bar is None else float(self.eps_bar),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RegimeParams":
        v = validate_regime(data)
        if v:
            raise PreconditionError("; ".join(v))
        return _build_regime(data)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "RegimeParams":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _regime_scalar_violations(dim_state, dim_feature, a, trace_ratio, sigma0, theta0):
    out = []
    if not (_is_int(dim_state) and dim_state >= 1):
        out.append("dim_state must be a positive integer")
    if not (_is_int(dim_feature) and dim_feature >= 1):
        out.append("dim_feature must be a positive integer")
    for name, val in (("a", a), ("trace_ratio", trace_ratio), ("sigma0", sigma0),
                      ("theta0", theta0)):
        if not (_finite_number(val) and float(val) > 0):
            out.append("%s must be positive" % name)
    return out


def _drift_from_dict(d):
    kind = d.get("kind")
    if kind == "geometric":
        return GeometricDriftSpec(d["lambda"], d["b"], d["upsilon_C"], d.get("m0", 1))
    if kind == "polynomial":
        return PolynomialDriftSpec(d["c"], d["b"], d["eta"], d["upsilon_C"], d.get("m0", 1))
    raise PreconditionError("drift kind must be 'geometric' or 'polynomial'")


def _build_regime(data):
    mino = data["minorisation"]
    mom = data["moments"]
    box = mino.get("small_set")
    small = None
    if box and "lower" in box:
        small = SmallSet.box(box["lower"], box["upper"], box.get("label", "box"))
    return RegimeParams(
        drift=_drift_from_dict(data["drift"]),
        minorisation=MinorisationSpec(mino["alpha"], mino.get("m0", 1), small),
        moments=MomentSpec(mom["p"], mom["epsilon"], mom.get("M", 1.0),
                           MomentClass(mom.get("moment_class", "POLYNOMIAL_MOMENTS")),
                           bool(mom.get("M_estimated", False))),
        dim_state=data.get("dim_state", 1),
        dim_feature=data.get("dim_feature", 1),
        a=data.get("a", 1.0),
        trace_ratio=data.get("trace_ratio", 1.0),
        sigma0=data.get("sigma0", 1.0),
        theta0=data.get("theta0", 0.25),
        eps_bar=data.get("eps_bar"),
    )


def _raw_violations(data: Mapping[str, Any]):
    out = []
    dr = data.get("drift")
    if not isinstance(dr, Mapping):
        out.append("drift must be an object")
    elif dr.get("kind") == "geometric":
        out += geometric_violations(dr.get("lambda"), dr.get("b"), dr.get("upsilon_C"),
                                    dr.get("m0", 1))
    elif dr.get("kind") == "polynomial":
        out += polynomial_violations(dr.get("c"), dr.get("b"), dr.get("eta"),
                                     dr.get("upsilon_C"), dr.get("m0", 1))
    else:
        out.append("drift kind must be 'geometric' or 'polynomial'")
    mi = data.get("minorisation")
    if not isinstance(mi, Mapping):
        out.append("minorisation must be an object")
    else:
        out += minorisation_violations(mi.get("alpha"), mi.get("m0", 1))
    mo = data.get("moments")
    if not isinstance(mo, Mapping):
        out.append("moments must be an object")
    else:
        out += moment_violations(mo.get("p"), mo.get("epsilon"), mo.get("M", 1.0),
                                 mo.get("moment_class", "POLYNOMIAL_MOMENTS"))
    out += _regime_scalar_violations(
        data.get("dim_state", 1), data.get("dim_feature", 1), data.get("a", 1.0),
        data.get("trace_ratio", 1.0), data.get("sigma0", 1.0), data.get("theta0", 0.25))
    eb = data.get("eps_bar")
    if eb is not None and not (_finite_number(eb) and float(eb) > 0):
        out.append("eps_bar must be positive")
    return out


def _cross_violations(r: RegimeParams):
    out = []
    if r.drift.m0 != r.minorisation.m0:
        out.append("drift and minorisation must share m0")
    if isinstance(r.drift, PolynomialDriftSpec):
        p, eta = r.moments.p, r.drift.eta
        exp_like = r.moments.moment_class != MomentClass.POLYNOMIAL_MOMENTS
        if exp_like and eta > 0.5:
            hi = min(0.5, (2 * eta - 1) / (1 - eta))
            if r.eps_bar is None:
                out.append("eps_bar is required for exponential moments with eta > 1/2")
            elif not 0 < r.eps_bar < hi:
                out.append("eps_bar must lie in (0, %s)" % format_float(hi))
        else:
            lo = 2 * p / (3 * p - 2)
            if eta <= lo:
                out.append("eta must exceed 2p/(3p-2) = %s for a supported p0 branch"
                           % format_float(lo))
        if r.minorisation.alpha >= 1:
            out.append("alpha must be < 1 under polynomial drift")
    return out


def validate_regime(params: Union[RegimeParams, Mapping[str, Any]]) -> list:
    """List every violated invariant; empty when the bundle is valid.

    Accepts a constructed ``RegimeParams`` or the raw mapping read from a
    regime JSON file (the latter may hold values no constructor accepts).
    Never raises.
    """
    try:
        if isinstance(params, RegimeParams):
            return _cross_violations(params)
        if not isinstance(params, Mapping):
            return ["regime must be a RegimeParams or a mapping"]
        out = _raw_violations(params)
        if out:
            return out
        return _cross_violations(_build_regime(params))
    except Exception as exc:  # validation never throws
        return ["malformed regime: %s" % exc]


# ---------------------------------------------------------------- covariance

@dataclass(frozen=True)
class CovarianceEstimate:
    matrix: np.ndarray
    batch_size: int
    num_batches: int
    T: int
    kind: CovarianceKind = CovarianceKind.BATCH_MEANS
    jitter: float = 0.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise PreconditionError("covariance must be a square matrix")
        if not np.all(np.isfinite(m)):
            raise PreconditionError("covariance entries must be finite")
        scale = max(float(np.max(np.abs(m))), np.finfo(float).tiny)
        if np.max(np.abs(m - m.T)) > 1e-12 * scale:
            raise PreconditionError("covariance must be symmetric")
        for name in ("batch_size", "num_batches", "T"):
            v = getattr(self, name)
            if not (_is_int(v) and v >= 1):
                raise PreconditionError("%s must be a positive integer" % name)
        object.__setattr__(self, "matrix", _readonly(0.5 * (m + m.T)))
        object.__setattr__(self, "kind", CovarianceKind(self.kind))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def with_jitter(self, zeta: float) -> "CovarianceEstimate":
        """Return the estimate plus zeta I; the jitter is recorded."""
        if zeta < 0:
            raise PreconditionError("jitter must be nonnegative")
        return CovarianceEstimate(self.matrix + zeta * np.eye(self.d), self.batch_size,
                                  self.num_batches, self.T, self.kind, self.jitter + zeta)

    def to_dict(self):
        return {"matrix": [[float(x) for x in row] for row in self.matrix],
                "batch_size": int(self.batch_size), "num_batches": int(self.num_batches),
                "T": int(self.T), "kind": self.kind.value, "jitter": float(self.jitter)}


def as_matrix(x) -> np.ndarray:
    """Accept a CovarianceEstimate or anything array-like."""
    if isinstance(x, CovarianceEstimate):
        return x.matrix
    m = np.array(x, dtype=float)
    return m.reshape(1, 1) if m.ndim < 2 else m


def as_values(output) -> np.ndarray:
    if isinstance(output, ChainOutput):
        return output.values
    v = np.asarray(output, dtype=float)
    return v[:, None] if v.ndim == 1 else v


__all__ = [
    "MomentClass", "CovarianceKind", "ChainOutput", "GeometricDriftSpec",
    "PolynomialDriftSpec", "DriftSpec", "SmallSet", "SmallMeasure", "MinorisationSpec",
    "MomentSpec", "RegimeParams", "CovarianceEstimate", "validate_regime",
    "estimate_moment_bound", "format_float", "as_matrix", "as_values",
]
