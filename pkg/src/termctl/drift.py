"""Drift-condition toolkit.

Skeleton drift transforms, hitting-time and regeneration moment bounds,
initial-cycle bounds, and a numerical checker for certified drift
inequalities. Bounds whose denominators vanish raise ``UnstableBound``
instead of being clamped.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .errors import Degenerate, PreconditionError, UnstableBound
from .model import GeometricDriftSpec, MinorisationSpec, PolynomialDriftSpec
from .rates import q_of_eta

FROM_NU = "nu"
FROM_X = "x"


# ---------------------------------------------------------------- skeleton transforms

def skeleton_geometric_superset(spec: GeometricDriftSpec, z1: float) -> GeometricDriftSpec:
    """Geometric drift on a larger small set C0 with z1 = inf_{C0 \\ C} V."""
    if not z1 > spec.b / (1 - spec.lam):
        raise PreconditionError("z1 must exceed b/(1-lambda) = %r" % (spec.b / (1 - spec.lam)))
    return replace(spec, lam=(spec.b + z1 * spec.lam) / z1)


def skeleton_polynomial_superset(spec: PolynomialDriftSpec, z1: float) -> PolynomialDriftSpec:
    """Polynomial drift on a larger small set, with a smaller eta."""
    bound = (1 + spec.b / spec.c) ** (1 / spec.eta)
    if not z1 > bound:
        raise PreconditionError("z1 must exceed (1+b/c)^(1/eta) = %r" % bound)
    eta_hat = math.log(z1 ** spec.eta - spec.b / spec.c) / math.log(z1)
    return replace(spec, eta=eta_hat)


def skeleton_geometric_subset(spec: GeometricDriftSpec, alpha: float,
                              nu_C0: float) -> GeometricDriftSpec:
    """Geometric drift for a small subset C0 with alpha nu(C0) > 0."""
    an = alpha * nu_C0
    if not 0 < an <= 1:
        raise PreconditionError("alpha * nu(C0) must lie in (0,1]")
    lam = (spec.lam * an + spec.b) / (an + spec.b)
    return replace(spec, lam=lam, b=spec.b + spec.b / an)


def polynomial_subset_interval(spec: PolynomialDriftSpec, alpha: float, nu_C: float):
    """Open interval of admissible c_hat for ``skeleton_polynomial_subset``."""
    an = alpha * nu_C
    B = min(1.0, spec.b) / an
    return spec.c / (B ** spec.eta + 1), spec.c / 2


def skeleton_polynomial_subset(spec: PolynomialDriftSpec, alpha: float, nu_C: float,
                               c_hat: float) -> PolynomialDriftSpec:
    """Polynomial drift for a subset, B = min(1,b)/(alpha nu(C))."""
    an = alpha * nu_C
    if not 0 < an <= 1:
        raise PreconditionError("alpha * nu(C) must lie in (0,1]")
    B = min(1.0, spec.b) / an
    if not B > 1:
        raise PreconditionError("min(1,b)/(alpha nu(C)) must exceed 1")
    lo, hi = polynomial_subset_interval(spec, alpha, nu_C)
    if not lo < c_hat < hi:
        raise PreconditionError("c_hat must lie in (%r, %r)" % (lo, hi))
    eta_hat = math.log((spec.c - c_hat) / c_hat) / math.log(B)
    return replace(spec, c=c_hat, eta=eta_hat, b=spec.b + B * (1 - an))


# ---------------------------------------------------------------- hitting times

def hitting_exponent(spec: GeometricDriftSpec, mino: MinorisationSpec) -> float:
    """a = 1 + log((lam upsilon_C + b - alpha)/(1 - alpha)) / log(1/lam)."""
    alpha = mino.alpha
    if alpha >= 1:
        return -math.inf  # (1-alpha) r^a vanishes
    inner = (spec.lam * spec.upsilon_C + spec.b - alpha) / (1 - alpha)
    if inner <= 0:
        raise PreconditionError("lambda upsilon_C + b must exceed alpha")
    return 1 + math.log(inner) / math.log(1 / spec.lam)


def stable_r_max(spec: GeometricDriftSpec, mino: MinorisationSpec) -> float:
    """Supremum of r keeping (1-alpha) r^a < 1, capped at 1/lambda."""
    a = hitting_exponent(spec, mino)
    cap = 1 / spec.lam
    if mino.alpha >= 1 or a <= 0:
        return cap
    return min(cap, (1 - mino.alpha) ** (-1 / a))


def hitting_mgf_bound(spec: GeometricDriftSpec, mino: MinorisationSpec, r: float,
                      at: str = FROM_NU, V_x: float = None, in_small_set: bool = None) -> float:
    """Bound on E[r^tau] for the regeneration hitting time.

    From nu: (b/(1-lam)) / ((1 - (1-alpha) r^a) alpha).
    From x: alpha G / (1 - (1-alpha) r^a) with G = V(x) on C and
    r (lam upsilon_C + b) off C.
    """
    if not 1 < r <= 1 / spec.lam:
        raise PreconditionError("r must lie in (1, 1/lambda]")
    alpha = mino.alpha
    a = hitting_exponent(spec, mino)
    leak = 0.0 if alpha >= 1 else (1 - alpha) * r ** a
    denom = 1 - leak
    if denom <= 0:
        raise UnstableBound("(1-alpha) r^a = %r >= 1; shrink r" % leak)
    if at == FROM_NU:
        return (spec.b / (1 - spec.lam)) / (denom * alpha)
    if at == FROM_X:
        if V_x is None or in_small_set is None:
            raise PreconditionError("FROM_X needs V_x and in_small_set")
        G = V_x if in_small_set else r * (spec.lam * spec.upsilon_C + spec.b)
        return alpha * G / denom
    raise PreconditionError("at must be 'nu' or 'x'")


def hitting_poly_bound(spec: PolynomialDriftSpec, mino: MinorisationSpec, at: str = FROM_NU,
                       V_x: float = None, in_small_set: bool = None) -> float:
    """Bound on E[tau^q], q = eta/(1-eta)."""
    if not spec.eta > 0.5:
        raise PreconditionError("eta must exceed 1/2")
    alpha = mino.alpha
    if alpha >= 1:
        raise Degenerate("alpha = 1 leaves no residual kernel")
    resid = (spec.upsilon_C - spec.c + spec.b) / (1 - alpha)
    if at == FROM_NU:
        return spec.b / (spec.c * alpha) + resid
    if at == FROM_X:
        if V_x is None or in_small_set is None:
            raise PreconditionError("FROM_X needs V_x and in_small_set")
        return V_x + resid * (1.0 if in_small_set else 0.0)
    raise PreconditionError("at must be 'nu' or 'x'")


# ---------------------------------------------------------------- regeneration blocks

def regen_moment_bound(drift, mino: MinorisationSpec, t: float = None) -> float:
    """Bound on the first regeneration block moment from nu.

    Geometric: E[exp(t R1)] <= b/(alpha lam (1-lam)) for |t| <= ln(1/lam)/m0.
    Polynomial: E[R1^q] <= 2^{q-1} m0^q (1 + b/(c alpha) + (upsilon_C-c+b)/(1-alpha)).
    """
    m0 = mino.m0
    if isinstance(drift, GeometricDriftSpec):
        if t is not None and abs(t) > math.log(1 / drift.lam) / m0 * (1 + 1e-12):
            raise PreconditionError("|t| must not exceed ln(1/lambda)/m0")
        return drift.b / (mino.alpha * drift.lam * (1 - drift.lam))
    q = q_of_eta(drift.eta)
    inner = 1 + hitting_poly_bound(drift, mino, FROM_NU)
    return 2 ** (q - 1) * m0 ** q * inner


def regen_mgf_argument(drift: GeometricDriftSpec, mino: MinorisationSpec) -> float:
    """The t = ln(1/lam)/(2 m0) at which the block MGF is checked."""
    return 0.5 * math.log(1 / drift.lam) / mino.m0


# ---------------------------------------------------------------- initial cycle

def initial_cycle_bound(drift, mino: MinorisationSpec, V_x: float, sup_f_norm: float,
                        d: int = 1, r: float = None, in_small_set: bool = True,
                        hitting_bound: float = None, b0: float = 0.0) -> float:
    """Deterministic bound on the initial (pre-regeneration) block sum.

    Geometric: d sup|f|_V/(1-lam) (V(x) + b log_r(H)) with H the from-x
    hitting bound (computed unless ``hitting_bound`` is given).
    Polynomial: d sup|f|_{V^eta}/c (V + (V^{1-eta} + b^eta + b0)/((1-eta) c)).
    """
    if not math.isfinite(sup_f_norm) or sup_f_norm < 0:
        raise PreconditionError("sup_f_norm must be finite and nonnegative")
    if isinstance(drift, GeometricDriftSpec):
        if r is None:
            raise PreconditionError("geometric initial-cycle bound needs r")
        H = hitting_bound
        if H is None:
            H = hitting_mgf_bound(drift, mino, r, FROM_X, V_x, in_small_set)
        # E[r^tau] >= 1, so a bound below 1 may be raised to 1
        return d * sup_f_norm / (1 - drift.lam) * (V_x + drift.b * math.log(max(H, 1.0))
                                                   / math.log(r))
    eta, c = drift.eta, drift.c
    return d * sup_f_norm / c * (V_x + (V_x ** (1 - eta) + drift.b ** eta + b0)
                                 / ((1 - eta) * c))


# ---------------------------------------------------------------- certificate check

def drift_slack(drift, V, PV, in_small_set, points) -> np.ndarray:
    """Right side minus left side of the drift inequality at each point.

    ``V``, ``PV`` and ``in_small_set`` are vectorised callables of an
    (n, dim) array. Nonnegative slack everywhere certifies the drift.
    """
    x = np.asarray(points, dtype=float)
    v = np.asarray(V(x), dtype=float)
    pv = np.asarray(PV(x), dtype=float)
    ind = np.asarray(in_small_set(x), dtype=float)
    if isinstance(drift, GeometricDriftSpec):
        rhs = drift.lam * v + drift.b * ind
    else:
        rhs = v - drift.c * v ** drift.eta + drift.b * ind
    return rhs - pv


def verify_drift(drift, V, PV, in_small_set, points, tol=1e-9) -> float:
    """Minimum relative slack; raises PreconditionError if negative beyond tol."""
    x = np.asarray(points, dtype=float)
    slack = drift_slack(drift, V, PV, in_small_set, x)
    scale = np.maximum(1.0, np.abs(np.asarray(V(x), dtype=float)))
    worst = float(np.min(slack / scale))
    if worst < -tol:
        raise PreconditionError("drift inequality fails (relative slack %r)" % worst)
    return worst


__all__ = [
    "FROM_NU", "FROM_X", "skeleton_geometric_superset", "skeleton_polynomial_superset",
    "skeleton_geometric_subset", "skeleton_polynomial_subset", "polynomial_subset_interval",
    "hitting_exponent", "stable_r_max", "hitting_mgf_bound", "hitting_poly_bound",
    "regen_moment_bound", "regen_mgf_argument", "initial_cycle_bound", "drift_slack",
    "verify_drift",
]
