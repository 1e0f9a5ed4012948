"""Confidence ellipsoids, their volumes, the guard sequence and the fixed
volume stopping rule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import linalg, optimize, special

from .errors import PreconditionError, SingularSigma, TooFewBatches
from .estimators import batch_means_cov_from_prefix, logdet_pd
from .model import ChainOutput, as_matrix, as_values
from .rates import effective_p0, min_simulation_threshold


def chi_square_quantile(d: int, alpha: float) -> float:
    """(1-alpha)-quantile of chi^2_d by bisection on the regularized lower
    incomplete gamma function."""
    if d < 1:
        raise PreconditionError("d must be a positive integer")
    if not 0 < alpha < 1:
        raise PreconditionError("alpha must lie in (0,1)")
    target = 1.0 - alpha
    a = 0.5 * d

    def f(q):
        return special.gammainc(a, 0.5 * q) - target

    hi = max(1.0, float(d))
    while f(hi) < 0:
        hi *= 2.0
    if f(0.0) >= 0:
        return 0.0
    return optimize.bisect(f, 0.0, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=400)


def unit_ball_log_volume(d: int) -> float:
    return 0.5 * d * math.log(math.pi) - special.gammaln(0.5 * d + 1)


def c_alpha_d(alpha: float, d: int, q_alpha: float = None) -> float:
    """q_alpha^{d/2} times the volume of the unit d-ball."""
    q = chi_square_quantile(d, alpha) if q_alpha is None else q_alpha
    return q ** (0.5 * d) * math.exp(unit_ball_log_volume(d))


def log_ellipsoid_volume(sigma, T: int, q_alpha: float, d: int = None) -> float:
    s = as_matrix(sigma)
    d = s.shape[0] if d is None else d
    if s.shape != (d, d):
        raise PreconditionError("sigma must be d x d")
    ld = logdet_pd(s)
    # T^{-d/2} q^{d/2} 2 pi^{d/2} / (d Gamma(d/2)) det(Sigma)^{1/2}
    return (-0.5 * d * math.log(T) + 0.5 * d * math.log(q_alpha) + math.log(2.0)
            + 0.5 * d * math.log(math.pi) - math.log(d) - special.gammaln(0.5 * d)
            + 0.5 * ld)


def ellipsoid_volume(sigma, T: int, q_alpha: float, d: int = None) -> float:
    return math.exp(log_ellipsoid_volume(sigma, T, q_alpha, d))


def lambda_guard(t, T_star) -> float:
    """1{t < T*} + 1/t."""
    if t < 1:
        raise PreconditionError("t must be at least 1")
    return (1.0 if t < T_star else 0.0) + 1.0 / t


@dataclass(frozen=True)
class Ellipsoid:
    """{x : (x - center)^T shape^{-1} (x - center) < radius_sq}."""

    center: np.ndarray
    shape: np.ndarray
    radius_sq: float

    def __post_init__(self):
        c = np.atleast_1d(np.array(self.center, dtype=float))
        s = np.array(as_matrix(self.shape), dtype=float)
        if s.shape != (c.size, c.size):
            raise PreconditionError("shape must be d x d")
        if not self.radius_sq > 0:
            raise PreconditionError("radius_sq must be positive")
        try:
            L = linalg.cholesky(s, lower=True)
        except linalg.LinAlgError:
            raise SingularSigma("ellipsoid shape is not positive definite") from None
        for a in (c, s, L):
            a.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", s)
        object.__setattr__(self, "_chol", L)

    @property
    def d(self) -> int:
        return self.center.size

    def quadratic_form(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        y = linalg.solve_triangular(self._chol, (x - self.center).T, lower=True)
        return np.sum(y * y, axis=0)

    def contains(self, x):
        """Strict membership; scalar input gives a bool."""
        q = self.quadratic_form(x) < self.radius_sq
        return bool(q[0]) if np.ndim(x) <= 1 and q.size == 1 else q

    def semi_axes(self) -> np.ndarray:
        return np.sqrt(self.radius_sq * linalg.eigvalsh(self.shape))

    def volume(self) -> float:
        ld = logdet_pd(self.shape)
        return math.exp(unit_ball_log_volume(self.d) + 0.5 * self.d * math.log(self.radius_sq)
                        + 0.5 * ld)

    def to_dict(self):
        return {"center": [float(x) for x in self.center],
                "shape": [[float(x) for x in row] for row in self.shape],
                "radius_sq": float(self.radius_sq)}


def confidence_ellipsoid(mean, sigma, T: int, alpha: float, q_alpha: float = None) -> Ellipsoid:
    s = as_matrix(sigma)
    q = chi_square_quantile(s.shape[0], alpha) if q_alpha is None else q_alpha
    return Ellipsoid(np.atleast_1d(mean), s, q / T)


# ---------------------------------------------------------------- FVSR

@dataclass(frozen=True)
class TracePoint:
    t: int
    vol_root: float
    ess: float
    batch_size: int
    singular: bool = False


@dataclass(frozen=True)
class TerminationReport:
    status: str
    T1: Optional[int]
    epsilon: float
    alpha: float
    final_ellipsoid: Optional[Ellipsoid]
    volume_trace: tuple
    ess_at_T1: float
    T_star_used: float
    T_star_source: str
    check_stride: int
    batch_exponent: float
    batch_scale: float
    singular_checkpoints: int
    T_consumed: int

    @property
    def terminated(self) -> bool:
        return self.status == "TERMINATED"

    def to_dict(self, include_trace=False):
        out = {
            "status": self.status,
            "T1": self.T1,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "T_star_used": self.T_star_used,
            "T_star_source": self.T_star_source,
            "check_stride": self.check_stride,
            "batch_exponent": self.batch_exponent,
            "batch_scale": self.batch_scale,
            "ess_at_T1": self.ess_at_T1,
            "singular_checkpoints": self.singular_checkpoints,
            "checkpoints": len(self.volume_trace),
            "T_consumed": self.T_consumed,
            "final_ellipsoid": None if self.final_ellipsoid is None
            else self.final_ellipsoid.to_dict(),
        }
        if include_trace:
            out["volume_trace"] = [[p.t, p.vol_root, p.ess] for p in self.volume_trace]
        return out


def fvsr_batch_exponent(regime) -> float:
    """T-exponent of the batch size used inside the stopping rule:
    1/2 + 1/p0 (one-step), 3/4 + 1/(4(p0-1)) (multi-step)."""
    p0 = effective_p0(regime)
    if regime.one_step:
        return 0.5 + 1.0 / p0
    return 0.75 + 1.0 / (4.0 * (p0 - 1.0))


def _blocks(source) -> Iterable[np.ndarray]:
    if isinstance(source, ChainOutput) or isinstance(source, np.ndarray):
        yield as_values(source)
        return
    for block in source:
        yield as_values(block)


@dataclass
class _Prefix:
    """Growable cumulative sums of rows and of outer products."""

    d: int
    cap: int = 1024
    n: int = 0
    s: np.ndarray = field(init=False)
    s2: np.ndarray = field(init=False)

    def __post_init__(self):
        self.s = np.zeros((self.cap + 1, self.d))
        self.s2 = np.zeros((self.cap + 1, self.d, self.d))

    def extend(self, rows):
        m = rows.shape[0]
        if self.n + m > self.cap:
            cap = max(2 * self.cap, self.n + m)
            s = np.zeros((cap + 1, self.d))
            s2 = np.zeros((cap + 1, self.d, self.d))
            s[: self.n + 1] = self.s[: self.n + 1]
            s2[: self.n + 1] = self.s2[: self.n + 1]
            self.s, self.s2, self.cap = s, s2, cap
        self.s[self.n + 1: self.n + m + 1] = self.s[self.n] + np.cumsum(rows, axis=0)
        outer = rows[:, :, None] * rows[:, None, :]
        self.s2[self.n + 1: self.n + m + 1] = self.s2[self.n] + np.cumsum(outer, axis=0)
        self.n += m


def fvsr_run(source, epsilon: float, regime=None, alpha: float = 0.05, *,
             max_T: int = 10**7, t_star: float = None, delta1: float = 1.0,
             delta2: float = 0.1, dimension_negligible: bool = False,
             psi_N_value: float = None, check_stride: int = None,
             batch_scale: float = 1.0, batch_exponent: float = None,
             volume_root: Callable[[int], float] = None) -> TerminationReport:
    """Run the fixed volume stopping rule on a stream of f(X_t) rows.

    Stops at the first checkpoint t >= T* with Vol(C(t))^{1/d} + eps Lambda(t) < eps.
    ``source`` is an array, a ChainOutput, or an iterable of row blocks.
    T* is taken from ``t_star`` when given, otherwise from the regime.
    The batch size at t is ceil(batch_scale t^e) with e from
    ``fvsr_batch_exponent`` unless ``batch_exponent`` overrides it.
    ``volume_root`` replaces the ellipsoid computation by a function of t
    (for testing the stopping logic in isolation).
    A budget overrun returns status NOT_TERMINATED.
    """
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    if t_star is None:
        if regime is None:
            raise PreconditionError("need a regime or an explicit t_star")
        t_star = min_simulation_threshold(regime, epsilon, delta1, delta2, psi_N_value,
                                          dimension_negligible)
        source_tag = "regime-dimension-negligible" if dimension_negligible else "regime"
        if psi_N_value is not None and not dimension_negligible:
            source_tag = "regime-user-psi"
    else:
        source_tag = "user"
    t_star = float(t_star)
    if batch_exponent is None:
        batch_exponent = fvsr_batch_exponent(regime) if regime is not None else 0.5
    if check_stride is None:
        check_stride = 1 if t_star <= 1e4 else int(math.ceil(t_star / 1000))
    check_stride = max(1, int(check_stride))
    first = max(1, int(math.ceil(t_star)))
    first = int(math.ceil(first / check_stride) * check_stride)

    prefix = None
    q_alpha = None
    log_c = None
    trace = []
    singular = 0
    t_next = first
    d = None

    def report(status, t1, ell=None, ess_val=math.nan):
        return TerminationReport(status, t1, float(epsilon), float(alpha), ell, tuple(trace),
                                 ess_val, t_star, source_tag, check_stride,
                                 float(batch_exponent), float(batch_scale), singular,
                                 0 if prefix is None else prefix.n)

    for block in _blocks(source):
        if prefix is None:
            d = block.shape[1]
            prefix = _Prefix(d)
            q_alpha = chi_square_quantile(d, alpha)
            log_c = 0.5 * d * math.log(q_alpha) + unit_ball_log_volume(d)
        room = max_T - prefix.n
        if room <= 0:
            break
        block = block[:room]
        prefix.extend(block)
        while t_next <= prefix.n:
            t = t_next
            t_next += check_stride
            ell = int(math.ceil(batch_scale * t ** batch_exponent))
            if volume_root is not None:
                vr, ess_t, sig = float(volume_root(t)), math.nan, None
            else:
                try:
                    sig = batch_means_cov_from_prefix(prefix.s, t, ell)
                    ld = logdet_pd(sig)
                except (SingularSigma, TooFewBatches):
                    singular += 1
                    trace.append(TracePoint(t, math.nan, math.nan, ell, True))
                    continue
                vr = math.exp((log_c - 0.5 * d * math.log(t) + 0.5 * ld) / d)
                mean = prefix.s[t] / t
                gam = prefix.s2[t] / t - np.outer(mean, mean)
                sign, ldg = np.linalg.slogdet(0.5 * (gam + gam.T))
                ess_t = t * math.exp((ldg - ld) / d) if sign > 0 else 0.0
            trace.append(TracePoint(t, vr, ess_t, ell))
            if vr + epsilon * lambda_guard(t, t_star) < epsilon:
                ell_out = None
                if sig is not None:
                    ell_out = Ellipsoid(prefix.s[t] / t, sig, q_alpha / t)
                return report("TERMINATED", t, ell_out, ess_t)
        if prefix.n >= max_T:
            break
    return report("NOT_TERMINATED", None)


__all__ = [
    "chi_square_quantile", "unit_ball_log_volume", "c_alpha_d", "log_ellipsoid_volume",
    "ellipsoid_volume", "lambda_guard", "Ellipsoid", "confidence_ellipsoid", "TracePoint",
    "TerminationReport", "fvsr_batch_exponent", "fvsr_run",
]
