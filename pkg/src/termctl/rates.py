"""Closed-form rates, constants and thresholds.

Natural logarithms throughout. Geometric regimes use p in place of p0.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

from .errors import Degenerate, PreconditionError, RegimeUnsupported
from .model import GeometricDriftSpec, MomentClass, RegimeParams


class P0GapWarning(UserWarning):
    """eta lies between p/(2p-1) and 2p/(3p-2).

    The regeneration moment bound is available there but the
    Gaussian approximation result is not, so p0 is reported unsupported.
    """


def q_of_eta(eta: float) -> float:
    return eta / (1.0 - eta)


def p0_branch(p, epsilon, eta, moment_class=MomentClass.POLYNOMIAL_MOMENTS,
              eps_bar=None) -> str:
    """Name of the p0 branch that applies: 'interpolated', 'full',
    'exponential', 'gap' (only the weaker p/(2p-1) bound holds) or 'none'."""
    moment_class = MomentClass(moment_class)
    if moment_class != MomentClass.POLYNOMIAL_MOMENTS and eta > 0.5 and eps_bar is not None:
        return "exponential"
    upper = p * (p + epsilon) / (p * (p + epsilon) + epsilon)
    if eta > upper:
        return "full"
    if eta > 2 * p / (3 * p - 2):
        return "interpolated"
    if eta > p / (2 * p - 1):
        return "gap"
    return "none"


def compute_p0(p, epsilon, eta, moment_class=MomentClass.POLYNOMIAL_MOMENTS,
               eps_bar=None) -> float:
    """Effective moment order under polynomial drift of order eta.

    Exponential (or bounded) moments with eta > 1/2 give q(eta) - eps_bar;
    otherwise pq/(p+q+epsilon) on the interpolated branch and p once eta
    exceeds p(p+eps)/(p(p+eps)+eps).
    """
    if not p > 2:
        raise PreconditionError("p must exceed 2")
    if not 0 < epsilon <= 1 / p:
        raise PreconditionError("epsilon must lie in (0, 1/p]")
    if not 0 < eta < 1:
        raise PreconditionError("eta must lie in (0,1)")
    moment_class = MomentClass(moment_class)
    q = q_of_eta(eta)
    if moment_class != MomentClass.POLYNOMIAL_MOMENTS and eta > 0.5:
        if eps_bar is None:
            raise PreconditionError("eps_bar is required for the exponential-moment branch")
        hi = min(0.5, (2 * eta - 1) / (1 - eta))
        if not 0 < eps_bar < hi:
            raise PreconditionError("eps_bar must lie in (0, %r)" % hi)
        return q - eps_bar
    branch = p0_branch(p, epsilon, eta)
    if branch == "full":
        return float(p)
    if branch == "interpolated":
        return p * q / (p + q + epsilon)
    lo = 2 * p / (3 * p - 2)
    if branch == "gap":
        warnings.warn("eta=%r lies in (p/(2p-1), 2p/(3p-2)] = (%r, %r]: moment bounds hold "
                      "but no Gaussian approximation rate is available"
                      % (eta, p / (2 * p - 1), lo), P0GapWarning, stacklevel=2)
    raise RegimeUnsupported("eta=%r must exceed 2p/(3p-2)=%r" % (eta, lo))


def effective_p0(regime: RegimeParams) -> float:
    """p0 for a regime; geometric drift uses p itself."""
    mom = regime.moments
    if isinstance(regime.drift, GeometricDriftSpec):
        return float(mom.p)
    return compute_p0(mom.p, mom.epsilon, regime.drift.eta, mom.moment_class,
                      regime.eps_bar)


def _order(regime, p0):
    return effective_p0(regime) if p0 is None else float(p0)


# ---------------------------------------------------------------- psi_N

def psi_bar_geometric(alpha, lam, b, p, epsilon, M, m0=1) -> float:
    """State-dimension factor under geometric drift.

    One-step: alpha^-1 (b/(alpha(1-lam)))^{1+eps/p} (p/(e ln(1/lam)))^p M.
    With m0 > 1 the skeleton form alpha^-1 (b m0/(alpha(1-lam)))^{eps/p} M.
    """
    if not (0 < alpha <= 1 and 0 < lam < 1 and b > 0 and p > 2 and epsilon > 0 and M >= 0):
        raise PreconditionError("invalid geometric bundle")
    if m0 == 1:
        return (1 / alpha) * (b / (alpha * (1 - lam))) ** (1 + epsilon / p) \
            * (p / (math.log(1 / lam) * math.e)) ** p * M
    return (1 / alpha) * (b * m0 / (alpha * (1 - lam))) ** (epsilon / p) * M


def psi_tilde_polynomial(alpha, b, c, upsilon_C, p, epsilon, p0, M, m0=1,
                         eta=None) -> float:
    """State-dimension factor under polynomial drift.

    One-step: alpha^-1 (1 + b/(c alpha) + (upsilon_C - c + b)/(1 - alpha))^{1+eps/p0} M.
    With m0 > 1: alpha^-1 m0^{q(eta)/p0^2} (same bracket)^{(p-p0+eps)/p} M,
    which needs ``eta``.
    """
    if not (0 < alpha <= 1 and b > 0 and c > 0 and upsilon_C > 0 and M >= 0 and p0 > 1):
        raise PreconditionError("invalid polynomial bundle")
    if alpha >= 1:
        raise Degenerate("alpha = 1 leaves no residual kernel (division by 1 - alpha)")
    inner = 1 + b / (c * alpha) + (upsilon_C - c + b) / (1 - alpha)
    if m0 == 1:
        return (1 / alpha) * inner ** (1 + epsilon / p0) * M
    if eta is None:
        raise PreconditionError("eta is required for the multi-step polynomial factor")
    return (1 / alpha) * m0 ** (q_of_eta(eta) / p0 ** 2) \
        * inner ** ((p - p0 + epsilon) / p) * M


def psi_N(regime: RegimeParams) -> float:
    """Plug-in psi-bar or psi-tilde for the regime."""
    dr, mi, mo = regime.drift, regime.minorisation, regime.moments
    if isinstance(dr, GeometricDriftSpec):
        return psi_bar_geometric(mi.alpha, dr.lam, dr.b, mo.p, mo.epsilon, mo.M, mi.m0)
    return psi_tilde_polynomial(mi.alpha, dr.b, dr.c, dr.upsilon_C, mo.p, mo.epsilon,
                                effective_p0(regime), mo.M, mi.m0, dr.eta)


# ---------------------------------------------------------------- Psi_T

def approximation_exponent(regime: RegimeParams, p0=None) -> float:
    """Power of T in the Gaussian approximation rate (the log T factor aside)."""
    order = _order(regime, p0)
    if regime.one_step:
        return 1.0 / order
    return 0.25 + 1.0 / (4.0 * (order - 1.0))


def approximation_rate(regime: RegimeParams, T, p0=None) -> float:
    if T < 3:
        raise PreconditionError("T must be at least 3")
    return T ** approximation_exponent(regime, p0) * math.log(T)


def dimension_growth_exponent(regime: RegimeParams, p0=None) -> float:
    order = _order(regime, p0)
    if order <= 2:
        raise RegimeUnsupported("p0 <= 2 gives no CLT guarantee")
    if regime.one_step:
        return (order - 2) / (2 * order)
    return (order - 2) / (4 * (order - 1))


def simulation_growth_exponent(regime: RegimeParams, p0=None) -> float:
    order = _order(regime, p0)
    if order <= 2:
        raise RegimeUnsupported("p0 <= 2 gives no CLT guarantee")
    if regime.one_step:
        return 2 * order / (order - 2)
    return 4 * (order - 1) / (order - 2)


# ---------------------------------------------------------------- T*

def log_min_simulation_threshold(regime: RegimeParams, epsilon_precision, delta1, delta2,
                                 psi_N_value=None, dimension_negligible=False,
                                 p0=None) -> float:
    """log T*; see ``min_simulation_threshold``."""
    a = regime.a
    if not delta1 > 3 / (3 + a):
        raise PreconditionError("delta1 must exceed 3/(3+a) = %r" % (3 / (3 + a)))
    if not delta2 > 0:
        raise PreconditionError("delta2 must be positive")
    if not epsilon_precision > 0:
        raise PreconditionError("epsilon must be positive")
    order = _order(regime, p0)
    if regime.one_step:
        if order <= 4:
            raise RegimeUnsupported("one-step threshold needs p0 > 4, got %r" % order)
        e1 = 2 * order / (order - 2) * (1 + delta1)
        e2 = 4 * order / (order - 2) * (1 + delta2)
        floor = 10 * order / (order - 2)
    else:
        if order <= 2:
            raise RegimeUnsupported("multi-step threshold needs p0 > 2, got %r" % order)
        e1 = 4 * (order - 1) / (order - 2) * (1 + delta1)
        e2 = 8 * (order - 1) / (order - 2) * (1 + delta2)
        floor = 16 * (order - 1) / (order - 2)
    body = e2 * math.log(1 / epsilon_precision)
    if not dimension_negligible:
        psi = psi_N(regime) if psi_N_value is None else float(psi_N_value)
        d = regime.dim_feature
        base = psi * regime.trace_ratio ** 2 * d ** 3 * d ** a
        if base <= 0:
            body = -math.inf
        else:
            body += e1 * math.log(base)
    return max(body, floor)


def min_simulation_threshold(regime: RegimeParams, epsilon_precision, delta1, delta2,
                             psi_N_value=None, dimension_negligible=False,
                             p0=None) -> float:
    """Minimum simulation effort T*.

    One-step: (psi_N (tr/sigma0)^2 d^3 d^a)^{2p0/(p0-2)(1+d1)} (1/eps)^{4p0/(p0-2)(1+d2)}
    floored at e^{10p0/(p0-2)}; multi-step uses 4(p0-1)/(p0-2), 8(p0-1)/(p0-2)
    and e^{16(p0-1)/(p0-2)}. ``dimension_negligible`` drops the base factor.
    Returns inf when T* overflows a double.
    """
    lg = log_min_simulation_threshold(regime, epsilon_precision, delta1, delta2,
                                      psi_N_value, dimension_negligible, p0)
    return math.exp(lg) if lg < 709.0 else math.inf


# ---------------------------------------------------------------- batch exponent

def optimal_batch_exponent(regime: RegimeParams, delta_bar=1.0, dimension_negligible=False,
                           p0=None, rate: Optional[int] = None) -> float:
    """Batch-size exponent alpha in l_T ~ T^alpha.

    rate 1 (one-step): 1/2 + (p0-2)/(2p0(1+db)) + 1/p0
    rate 2 (multi-step): 3/4 + 1/(4(p0-1)) + (p0-2)/(4(p0-1)(1+db))
    ``dimension_negligible`` drops the middle term.
    """
    order = _order(regime, p0)
    if rate is None:
        rate = 1 if regime.one_step else 2
    if order <= 2:
        raise RegimeUnsupported("p0 <= 2")
    if not dimension_negligible and not delta_bar > 1 / (1 + regime.a):
        raise PreconditionError("delta_bar must exceed 1/(1+a) = %r" % (1 / (1 + regime.a)))
    if rate == 1:
        out = 0.5 + 1 / order
        if not dimension_negligible:
            out += (order - 2) / (2 * order * (1 + delta_bar))
    elif rate == 2:
        out = 0.75 + 1 / (4 * (order - 1))
        if not dimension_negligible:
            out += (order - 2) / (4 * (order - 1) * (1 + delta_bar))
    else:
        raise PreconditionError("rate must be 1 or 2")
    return out


def batch_dimension_factor(regime: RegimeParams, delta_bar, p0=None) -> float:
    """d^{-(p0-2)/(2p0(1+db))} multiplying T^alpha in the batch size."""
    order = _order(regime, p0)
    return regime.dim_feature ** (-(order - 2) / (2 * order * (1 + delta_bar)))


# ---------------------------------------------------------------- report

@dataclass(frozen=True)
class RateReport:
    p0: float
    psi_N: float
    psi_T_exponent: float
    psi_T_log_power: int
    dim_growth_exponent: float
    sim_growth_exponent: float
    batch_exponent: Optional[float] = None
    batch_exponent_dimension_negligible: Optional[float] = None
    T_star: Optional[float] = None
    T_star_dimension_negligible: Optional[float] = None

    def to_dict(self):
        return {
            "p0": self.p0,
            "psi_N": self.psi_N,
            "batch_exponent": self.batch_exponent,
            "batch_exponent_dimension_negligible": self.batch_exponent_dimension_negligible,
            "T_star": self.T_star,
            "T_star_dimension_negligible": self.T_star_dimension_negligible,
            "dim_growth_exponent": self.dim_growth_exponent,
            "sim_growth_exponent": self.sim_growth_exponent,
            "psi_T_exponent": self.psi_T_exponent,
            "psi_T_log_power": self.psi_T_log_power,
        }


def rate_report(regime: RegimeParams, epsilon=None, delta_bar=1.0, delta1=1.0,
                delta2=0.1) -> RateReport:
    """Collect every rate quantity for a regime.

    Quantities whose hypotheses fail (for instance T* when p0 <= 4 in a
    one-step regime) are reported as None rather than raising.
    """
    p0 = effective_p0(regime)
    try:
        psi = float(psi_N(regime))
    except Degenerate:
        psi = math.nan
    dim_e = dimension_growth_exponent(regime, p0)
    sim_e = simulation_growth_exponent(regime, p0)

    def guarded(fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except (PreconditionError, RegimeUnsupported, Degenerate):
            return None

    be = guarded(optimal_batch_exponent, regime, delta_bar, False, p0)
    be0 = guarded(optimal_batch_exponent, regime, delta_bar, True, p0)
    ts = ts0 = None
    if epsilon is not None:
        if math.isfinite(psi):
            ts = guarded(min_simulation_threshold, regime, epsilon, delta1, delta2, psi,
                         False, p0)
        ts0 = guarded(min_simulation_threshold, regime, epsilon, delta1, delta2, None,
                      True, p0)
    return RateReport(p0=p0, psi_N=psi, psi_T_exponent=approximation_exponent(regime, p0),
                      psi_T_log_power=1, dim_growth_exponent=dim_e,
                      sim_growth_exponent=sim_e, batch_exponent=be,
                      batch_exponent_dimension_negligible=be0, T_star=ts,
                      T_star_dimension_negligible=ts0)


__all__ = [
    "P0GapWarning", "q_of_eta", "p0_branch", "compute_p0", "effective_p0",
    "psi_bar_geometric", "psi_tilde_polynomial", "psi_N", "approximation_exponent",
    "approximation_rate", "dimension_growth_exponent", "simulation_growth_exponent",
    "log_min_simulation_threshold", "min_simulation_threshold", "optimal_batch_exponent",
    "batch_dimension_factor", "RateReport", "rate_report",
]
