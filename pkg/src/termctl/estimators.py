"""Batch-means and sample covariance, batch-size plans, ESS and spectra."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .errors import PlanInfeasible, PreconditionError, SingularSigma, TooFewBatches
from .model import CovarianceEstimate, CovarianceKind, as_matrix, as_values
from .rates import batch_dimension_factor, optimal_batch_exponent


class BatchMode(str, Enum):
    EQ22 = "EQ22"
    TABLE56 = "TABLE56"
    USER = "USER"


_MODE_ALIASES = {"eq22": BatchMode.EQ22, "table": BatchMode.TABLE56,
                 "table56": BatchMode.TABLE56, "user": BatchMode.USER}


def batch_mode(mode) -> BatchMode:
    if isinstance(mode, BatchMode):
        return mode
    key = str(mode).lower()
    if key in _MODE_ALIASES:
        return _MODE_ALIASES[key]
    return BatchMode(str(mode).upper())


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int
    num_batches: int
    exponent_used: float
    mode: BatchMode
    T: int
    clamped: bool = False

    def __post_init__(self):
        problems = plan_violations(self.T, self.batch_size)
        if problems:
            raise PlanInfeasible("; ".join(problems))
        if self.num_batches != self.T // self.batch_size:
            raise PreconditionError("num_batches must equal floor(T / batch_size)")

    def to_dict(self):
        return {"batch_size": self.batch_size, "num_batches": self.num_batches,
                "exponent_used": self.exponent_used, "mode": self.mode.value, "T": self.T,
                "clamped": self.clamped}


def plan_violations(T, batch_size):
    out = []
    if batch_size < 1:
        out.append("batch size must be positive")
    if T < 2 * batch_size:
        out.append("need T >= 2 l (T=%d, l=%d)" % (T, batch_size))
    if batch_size < math.ceil(math.log(T)):
        out.append("need l >= ceil(log T) = %d (l=%d)" % (math.ceil(math.log(T)), batch_size))
    return out


def make_plan(T: int, batch_size: int, mode=BatchMode.USER, exponent=math.nan,
              clamped=False) -> BatchPlan:
    return BatchPlan(int(batch_size), int(T // batch_size), float(exponent),
                     batch_mode(mode), int(T), clamped)


class _BareRegime(NamedTuple):
    """Stand-in regime when only p0 is known: one-step, a = 1."""
    dim_feature: int = 1
    one_step: bool = True
    a: float = 1.0


def select_batch_size(T: int, regime, delta_bar: float = 1.0, mode=BatchMode.EQ22,
                      batch_size: int = None, scale: float = 1.0, p0: float = None,
                      d: int = 1) -> BatchPlan:
    """Batch-size plan for T observations.

    EQ22: l = max(ceil(d^{-(p0-2)/(2p0(1+db))} T^alpha), ceil(log T)) with
    alpha from ``optimal_batch_exponent``; TABLE56 drops the dimension
    terms; USER validates ``batch_size``. A size above T/2 is clamped to
    floor(T/2); PLAN_INFEASIBLE is raised if that still violates the
    l >= ceil(log T) requirement. ``p0`` overrides the regime's moment
    order; with ``regime=None`` a one-step regime of feature dimension d
    is assumed.
    """
    mode = batch_mode(mode)
    T = int(T)
    if T < 2:
        raise PlanInfeasible("T=%d cannot hold two batches" % T)
    if mode == BatchMode.USER:
        if batch_size is None:
            raise PreconditionError("USER mode needs batch_size")
        return make_plan(T, batch_size, mode)
    if regime is None:
        if p0 is None:
            raise PreconditionError("need a regime or p0")
        regime = _BareRegime(int(d))
    negligible = mode == BatchMode.TABLE56
    expo = optimal_batch_exponent(regime, delta_bar, dimension_negligible=negligible, p0=p0)
    factor = 1.0 if negligible else batch_dimension_factor(regime, delta_bar, p0)
    ell = max(math.ceil(scale * factor * T ** expo), math.ceil(math.log(T)), 1)
    clamped = False
    if 2 * ell > T:
        ell, clamped = T // 2, True
    if plan_violations(T, ell):
        raise PlanInfeasible("no valid batch size at T=%d (%s)"
                             % (T, "; ".join(plan_violations(T, ell))))
    return make_plan(T, ell, mode, expo, clamped)


def batch_means(values: np.ndarray, batch_size: int) -> np.ndarray:
    """k x d matrix of means over consecutive disjoint blocks; the trailing
    partial block is dropped."""
    v = as_values(values)
    k = v.shape[0] // batch_size
    return v[: k * batch_size].reshape(k, batch_size, v.shape[1]).mean(axis=1)


def batch_means_cov(output, plan) -> CovarianceEstimate:
    """l/(k-1) sum_i (Zbar_i - Zbar)(Zbar_i - Zbar)^T over k disjoint batches."""
    v = as_values(output)
    ell = plan.batch_size if isinstance(plan, BatchPlan) else int(plan)
    if ell < 1:
        raise PreconditionError("batch size must be positive")
    k = v.shape[0] // ell
    if k < 2:
        raise TooFewBatches("k = %d batches (T=%d, l=%d); need at least 2"
                            % (k, v.shape[0], ell))
    z = batch_means(v, ell)
    zc = z - z.mean(axis=0)
    sigma = ell / (k - 1) * (zc.T @ zc)
    return CovarianceEstimate(sigma, ell, k, v.shape[0], CovarianceKind.BATCH_MEANS)


def batch_means_cov_from_prefix(prefix: np.ndarray, t: int, ell: int) -> np.ndarray:
    """Batch-means matrix for the first t rows given cumulative sums.

    ``prefix[j]`` is the sum of the first j rows (prefix[0] = 0).
    """
    k = t // ell
    if k < 2:
        raise TooFewBatches("k = %d batches" % k)
    edges = prefix[0:k * ell + 1:ell]
    z = np.diff(edges, axis=0) / ell
    zc = z - z.mean(axis=0)
    return ell / (k - 1) * (zc.T @ zc)


def sample_cov(output) -> CovarianceEstimate:
    """Sample covariance with divisor T."""
    v = as_values(output)
    T = v.shape[0]
    if T < 2:
        raise PreconditionError("sample covariance needs T >= 2")
    c = v - v.mean(axis=0)
    return CovarianceEstimate(c.T @ c / T, 1, T, T, CovarianceKind.SAMPLE_COV)


def logdet_pd(matrix) -> float:
    """log det through a Cholesky factor; SINGULAR_SIGMA if not PD."""
    m = as_matrix(matrix)
    try:
        L = linalg.cholesky(m, lower=True)
    except linalg.LinAlgError:
        raise SingularSigma("matrix is not positive definite") from None
    diag = np.diag(L)
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise SingularSigma("matrix is not positive definite")
    return 2.0 * float(np.sum(np.log(diag)))


def ess(T: int, gamma, sigma) -> float:
    """Effective sample size T (det Gamma / det Sigma)^{1/d}."""
    g = as_matrix(gamma)
    s = as_matrix(sigma)
    if g.shape != s.shape:
        raise PreconditionError("gamma and sigma must have the same shape")
    d = s.shape[0]
    ld_s = logdet_pd(s)
    sign, ld_g = np.linalg.slogdet(g)
    if sign <= 0:
        return 0.0
    return float(T * math.exp((ld_g - ld_s) / d))


@dataclass(frozen=True)
class SpectralDiagnostic:
    min_eig: float
    max_eig: float
    condition_number: float
    pd: bool
    sigma0_violation: bool

    def to_dict(self):
        return {"min_eig": self.min_eig, "max_eig": self.max_eig,
                "condition_number": self.condition_number, "pd": self.pd,
                "sigma0_violation": self.sigma0_violation}


def spectral_check(est, sigma0: float = None) -> SpectralDiagnostic:
    m = as_matrix(est)
    w = linalg.eigvalsh(m)
    lo, hi = float(w[0]), float(w[-1])
    cond = hi / lo if lo > 0 else math.inf
    viol = bool(sigma0 is not None and lo < sigma0)
    return SpectralDiagnostic(lo, hi, cond, lo > 0, viol)


def autocovariance(values, max_lag: int) -> np.ndarray:
    """Lagged cross-covariances Gamma(k) = E[(X_t - m)(X_{t+k} - m)^T] / T,
    k = 0..max_lag, computed with FFTs. Shape (max_lag+1, d, d)."""
    v = as_values(values)
    T, d = v.shape
    c = v - v.mean(axis=0)
    n = 1 << int(math.ceil(math.log2(2 * T)))
    F = np.fft.rfft(c, n=n, axis=0)
    out = np.empty((max_lag + 1, d, d))
    for i in range(d):
        for j in range(d):
            acf = np.fft.irfft(np.conj(F[:, i]) * F[:, j], n=n)[: max_lag + 1]
            out[:, i, j] = acf / T
    return out


def truncated_autocov_sum(values, max_lag: int = None) -> np.ndarray:
    """Gamma(0) + sum_{k=1}^{L} (Gamma(k) + Gamma(k)^T), L = ceil(T^{1/3})
    unless given."""
    v = as_values(values)
    if max_lag is None:
        max_lag = int(math.ceil(v.shape[0] ** (1 / 3)))
    g = autocovariance(v, max_lag)
    s = g[0] + (g[1:] + np.transpose(g[1:], (0, 2, 1))).sum(axis=0)
    return 0.5 * (s + s.T)


__all__ = [
    "BatchMode", "BatchPlan", "batch_mode", "plan_violations", "make_plan",
    "select_batch_size", "batch_means", "batch_means_cov", "batch_means_cov_from_prefix",
    "sample_cov", "logdet_pd", "ess", "SpectralDiagnostic", "spectral_check",
    "autocovariance", "truncated_autocov_sum",
]
