"""Reference Markov chains with certified drift and minorisation.

Gaussian draws use the inverse normal CDF of uniforms so a fixed seed
gives the same trajectory on every platform. Per-replicate generators
come from ``seed_stream(root, index)``, a SeedSequence keyed by the root
seed with the replicate index as spawn key.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, signal, special, stats

from .drift import verify_drift
from .errors import PreconditionError, UnknownSigma
from .estimators import truncated_autocov_sum
from .model import (ChainOutput, GeometricDriftSpec, MinorisationSpec, PolynomialDriftSpec,
                    SmallMeasure, SmallSet)
from .splitting import SplitKernel

_HALF_ULP = 2.0 ** -54


def seed_stream(root: int, index: int = 0) -> np.random.Generator:
    """Generator for replicate ``index`` under root seed ``root``."""
    return np.random.default_rng(np.random.SeedSequence(int(root), spawn_key=(int(index),)))


def uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    return rng.random(size) + _HALF_ULP


def normals(rng: np.random.Generator, size) -> np.ndarray:
    return special.ndtri(uniforms(rng, size))


def _norm_pdf(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


# ---------------------------------------------------------------- AR(1)

@dataclass(frozen=True)
class AR1Chain:
    """X' = rho X + sqrt(1 - rho^2) Z coordinatewise, f = identity."""

    d: int = 1
    rho: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise PreconditionError("d must be positive")
        if not -1 < self.rho < 1:
            raise PreconditionError("rho must lie in (-1,1)")

    kernel_id = "ar1"

    @property
    def sigma(self) -> float:
        return math.sqrt(1 - self.rho ** 2)

    @property
    def pi_f(self) -> np.ndarray:
        return np.zeros(self.d)

    @property
    def sigma_f(self) -> np.ndarray:
        return (1 + self.rho) / (1 - self.rho) * np.eye(self.d)

    @property
    def variance_f(self) -> np.ndarray:
        return np.eye(self.d)

    def sample_stationary(self, rng, n=1) -> np.ndarray:
        return normals(rng, (n, self.d))

    def path(self, x0, n, rng) -> np.ndarray:
        """X_0..X_n from x0."""
        x0 = np.asarray(x0, dtype=float).reshape(self.d)
        e = self.sigma * normals(rng, (n, self.d))
        y = signal.lfilter([1.0], [1.0, -self.rho], e, axis=0,
                           zi=(self.rho * x0)[None, :])[0]
        return np.vstack([x0[None, :], y])

    def output(self, T: int, seed=None) -> ChainOutput:
        """Stationary run of T rows."""
        seed = self.seed if seed is None else seed
        rng = np.random.default_rng(seed)
        x0 = self.sample_stationary(rng)[0]
        return ChainOutput(self.path(x0, T, rng)[1:], seed=int(seed), label="ar1")

    def stream(self, rng, block: int = 8192):
        """Endless stationary stream of row blocks."""
        x = self.sample_stationary(rng)[0]
        while True:
            p = self.path(x, block, rng)[1:]
            x = p[-1]
            yield p

    def transition_density(self, x, y, m: int = 1) -> np.ndarray:
        a = self.rho ** m
        s = math.sqrt(1 - self.rho ** (2 * m))
        z = (np.atleast_2d(y) - a * np.atleast_2d(x)) / s
        return np.prod(_norm_pdf(z) / s, axis=1)

    # drift certificate: V = 1 + |x|^2, PV = 1 + rho^2 |x|^2 + d sigma^2
    @staticmethod
    def V(x):
        x = np.atleast_2d(x)
        return 1.0 + np.sum(x * x, axis=1)

    def PV(self, x):
        x = np.atleast_2d(x)
        return 1.0 + self.rho ** 2 * np.sum(x * x, axis=1) + self.d * self.sigma ** 2

    def PV_quadrature(self, x, nodes: int = 40):
        """PV by Gauss-Hermite quadrature, coordinate by coordinate."""
        z, w = np.polynomial.hermite_e.hermegauss(nodes)
        w = w / w.sum()
        x = np.atleast_2d(x)
        m = self.rho * x[:, :, None] + self.sigma * z[None, None, :]
        return 1.0 + np.sum((m * m) @ w, axis=1)

    @cached_property
    def drift(self) -> GeometricDriftSpec:
        lam = (1 + self.rho ** 2) / 2
        b = 1 - lam + self.d * self.sigma ** 2
        return GeometricDriftSpec(lam, b, 2 * b / (1 - lam))

    def in_drift_set(self, x):
        return self.V(x) <= self.drift.upsilon_C

    def verify_certificate(self) -> float:
        radius = math.sqrt(self.drift.upsilon_C - 1)
        r = np.linspace(0.0, 10 * radius, 2001)
        pts = np.zeros((r.size, self.d))
        pts[:, 0] = r
        return verify_drift(self.drift, self.V, self.PV_quadrature, self.in_drift_set, pts)


def ar1_chain(d: int = 1, rho: float = 0.5, seed: int = 0) -> AR1Chain:
    ch = AR1Chain(d, rho, seed)
    ch.verify_certificate()
    return ch


def ar1_split_drift(rho: float, d: int, radius: float, m0: int = 1) -> GeometricDriftSpec:
    """Geometric drift of the m0-skeleton for V = 1 + |x|^2 outside the box
    [-radius, radius]^d (any point outside has |x| > radius)."""
    a2 = rho ** (2 * m0)
    s2 = 1 - a2
    lam = (1 + d * s2 + a2 * radius ** 2) / (1 + radius ** 2)
    if not lam < 1:
        raise PreconditionError("no geometric drift for this box: need radius^2 > d")
    b = 1 + d * s2 - lam
    return GeometricDriftSpec(lam, b, 1 + d * radius ** 2, m0)


def ar1_split_kernel(rho: float = 0.5, d: int = 1, radius: float = 1.0,
                     m0: int = 1) -> SplitKernel:
    """AR(1) split kernel on C = [-radius, radius]^d.

    nu is proportional to the pointwise minimum over C of the m0-step
    density. alpha is certified by the trapezoid rule on the grid minimum
    (x-grid spacing 1e-3 of the side length); the density accessor uses
    the box corners, where the minimum of a Gaussian in x sits, and the
    certificate records the largest gap between the two.
    """
    ch = AR1Chain(d, rho)
    a = rho ** m0
    s = math.sqrt(1 - rho ** (2 * m0))

    def nu1(y):
        y = np.asarray(y, dtype=float)
        return np.minimum(_norm_pdf((y - a * radius) / s), _norm_pdf((y + a * radius) / s)) / s

    xg = np.linspace(-radius, radius, 1001)
    half = a * radius + 12 * s
    yg = np.linspace(-half, half, 24001)
    grid_min = np.empty_like(yg)
    for lo in range(0, yg.size, 4000):
        blk = yg[lo:lo + 4000]
        grid_min[lo:lo + 4000] = np.min(_norm_pdf((blk[:, None] - a * xg[None, :]) / s), axis=1) / s
    gap = float(np.max(np.abs(grid_min - nu1(yg))))
    alpha1 = float(integrate.trapezoid(grid_min, yg))
    alpha = alpha1 ** d
    closed = (2 * stats.norm.sf(a * radius / s)) ** d

    def density(y):
        y = np.atleast_2d(y)
        return np.prod(nu1(y) / alpha1, axis=1)

    def sample(rng, n):
        out = np.empty((n, d))
        for j in range(d):
            got = 0
            while got < n:
                k = max(16, int(1.3 * (n - got) / alpha1))
                y = s * normals(rng, k)
                acc = uniforms(rng, k) * (_norm_pdf(y / s) / s) < nu1(y)
                y = y[acc][: n - got]
                out[got:got + y.size, j] = y
                got += y.size
        return out

    box = SmallSet.box(-radius * np.ones(d), radius * np.ones(d), "box")
    nu = SmallMeasure(density, sample, "min-density")
    mino = MinorisationSpec(alpha, m0, box, nu)
    cert = {"alpha": alpha, "alpha_closed_form": closed, "grid_corner_gap": gap,
            "x_grid": xg.size, "y_grid": yg.size, "radius": radius, "rho": rho, "d": d,
            "pi_C": (2 * stats.norm.cdf(radius) - 1) ** d}
    try:
        cert["drift"] = ar1_split_drift(rho, d, radius, m0).to_dict()
    except PreconditionError:
        cert["drift"] = None
    return SplitKernel(ch.path, lambda x, y: ch.transition_density(x, y, m0), mino, cert,
                       "ar1-split")


# ---------------------------------------------------------------- Metropolis

def _rwm_path(logpi, x0, n, step, rng, scalar_logpi=None):
    d = x0.size
    props = step * normals(rng, (n, d))
    logu = np.log(uniforms(rng, n))
    out = np.empty((n + 1, d))
    out[0] = x0
    acc = 0
    if d == 1 and scalar_logpi is not None:
        x = float(x0[0])
        lx = scalar_logpi(x)
        col = out[:, 0]
        pr = props[:, 0].tolist()
        lu = logu.tolist()
        for i in range(n):
            y = x + pr[i]
            ly = scalar_logpi(y)
            if lu[i] < ly - lx:
                x, lx = y, ly
                acc += 1
            col[i + 1] = x
        return out, acc / max(n, 1)
    x = x0.copy()
    lx = logpi(x)
    for i in range(n):
        y = x + props[i]
        ly = logpi(y)
        if logu[i] < ly - lx:
            x, lx = y, ly
            acc += 1
        out[i + 1] = x
    return out, acc / max(n, 1)


@dataclass(frozen=True)
class RWMChain:
    """Random-walk Metropolis with N(0, step^2 I) proposals."""

    d: int
    step: float
    seed: int = 0
    kernel_id = "rwm-gauss"
    last_acceptance: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        if self.d < 1:
            raise PreconditionError("d must be positive")
        if not self.step > 0:
            raise PreconditionError("step must be positive")

    def log_target(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * float(np.dot(x, x))

    @staticmethod
    def _scalar_log_target(x):
        return -0.5 * x * x

    def log_target_rows(self, x):
        x = np.atleast_2d(x)
        return -0.5 * np.sum(x * x, axis=1)

    @property
    def pi_f(self):
        return np.zeros(self.d)

    def sample_stationary(self, rng, n=1):
        return normals(rng, (n, self.d))

    def path(self, x0, n, rng):
        x0 = np.asarray(x0, dtype=float).reshape(self.d)
        out, acc = _rwm_path(self.log_target, x0, n, self.step, rng, self._scalar_log_target)
        self.last_acceptance[:] = [acc]
        return out

    def acceptance_rate(self, T=10**4, seed=None) -> float:
        rng = np.random.default_rng(self.seed if seed is None else seed)
        self.path(self.sample_stationary(rng)[0], T, rng)
        return self.last_acceptance[0]

    def output(self, T, seed=None) -> ChainOutput:
        seed = self.seed if seed is None else seed
        rng = np.random.default_rng(seed)
        return ChainOutput(self.path(self.sample_stationary(rng)[0], T, rng)[1:],
                           seed=int(seed), label=self.kernel_id)

    def stream(self, rng, block=8192):
        x = self.sample_stationary(rng)[0]
        while True:
            p = self.path(x, block, rng)[1:]
            x = p[-1]
            yield p

    def transition_density(self, x, y):
        """Density of an accepted move x -> y (y != x); rejections are an
        atom and report inf."""
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
        diff = y - x
        q = np.prod(_norm_pdf(diff / self.step) / self.step, axis=1)
        acc = np.minimum(1.0, np.exp(self.log_target_rows(y) - self.log_target_rows(x)))
        out = q * acc
        return np.where(np.all(diff == 0, axis=1), np.inf, out)


def rwm_gaussian(d: int = 1, step: float = 2.4, seed: int = 0) -> RWMChain:
    return RWMChain(d, step, seed)


@dataclass(frozen=True)
class HeavyTailRWM(RWMChain):
    """Random-walk Metropolis for pi(x) proportional to (1 + |x|)^{-(d + r)}."""

    tail_index: float = 4.0
    kernel_id = "rwm-heavy"

    def __post_init__(self):
        super().__post_init__()
        if not self.tail_index > 2:
            raise PreconditionError("tail index r must exceed 2")

    def log_target(self, x):
        return -(self.d + self.tail_index) * math.log1p(float(np.linalg.norm(x)))

    def _scalar_log_target(self, x):
        return -(1 + self.tail_index) * math.log1p(abs(x))

    def log_target_rows(self, x):
        x = np.atleast_2d(x)
        return -(self.d + self.tail_index) * np.log1p(np.linalg.norm(x, axis=1))

    def sample_stationary(self, rng, n=1):
        """Exact draws: |x| has density proportional to u^{d-1}(1+u)^{-(d+r)}
        (a scaled beta-prime law), direction uniform."""
        r, d = self.tail_index, self.d
        u = uniforms(rng, n)
        b = special.betaincinv(d, r, u)
        radius = b / (1 - b)
        z = normals(rng, (n, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return z * radius[:, None]

    def path(self, x0, n, rng):
        x0 = np.asarray(x0, dtype=float).reshape(self.d)
        scalar = self._scalar_log_target if self.d == 1 else None
        out, acc = _rwm_path(self.log_target, x0, n, self.step, rng, scalar)
        self.last_acceptance[:] = [acc]
        return out

    # polynomial drift certificate, d = 1, V = (1 + |x|)^s
    def PV_scalar(self, x, s):
        """E V(X') from x by adaptive quadrature over the proposal."""
        st, rr = self.step, self.tail_index
        vx = (1 + abs(x)) ** s

        def g(y):
            acc = min(1.0, ((1 + abs(x)) / (1 + abs(y))) ** (1 + rr))
            return _norm_pdf((y - x) / st) / st * acc * ((1 + abs(y)) ** s - vx)

        lo, hi = x - 14 * st, x + 14 * st
        pts = sorted({p for p in (0.0, abs(x), -abs(x)) if lo < p < hi})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val = integrate.quad(g, lo, hi, points=pts or None, limit=200,
                                 epsabs=0.0, epsrel=1e-10)[0]
        return vx + val

    def drift_certificate(self, s: float = 5.0, radius: float = 3.5, x_max: float = 1e4,
                          n_grid: int = 600, safety: float = 0.9):
        """Polynomial drift (V = (1+|x|)^s, eta = (s-2)/s) on C = [-radius, radius].

        c is ``safety`` times the smallest (V - PV)/V^eta over grid points
        outside C; b is the largest PV - V + c V^eta inside C (plus a
        small margin). Only d = 1 is certified.
        """
        if self.d != 1:
            raise PreconditionError("heavy-tail drift certificate is one-dimensional")
        eta = (s - 2) / s
        inner = np.linspace(0.0, radius, max(n_grid // 4, 50))
        outer = radius * np.exp(np.linspace(1e-6, math.log(x_max / radius), n_grid))
        xs = np.concatenate([inner, outer])
        V = (1 + xs) ** s
        PV = np.array([self.PV_scalar(x, s) for x in xs])
        out = xs > radius
        ratio = (V[out] - PV[out]) / V[out] ** eta
        if np.min(ratio) <= 0:
            raise PreconditionError("no polynomial drift outside this small set")
        c = safety * float(np.min(ratio))
        b = float(np.max(PV[~out] - V[~out] + c * V[~out] ** eta))
        b = max(b, 0.0) * (1 + 1e-6) + 1e-9
        spec = PolynomialDriftSpec(c, b, eta, (1 + radius) ** s)

        def Vf(x):
            return (1 + np.abs(np.atleast_2d(x)[:, 0])) ** s

        table = dict(zip(xs.tolist(), PV.tolist()))

        def PVf(x):
            return np.array([table[float(abs(v))] for v in np.atleast_2d(x)[:, 0]])

        def inC(x):
            return np.abs(np.atleast_2d(x)[:, 0]) <= radius

        slack = verify_drift(spec, Vf, PVf, inC, xs[:, None])
        return spec, {"s": s, "radius": radius, "x_max": x_max, "grid": int(xs.size),
                      "min_relative_slack": slack}


def heavy_tail_rwm(d: int = 1, r: float = 4.0, step: float = 2.4, seed: int = 0) -> HeavyTailRWM:
    return HeavyTailRWM(d, step, seed, tail_index=r)


def heavy_tail_split_kernel(r: float = 4.0, step: float = 2.4, radius: float = 3.5,
                            s: float = 5.0) -> SplitKernel:
    """One-dimensional heavy-tail RWM split on C = [-radius, radius].

    nu is proportional to phi_step(|y| + radius) (1 + |y|)^{-(1+r)}, the
    product of the infima over C of the proposal density and of the
    acceptance probability, which bounds the transition density below.
    """
    ch = heavy_tail_rwm(1, r, step)
    spec, dcert = ch.drift_certificate(s=s, radius=radius)

    def nu_unnorm(y):
        y = np.abs(np.asarray(y, dtype=float))
        return _norm_pdf((y + radius) / step) / step * (1 + y) ** (-(1 + r))

    yg = np.linspace(-radius - 14 * step, radius + 14 * step, 40001)
    alpha = float(integrate.trapezoid(nu_unnorm(yg), yg))
    peak = float(nu_unnorm(0.0))

    def density(y):
        return nu_unnorm(np.atleast_2d(y)[:, 0]) / alpha

    def sample(rng, n):
        out = np.empty(0)
        while out.size < n:
            k = 4 * (n - out.size) + 16
            y = (radius + 14 * step) * (2 * uniforms(rng, k) - 1)
            acc = uniforms(rng, k) * peak < nu_unnorm(y)
            out = np.concatenate([out, y[acc]])
        return out[:n, None]

    box = SmallSet.box([-radius], [radius], "box")
    mino = MinorisationSpec(alpha, 1, box, SmallMeasure(density, sample, "infimum-product"))
    cert = {"alpha": alpha, "radius": radius, "r": r, "step": step, "drift": spec.to_dict(),
            "drift_check": dcert}
    return SplitKernel(ch.path, ch.transition_density, mino, cert, "rwm-heavy-split")


# ---------------------------------------------------------------- registry

KERNELS = {"ar1": ar1_chain, "rwm-gauss": rwm_gaussian, "rwm-heavy": heavy_tail_rwm}
SPLIT_KERNELS = {"ar1-split": ar1_split_kernel, "rwm-heavy-split": heavy_tail_split_kernel}


def make_chain(kernel_id: str, **params):
    if kernel_id not in KERNELS:
        raise UnknownSigma("unknown kernel %r" % kernel_id)
    return KERNELS[kernel_id](**params)


def analytic_sigma_f(kernel_id: str, params: dict = None, T: int = 10**7, seed: int = 0):
    """Asymptotic covariance of f = identity for a shipped chain.

    Returns (matrix, tag) with tag ANALYTIC (AR(1), including the i.i.d.
    case rho = 0) or ORACLE_MC (truncated autocovariance sum of a length-T
    run with lag ceil(T^{1/3})).
    """
    params = dict(params or {})
    if kernel_id in ("ar1", "iid"):
        if kernel_id == "iid":
            params["rho"] = 0.0
        ch = AR1Chain(params.get("d", 1), params.get("rho", 0.5))
        return ch.sigma_f, "ANALYTIC"
    if kernel_id in ("rwm-gauss", "rwm-heavy"):
        ch = make_chain(kernel_id, **params)
        out = ch.output(T, seed)
        return truncated_autocov_sum(out.values), "ORACLE_MC"
    raise UnknownSigma("no covariance oracle for kernel %r" % kernel_id)


__all__ = [
    "seed_stream", "uniforms", "normals", "AR1Chain", "ar1_chain", "ar1_split_drift",
    "ar1_split_kernel", "RWMChain", "rwm_gaussian", "HeavyTailRWM", "heavy_tail_rwm",
    "heavy_tail_split_kernel", "KERNELS", "SPLIT_KERNELS", "make_chain", "analytic_sigma_f",
]
