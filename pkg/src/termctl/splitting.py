"""Regenerative simulation through Nummelin splitting.

Bells are drawn retrospectively: after the skeleton moves from x in C to
y, delta = 1 with probability alpha nu(y) / p^{m0}(x, y). A bell at
skeleton index n makes R = (n + 1) m0 a regeneration epoch, at which the
chain restarts from nu. Cycle k covers rows [R_{k-1}, R_k).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DensityViolation, PreconditionError, TooFewCycles
from .model import MinorisationSpec, as_values

DENSITY_TOL = 1e-9


@dataclass(frozen=True)
class SplitKernel:
    """Markov kernel with an m0-step density and a minorisation certificate.

    ``path(x0, n, rng)`` returns the (n+1, dim) array X_0..X_n of the base
    one-step chain. ``transition_density(x, y)`` evaluates p^{m0} rowwise;
    atoms (Metropolis rejections, y == x) report an infinite density so
    that they never ring a bell.
    """

    path: Callable[[np.ndarray, int, np.random.Generator], np.ndarray]
    transition_density: Callable[[np.ndarray, np.ndarray], np.ndarray]
    mino: MinorisationSpec
    certificate: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.mino.small_set is None or self.mino.nu is None:
            raise PreconditionError("split kernel needs a small set and a small measure")

    @property
    def m0(self) -> int:
        return self.mino.m0

    def bell_probability(self, x, y) -> np.ndarray:
        """alpha nu(y)/p^{m0}(x, y) on C, zero off C (rowwise)."""
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
        inside = np.asarray(self.mino.small_set.contains(x), dtype=bool)
        out = np.zeros(x.shape[0])
        if np.any(inside):
            num = self.mino.alpha * np.asarray(self.mino.nu.density(y[inside]), dtype=float)
            den = np.asarray(self.transition_density(x[inside], y[inside]), dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(den > 0, num / den, np.where(num > 0, np.inf, 0.0))
            out[inside] = r
        return out

    def spot_check(self, rng: np.random.Generator, n: int = 1000) -> float:
        """Max of alpha nu(y)/p(x,y) over x drawn in C and y drawn from the
        chain; raises DensityViolation above 1 + tol."""
        small = self.mino.small_set
        if small.lower is None:
            raise PreconditionError("spot check needs a bounding box for C")
        x = small.lower + (small.upper - small.lower) * rng.random((n, small.lower.size))
        y = np.empty_like(x)
        for i in range(n):
            y[i] = self.path(x[i], self.m0, rng)[-1]
        worst = float(np.max(self.bell_probability(x, y)))
        if worst > 1 + DENSITY_TOL:
            raise DensityViolation("alpha nu(y)/p(x,y) = %r > 1" % worst)
        return worst


@dataclass(frozen=True)
class RegenerationRecord:
    bells: np.ndarray
    epochs: np.ndarray
    m0: int
    T: int

    def __post_init__(self):
        b = np.asarray(self.bells, dtype=bool)
        e = np.asarray(self.epochs, dtype=np.int64)
        if e.size and (np.any(np.diff(e) < self.m0) or np.any(e % self.m0)):
            raise PreconditionError("epochs must be increasing multiples of m0")
        b.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "bells", b)
        object.__setattr__(self, "epochs", e)

    @property
    def cycle_lengths(self) -> np.ndarray:
        return np.diff(self.epochs)

    @property
    def cycles(self):
        """Half-open row ranges [R_{k-1}, R_k) of the complete cycles."""
        e = self.epochs
        return [(int(e[i]), int(e[i + 1])) for i in range(len(e) - 1)]

    @property
    def num_cycles(self) -> int:
        return max(len(self.epochs) - 1, 0)

    def to_rows(self):
        """(k, R_k, cycle_len) rows; the length of the last epoch's cycle is
        unknown and reported as 0."""
        e = self.epochs
        lens = np.append(np.diff(e), 0)
        return [(k + 1, int(e[k]), int(lens[k])) for k in range(len(e))]


def simulate_split(kernel: SplitKernel, T: int, x0, seed) -> tuple:
    """Simulate T rows X_0..X_{T-1} of the split chain.

    ``x0`` is a state vector or the string "nu" (start from the small
    measure). ``seed`` is an int or a numpy Generator. One extra row is
    simulated internally so that floor(T/m0) bells can be drawn.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m0 = kernel.m0
    if T < 1:
        raise PreconditionError("T must be positive")
    if isinstance(x0, str):
        if x0 != "nu":
            raise PreconditionError("x0 must be a state or 'nu'")
        x0 = kernel.mino.nu.sample(rng, 1)[0]
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    path = kernel.path(x0, T, rng)
    nb = T // m0
    xs = path[0:nb * m0:m0]
    ys = path[m0:nb * m0 + 1:m0]
    u = rng.random(nb)
    prob = kernel.bell_probability(xs, ys)
    worst = float(np.max(prob)) if nb else 0.0
    if worst > 1 + DENSITY_TOL:
        raise DensityViolation("alpha nu(y)/p(x,y) = %r > 1" % worst)
    bells = u < prob
    epochs = (np.flatnonzero(bells) + 1) * m0
    return path[:T], RegenerationRecord(bells, epochs, m0, T)


@dataclass(frozen=True)
class CycleSums:
    head: np.ndarray
    cycles: np.ndarray
    tail: np.ndarray
    lengths: np.ndarray
    center: np.ndarray
    center_estimated: bool


def extract_cycles(output, rec: RegenerationRecord, pi_f=None) -> CycleSums:
    """Per-cycle sums of f - pi(f); head [0, R_first) and tail [R_last, T)
    are returned separately. Without ``pi_f`` the grand mean is used and
    flagged."""
    v = as_values(output)
    T, d = v.shape
    e = rec.epochs[rec.epochs <= T]
    est = pi_f is None
    center = v.mean(axis=0) if est else np.broadcast_to(np.asarray(pi_f, float), (d,))
    c = v - center
    if e.size == 0:
        return CycleSums(c.sum(axis=0), np.zeros((0, d)), np.zeros(d), np.zeros(0, int),
                         np.array(center), est)
    cs = np.vstack([np.zeros((1, d)), np.cumsum(c, axis=0)])
    head = cs[e[0]]
    cyc = cs[e[1:]] - cs[e[:-1]]
    tail = cs[T] - cs[e[-1]]
    return CycleSums(head, cyc, tail, np.diff(e), np.array(center), est)


def kac_estimate(output, rec: RegenerationRecord, i: int = 0) -> float:
    """Ratio estimator: sum of cycle sums of f_i over total cycle length."""
    v = as_values(output)
    e = rec.epochs[rec.epochs <= v.shape[0]]
    if e.size < 3:
        raise TooFewCycles("need at least 2 complete cycles, have %d" % max(e.size - 1, 0))
    seg = v[e[0]:e[-1], i]
    return float(seg.sum() / (e[-1] - e[0]))


@dataclass(frozen=True)
class IndependenceTest:
    lag1_corr: float
    p_value: float
    n_cycles: int
    note: str = ""

    def to_dict(self):
        return {"lag1_corr_of_lengths": self.lag1_corr, "p_value": self.p_value,
                "n_cycles": self.n_cycles, "note": self.note}


def _lag1(x):
    xc = x - x.mean(axis=-1, keepdims=True)
    num = np.sum(xc[..., 1:] * xc[..., :-1], axis=-1)
    den = np.sum(xc * xc, axis=-1)
    return num / den


def cycle_independence_test(rec, n_perm: int = 1000, seed=0) -> IndependenceTest:
    """Lag-1 autocorrelation of cycle lengths with a two-sided permutation
    p-value (1 + #{|r_perm| >= |r|}) / (1 + n_perm)."""
    lengths = rec.cycle_lengths if isinstance(rec, RegenerationRecord) \
        else np.asarray(rec, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    n = lengths.size
    if n < 30:
        raise TooFewCycles("need at least 30 cycles, have %d" % n)
    if np.all(lengths == lengths[0]):
        return IndependenceTest(0.0, 1.0, n, "constant cycle lengths; correlation undefined")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    r = float(_lag1(lengths))
    hits = 0
    chunk = max(1, min(n_perm, int(2e7 // n)))
    done = 0
    while done < n_perm:
        m = min(chunk, n_perm - done)
        perms = rng.permuted(np.broadcast_to(lengths, (m, n)), axis=1)
        hits += int(np.sum(np.abs(_lag1(perms)) >= abs(r) - 1e-15))
        done += m
    return IndependenceTest(r, (1 + hits) / (1 + n_perm), n)


__all__ = [
    "DENSITY_TOL", "SplitKernel", "RegenerationRecord", "simulate_split", "CycleSums",
    "extract_cycles", "kac_estimate", "IndependenceTest", "cycle_independence_test",
]
