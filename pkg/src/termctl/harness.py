"""Desk-scale Monte Carlo experiments.

Replicate i under root seed s always uses ``seed_stream(s, i)``, so any
subset of replicates can be re-run in isolation. Workers return plain
dicts which are reduced in replicate order.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
from scipy import integrate, special

from . import __version__
from .chains import (AR1Chain, analytic_sigma_f, ar1_split_drift, ar1_split_kernel,
                     heavy_tail_split_kernel, rwm_gaussian, seed_stream)
from .drift import (FROM_NU, hitting_mgf_bound, hitting_poly_bound, regen_mgf_argument,
                    regen_moment_bound, stable_r_max)
from .errors import PreconditionError, UnstableBound
from .estimators import BatchMode, batch_means_cov, make_plan, select_batch_size
from .model import (MinorisationSpec, MomentClass, MomentSpec,
                    PolynomialDriftSpec, RegimeParams, format_float)
from .rates import q_of_eta
from .splitting import simulate_split
from .termination import c_alpha_d, fvsr_run

DEFAULT_SEED = 20240601


def code_version_hash() -> str:
    """sha256 over the package sources, in sorted file order."""
    h = hashlib.sha256()
    root = Path(__file__).resolve().parent
    for p in sorted(root.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("TERMCTL_JOBS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# ---------------------------------------------------------------- reference regime

def ball_minorisation_alpha(rho: float, d: int, radius: float) -> float:
    """alpha for the AR(1) kernel on the ball |x| <= radius: the integral
    of the worst-case Gaussian density phi_sigma(|y| + rho radius)."""
    s = math.sqrt(1 - rho * rho)
    surf = 2 * math.pi ** (d / 2) / special.gamma(d / 2)

    def g(u):
        return surf * u ** (d - 1) * (2 * math.pi * s * s) ** (-d / 2) \
            * math.exp(-0.5 * ((u + abs(rho) * radius) / s) ** 2)

    return float(integrate.quad(g, 0, abs(rho) * radius + 40 * s, limit=200)[0])


def ar1_reference_regime(d: int = 2, rho: float = 0.5, p: float = 40.0) -> RegimeParams:
    """One-step geometric regime for the AR(1) chain with f = identity.

    Gaussian coordinates have moments of every order, so any p works; M is
    the exact E|Z|^{p+eps}. The drift certificate is the chain's own.
    """
    ch = AR1Chain(d, rho)
    dr = ch.drift
    eps = 1.0 / p
    k = p + eps
    M = 2 ** (k / 2) * special.gamma((k + 1) / 2) / math.sqrt(math.pi)
    alpha = ball_minorisation_alpha(rho, d, math.sqrt(dr.upsilon_C - 1))
    return RegimeParams(dr, MinorisationSpec(alpha, 1), MomentSpec(p, eps, M,
                        MomentClass.EXPONENTIAL_MOMENTS), dim_state=d, dim_feature=d,
                        trace_ratio=float(np.trace(ch.sigma_f)))


# ---------------------------------------------------------------- results

@dataclass
class ExperimentResult:
    name: str
    columns: list
    rows: list
    summary: dict
    config: dict
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return {"experiment": self.name, "config": self.config, "summary": self.summary,
                "columns": self.columns, "rows": self.rows, "provenance": self.provenance}

    def write(self, out_dir, dumps=None):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        text = dumps(self.to_dict()) if dumps else json.dumps(self.to_dict(), indent=2)
        (out / "results.json").write_text(text + "\n")
        with open(out / "results.csv", "w", newline="") as fh:
            fh.write("# %s: columns %s\n" % (self.name, ", ".join(self.columns)))
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([format_float(r[c]) if isinstance(r[c], float) else r[c]
                            for c in self.columns])
        return out


def _provenance(regime=None):
    return {"package_version": __version__, "code_version_hash": code_version_hash(),
            "regime": None if regime is None else regime.to_dict()}


def _chain(chain_id, d, rho, step=2.4):
    if chain_id == "ar1":
        return AR1Chain(d, rho)
    if chain_id == "iid":
        return AR1Chain(d, 0.0)
    if chain_id == "rwm-gauss":
        return rwm_gaussian(d, step)
    raise PreconditionError("chain %r has no known stationary mean" % chain_id)


# ---------------------------------------------------------------- FVSR replicates

def _fvsr_replicate(i, chain_id, d, rho, epsilon, alpha, root, regime, fvsr_kw):
    ch = _chain(chain_id, d, rho)
    rng = seed_stream(root, i)
    rep = fvsr_run(ch.stream(rng), epsilon, regime, alpha, **fvsr_kw)
    out = {"replicate": i, "status": rep.status, "T1": rep.T1, "T_star": rep.T_star_used,
           "covered": None, "ess": rep.ess_at_T1}
    if rep.terminated and rep.final_ellipsoid is not None:
        out["covered"] = bool(rep.final_ellipsoid.contains(ch.pi_f))
    return out


def coverage_experiment(chain_id="ar1", d=2, alpha=0.05, epsilon=0.15, reps=500,
                        seed=DEFAULT_SEED, rho=0.5, p=40.0, t_star=None,
                        t_star_mode="dimension-negligible", delta1=1.0, delta2=0.1,
                        max_T=10**7, batch_scale=1.0, jobs=None) -> ExperimentResult:
    """Fraction of replicates whose stopped ellipsoid contains pi(f).

    T* is ``t_star`` when given; otherwise the threshold of the reference
    regime, with the dimension-dependent base factor dropped under the
    default ``t_star_mode``.
    """
    if reps < 100:
        raise PreconditionError("coverage needs reps >= 100")
    jobs = default_jobs() if jobs is None else jobs
    regime = ar1_reference_regime(d, rho, p)
    kw = dict(max_T=max_T, t_star=t_star, delta1=delta1, delta2=delta2,
              dimension_negligible=t_star_mode == "dimension-negligible",
              batch_scale=batch_scale)
    fn = partial(_fvsr_replicate, chain_id=chain_id, d=d, rho=rho, epsilon=epsilon,
                 alpha=alpha, root=seed, regime=regime, fvsr_kw=kw)
    rows = _pmap(fn, range(reps), jobs)
    done = [r for r in rows if r["status"] == "TERMINATED"]
    cov = [r["covered"] for r in done]
    n = len(cov)
    pc = float(np.mean(cov)) if n else math.nan
    summary = {
        "empirical_coverage": pc,
        "ci_halfwidth": 1.96 * math.sqrt(pc * (1 - pc) / n) if n else math.nan,
        "mean_T1": float(np.mean([r["T1"] for r in done])) if n else math.nan,
        "median_T1": float(np.median([r["T1"] for r in done])) if n else math.nan,
        "not_terminated": reps - n,
        "reps": reps,
        "T_star": rows[0]["T_star"],
    }
    cfg = dict(chain_id=chain_id, d=d, alpha=alpha, epsilon=epsilon, reps=reps, seed=seed,
               rho=rho, p=p, t_star=t_star, t_star_mode=t_star_mode, delta1=delta1,
               delta2=delta2, max_T=max_T, batch_scale=batch_scale)
    return ExperimentResult("coverage", ["replicate", "status", "T1", "covered", "ess"],
                            [{k: r[k] for k in ("replicate", "status", "T1", "covered", "ess")}
                             for r in rows], summary, cfg, _provenance(regime))


def scaling_denominator(sigma_f, alpha) -> float:
    """c_{alpha,d}^{2/d} det(Sigma_f)^{1/d}."""
    s = np.atleast_2d(sigma_f)
    d = s.shape[0]
    sign, ld = np.linalg.slogdet(s)
    if sign <= 0:
        raise PreconditionError("det(Sigma_f) must be positive")
    return c_alpha_d(alpha, d) ** (2 / d) * math.exp(ld / d)


def _zeros_stream(d, block=4096):
    z = np.zeros((block, d))
    while True:
        yield z


def termination_scaling_experiment(chain_id="ar1", d=2, alpha=0.05,
                                   eps_grid=(0.4, 0.2, 0.1), reps=100, seed=DEFAULT_SEED,
                                   rho=0.5, p=40.0, t_star=100.0, max_T=10**7,
                                   batch_scale=1.0, jobs=None, sigma_f=None,
                                   stub_volume=None) -> ExperimentResult:
    """Median of eps^2 T1(eps) / (c^{2/d} det(Sigma_f)^{1/d}) over replicates.

    ``stub_volume`` (a function t -> Vol^{1/d}) replaces the chain with a
    deterministic volume path; ``sigma_f`` then supplies the denominator.
    """
    jobs = default_jobs() if jobs is None else jobs
    if sigma_f is None:
        sigma_f, _tag = analytic_sigma_f("iid" if chain_id == "iid" else chain_id,
                                         {"d": d, "rho": rho}) \
            if chain_id in ("ar1", "iid") else (None, None)
        if sigma_f is None:
            raise PreconditionError("scaling needs an analytic Sigma_f for %r" % chain_id)
    denom = scaling_denominator(sigma_f, alpha)
    regime = ar1_reference_regime(d, rho, p)
    rows = []
    ratios = {}
    for j, eps in enumerate(eps_grid):
        if stub_volume is not None:
            rep = fvsr_run(_zeros_stream(d), eps, regime, alpha, t_star=t_star, max_T=max_T,
                           check_stride=1, volume_root=stub_volume)
            t1s = [rep.T1] if rep.terminated else []
            n_not = 0 if rep.terminated else 1
        else:
            kw = dict(max_T=max_T, t_star=t_star, batch_scale=batch_scale)
            fn = partial(_fvsr_replicate, chain_id=chain_id, d=d, rho=rho, epsilon=eps,
                         alpha=alpha, root=seed + 1000003 * j, regime=regime, fvsr_kw=kw)
            res = _pmap(fn, range(reps), jobs)
            t1s = [r["T1"] for r in res if r["status"] == "TERMINATED"]
            n_not = len(res) - len(t1s)
        rat = np.array([eps * eps * t / denom for t in t1s])
        ratios[eps] = rat
        rows.append({"epsilon": float(eps),
                     "median_ratio": float(np.median(rat)) if rat.size else math.nan,
                     "mean_ratio": float(np.mean(rat)) if rat.size else math.nan,
                     "q25": float(np.quantile(rat, 0.25)) if rat.size else math.nan,
                     "q75": float(np.quantile(rat, 0.75)) if rat.size else math.nan,
                     "median_T1": float(np.median(t1s)) if t1s else math.nan,
                     "terminated": len(t1s), "not_terminated": n_not})
    med = [r["median_ratio"] for r in rows]
    dist = [abs(m - 1) for m in med]
    summary = {"denominator": denom, "median_ratios": med,
               "last_closest_to_one": bool(dist[-1] == min(dist)),
               "final_ratio": med[-1]}
    cfg = dict(chain_id=chain_id, d=d, alpha=alpha, eps_grid=list(eps_grid), reps=reps,
               seed=seed, rho=rho, p=p, t_star=t_star, max_T=max_T, batch_scale=batch_scale,
               stub=stub_volume is not None)
    cols = ["epsilon", "median_ratio", "mean_ratio", "q25", "q75", "median_T1",
            "terminated", "not_terminated"]
    return ExperimentResult("scaling", cols, rows, summary, cfg, _provenance(regime))


# ---------------------------------------------------------------- covariance

def _cov_replicate(args):
    i, T, chain_id, d, rho, mode, p, root = args
    ch = _chain(chain_id, d, rho)
    rng = seed_stream(root, i)
    x0 = ch.sample_stationary(rng)[0]
    vals = ch.path(x0, T, rng)[1:]
    if mode == "SQRT":
        plan = make_plan(T, int(math.isqrt(T)), BatchMode.USER, 0.5)
    else:
        plan = select_batch_size(T, ar1_reference_regime(d, rho, p), 1.0, mode)
    sig = batch_means_cov(vals, plan).matrix
    truth = ch.sigma_f
    return {"replicate": i, "T": T, "error": float(np.linalg.norm(sig - truth)),
            "batch_size": plan.batch_size, "num_batches": plan.num_batches}


def covariance_convergence_experiment(chain_id="ar1", d=3, T_grid=(10**4, 10**5, 10**6),
                                      batch_mode="TABLE56", reps=10, seed=DEFAULT_SEED,
                                      rho=0.5, p=40.0, jobs=None) -> ExperimentResult:
    """Median Frobenius error of the batch-means estimate against Sigma_f.

    ``batch_mode`` is EQ22, TABLE56 (plans from the reference regime with
    moment order p) or SQRT (l = floor(sqrt T)).
    """
    if reps < 1:
        raise PreconditionError("reps must be positive")
    if chain_id not in ("ar1", "iid"):
        raise PreconditionError("covariance convergence needs an analytic Sigma_f")
    jobs = default_jobs() if jobs is None else jobs
    mode = str(batch_mode).upper()
    if mode not in ("SQRT", "EQ22", "TABLE56", "TABLE"):
        raise PreconditionError("unknown batch mode %r" % batch_mode)
    mode = "TABLE56" if mode == "TABLE" else mode
    rows = []
    per = []
    for j, T in enumerate(T_grid):
        T = int(T)
        res = _pmap(_cov_replicate, [(i, T, chain_id, d, rho, mode, p, seed + 7919 * j)
                                     for i in range(reps)], jobs)
        err = np.array([r["error"] for r in res])
        per += res
        rows.append({"T": T, "median_error": float(np.median(err)),
                     "mean_error": float(np.mean(err)), "batch_size": res[0]["batch_size"],
                     "num_batches": res[0]["num_batches"]})
    med = np.array([r["median_error"] for r in rows])
    Ts = np.array([r["T"] for r in rows], dtype=float)
    slope = float(np.polyfit(np.log10(Ts), np.log10(med), 1)[0]) if len(rows) > 1 else math.nan
    summary = {"median_errors": med.tolist(), "loglog_slope": slope,
               "strictly_decreasing": bool(np.all(np.diff(med) < 0)),
               "flags": ["LOW_POWER"] if reps == 1 else []}
    cfg = dict(chain_id=chain_id, d=d, T_grid=[int(t) for t in T_grid], batch_mode=mode,
               reps=reps, seed=seed, rho=rho, p=p)
    regime = ar1_reference_regime(d, rho, p)
    return ExperimentResult("covariance", ["T", "median_error", "mean_error", "batch_size",
                                           "num_batches"], rows, summary, cfg,
                            _provenance(regime))


# ---------------------------------------------------------------- bounds

def _cycle_lengths_from_nu(kernel, T, rng):
    """Lengths of every cycle of a nu-started run; the head counts because
    the run itself starts from nu."""
    _, rec = simulate_split(kernel, T, "nu", rng)
    return np.diff(np.concatenate([[0], rec.epochs]))


def _check(name, bound, samples, note=""):
    samples = np.asarray(samples, dtype=float)
    emp = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(samples.size))
    ok = emp <= bound + 3 * se
    return {"bound_name": name, "bound": float(bound), "empirical": emp, "se": se,
            "n_cycles": int(samples.size), "status": "PASS" if ok else "FAIL", "note": note}


def _skipped(name, note):
    return {"bound_name": name, "bound": math.nan, "empirical": math.nan, "se": math.nan,
            "n_cycles": 0, "status": "SKIPPED_UNSTABLE", "note": note}


def _bound_replicate(args):
    i, chain_id, T, root, kparams = args
    kernel = _split_kernel(chain_id, kparams)
    return _cycle_lengths_from_nu(kernel, T, seed_stream(root, i))


def _split_kernel(chain_id, kparams):
    if chain_id == "ar1-split":
        return ar1_split_kernel(**kparams)
    if chain_id == "rwm-heavy-split":
        return heavy_tail_split_kernel(**kparams)
    raise PreconditionError("no certified split kernel %r" % chain_id)


def bound_validation_experiment(chain_id="ar1-split", reps=10, seed=DEFAULT_SEED, T=10**5,
                                kernel_params=None, jobs=None) -> ExperimentResult:
    """Empirical hitting-time and regeneration-block moments from nu against
    the drift-module bounds (one-sided, 3 standard errors of slack).

    Each replicate is a nu-started run of length T; all cycles are pooled.
    Bounds whose denominators vanish are reported SKIPPED_UNSTABLE.
    """
    jobs = default_jobs() if jobs is None else jobs
    kp = dict(kernel_params or {})
    if chain_id == "ar1-split":
        kp.setdefault("radius", 1.5)
        kp.setdefault("rho", 0.5)
    kernel = _split_kernel(chain_id, kp)
    m0 = kernel.m0
    mino = kernel.mino
    res = _pmap(_bound_replicate, [(i, chain_id, T, seed, kp) for i in range(reps)], jobs)
    L = np.concatenate(res).astype(float)
    tau = L / m0 - 1
    rows = []
    if chain_id == "ar1-split":
        dr = ar1_split_drift(kp["rho"], kp.get("d", 1), kp["radius"], m0)
        t = regen_mgf_argument(dr, mino)
        rows.append(_check("regen_mgf", regen_moment_bound(dr, mino, t), np.exp(t * L),
                           "E_nu exp(t R1), t = ln(1/lambda)/(2 m0) = %s" % format_float(t)))
        r_mid = 1 + 0.5 * (stable_r_max(dr, mino) - 1)
        for r, tag in ((r_mid, "stable"), (1 / dr.lam, "r = 1/lambda")):
            name = "hitting_mgf[%s]" % tag
            try:
                bound = hitting_mgf_bound(dr, mino, r, FROM_NU)
            except UnstableBound as exc:
                rows.append(_skipped(name, str(exc)))
                continue
            rows.append(_check(name, bound, r ** tau, "E_nu r^tau, r = %s" % format_float(r)))
        regime_drift = dr
    else:
        dd = dict(kernel.certificate["drift"])
        dd.pop("kind")
        dr = PolynomialDriftSpec(**dd)
        q = q_of_eta(dr.eta)
        rows.append(_check("hitting_poly", hitting_poly_bound(dr, mino, FROM_NU), tau ** q,
                           "E_nu tau^q, q = %s" % format_float(q)))
        rows.append(_check("regen_poly", regen_moment_bound(dr, mino), L ** q,
                           "E_nu R1^q, q = %s" % format_float(q)))
        regime_drift = dr
    summary = {"all_pass": all(r["status"] != "FAIL" for r in rows),
               "n_cycles": int(L.size), "mean_cycle_length": float(L.mean()),
               "alpha": float(mino.alpha), "drift": regime_drift.to_dict()}
    cfg = dict(chain_id=chain_id, reps=reps, seed=seed, T=T, kernel_params=kp)
    cols = ["bound_name", "bound", "empirical", "se", "n_cycles", "status", "note"]
    return ExperimentResult("bounds", cols, rows, summary, cfg, _provenance(None))


EXPERIMENTS = {
    "coverage": coverage_experiment,
    "scaling": termination_scaling_experiment,
    "covariance": covariance_convergence_experiment,
    "bounds": bound_validation_experiment,
}

__all__ = [
    "DEFAULT_SEED", "code_version_hash", "default_jobs", "ball_minorisation_alpha",
    "ar1_reference_regime", "ExperimentResult", "coverage_experiment",
    "scaling_denominator", "termination_scaling_experiment",
    "covariance_convergence_experiment", "bound_validation_experiment", "EXPERIMENTS",
]
