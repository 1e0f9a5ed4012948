"""Command line front end.

Exit codes: 0 success, 1 usage error (message on stderr), 2 computational
error (JSON error object on stdout). All output is JSON with a fixed key
order and floats printed to 17 significant digits; non-finite floats are
written as the strings "inf", "-inf" and "nan".
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from enum import Enum
from pathlib import Path

import numpy as np

from . import harness
from .chains import (AR1Chain, SPLIT_KERNELS, heavy_tail_rwm, rwm_gaussian, seed_stream)
from .drift import (FROM_NU, hitting_mgf_bound, hitting_poly_bound, regen_mgf_argument,
                    regen_moment_bound, stable_r_max)
from .errors import PreconditionError, TermctlError, TooFewBatches
from .estimators import (BatchMode, batch_means_cov, batch_mode, ess, sample_cov,
                         select_batch_size, spectral_check)
from .model import (ChainOutput, GeometricDriftSpec, RegimeParams, format_float,
                    validate_regime)
from .rates import rate_report
from .splitting import simulate_split
from .termination import fvsr_run


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- JSON

def _plain(obj):
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _scalar(v):
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        if math.isnan(v):
            return '"nan"'
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        s = format_float(v)
        if "." not in s and "e" not in s and "n" not in s:
            s += ".0"
        return s
    if isinstance(v, int):
        return str(v)
    return json.dumps(str(v))


def dumps(obj, indent=None) -> str:
    """Deterministic JSON: insertion key order, 17-digit floats."""
    obj = _plain(obj)

    def enc(o, level):
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        sep = "," if indent is None else ","
        colon = ":" if indent is None else ": "
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [pad + json.dumps(k) + colon + enc(v, level + 1) for k, v in o.items()]
            return "{" + sep.join(items) + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            return "[" + sep.join(pad + enc(v, level + 1) for v in o) + end + "]"
        return _scalar(o)

    return enc(obj, 0)


def _emit(obj, args):
    sys.stdout.write(dumps(obj, 2 if getattr(args, "pretty", False) else None) + "\n")


# ---------------------------------------------------------------- helpers

def _load_regime(path):
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError("cannot read regime file: %s" % exc) from None
    except json.JSONDecodeError as exc:
        raise UsageError("regime file is not JSON: %s" % exc) from None
    problems = validate_regime(data)
    if problems:
        raise PreconditionError("; ".join(problems))
    return RegimeParams.from_dict(data)


def _bounds(regime: RegimeParams):
    dr, mino = regime.drift, regime.minorisation
    out = {}

    def guard(key, fn, *a, **kw):
        try:
            out[key] = fn(*a, **kw)
        except TermctlError as exc:
            out[key] = exc.to_dict()

    if isinstance(dr, GeometricDriftSpec):
        r_max = stable_r_max(dr, mino)
        out["stable_r_max"] = r_max
        r = 1 + 0.5 * (r_max - 1)
        out["r"] = r
        guard("hitting_mgf_from_nu", hitting_mgf_bound, dr, mino, r, FROM_NU)
        out["regen_t"] = regen_mgf_argument(dr, mino)
        guard("regen_mgf", regen_moment_bound, dr, mino)
    else:
        guard("hitting_poly_from_nu", hitting_poly_bound, dr, mino, FROM_NU)
        guard("regen_poly", regen_moment_bound, dr, mino)
    return out


def _stream_chain(name, d, rho, step, tail_index):
    if name == "ar1":
        return AR1Chain(d, rho)
    if name == "iid":
        return AR1Chain(d, 0.0)
    if name == "rwm-gauss":
        return rwm_gaussian(d, step)
    if name == "rwm-heavy":
        return heavy_tail_rwm(d, tail_index, step)
    raise UsageError("unknown chain %r" % name)


# ---------------------------------------------------------------- subcommands

def cmd_plan(args):
    regime = _load_regime(args.regime)
    rep = rate_report(regime, args.epsilon, args.delta_bar, args.delta1, args.delta2)
    out = rep.to_dict()
    if args.bounds:
        out["bounds"] = _bounds(regime)
    _emit(out, args)
    return 0


def cmd_analyze(args):
    try:
        out = ChainOutput.from_csv(args.input)
    except OSError as exc:
        raise UsageError("cannot read %s: %s" % (args.input, exc)) from None
    T, d = out.T, out.d
    if T < 2 * max(1, math.ceil(math.log(T))):
        raise TooFewBatches("T=%d rows cannot hold two valid batches" % T)
    mode = batch_mode(args.batch_mode)
    regime = _load_regime(args.regime) if args.regime else None
    if mode == BatchMode.USER:
        if args.batch_size is None:
            raise UsageError("--batch-mode user needs --batch-size")
        plan = select_batch_size(T, regime, mode=mode, batch_size=args.batch_size)
    else:
        if regime is None and args.p0 is None:
            raise UsageError("--batch-mode %s needs --regime or --p0" % args.batch_mode)
        plan = select_batch_size(T, regime, args.delta_bar, mode, p0=args.p0, d=d)
    est = batch_means_cov(out, plan)
    if args.jitter:
        est = est.with_jitter(args.jitter)
    gam = sample_cov(out)
    res = {
        "T": T,
        "d": d,
        "mean": out.values.mean(axis=0),
        "sigma_hat": est.matrix,
        "gamma_hat": gam.matrix,
        "ess": ess(T, gam.matrix, est.matrix),
        "batch_plan": plan.to_dict(),
        "jitter": est.jitter,
        "spectral": spectral_check(est, args.sigma0).to_dict(),
    }
    _emit(res, args)
    return 0


def cmd_run_fvsr(args):
    regime = _load_regime(args.regime) if args.regime else None
    if regime is None and args.chain in ("ar1", "iid") and args.t_star is None:
        regime = harness.ar1_reference_regime(args.d, 0.0 if args.chain == "iid" else args.rho,
                                              args.p)
    chain = _stream_chain(args.chain, args.d, args.rho, args.step, args.tail_index)
    rep = fvsr_run(chain.stream(seed_stream(args.seed, 0)), args.epsilon, regime, args.alpha,
                   max_T=args.max_T, t_star=args.t_star,
                   dimension_negligible=args.t_star_mode == "dimension-negligible",
                   delta1=args.delta1, delta2=args.delta2, check_stride=args.check_stride,
                   batch_scale=args.batch_scale)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "vol", "vol_root", "ess", "batch_size"])
            dd = chain.d
            for p in rep.volume_trace:
                w.writerow([p.t, format_float(p.vol_root ** dd), format_float(p.vol_root),
                            format_float(p.ess), p.batch_size])
    out = rep.to_dict()
    out["chain"] = {"id": args.chain, "d": args.d, "rho": args.rho, "step": args.step,
                    "seed": args.seed}
    if not rep.terminated:
        _emit({"error": "NOT_TERMINATED",
               "message": "no stop within max_T = %d" % args.max_T, "report": out}, args)
        return 2
    _emit(out, args)
    return 0


def cmd_simulate(args):
    if args.kernel in SPLIT_KERNELS:
        if args.kernel == "ar1-split":
            kernel = SPLIT_KERNELS[args.kernel](rho=args.rho, d=args.d, radius=args.radius,
                                                m0=args.m0)
        else:
            kw = {"step": args.step, "r": args.tail_index}
            if args.radius_given:
                kw["radius"] = args.radius
            kernel = SPLIT_KERNELS[args.kernel](**kw)
        path, rec = simulate_split(kernel, args.T, "nu", seed_stream(args.seed, 0))
        lens = rec.cycle_lengths
        info = {"kernel": args.kernel, "T": args.T, "seed": args.seed, "m0": rec.m0,
                "alpha": kernel.mino.alpha, "regenerations": int(rec.epochs.size),
                "complete_cycles": rec.num_cycles,
                "mean_cycle_length": float(lens.mean()) if lens.size else math.nan,
                "regeneration_rate": rec.epochs.size / args.T,
                "certificate": {k: v for k, v in kernel.certificate.items()
                                if k != "drift_check"}}
    else:
        if args.regen:
            raise UsageError("--regen needs a split kernel (%s)" % ", ".join(SPLIT_KERNELS))
        chain = _stream_chain(args.kernel, args.d, args.rho, args.step, args.tail_index)
        rng = seed_stream(args.seed, 0)
        x0 = chain.sample_stationary(rng)[0]
        path = chain.path(x0, args.T, rng)[1:]
        rec = None
        info = {"kernel": args.kernel, "T": args.T, "seed": args.seed}
    out = ChainOutput(path, seed=args.seed, label=args.kernel)
    info["mean"] = out.values.mean(axis=0)
    if args.out:
        out.to_csv(args.out)
        info["out"] = str(args.out)
    if args.regen and rec is not None:
        with open(args.regen, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "R_k", "cycle_len"])
            w.writerows(rec.to_rows())
        info["regen"] = str(args.regen)
    _emit(info, args)
    return 0


def cmd_experiment(args):
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError("cannot read config: %s" % exc) from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg["jobs"] = args.jobs if args.jobs is not None else harness.default_jobs()
    fn = harness.EXPERIMENTS[args.name]
    try:
        res = fn(**cfg)
    except TypeError as exc:
        raise UsageError("bad config for %s: %s" % (args.name, exc)) from None
    if args.out:
        res.write(args.out, dumps=lambda o: dumps(o, 2))
    out = res.to_dict()
    if not args.rows:
        out.pop("rows")
    _emit(out, args)
    return 0


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write("%s: error: %s\n" % (self.prog, message))
        raise SystemExit(1)


def _common(p, seed_default=0):
    p.add_argument("--seed", type=int, default=seed_default, help="root RNG seed")
    p.add_argument("--pretty", action="store_true", help="indented JSON")


def build_parser():
    ap = _Parser(prog="termctl", description="Stopping rules and batch-means tools "
                 "for Markov chain Monte Carlo output.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("plan", help="rate report for a regime")
    p.add_argument("--regime", required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--delta-bar", type=float, default=1.0)
    p.add_argument("--delta1", type=float, default=1.0)
    p.add_argument("--delta2", type=float, default=0.1)
    p.add_argument("--bounds", action="store_true", help="add hitting/regeneration bounds")
    _common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("analyze", help="batch-means analysis of a chain CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--batch-mode", default="table", choices=["eq22", "table", "table56", "user",
                                                             "EQ22", "TABLE56", "USER"])
    p.add_argument("--p0", type=float, default=None)
    p.add_argument("--regime", default=None)
    p.add_argument("--delta-bar", type=float, default=1.0)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--sigma0", type=float, default=None)
    p.add_argument("--jitter", type=float, default=0.0)
    _common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run-fvsr", help="fixed volume stopping rule on a shipped chain")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--regime", default=None)
    p.add_argument("--chain", default="ar1", choices=["ar1", "iid", "rwm-gauss", "rwm-heavy"])
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--step", type=float, default=2.4)
    p.add_argument("--tail-index", type=float, default=4.0)
    p.add_argument("--p", type=float, default=40.0,
                   help="moment order of the built-in AR(1) regime")
    p.add_argument("--max-T", dest="max_T", type=int, default=10**7)
    p.add_argument("--t-star", type=float, default=None)
    p.add_argument("--t-star-mode", default="dimension-negligible",
                   choices=["full", "dimension-negligible"])
    p.add_argument("--delta1", type=float, default=1.0)
    p.add_argument("--delta2", type=float, default=0.1)
    p.add_argument("--check-stride", type=int, default=None)
    p.add_argument("--batch-scale", type=float, default=1.0)
    p.add_argument("--trace", default=None, help="CSV of (t, vol, ess) at checkpoints")
    _common(p)
    p.set_defaults(func=cmd_run_fvsr)

    p = sub.add_parser("simulate", help="simulate a chain, optionally with regenerations")
    p.add_argument("--kernel", default="ar1-split",
                   choices=sorted(SPLIT_KERNELS) + ["ar1", "iid", "rwm-gauss", "rwm-heavy"])
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--regen", default=None)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--m0", type=int, default=1)
    p.add_argument("--step", type=float, default=2.4)
    p.add_argument("--tail-index", type=float, default=4.0)
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="Monte Carlo experiment")
    p.add_argument("name", choices=sorted(harness.EXPERIMENTS))
    p.add_argument("--config", default=None, help="JSON object of keyword arguments")
    p.add_argument("--out", default=None, help="directory for results.json and results.csv")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--rows", action="store_true", help="include per-row table on stdout")
    _common(p, seed_default=None)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "command", None) == "simulate":
        args.radius_given = args.radius is not None
        if args.radius is None:
            args.radius = 1.0
        if args.T < 1:
            sys.stderr.write("termctl: error: --T must be positive\n")
            return 1
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write("termctl: error: %s\n" % exc)
        return 1
    except TermctlError as exc:
        _emit(exc.to_dict(), args)
        return 2


if __name__ == "__main__":
    sys.exit(main())
