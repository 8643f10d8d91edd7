"""Command-line interface: ``toeplitz-ml <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import campaign as cp
from .ascent import equalize
from .errors import ToeplitzMLError
from .fileio import read_matrix, read_snapshots, read_toeplitz, write_matrix, write_snapshots, write_toeplitz
from .matrix import (
    HermToeplitz,
    PhaseVector,
    build_sinc_model,
    eigh,
    generate_snapshots,
    likelihood_ratio,
    sample_covariance,
)
from .optimize import OptimizerConfig, maximize_lr
from .signs import CriterionSpec, dp_branch_search
from .spectrum import redundancy_moduli, select_order
from .trim import TrimConfig, trim


def _model_args(p):
    p.add_argument("--n", type=int, default=17, help="number of sensors N")
    p.add_argument("--w2", type=float, default=0.1, help="sinc bandwidth W2")
    p.add_argument("--sigma2", type=float, default=0.01, help="white-noise power")


def _json_out(obj, path=None):
    text = json.dumps(cp._json_safe(obj), indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_rhat(args):
    """Rhat and, when available, the snapshot set it came from."""
    if getattr(args, "snapshots", None):
        S = read_snapshots(args.snapshots)
        return sample_covariance(S), S
    if getattr(args, "rhat", None):
        return read_matrix(args.rhat), None
    raise ToeplitzMLError("need --snapshots or --rhat")


def cmd_model(args):
    T = build_sinc_model(args.n, args.w2, args.sigma2)
    if args.out:
        (write_matrix if args.dense else write_toeplitz)(args.out, T.dense() if args.dense else T)
    _json_out({"lags": T.lags.tolist(), "eigenvalues": eigh(T).values.tolist()})


def cmd_simulate(args):
    T = build_sinc_model(args.n, args.w2, args.sigma2)
    p = None
    if args.phase_max > 0 or args.theta0 != 0:
        p = PhaseVector.steering(args.n, args.theta0)
        if args.phase_max > 0:
            rng = np.random.Generator(np.random.Philox(args.seed).jumped())
            p = p.compose(PhaseVector.calibration(args.n, args.phase_max, rng))
    S = generate_snapshots(T, args.t, p, args.seed)
    write_snapshots(args.out, S)
    _json_out({"n": S.n, "t": S.t, "seed": S.seed, "lr_true": likelihood_ratio(sample_covariance(S), T)})


def cmd_estimate(args):
    R, S = _load_rhat(args)
    T = S.t if S is not None else args.t
    if T is None:
        raise ToeplitzMLError("--t is required with --rhat")
    eigs = eigh(R).values
    order = select_order(eigs, T, args.method)
    spec, skipped = cp._target_spectrum(eigs, T, order.k_noise)
    _json_out({
        "moduli": redundancy_moduli(R).moduli.tolist(),
        "eigenvalues": eigs.tolist(),
        "k_noise": order.k_noise,
        "criterion_curve": order.criterion_curve.tolist(),
        "corrected": spec.values.tolist(),
        "noise_value": spec.noise_value,
        "rmt_skipped": skipped,
    }, args.out)


def cmd_search(args):
    S = read_snapshots(args.snapshots)
    R = sample_covariance(S)
    eigs = eigh(R).values
    spec, _ = cp._target_spectrum(eigs, S.t, select_order(eigs, S.t).k_noise)
    m = redundancy_moduli(R)
    c = CriterionSpec(args.criterion, spec.values, snapshots=S, Rhat=R)
    policy = cp.probe_policy(spec.noise_value, args.trim_k) if args.trim_per_probe else None
    rows = cp._branch_rows(dp_branch_search(m, c, trim=policy, Rhat=R), c, R)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("branch_id", "l2", "minimax", "rho", "lr", "pd", "selected"))
        for r in rows:
            w.writerow([cp._fmt(v) for v in r])
    finally:
        if args.out:
            fh.close()


def cmd_trim(args):
    T = read_toeplitz(args.matrix)
    rep = trim(T, TrimConfig(args.target, K=args.trim_k))
    if args.out:
        write_toeplitz(args.out, rep.matrix)
    _json_out({"iters": rep.iters, "final_min_eig": rep.final_min_eig,
               "expansion_failures": rep.expansion_failures, "fallback_used": rep.fallback_used,
               "coalescence": rep.coalescence, "lags": rep.matrix.lags.tolist()})


def cmd_ascend(args):
    R, _ = _load_rhat(args)
    T0 = read_toeplitz(args.init)
    out = equalize(T0, R, max_steps=args.steps, stall_limit=args.stall_limit)
    if args.out:
        write_toeplitz(args.out, out)
    _json_out({"lr_in": likelihood_ratio(R, T0), "lr_out": likelihood_ratio(R, out)})


def cmd_optimize(args):
    R, _ = _load_rhat(args)
    T0 = read_toeplitz(args.init)
    if args.hermitian and not isinstance(T0, HermToeplitz):
        T0 = HermToeplitz.from_symmetric(T0)
    cfg = OptimizerConfig(max_iters=args.max_iters)
    out = maximize_lr(R, T0, cfg)
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    write_toeplitz(d / "matrix.csv", out.matrix)
    with open(d / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iter", "lr", "min_eig"))
        for row in out.trace:
            w.writerow([cp._fmt(v) for v in row])
    _json_out({"lr": out.lr, "status": out.status.value, "iters": out.iters, "sigma2": out.sigma2},
              d / "outcome.json")
    _json_out({"lr": out.lr, "status": out.status.value, "iters": out.iters})


_MC_KEYS = {"n": "N", "w2": "W2", "sigma2": "sigma2", "trials": "trials", "seed": "seed0",
            "criterion": "criterion", "trim_k": "trim_k", "phase_max": "phase_max"}


def cmd_mc(args):
    overrides = {}
    for flag, key in _MC_KEYS.items():
        v = getattr(args, flag)
        if v is not None:
            overrides[key] = v
    if args.t is not None:
        overrides["T_list"] = args.t
    if args.full:
        overrides["trials"] = 1000
    if args.ascend:
        overrides["ascend"] = True
    if args.hermitian:
        overrides["optimize"] = "both"
    if args.trim_per_probe:
        overrides["trim_per_probe"] = True
    if args.config:
        cfg = cp.CampaignConfig.from_file(args.config, overrides)
    else:
        cfg = cp.CampaignConfig.from_mapping(overrides)
    records, summary = cp.run_campaign(cfg, outdir=args.out)
    _json_out(summary.to_dict())


def cmd_report(args):
    records = cp.read_trials(Path(args.input) / "trials.csv")
    cfg = {}
    sj = Path(args.input) / "summary.json"
    if sj.exists():
        cfg = json.loads(sj.read_text()).get("config", {})
    summary = cp.summarize(records, cfg)
    cp.emit_report(records, summary, args.out or args.input)
    _json_out(summary.to_dict())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toeplitz-ml", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("model", help="emit the sinc covariance model")
    _model_args(p)
    p.add_argument("--dense", action="store_true", help="write the full matrix instead of lags")
    p.add_argument("--out", help="output CSV")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("simulate", help="generate a snapshot set")
    _model_args(p)
    p.add_argument("--t", type=int, required=True, help="number of snapshots T")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phase-max", type=float, default=0.0, help="calibration phase error bound (rad)")
    p.add_argument("--theta0", type=float, default=0.0, help="steering angle (rad)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="moduli, model order and corrected eigenvalues")
    p.add_argument("--snapshots")
    p.add_argument("--rhat", help="sample covariance CSV (needs --t)")
    p.add_argument("--t", type=int)
    p.add_argument("--method", default="MDL", choices=("MDL", "AIC"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("search", help="per-branch sign search table")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--criterion", default="l2", choices=("l2", "minimax", "rho", "lr"))
    p.add_argument("--trim-k", type=int, default=1)
    p.add_argument("--trim-per-probe", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("trim", help="trim a symmetric Toeplitz matrix to a minimum eigenvalue")
    p.add_argument("--matrix", required=True)
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--trim-k", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trim)

    p = sub.add_parser("ascend", help="LP equalization of the whitened spectrum")
    p.add_argument("--snapshots")
    p.add_argument("--rhat")
    p.add_argument("--init", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--stall-limit", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ascend)

    p = sub.add_parser("optimize", help="maximize the likelihood ratio from an initial matrix")
    p.add_argument("--snapshots")
    p.add_argument("--rhat")
    p.add_argument("--init", required=True)
    p.add_argument("--hermitian", action="store_true")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("mc", help="Monte-Carlo campaign")
    p.add_argument("--config", help="key=value config file (flags win)")
    p.add_argument("--n", type=int)
    p.add_argument("--w2", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--t", help="comma-separated sample volumes")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--criterion", choices=("l2", "minimax", "rho", "lr"))
    p.add_argument("--trim-k", type=int)
    p.add_argument("--trim-per-probe", action="store_true")
    p.add_argument("--ascend", action="store_true")
    p.add_argument("--hermitian", action="store_true", help="also optimize over Hermitian Toeplitz")
    p.add_argument("--phase-max", type=float)
    p.add_argument("--full", action="store_true", help="1000 trials per sample volume")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("report", help="re-aggregate trials.csv and rewrite the report files")
    p.add_argument("--in", dest="input", required=True, help="campaign output directory")
    p.add_argument("--out", help="output directory (default: the input directory)")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ToeplitzMLError, OSError) as exc:
        print(f"toeplitz-ml: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
