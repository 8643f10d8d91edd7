"""Monte-Carlo trials and campaigns over sample volumes, with report emission.

One trial runs the whole estimation chain on freshly simulated snapshots:
moduli and corrected eigenvalues, branch sign search, redistribution, trim to a
positive definite matrix, optional equalization, and LR maximization. Component
failures are recorded on the trial, never raised.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .ascent import equalize
from .errors import DomainError, ToeplitzMLError
from .matrix import (
    HermToeplitz,
    PhaseVector,
    build_sinc_model,
    eigh,
    generate_snapshots,
    likelihood_ratio,
    sample_covariance,
)
from .optimize import OptimizerConfig, OptimizeStatus, global_check, maximize_lr
from .signs import (
    CriterionKind,
    CriterionSpec,
    TrimPolicy,
    dp_branch_search,
    eval_criterion,
    redistribute,
)
from .spectrum import CorrectedSpectrum, redundancy_moduli, rmt_correct, select_order
from .trim import TrimConfig, trim

__all__ = [
    "CampaignConfig",
    "TrialRecord",
    "CampaignSummary",
    "trial_seed",
    "run_trial",
    "run_campaign",
    "summarize",
    "emit_report",
    "read_trials",
    "compare_criteria",
    "worker_count",
    "probe_policy",
    "HIST_BINS",
]

HIST_BINS = 30
DEFAULT_T_LIST = (17, 34, 85, 170, 340, 1000)
THREADS_ENV = "TOEPLITZ_ML_THREADS"
# Looser first-order fidelity for the trims run on every probed sign pattern.
PROBE_EXPANSION_TOL = 5e-2


def probe_policy(target: float, K: int = 1) -> TrimPolicy:
    return TrimPolicy(TrimConfig(target, K=K, expansion_tol=PROBE_EXPANSION_TOL))


def _parse_bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise DomainError(f"not a boolean: {s!r}")


def _parse_ints(s) -> tuple:
    if isinstance(s, (list, tuple)):
        return tuple(int(v) for v in s)
    return tuple(int(v) for v in str(s).replace(";", ",").split(",") if v.strip())


@dataclass(frozen=True)
class CampaignConfig:
    """Campaign settings; ``optimize`` is one of real, hermitian, both."""

    N: int = 17
    W2: float = 0.1
    sigma2: float = 0.01
    T_list: tuple = DEFAULT_T_LIST
    trials: int = 100
    seed0: int = 0
    criterion: str = "l2"
    second_criterion: str = "minimax"
    trim_k: int = 1
    trim_per_probe: bool = False
    ascend: bool = False
    optimize: str = "real"
    theta0: float = 0.0
    phase_max: float = 0.0
    order_method: str = "MDL"
    check_global: bool = True

    def __post_init__(self):
        object.__setattr__(self, "T_list", _parse_ints(self.T_list))
        if self.N < 2:
            raise DomainError("N must be >= 2")
        if not 0 < self.W2 < 0.5 or not self.sigma2 > 0:
            raise DomainError("need 0 < W2 < 0.5 and sigma2 > 0")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if not self.T_list or min(self.T_list) < 1:
            raise DomainError("T_list must be a non-empty list of positive counts")
        if self.optimize not in ("real", "hermitian", "both"):
            raise DomainError("optimize must be real, hermitian or both")
        if not 1 <= self.trim_k <= self.N - 1:
            raise DomainError("trim_k must lie in [1, N-1]")
        if self.phase_max < 0:
            raise DomainError("phase_max must be non-negative")
        CriterionKind.parse(self.criterion)
        CriterionKind.parse(self.second_criterion)

    @classmethod
    def from_mapping(cls, values: dict) -> "CampaignConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in values.items():
            name = {"n": "N", "w2": "W2", "t": "T_list", "t_list": "T_list", "seed": "seed0"}.get(key.lower(), key)
            if name not in types:
                raise DomainError(f"unknown config key {key!r}")
            kind = types[name]
            if name == "T_list":
                kw[name] = _parse_ints(raw)
            elif kind == "bool":
                kw[name] = _parse_bool(raw)
            elif kind == "int":
                kw[name] = int(raw)
            elif kind == "float":
                kw[name] = float(raw)
            else:
                kw[name] = str(raw).strip()
        return cls(**kw)

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "CampaignConfig":
        """Read ``key = value`` lines (``#`` comments allowed); ``overrides`` win."""
        values = {}
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"bad config line {line!r}")
            k, v = line.split("=", 1)
            values[k.strip()] = v.strip()
        values.update(overrides or {})
        return cls.from_mapping(values)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["T_list"] = list(self.T_list)
        return d


_NAN = float("nan")


@dataclass(frozen=True, eq=False)
class TrialRecord:
    T: int
    trial: int
    seed: int
    lr_true: float = _NAN
    lr_init: float = _NAN
    lr_ascent: float = _NAN
    lr_opt: float = _NAN
    lr_opt_hermitian: float = _NAN
    opt_status: str = ""
    opt_status_hermitian: str = ""
    opt_iters: int = 0
    optimizer_failure: bool = False
    trim_fallback: bool = False
    trim_coalescence: bool = False
    expansion_failures: int = 0
    rmt_skipped: bool = False
    excluded: bool = False
    reason: str = ""
    k_noise: int = 0
    noise_value: float = _NAN
    score_l2: float = _NAN
    score_minimax: float = _NAN
    score_rho: float = _NAN
    global_lr: bool = False
    global_match: bool = False
    is_global: bool = False
    # Not written to trials.csv.
    trace: tuple = field(default=(), repr=False)
    branches: tuple = field(default=(), repr=False)

    @property
    def delta_lr(self) -> float:
        return self.lr_opt - self.lr_true

    @property
    def delta_lr_hermitian(self) -> float:
        return self.lr_opt_hermitian - self.lr_true


CSV_FIELDS = tuple(f.name for f in fields(TrialRecord) if f.name not in ("trace", "branches"))
_FIELD_TYPES = {f.name: f.type for f in fields(TrialRecord)}


def trial_seed(seed0: int, T: int, trial: int) -> int:
    """seed0 plus a stable 64-bit hash of (T, trial), modulo 2^64."""
    h = hashlib.blake2b(f"{int(T)}:{int(trial)}".encode(), digest_size=8).digest()
    return (int(seed0) + int.from_bytes(h, "little")) % (1 << 64)


def _phases(cfg: CampaignConfig, seed: int) -> PhaseVector | None:
    if cfg.phase_max == 0 and cfg.theta0 == 0:
        return None
    p = PhaseVector.steering(cfg.N, cfg.theta0)
    if cfg.phase_max > 0:
        rng = np.random.Generator(np.random.Philox(seed).jumped())
        p = p.compose(PhaseVector.calibration(cfg.N, cfg.phase_max, rng))
    return p


def _target_spectrum(eigs: np.ndarray, T: int, k_noise: int) -> tuple[CorrectedSpectrum, bool]:
    """RMT-corrected spectrum, or the sample spectrum with an averaged noise cluster when T <= N."""
    n = eigs.size
    if T > n:
        return rmt_correct(eigs, T, k_noise), False
    vals = eigs.copy()
    noise = float(np.mean(vals[n - k_noise:]))
    vals[n - k_noise:] = noise
    vals = np.maximum.accumulate(vals[::-1])[::-1]
    clusters = tuple((i, 1) for i in range(n - k_noise)) + ((n - k_noise, k_noise),)
    return CorrectedSpectrum(vals, noise, clusters), True


def _score(M, spec: CriterionSpec, kind: CriterionKind) -> float:
    try:
        return eval_criterion(M, spec.with_kind(kind))
    except DomainError:
        return _NAN


def _branch_rows(branches, spec: CriterionSpec, Rhat) -> tuple:
    rows = []
    for i, b in enumerate(branches):
        rows.append((b.branch_id, _score(b.matrix, spec, CriterionKind.L2),
                     _score(b.matrix, spec, CriterionKind.MINIMAX),
                     _score(b.matrix, spec, CriterionKind.RHO), b.lr, b.pd, i == 0))
    return tuple(rows)


def run_trial(cfg: CampaignConfig, T: int, seed: int, trial: int = 0,
              opt_cfg: OptimizerConfig | None = None) -> TrialRecord:
    """One end-to-end trial; every stage failure becomes a flag on the record."""
    opt_cfg = OptimizerConfig() if opt_cfg is None else opt_cfg
    rec = {"T": int(T), "trial": int(trial), "seed": int(seed)}
    try:
        _run_stages(cfg, int(T), int(seed), opt_cfg, rec)
    except ToeplitzMLError as exc:
        rec["excluded"] = True
        rec["reason"] = rec.get("reason") or f"error:{type(exc).__name__}"
    except np.linalg.LinAlgError:
        rec["excluded"] = True
        rec["reason"] = rec.get("reason") or "error:LinAlgError"
    return TrialRecord(**rec)


def _run_stages(cfg, T, seed, opt_cfg, rec):
    T_true = build_sinc_model(cfg.N, cfg.W2, cfg.sigma2)
    S = generate_snapshots(T_true, T, _phases(cfg, seed), seed)
    R = sample_covariance(S)
    rec["lr_true"] = likelihood_ratio(R, T_true)

    eigs = eigh(R).values
    order = select_order(eigs, T, cfg.order_method)
    spec, skipped = _target_spectrum(eigs, T, order.k_noise)
    rec.update(k_noise=order.k_noise, noise_value=spec.noise_value, rmt_skipped=skipped)
    m = redundancy_moduli(R)

    first = CriterionSpec(cfg.criterion, spec.values, snapshots=S, Rhat=R)
    tcfg = TrimConfig(spec.noise_value, K=cfg.trim_k)
    policy = probe_policy(spec.noise_value, cfg.trim_k) if cfg.trim_per_probe else None
    branches = dp_branch_search(m, first, trim=policy, Rhat=R)
    rec["branches"] = _branch_rows(branches, first, R)
    second = first.with_kind(cfg.second_criterion)
    chosen = redistribute(branches[0], second, m, trim=policy, Rhat=R)

    rep = trim(chosen.matrix, tcfg)
    rec.update(trim_fallback=rep.fallback_used, trim_coalescence=rep.coalescence,
               expansion_failures=rep.expansion_failures)
    init = rep.matrix
    rec["lr_init"] = likelihood_ratio(R, init)
    rec["score_l2"] = _score(init, first, CriterionKind.L2)
    rec["score_minimax"] = _score(init, first, CriterionKind.MINIMAX)
    rec["score_rho"] = _score(init, first, CriterionKind.RHO)
    if rep.coalescence:
        rec.update(excluded=True, reason="trim_coalescence")
        return
    if cfg.ascend:
        init = equalize(init, R)
        rec["lr_ascent"] = likelihood_ratio(R, init)

    if cfg.optimize in ("real", "both"):
        out = maximize_lr(R, init, opt_cfg)
        rec.update(lr_opt=out.lr, opt_status=out.status.value, opt_iters=out.iters, trace=out.trace)
        if out.status is not OptimizeStatus.CONVERGED:
            reason = "optimizer_non_pd" if out.status is OptimizeStatus.NON_PD_EXIT else "optimizer_iter_limit"
            rec.update(optimizer_failure=True, excluded=True, reason=reason)
        elif cfg.check_global:
            g = global_check(out, R, T_true, opt_cfg)
            rec.update(global_lr=g.lr_exceeds_true, global_match=g.reoptimized_match, is_global=g.passed)
    if cfg.optimize in ("hermitian", "both"):
        outh = maximize_lr(R, HermToeplitz.from_symmetric(init), opt_cfg)
        rec.update(lr_opt_hermitian=outh.lr, opt_status_hermitian=outh.status.value)
        if outh.status is not OptimizeStatus.CONVERGED:
            rec["optimizer_failure"] = True
            if not rec.get("excluded"):
                reason = "optimizer_non_pd" if outh.status is OptimizeStatus.NON_PD_EXIT else "optimizer_iter_limit"
                rec.update(excluded=True, reason=reason + "_hermitian")
        if cfg.optimize == "hermitian":
            rec.update(opt_iters=outh.iters, trace=outh.trace)


def worker_count(default: int = 1) -> int:
    v = os.environ.get(THREADS_ENV)
    if v is None or not v.strip():
        return default
    n = int(v)
    if n < 1:
        raise DomainError(f"{THREADS_ENV} must be >= 1")
    return n


def _trial_job(args):
    cfg, T, seed, trial = args
    return run_trial(cfg, T, seed, trial)


@dataclass(frozen=True, eq=False)
class CampaignSummary:
    config: dict
    per_T: tuple

    def to_dict(self) -> dict:
        return {"config": self.config, "per_T": list(self.per_T)}

    def row(self, T: int) -> dict:
        for r in self.per_T:
            if r["T"] == T:
                return r
        raise KeyError(T)


def _stats(v: np.ndarray) -> dict:
    if v.size == 0:
        return {"mean": _NAN, "min": _NAN, "max": _NAN, "std": _NAN}
    return {"mean": float(np.mean(v)), "min": float(np.min(v)), "max": float(np.max(v)),
            "std": float(np.std(v))}


def summarize(records, cfg_dict: dict | None = None) -> CampaignSummary:
    """Per-T aggregates; excluded trials count toward failures only."""
    by_T = {}
    for r in records:
        by_T.setdefault(r.T, []).append(r)
    rows = []
    for T in sorted(by_T):
        rs = by_T[T]
        inc = [r for r in rs if not r.excluded]
        opt = np.array([r.lr_opt for r in inc if not math.isnan(r.lr_opt)])
        true_all = np.array([r.lr_true for r in rs if not math.isnan(r.lr_true)])
        dl = np.array([r.delta_lr for r in inc if not math.isnan(r.lr_opt)])
        dlh = np.array([r.delta_lr_hermitian for r in inc if not math.isnan(r.lr_opt_hermitian)])
        init = np.array([r.lr_init for r in inc if not math.isnan(r.lr_init)])
        s = _stats(opt)
        failures = sum(r.optimizer_failure for r in rs)
        rows.append({
            "T": T,
            "trials": len(rs),
            "included": len(inc),
            "excluded": len(rs) - len(inc),
            "failures": failures,
            "failure_pct": 100.0 * failures / len(rs),
            "lr_opt_mean": s["mean"],
            "lr_opt_min": s["min"],
            "lr_opt_max": s["max"],
            "lr_opt_std": s["std"],
            "lr_opt_minus_3sigma": s["mean"] - 3 * s["std"],
            "lr_opt_plus_3sigma": s["mean"] + 3 * s["std"],
            "lr_true_mean": _stats(true_all)["mean"],
            "lr_true_q10": float(np.quantile(true_all, 0.1)) if true_all.size else _NAN,
            "lr_true_q90": float(np.quantile(true_all, 0.9)) if true_all.size else _NAN,
            "lr_init_mean": _stats(init)["mean"],
            "delta_lr_mean": _stats(dl)["mean"],
            "delta_lr_hermitian_mean": _stats(dlh)["mean"],
            "global_pass": sum(r.is_global for r in inc),
        })
    return CampaignSummary(cfg_dict or {}, tuple(rows))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _record_row(r: TrialRecord) -> list:
    return [_fmt(getattr(r, k)) for k in CSV_FIELDS]


def read_trials(path) -> list:
    """Parse trials.csv back into TrialRecord objects."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                t = _FIELD_TYPES[k]
                if t == "bool":
                    kw[k] = v == "1"
                elif t == "int":
                    kw[k] = int(v)
                elif t == "float":
                    kw[k] = float(v)
                else:
                    kw[k] = v
            out.append(TrialRecord(**kw))
    return out


def run_campaign(cfg: CampaignConfig, workers: int | None = None, outdir=None):
    """All trials in (T, trial) order; returns (records, summary).

    With ``outdir`` the trial CSV is written row by row as results arrive, then
    the full report is emitted. ``workers`` defaults to TOEPLITZ_ML_THREADS or 1.
    """
    workers = worker_count() if workers is None else int(workers)
    jobs = [(cfg, T, trial_seed(cfg.seed0, T, i), i) for T in cfg.T_list for i in range(cfg.trials)]
    records = []
    fh = writer = None
    if outdir is not None:
        Path(outdir).mkdir(parents=True, exist_ok=True)
        fh = open(Path(outdir) / "trials.csv", "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
    try:
        if workers <= 1:
            it = map(_trial_job, jobs)
            pool = None
        else:
            pool = ProcessPoolExecutor(max_workers=workers)
            it = pool.map(_trial_job, jobs, chunksize=1)
        try:
            for rec in it:
                records.append(rec)
                if writer is not None:
                    writer.writerow(_record_row(rec))
                    fh.flush()
        finally:
            if pool is not None:
                pool.shutdown(cancel_futures=True)
    finally:
        if fh is not None:
            fh.close()
    summary = summarize(records, cfg.to_dict())
    if outdir is not None:
        emit_report(records, summary, outdir)
    return records, summary


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


AGG_FIELDS = ("T", "trials", "included", "failure_pct", "lr_opt_mean", "lr_opt_min", "lr_opt_max",
              "lr_opt_minus_3sigma", "lr_opt_plus_3sigma", "lr_true_mean", "lr_true_q10",
              "lr_true_q90", "lr_init_mean", "delta_lr_mean", "delta_lr_hermitian_mean")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def emit_report(records, summary: CampaignSummary, outdir) -> list:
    """Write trials.csv, summary.json and the per-figure CSVs; returns the paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    records = list(records)
    paths = []

    p = out / "trials.csv"
    _write_csv(p, CSV_FIELDS, ([getattr(r, k) for k in CSV_FIELDS] for r in records))
    paths.append(p)

    p = out / "summary.json"
    p.write_text(json.dumps(_json_safe(summary.to_dict()), indent=2, sort_keys=True) + "\n")
    paths.append(p)

    p = out / "fig8_failures.csv"
    _write_csv(p, ("T", "trials", "failures", "failure_pct"),
               ((r["T"], r["trials"], r["failures"], r["failure_pct"]) for r in summary.per_T))
    paths.append(p)

    # Optimizer trajectory of the first trial at each T that has one.
    p = out / "fig9_trace.csv"
    rows, seen = [], set()
    for r in records:
        if r.T in seen or not r.trace:
            continue
        seen.add(r.T)
        rows.extend((r.T, r.trial, it, lr, lmin) for it, lr, lmin in r.trace)
    _write_csv(p, ("T", "trial", "iter", "lr", "min_eig"), rows)
    paths.append(p)

    included = [r for r in records if not r.excluded and not math.isnan(r.lr_opt)]
    by_T = {}
    for r in included:
        by_T.setdefault(r.T, []).append(r)

    p = out / "fig11_sorted.csv"
    rows = []
    for T in sorted(by_T):
        for rank, r in enumerate(sorted(by_T[T], key=lambda r: (r.lr_opt, r.trial))):
            rows.append((T, rank, r.trial, r.lr_opt, r.lr_true, r.lr_init))
    _write_csv(p, ("T", "rank", "trial", "lr_opt", "lr_true", "lr_init"), rows)
    paths.append(p)

    p = out / "fig13_histogram.csv"
    rows = []
    for T in sorted(by_T):
        d = np.array([r.delta_lr for r in by_T[T]])
        counts, edges = np.histogram(d, bins=HIST_BINS)
        rows.extend((T, i, float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(HIST_BINS))
    _write_csv(p, ("T", "bin", "left", "right", "count"), rows)
    paths.append(p)

    p = out / "fig14_20_aggregates.csv"
    _write_csv(p, AGG_FIELDS, ([r[k] for k in AGG_FIELDS] for r in summary.per_T))
    paths.append(p)

    p = out / "tables_branch.csv"
    rows = []
    for r in records:
        rows.extend((r.T, r.trial) + tuple(b) for b in r.branches)
    _write_csv(p, ("T", "trial", "branch_id", "l2", "minimax", "rho", "lr", "pd", "selected"), rows)
    paths.append(p)
    return paths


def compare_criteria(T: int, trials: int, seed0: int = 0, N: int = 17, W2: float = 0.1,
                     sigma2: float = 0.01, kinds=("L2", "Minimax", "Rho", "LogLR")) -> dict:
    """LR of the best trimmed branch under each criterion, with every probe trimmed.

    The trim cache is shared across criteria within a trial. Returns
    ``{kind: array of LR per trial}`` plus ``"lr_true"`` and ``"seconds"``.
    """
    T_true = build_sinc_model(N, W2, sigma2)
    out = {CriterionKind.parse(k).value: [] for k in kinds}
    out["lr_true"] = []
    t0 = time.perf_counter()
    for i in range(trials):
        seed = trial_seed(seed0, T, i)
        S = generate_snapshots(T_true, T, None, seed)
        R = sample_covariance(S)
        eigs = eigh(R).values
        spec, _ = _target_spectrum(eigs, T, select_order(eigs, T).k_noise)
        m = redundancy_moduli(R)
        policy = probe_policy(spec.noise_value)
        for k in kinds:
            c = CriterionSpec(k, spec.values, snapshots=S, Rhat=R)
            best = dp_branch_search(m, c, trim=policy, Rhat=R)[0]
            out[c.kind.value].append(best.lr)
        out["lr_true"].append(likelihood_ratio(R, T_true))
    res = {k: np.array(v) for k, v in out.items()}
    res["seconds"] = time.perf_counter() - t0
    return res
