"""Sign assignment over Toeplitz lags from moduli and a target spectrum.

Strategies: greedy "maximum element" flipping, N-1 forced-flip branches
continued greedily, a second-stage redistribution pass, and an exhaustive
oracle over all 2^(N-1) patterns. Criteria are scored so that lower is better.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import CapacityError, DomainError
from .matrix import SnapshotSet, SymToeplitz, log_likelihood_ratio, to_dense
from .spectrum import ModuliVector
from .trim import TrimConfig, trim

__all__ = [
    "CriterionKind",
    "CriterionSpec",
    "SignPattern",
    "SearchResult",
    "ExhaustiveResult",
    "TrimPolicy",
    "eval_criterion",
    "max_element_search",
    "dp_branch_search",
    "redistribute",
    "exhaustive_search",
    "flippable_lags",
    "ZERO_MODULUS_RTOL",
]

ZERO_MODULUS_RTOL = 1e-12
EXHAUSTIVE_MAX_N = 20
REDISTRIBUTE_PASSES = 3


class CriterionKind(str, Enum):
    L2 = "L2"
    MINIMAX = "Minimax"
    RHO = "Rho"
    LOGLR = "LogLR"

    @classmethod
    def parse(cls, s) -> "CriterionKind":
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower()
        for k in cls:
            if k.value.lower() == key:
                return k
        aliases = {"lr": cls.LOGLR, "loglr": cls.LOGLR, "minmax": cls.MINIMAX}
        if key in aliases:
            return aliases[key]
        raise DomainError(f"unknown criterion {s!r}")


@dataclass(frozen=True, eq=False)
class CriterionSpec:
    kind: CriterionKind
    target_eigs: Optional[np.ndarray] = None
    snapshots: Optional[SnapshotSet] = None
    Rhat: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = CriterionKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.target_eigs is not None:
            t = np.sort(np.asarray(self.target_eigs, dtype=float))[::-1].copy()
            t.setflags(write=False)
            object.__setattr__(self, "target_eigs", t)
        if kind in (CriterionKind.L2, CriterionKind.MINIMAX) and self.target_eigs is None:
            raise DomainError(f"{kind.value} criterion needs target_eigs")
        if kind is CriterionKind.MINIMAX and np.any(self.target_eigs <= 0):
            raise DomainError("Minimax criterion needs positive target eigenvalues")
        if kind is CriterionKind.RHO and self.snapshots is None:
            raise DomainError("Rho criterion needs snapshots")
        if kind is CriterionKind.LOGLR and self.Rhat is None:
            raise DomainError("LogLR criterion needs Rhat")
        if self.snapshots is not None:
            X = self.snapshots.snapshots
            G = np.conj(X) @ X.T / X.shape[1]
            object.__setattr__(self, "_gram", 0.5 * (G + G.conj().T))

    def with_kind(self, kind) -> "CriterionSpec":
        return CriterionSpec(kind, self.target_eigs, self.snapshots, self.Rhat)


@dataclass(frozen=True, eq=False)
class SignPattern:
    """+-1 per lag 1..N-1."""

    signs: np.ndarray

    def __post_init__(self):
        s = np.array(self.signs, dtype=np.int8).ravel()
        if not np.all(np.abs(s) == 1):
            raise DomainError("signs must be +1 or -1")
        s.setflags(write=False)
        object.__setattr__(self, "signs", s)

    def apply(self, m: ModuliVector | np.ndarray) -> SymToeplitz:
        mod = m.moduli if isinstance(m, ModuliVector) else np.asarray(m, dtype=float)
        return SymToeplitz(np.concatenate([[mod[0]], self.signs * mod[1:]]))

    def odd_flip(self) -> "SignPattern":
        k = np.arange(1, self.signs.size + 1)
        return SignPattern(np.where(k % 2 == 1, -self.signs, self.signs))

    def key(self) -> tuple:
        return tuple(int(v) for v in self.signs)

    def __eq__(self, other):
        return isinstance(other, SignPattern) and np.array_equal(self.signs, other.signs)

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return "SignPattern(" + "".join("+" if v > 0 else "-" for v in self.signs) + ")"


@dataclass(frozen=True, eq=False)
class SearchResult:
    pattern: SignPattern
    matrix: SymToeplitz
    score: float
    lr: float
    pd: bool
    branch_id: Optional[int] = None
    history: tuple = ()
    degraded: bool = False

    def sort_key(self):
        return (self.score, self.degraded, self.pattern.key())


@dataclass(frozen=True, eq=False)
class ExhaustiveResult:
    """Matching patterns sorted by spectral deviation, plus the p.d. count over all enumerated."""

    patterns: list
    deviations: np.ndarray
    pd_count: int
    enumerated: int

    def __len__(self):
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def __getitem__(self, i):
        return self.patterns[i]


@dataclass(eq=False)
class TrimPolicy:
    """Trim every probed candidate to p.d. before scoring; results cached by lag bytes."""

    cfg: TrimConfig
    cache: dict = field(default_factory=dict)

    def apply(self, M: SymToeplitz) -> tuple[SymToeplitz, bool]:
        key = M.lags.tobytes()
        hit = self.cache.get(key)
        if hit is None:
            rep = trim(M, self.cfg)
            hit = (rep.matrix, rep.fallback_used or rep.coalescence)
            self.cache[key] = hit
        return hit


def _eigs_desc(M) -> np.ndarray:
    return np.linalg.eigvalsh(to_dense(M))[::-1]


def eval_criterion(M: SymToeplitz, c: CriterionSpec) -> float:
    """Score ``M`` under ``c``; lower is better."""
    if c.kind is CriterionKind.L2:
        return float(np.sum((_eigs_desc(M) - c.target_eigs) ** 2))
    if c.kind is CriterionKind.MINIMAX:
        return float(np.max(np.abs(_eigs_desc(M) - c.target_eigs) / c.target_eigs))
    if c.kind is CriterionKind.RHO:
        A = to_dense(M)
        try:
            Minv = np.linalg.inv(np.linalg.cholesky(A))
        except np.linalg.LinAlgError as exc:
            raise DomainError("Rho criterion needs a positive definite matrix") from exc
        Minv = Minv.T @ Minv
        D = Minv * c._gram
        w = np.linalg.eigvalsh(0.5 * (D + D.conj().T))
        return float((w[-1] - w[0]) / np.sum(w))
    return -log_likelihood_ratio(c.Rhat, M)


def flippable_lags(m: ModuliVector) -> np.ndarray:
    """Lag indices 1..N-1 whose modulus is not numerically zero."""
    mod = m.moduli
    return np.flatnonzero(mod[1:] > ZERO_MODULUS_RTOL * mod[0]) + 1


class _Scorer:
    """Evaluates sign patterns, optionally through a trim policy."""

    def __init__(self, m: ModuliVector, c: CriterionSpec, policy: Optional[TrimPolicy], Rhat=None):
        self.m = m
        self.c = c
        self.policy = policy
        self.Rhat = c.Rhat if Rhat is None else Rhat
        self.memo = {}

    def __call__(self, signs: np.ndarray):
        key = signs.tobytes()
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        M = SignPattern(signs).apply(self.m)
        degraded = False
        if self.policy is not None:
            M, degraded = self.policy.apply(M)
        try:
            score = eval_criterion(M, self.c)
        except DomainError:
            score = np.inf
        out = (score, M, degraded)
        self.memo[key] = out
        return out

    def better(self, a, b) -> bool:
        """Strict improvement; degraded candidates lose exact ties."""
        return a[0] < b[0] or (a[0] == b[0] and b[2] and not a[2])

    def result(self, signs, branch_id=None, history=()) -> SearchResult:
        score, M, degraded = self(signs)
        lmin = float(np.linalg.eigvalsh(M.dense())[0])
        pd = lmin > 0
        lr = np.nan
        if self.Rhat is not None and pd:
            lr = float(np.exp(min(log_likelihood_ratio(self.Rhat, M), 0.0)))
        return SearchResult(SignPattern(signs), M, score, lr, pd, branch_id, tuple(history), degraded)


def _greedy(scorer: _Scorer, signs: np.ndarray, history: list, lags: np.ndarray):
    cur = scorer(signs)
    while True:
        best, best_k = cur, -1
        for k in lags:
            if signs[k - 1] < 0:
                continue
            trial = signs.copy()
            trial[k - 1] = -1
            s = scorer(trial)
            if scorer.better(s, best):
                best, best_k = s, k
        if best_k < 0:
            return signs, history
        signs = signs.copy()
        signs[best_k - 1] = -1
        history = history + [int(best_k)]
        cur = best


def max_element_search(m: ModuliVector, c: CriterionSpec, trim: Optional[TrimPolicy] = None,
                       Rhat=None) -> SearchResult:
    """Greedy single flips from the all-positive matrix while the criterion improves."""
    scorer = _Scorer(m, c, trim, Rhat)
    signs, hist = _greedy(scorer, np.ones(m.n - 1, dtype=np.int8), [], flippable_lags(m))
    return scorer.result(signs, None, hist)


def dp_branch_search(m: ModuliVector, c: CriterionSpec, trim: Optional[TrimPolicy] = None,
                     Rhat=None) -> list:
    """One branch per flippable lag b: force a flip at b, then continue greedily."""
    scorer = _Scorer(m, c, trim, Rhat)
    lags = flippable_lags(m)
    out = []
    for b in lags:
        signs = np.ones(m.n - 1, dtype=np.int8)
        signs[b - 1] = -1
        signs, hist = _greedy(scorer, signs, [int(b)], lags)
        out.append(scorer.result(signs, int(b), hist))
    out.sort(key=SearchResult.sort_key)
    return out


def redistribute(r: SearchResult, c: CriterionSpec, m: ModuliVector,
                 trim: Optional[TrimPolicy] = None, Rhat=None) -> SearchResult:
    """Move flips, oldest first, to their best alternative position while ``c`` improves.

    Each flip is reverted and re-placed at the best still-positive lag (possibly its
    old one). A relocated flip becomes the newest in the history. At most three full
    passes are made.
    """
    scorer = _Scorer(m, c, trim, Rhat)
    lags = flippable_lags(m)
    signs = np.array(r.pattern.signs, dtype=np.int8)
    hist = [k for k in r.history if signs[k - 1] < 0]
    hist += [int(k) for k in np.flatnonzero(signs < 0) + 1 if int(k) not in hist]
    cur = scorer(signs)
    for _ in range(REDISTRIBUTE_PASSES):
        improved = False
        for flip in list(hist):
            if flip not in hist:
                continue
            base = signs.copy()
            base[flip - 1] = 1
            best, best_k = cur, -1
            for k in lags:
                if base[k - 1] < 0 or k == flip:
                    continue
                trial = base.copy()
                trial[k - 1] = -1
                s = scorer(trial)
                if scorer.better(s, best):
                    best, best_k = s, int(k)
            if best_k > 0:
                signs = base
                signs[best_k - 1] = -1
                hist = [h for h in hist if h != flip] + [best_k]
                cur = best
                improved = True
        if not improved:
            break
    return scorer.result(signs, r.branch_id, hist)


def _all_signs(nbits: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    return (1 - 2 * ((idx[:, None] >> np.arange(nbits)) & 1)).astype(np.int8)


def exhaustive_search(m: ModuliVector, target_eigs, tol: float, expand_zeros: bool = False,
                      chunk: int = 4096) -> ExhaustiveResult:
    """Enumerate sign patterns and keep those whose spectrum matches ``target_eigs``.

    Match means max_j |lam_j - target_j| / |target_j| <= tol with both spectra
    descending. Lags of zero modulus are held at +1 unless ``expand_zeros``.
    """
    n = m.n
    if n > EXHAUSTIVE_MAX_N:
        raise CapacityError(f"exhaustive search limited to N <= {EXHAUSTIVE_MAX_N}, got {n}")
    target = np.sort(np.asarray(target_eigs, dtype=float))[::-1]
    if target.size != n:
        raise DomainError("target spectrum length must equal N")
    free = np.arange(1, n) if expand_zeros else flippable_lags(m)
    nb = free.size
    total = 1 << nb
    D = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    denom = np.maximum(np.abs(target), np.finfo(float).tiny)
    found, devs = [], []
    pd_count = 0
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        sub = _all_signs(nb, start, stop)
        signs = np.ones((stop - start, n - 1), dtype=np.int8)
        signs[:, free - 1] = sub
        lags = np.concatenate([np.full((stop - start, 1), m.moduli[0]), signs * m.moduli[1:]], axis=1)
        w = np.linalg.eigvalsh(lags[:, D])[:, ::-1]
        pd_count += int(np.sum(w[:, -1] > 0))
        dev = np.max(np.abs(w - target) / denom, axis=1)
        for i in np.flatnonzero(dev <= tol):
            found.append(SignPattern(signs[i]))
            devs.append(float(dev[i]))
    order = sorted(range(len(found)), key=lambda i: (devs[i], found[i].key()))
    return ExhaustiveResult([found[i] for i in order], np.array([devs[i] for i in order]), pd_count, total)
