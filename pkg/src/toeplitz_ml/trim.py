"""LP-driven trimming of symmetric Toeplitz matrices to a prescribed minimum eigenvalue.

Each outer iteration linearizes the spectrum in the lags,

    lam_j(t + x) ~= lam_j(t) + sum_k s_jk x_k,    s_jk = U_j^T A_k U_j,

solves a small LP for the lag step x inside a box |x_k| <= xi, applies the step
to the lags only (so every iterate stays exactly Toeplitz), and checks the
recomputed spectrum against the LP prediction. A step whose prediction is off
by more than ``expansion_tol`` is rejected and xi is halved.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import DegeneracyError, DomainError
from .lp import LpProblem, solve_lp
from .matrix import SymToeplitz, make_rng

__all__ = [
    "TrimConfig",
    "TrimReport",
    "sensitivity_matrix",
    "trim",
    "trim_single",
    "trim_multi",
    "diagonal_load",
    "lag_basis",
]

# Weight of the L1 step penalty relative to the eigenvalue shortfall y.
STEP_PENALTY = 1e-3
# Weight of the shortfall y relative to the noise-gap spread in the K-equal LP.
SHORTFALL_WEIGHT = 10.0
HIT_RTOL = 1e-6
DEGENERACY_RTOL = 1e-10


@dataclass(frozen=True)
class TrimConfig:
    """Trim settings. ``xi0`` and ``xi_floor`` default to 0.05*t_0 and 1e-7*t_0."""

    lambda_min_target: float
    K: int = 1
    xi0: float | None = None
    xi_shrink: float = 0.5
    xi_floor: float | None = None
    max_outer_iters: int = 200
    expansion_tol: float = 1e-2

    def __post_init__(self):
        if not self.lambda_min_target > 0:
            raise DomainError("lambda_min_target must be positive")
        if self.K < 1:
            raise DomainError("K must be >= 1")
        if not 0 < self.xi_shrink < 1:
            raise DomainError("xi_shrink must lie in (0, 1)")
        if self.max_outer_iters < 0 or not self.expansion_tol > 0:
            raise DomainError("max_outer_iters must be >= 0 and expansion_tol > 0")

    def resolved(self, t0: float) -> "TrimConfig":
        xi0 = 0.05 * t0 if self.xi0 is None else self.xi0
        floor = 1e-7 * t0 if self.xi_floor is None else self.xi_floor
        if not 0 < floor < xi0:
            raise DomainError("need 0 < xi_floor < xi0")
        return replace(self, xi0=xi0, xi_floor=floor)


@dataclass(frozen=True, eq=False)
class TrimReport:
    matrix: SymToeplitz
    iters: int
    final_min_eig: float
    expansion_failures: int
    fallback_used: bool
    coalescence: bool = False

    @property
    def success(self) -> bool:
        return not self.fallback_used and not self.coalescence


def lag_basis(n: int) -> np.ndarray:
    """Stack of A_k (k = 1..N-1): ones on the +-k diagonals."""
    A = np.zeros((n - 1, n, n))
    for k in range(1, n):
        A[k - 1] += np.eye(n, k=k) + np.eye(n, k=-k)
    return A


def _sens(U: np.ndarray) -> np.ndarray:
    n = U.shape[0]
    S = np.empty((U.shape[1], n - 1))
    for k in range(1, n):
        S[:, k - 1] = 2.0 * np.real(np.sum(np.conj(U[:-k]) * U[k:], axis=0))
    return S


def _eig_checked(lags: np.ndarray):
    from scipy.linalg import toeplitz

    w, U = np.linalg.eigh(toeplitz(lags))
    w, U = w[::-1], U[:, ::-1]
    scale = max(float(np.max(np.abs(w))), np.finfo(float).tiny)
    if np.min(w[:-1] - w[1:]) < DEGENERACY_RTOL * scale:
        raise DegeneracyError("eigenvalues too close for first-order sensitivities")
    return w, U


def sensitivity_matrix(T: SymToeplitz) -> np.ndarray:
    """First-order eigenvalue sensitivities s_jk = U_j^T A_k U_j (rows follow descending eigenvalues)."""
    _, U = _eig_checked(T.lags)
    return _sens(U)


def diagonal_load(T: SymToeplitz, target: float) -> SymToeplitz:
    """Raise t_0 so the minimum eigenvalue equals ``target`` (no-op if already above)."""
    lam_min = float(np.linalg.eigvalsh(T.dense())[0])
    if lam_min >= target:
        return T
    lags = T.lags.copy()
    lags[0] += target - lam_min
    return SymToeplitz(lags)


def _min_eig(lags: np.ndarray) -> float:
    from scipy.linalg import toeplitz

    return float(np.linalg.eigvalsh(toeplitz(lags))[0])


def _fidelity(lam_new: np.ndarray, lam_pred: np.ndarray, target: float) -> float:
    a = np.sort(lam_new)
    b = np.sort(lam_pred)
    return float(np.max(np.abs(a - b) / (np.abs(b) + target)))


def _single_lp(lam, S, target, xi, warm=None):
    """Lag step for the single-floor LP.

    Variables (p, q, w) with x = p - q, 0 <= p, q <= xi. The uniform lift is
    y = y0 - w, where y0 = max(target - min(lam), 0) makes x = 0 feasible, so the
    slack basis is a feasible start:

        min  -w + STEP_PENALTY * sum(p + q)
        s.t. -S_j (p - q) + w <= lam_j - target + y0,   0 <= w <= y0.

    The L1 term picks the smallest step, so lam_min is driven to the target and
    not past it.
    """
    n, m = S.shape
    y0 = max(target - float(np.min(lam)), 0.0)
    cost = np.concatenate([np.full(2 * m, STEP_PENALTY), [-1.0]])
    A = np.hstack([-S, S, np.ones((n, 1))])
    b = np.maximum(lam - target + y0, 0.0)
    lb = np.zeros(2 * m + 1)
    ub = np.concatenate([np.full(2 * m, xi), [y0]])
    sol = solve_lp(LpProblem(cost, A, b, lb=lb, ub=ub), warm)
    if not sol.ok:
        return None
    return sol.x[:m] - sol.x[m:2 * m], sol.basis


def _multi_lp(lam, S, target, xi, K, warm=None):
    """Variables (p, q, y, Z, mu_max, mu_min), x = p - q.

    Floor:  lam_j + S_j x + y >= target for every j.
    Gaps:   Z_i = pred(lam_{N-K+i+1}) - pred(lam_{N-K+i}) for consecutive noise
            eigenvalues, with -mu_min <= Z_i <= mu_max and mu_min, mu_max >= 0.
    Objective: SHORTFALL_WEIGHT*y + (mu_max + mu_min) + STEP_PENALTY*|x|_1.
    """
    n, m = S.shape
    nz = K - 1
    nv = 2 * m + 1 + nz + 2
    iy, iz, imax, imin = 2 * m, 2 * m + 1, 2 * m + 1 + nz, 2 * m + 2 + nz
    cost = np.zeros(nv)
    cost[:2 * m] = STEP_PENALTY
    cost[iy] = SHORTFALL_WEIGHT
    cost[imax] = cost[imin] = 1.0

    rows, rhs = [], []
    for j in range(n):
        r = np.zeros(nv)
        r[:m], r[m:2 * m], r[iy] = -S[j], S[j], -1.0
        rows.append(r)
        rhs.append(lam[j] - target)
    for i in range(nz):
        r1 = np.zeros(nv)
        r1[iz + i], r1[imax] = 1.0, -1.0
        r2 = np.zeros(nv)
        r2[iz + i], r2[imin] = -1.0, -1.0
        rows += [r1, r2]
        rhs += [0.0, 0.0]
    eq, beq = [], []
    base = n - K
    for i in range(nz):
        a, c = base + i, base + i + 1
        r = np.zeros(nv)
        r[:m], r[m:2 * m] = S[a] - S[c], -(S[a] - S[c])
        r[iz + i] = 1.0
        eq.append(r)
        beq.append(lam[c] - lam[a])
    lb = np.zeros(nv)
    ub = np.full(nv, np.inf)
    ub[:2 * m] = xi
    lb[iz:iz + nz] = -np.inf
    sol = solve_lp(LpProblem(cost, np.array(rows), np.array(rhs), np.array(eq), np.array(beq), lb, ub), warm)
    if not sol.ok:
        return None
    return sol.x[:m] - sol.x[m:2 * m], sol.basis


def _land_on_target(prev: np.ndarray, step: np.ndarray, target: float) -> np.ndarray:
    """Shorten ``step`` so the minimum eigenvalue lands exactly on ``target``."""
    g = lambda a: _min_eig(prev + a * step) - target  # noqa: E731
    if g(1.0) <= 0 or g(0.0) >= 0:
        return prev + step
    a = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return prev + a * step


def trim_single(T_in: SymToeplitz, cfg: TrimConfig) -> TrimReport:
    """Raise the minimum eigenvalue to ``cfg.lambda_min_target`` by small lag steps."""
    return _trim(T_in, replace(cfg, K=1))


def trim_multi(T_in: SymToeplitz, cfg: TrimConfig) -> TrimReport:
    """Trim with the ``cfg.K`` smallest eigenvalues driven to a common value above target."""
    if cfg.K >= T_in.n:
        raise DomainError(f"K must be <= N-1, got K={cfg.K}, N={T_in.n}")
    return _trim(T_in, cfg)


def trim(T_in: SymToeplitz, cfg: TrimConfig) -> TrimReport:
    return trim_single(T_in, cfg) if cfg.K == 1 else trim_multi(T_in, cfg)


def _done(lam: np.ndarray, cfg: TrimConfig) -> bool:
    target = cfg.lambda_min_target
    if lam[-1] < target * (1 - HIT_RTOL):
        return False
    if cfg.K == 1:
        return True
    tail = lam[-cfg.K:]
    return float(tail.max() - tail.min()) <= cfg.expansion_tol * float(np.mean(tail))


def _trim(T_in: SymToeplitz, cfg: TrimConfig) -> TrimReport:
    cfg = cfg.resolved(float(T_in.lags[0]))
    target = cfg.lambda_min_target
    lags = T_in.lags.copy()
    lam = np.linalg.eigvalsh(T_in.dense())[::-1]
    if _done(lam, cfg):
        return TrimReport(T_in, 0, float(lam[-1]), 0, False)

    xi = cfg.xi0
    failures = 0
    jittered = False
    warm = None
    iters = 0
    coalesced = False

    def fallback(cur):
        M = diagonal_load(SymToeplitz(cur), target)
        return TrimReport(M, iters, _min_eig(M.lags), failures, True, coalesced)

    while iters < cfg.max_outer_iters:
        if _done(np.linalg.eigvalsh(SymToeplitz(lags).dense())[::-1], cfg):
            break
        try:
            lam, U = _eig_checked(lags)
        except DegeneracyError:
            if jittered:
                if cfg.K > 1:
                    coalesced = True
                    break
                return fallback(lags)
            jittered = True
            jit = make_rng(0).standard_normal(lags.size - 1)
            lags = lags.copy()
            lags[1:] += 1e-10 * lags[0] * jit
            continue
        S = _sens(U)
        iters += 1
        accepted = False
        while xi >= cfg.xi_floor:
            lp = _single_lp if cfg.K == 1 else _multi_lp
            out = lp(lam, S, target, xi, warm) if cfg.K == 1 else lp(lam, S, target, xi, cfg.K, warm)
            if out is None:
                return fallback(lags)
            x, warm = out
            if np.max(np.abs(x)) <= 1e-15 * lags[0]:
                break
            cand = lags.copy()
            cand[1:] += x
            lam_new = np.linalg.eigvalsh(SymToeplitz(cand).dense())
            pred = lam + S @ x
            fid = _fidelity(lam_new, pred, target)
            if fid > cfg.expansion_tol or lam_new[0] < lam[-1]:
                failures += 1
                xi *= cfg.xi_shrink
                continue
            if cfg.K == 1 and lam_new[0] > target:
                step = np.zeros_like(lags)
                step[1:] = x
                cand = _land_on_target(lags, step, target)
            lags = cand
            accepted = True
            # The expansion error is second order in the step, so aim the next
            # box at half the tolerance, growing by at most 1/xi_shrink.
            grow = np.sqrt(0.5 * cfg.expansion_tol / max(fid, 1e-300))
            xi = min(cfg.xi0, xi * min(grow, 1.0 / cfg.xi_shrink))
            break
        if not accepted:
            if cfg.K > 1:
                coalesced = True
                break
            return fallback(lags)

    M = SymToeplitz(lags)
    lam = np.linalg.eigvalsh(M.dense())[::-1]
    if cfg.K > 1 and not _done(lam, cfg):
        coalesced = True
    if cfg.K == 1 and lam[-1] < target * (1 - HIT_RTOL):
        return fallback(lags)
    return TrimReport(M, iters, float(lam[-1]), failures, False, coalesced)
