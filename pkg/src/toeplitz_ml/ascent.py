"""LP equalization of the whitened spectrum R^{-1/2} T R^{-1/2}.

Flattening the eigenvalues of the whitened matrix raises the sphericity ratio
(geometric over arithmetic mean). Each step linearizes those eigenvalues in the
lags 1..N-1 and minimizes their predicted spread inside a box |a_k| <= xi.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .lp import LpProblem, solve_lp
from .matrix import SymToeplitz, hermitize, log_likelihood_ratio, to_dense
from .trim import _sens

__all__ = [
    "EqualizeStep",
    "whitener",
    "whitened_sensitivity",
    "equalize_step",
    "equalize_step_info",
    "equalize",
]

FIDELITY_TOL = 1e-2
XI_FLOOR_RATIO = 1e-6


@dataclass(frozen=True, eq=False)
class EqualizeStep:
    matrix: SymToeplitz
    stalled: bool
    spread_before: float
    spread_after: float
    xi_used: float


@lru_cache(maxsize=8)
def _whitener_cached(key: bytes, shape: tuple, dtype: str) -> np.ndarray:
    R = np.frombuffer(key, dtype=dtype).reshape(shape)
    w, V = np.linalg.eigh(hermitize(R))
    if w[0] <= 0:
        raise DomainError("Rhat must be positive definite")
    W = (V / np.sqrt(w)) @ V.conj().T
    W.setflags(write=False)
    return W


def whitener(Rhat) -> np.ndarray:
    """R^{-1/2} by eigendecomposition, cached per matrix."""
    R = np.ascontiguousarray(to_dense(Rhat))
    return _whitener_cached(R.tobytes(), R.shape, R.dtype.str)


def _whitened_eig(T: SymToeplitz, W: np.ndarray):
    D = hermitize(W @ T.dense() @ W)
    lam, U = np.linalg.eigh(D)
    return lam[::-1], U[:, ::-1]


def whitened_sensitivity(T: SymToeplitz, Rhat) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of D = R^{-1/2} T R^{-1/2} (descending) and B_jk = U_j^H (W A_k W) U_j."""
    W = whitener(Rhat)
    lam, U = _whitened_eig(T, W)
    return lam, _sens(W @ U)


def _spread_lp(lam: np.ndarray, B: np.ndarray, xi: float):
    """min (X_max - X_min) over |a| <= xi with X_min <= lam_j + B_j a <= X_max, X_min >= 0.

    Written with X_max = lam_max + alpha and X_min = lam_min - beta so that a = 0
    sits on a feasible slack basis. Variables (p, q, alpha, beta), a = p - q.
    """
    n, m = B.shape
    lmax, lmin = float(lam[0]), float(lam[-1])
    cost = np.concatenate([np.zeros(2 * m), [1.0, 1.0]])
    top = np.hstack([B, -B, -np.ones((n, 1)), np.zeros((n, 1))])
    bot = np.hstack([-B, B, np.zeros((n, 1)), -np.ones((n, 1))])
    A = np.vstack([top, bot])
    b = np.concatenate([lmax - lam, lam - lmin])
    lb = np.concatenate([np.zeros(2 * m), [-np.inf, -np.inf]])
    ub = np.concatenate([np.full(2 * m, xi), [np.inf, lmin]])
    sol = solve_lp(LpProblem(cost, A, b, lb=lb, ub=ub))
    if not sol.ok:
        return None
    return sol.x[:m] - sol.x[m:2 * m]


def equalize_step_info(T_n: SymToeplitz, Rhat, xi: float) -> EqualizeStep:
    """One validated LP step; the box is halved until the linear prediction holds."""
    W = whitener(Rhat)
    lam, U = _whitened_eig(T_n, W)
    if lam[-1] <= 0:
        raise DomainError("T_n must be positive definite")
    B = _sens(W @ U)
    spread0 = float(lam[0] - lam[-1])
    floor = XI_FLOOR_RATIO * xi
    while xi >= floor:
        a = _spread_lp(lam, B, xi)
        if a is None or np.max(np.abs(a)) == 0.0:
            break
        lags = T_n.lags.copy()
        lags[1:] += a
        cand = SymToeplitz(lags)
        if np.linalg.eigvalsh(cand.dense())[0] > 0:
            new = _whitened_eig(cand, W)[0]
            pred = np.sort(lam + B @ a)[::-1]
            fid = np.max(np.abs(new - pred) / np.abs(pred))
            spread1 = float(new[0] - new[-1])
            if fid <= FIDELITY_TOL and spread1 <= spread0:
                return EqualizeStep(cand, False, spread0, spread1, xi)
        xi *= 0.5
    return EqualizeStep(T_n, True, spread0, spread0, xi)


def equalize_step(T_n: SymToeplitz, Rhat, xi: float) -> SymToeplitz:
    return equalize_step_info(T_n, Rhat, xi).matrix


def equalize(T0: SymToeplitz, Rhat, max_steps: int = 50, stall_limit: int = 5,
             xi: float | None = None) -> SymToeplitz:
    """Repeat equalization steps and return the best-LR iterate (never worse than T0)."""
    if max_steps <= 0:
        return T0
    step_xi = 0.02 * float(T0.lags[0]) if xi is None else float(xi)
    best, best_llr = T0, log_likelihood_ratio(Rhat, T0)
    cur = T0
    stalls = 0
    for _ in range(max_steps):
        st = equalize_step_info(cur, Rhat, step_xi)
        if st.stalled:
            break
        cur = st.matrix
        llr = log_likelihood_ratio(Rhat, cur)
        if llr > best_llr:
            best, best_llr = cur, llr
            stalls = 0
        else:
            stalls += 1
            if stalls >= stall_limit:
                break
    return best
