"""Constrained maximization of the sphericity likelihood ratio over Toeplitz matrices.

The objective is J = log LR(R, T) with t_0 fixed at 1 (LR is scale invariant).
Coordinates are the lags 1..N-1 for the symmetric class, or interleaved
(real, imaginary) pairs of those lags for the Hermitian class. A damped Newton
ascent with an exact Hessian runs on J + mu * log det(T - floor*I) for a
decreasing sequence of barrier weights, finishing with mu = 0. Every trial
point must pass a Cholesky test of T - floor*I.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg as sla

from .errors import DomainError
from .matrix import HermToeplitz, SymToeplitz, hermitize, to_dense

__all__ = [
    "OptimizerConfig",
    "OptimizeStatus",
    "OptimizeOutcome",
    "GlobalCheck",
    "basis_matrices",
    "log_lr_parts",
    "lr_gradient",
    "lr_hessian",
    "maximize_lr",
    "global_check",
    "is_global",
]

ARMIJO_C = 1e-4
MAX_HALVINGS = 40
CURVATURE_FLOOR = 1e-8


class OptimizeStatus(str, Enum):
    CONVERGED = "Converged"
    NON_PD_EXIT = "NonPositiveDefiniteExit"
    ITER_LIMIT = "IterLimit"


@dataclass(frozen=True)
class OptimizerConfig:
    """Optimizer settings; ``min_eig_floor`` is relative to t_0."""

    min_eig_floor: float = 1e-6
    barrier_weight0: float = 1e-4
    barrier_decay: float = 0.1
    barrier_rounds: int = 4
    grad_tol: float = 1e-8
    lr_tol: float = 1e-9
    max_iters: int = 500
    normalize_t0: bool = True

    def __post_init__(self):
        if not self.min_eig_floor > 0 or self.barrier_weight0 < 0:
            raise DomainError("min_eig_floor must be positive and barrier_weight0 non-negative")
        if not 0 < self.barrier_decay < 1:
            raise DomainError("barrier_decay must lie in (0, 1)")
        if self.max_iters < 1 or not self.grad_tol > 0 or not self.lr_tol > 0:
            raise DomainError("max_iters >= 1 and positive tolerances required")


@dataclass(frozen=True, eq=False)
class OptimizeOutcome:
    matrix: SymToeplitz | HermToeplitz
    lr: float
    iters: int
    status: OptimizeStatus
    trace: tuple = field(default=())
    sigma2: float = 1.0

    @property
    def converged(self) -> bool:
        return self.status is OptimizeStatus.CONVERGED

    def scaled_matrix(self):
        """Matrix rescaled by the ML power estimate so its trace matches R's."""
        return self.matrix.scaled(self.sigma2)


@dataclass(frozen=True, eq=False)
class GlobalCheck:
    passed: bool
    lr_exceeds_true: bool
    reoptimized_match: bool
    lr_true: float
    lr_reoptimized: float
    lag_rel_diff: float
    lr_rel_diff: float
    message: str = ""

    def __bool__(self):
        return self.passed


def basis_matrices(n: int, hermitian: bool) -> np.ndarray:
    """Derivatives of T with respect to each coordinate (t_0 excluded)."""
    m = n - 1
    if not hermitian:
        B = np.zeros((m, n, n))
        for k in range(1, n):
            B[k - 1] = np.eye(n, k=k) + np.eye(n, k=-k)
        return B
    B = np.zeros((2 * m, n, n), dtype=complex)
    for k in range(1, n):
        E = np.eye(n, k=k)
        B[2 * (k - 1)] = E + E.T
        B[2 * (k - 1) + 1] = 1j * (E - E.T)
    return B


def _coords(T) -> tuple[np.ndarray, bool]:
    if isinstance(T, HermToeplitz):
        z = T.lags / T.lag0
        return np.column_stack([z.real, z.imag]).ravel(), True
    if isinstance(T, SymToeplitz):
        return T.lags[1:] / T.lags[0], False
    raise DomainError("T must be a SymToeplitz or HermToeplitz")


def _from_coords(theta: np.ndarray, hermitian: bool):
    if hermitian:
        return HermToeplitz(1.0, theta[0::2] + 1j * theta[1::2])
    return SymToeplitz(np.concatenate([[1.0], theta]))


def _dense(theta: np.ndarray, hermitian: bool) -> np.ndarray:
    if hermitian:
        row = np.concatenate([[1.0], theta[0::2] + 1j * theta[1::2]])
        return sla.toeplitz(np.conj(row), row)
    return sla.toeplitz(np.concatenate([[1.0], theta]))


def _diag_sums(M: np.ndarray, hermitian: bool) -> np.ndarray:
    """tr(M B_k) for the coordinate basis, M Hermitian."""
    n = M.shape[0]
    s = np.array([np.sum(np.diagonal(M, offset=k)) for k in range(1, n)])
    if not hermitian:
        return 2.0 * s.real
    out = np.empty(2 * (n - 1))
    out[0::2] = 2.0 * s.real
    out[1::2] = 2.0 * s.imag
    return out


def log_lr_parts(T, Rhat):
    """log LR with the pieces reused by the gradient: (J, P = T^-1, Q = T^-1 R T^-1, g = tr(T^-1 R))."""
    A = to_dense(T)
    R = hermitize(to_dense(Rhat))
    n = A.shape[0]
    try:
        ct = sla.cho_factor(hermitize(A), lower=True)
        cr = sla.cho_factor(R, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DomainError("matrix is not positive definite") from exc
    P = sla.cho_solve(ct, np.eye(n))
    PR = sla.cho_solve(ct, R)
    g = float(np.real(np.trace(PR)))
    Q = hermitize(PR @ P)
    P = hermitize(P)
    logdet = lambda c: 2.0 * np.sum(np.log(np.abs(np.diag(c[0]))))  # noqa: E731
    J = logdet(cr) - logdet(ct) - n * np.log(g / n)
    return float(J), P, Q, g


def lr_gradient(T, Rhat) -> np.ndarray:
    """Gradient of log LR in the lags 1..N-1 (t_0 fixed), or their (re, im) pairs for Hermitian T.

    dJ/dt_k = -tr(T^-1 B_k) + N tr(T^-1 R T^-1 B_k) / tr(T^-1 R).
    """
    hermitian = isinstance(T, HermToeplitz)
    _, P, Q, g = log_lr_parts(T, Rhat)
    n = P.shape[0]
    return -_diag_sums(P, hermitian) + n * _diag_sums(Q, hermitian) / g


def lr_hessian(T, Rhat) -> np.ndarray:
    hermitian = isinstance(T, HermToeplitz)
    _, P, Q, g = log_lr_parts(T, Rhat)
    B = basis_matrices(P.shape[0], hermitian)
    return _hessian(P, Q, g, B, hermitian)


def _hessian(P, Q, g, B, hermitian):
    n = P.shape[0]
    PB = np.einsum("ij,kjl->kil", P, B)
    QB = np.einsum("ij,kjl->kil", Q, B)
    h = _diag_sums(Q, hermitian)
    H1 = np.einsum("kij,lji->kl", PB, PB).real
    H2 = np.einsum("kij,lji->kl", QB, PB).real
    return H1 - n * (H2 + H2.T) / g + n * np.outer(h, h) / g ** 2


class _Objective:
    """Composite J + mu * log det(T - floor*I) with gradient and Hessian."""

    def __init__(self, Rhat, n, hermitian, floor):
        self.R = hermitize(to_dense(Rhat))
        self.n = n
        self.hermitian = hermitian
        self.floor = floor
        self.B = basis_matrices(n, hermitian)
        cr = sla.cho_factor(self.R, lower=True)
        self.logdet_R = 2.0 * np.sum(np.log(np.abs(np.diag(cr[0]))))

    def value(self, theta, mu):
        """(F, J) or None when T - floor*I is not positive definite."""
        A = _dense(theta, self.hermitian)
        try:
            cf = sla.cho_factor(A - self.floor * np.eye(self.n), lower=True)
            ct = sla.cho_factor(A, lower=True)
        except np.linalg.LinAlgError:
            return None
        g = float(np.real(np.trace(sla.cho_solve(ct, self.R))))
        J = self.logdet_R - 2.0 * np.sum(np.log(np.abs(np.diag(ct[0])))) - self.n * np.log(g / self.n)
        bar = 2.0 * np.sum(np.log(np.abs(np.diag(cf[0])))) if mu > 0 else 0.0
        return J + mu * bar, J

    def derivs(self, theta, mu):
        A = _dense(theta, self.hermitian)
        ct = sla.cho_factor(A, lower=True)
        P = hermitize(sla.cho_solve(ct, np.eye(self.n)))
        PR = sla.cho_solve(ct, self.R)
        g = float(np.real(np.trace(PR)))
        Q = hermitize(PR @ P)
        grad = -_diag_sums(P, self.hermitian) + self.n * _diag_sums(Q, self.hermitian) / g
        H = _hessian(P, Q, g, self.B, self.hermitian)
        if mu > 0:
            Z = hermitize(np.linalg.inv(A - self.floor * np.eye(self.n)))
            grad = grad + mu * _diag_sums(Z, self.hermitian)
            ZB = np.einsum("ij,kjl->kil", Z, self.B)
            H = H - mu * np.einsum("kij,lji->kl", ZB, ZB).real
        return grad, 0.5 * (H + H.T)


def _ascent_direction(grad, H):
    """Newton direction with the Hessian forced negative definite."""
    w, V = np.linalg.eigh(H)
    scale = max(1.0, float(np.max(np.abs(w))))
    w = -np.maximum(np.abs(w), CURVATURE_FLOOR * scale)
    return -V @ ((V.T @ grad) / w)


def maximize_lr(Rhat, T0, cfg: OptimizerConfig | None = None) -> OptimizeOutcome:
    """Maximize LR(Rhat, T) over the class of ``T0`` (symmetric or Hermitian), starting at ``T0``."""
    cfg = OptimizerConfig() if cfg is None else cfg
    theta, hermitian = _coords(T0)
    n = T0.n
    A0 = to_dense(T0)
    if np.linalg.eigvalsh(hermitize(A0))[0] <= 0:
        raise DomainError("initial matrix must be positive definite")
    obj = _Objective(Rhat, n, hermitian, cfg.min_eig_floor)
    trace = []
    cur = obj.value(theta, 0.0)
    if cur is None:
        M = _from_coords(theta, hermitian)
        return _outcome(M, obj, 0, OptimizeStatus.NON_PD_EXIT, trace, cfg)
    trace.append((0, float(np.exp(min(cur[1], 0.0))), _min_eig(theta, hermitian)))

    mus = [cfg.barrier_weight0 * cfg.barrier_decay ** r for r in range(cfg.barrier_rounds)]
    mus = [m for m in mus if m > 0] + [0.0]
    iters = 0
    status = OptimizeStatus.CONVERGED
    for ri, mu in enumerate(mus):
        final = ri == len(mus) - 1
        F, J = obj.value(theta, mu)
        small_change = 0
        while True:
            if iters >= cfg.max_iters:
                status = OptimizeStatus.ITER_LIMIT
                break
            grad, H = obj.derivs(theta, mu)
            if np.linalg.norm(grad) < cfg.grad_tol:
                break
            d = _ascent_direction(grad, H)
            slope = float(grad @ d)
            alpha = 1.0
            accepted = None
            any_pd = False
            for _ in range(MAX_HALVINGS):
                trial = obj.value(theta + alpha * d, mu)
                if trial is not None:
                    any_pd = True
                    if trial[0] >= F + ARMIJO_C * alpha * slope:
                        accepted = trial
                        break
                alpha *= 0.5
            if accepted is None:
                if not any_pd:
                    status = OptimizeStatus.NON_PD_EXIT
                # Otherwise no further ascent is numerically resolvable.
                break
            iters += 1
            theta = theta + alpha * d
            F_new, J_new = accepted
            rel = abs(J_new - J)
            F, J = F_new, J_new
            trace.append((iters, float(np.exp(min(J, 0.0))), _min_eig(theta, hermitian)))
            small_change = small_change + 1 if rel < cfg.lr_tol else 0
            if small_change >= 3:
                break
        if status is not OptimizeStatus.CONVERGED:
            break
        if not final and status is OptimizeStatus.CONVERGED:
            continue
    M = _from_coords(theta, hermitian)
    return _outcome(M, obj, iters, status, trace, cfg)


def _min_eig(theta, hermitian) -> float:
    return float(np.linalg.eigvalsh(_dense(theta, hermitian))[0])


def _outcome(M, obj, iters, status, trace, cfg) -> OptimizeOutcome:
    from .matrix import likelihood_ratio, sigma2_ml

    lr = likelihood_ratio(obj.R, M)
    s2 = sigma2_ml(obj.R, M)
    if not cfg.normalize_t0:
        return OptimizeOutcome(M.scaled(s2), lr, iters, status, tuple(trace), 1.0)
    return OptimizeOutcome(M, lr, iters, status, tuple(trace), s2)


def _lags_vector(M) -> np.ndarray:
    if isinstance(M, HermToeplitz):
        return np.concatenate([[M.lag0], M.lags]) / M.lag0
    return M.lags / M.lags[0]


def global_check(candidate: OptimizeOutcome, Rhat, T_true: SymToeplitz,
                 cfg: OptimizerConfig | None = None) -> GlobalCheck:
    """Two-part test: LR at least the true matrix's, and re-optimizing from the true matrix lands on the candidate."""
    from .matrix import likelihood_ratio

    cfg = OptimizerConfig() if cfg is None else cfg
    lr_true = likelihood_ratio(Rhat, T_true)
    cond1 = candidate.lr >= lr_true
    start = HermToeplitz.from_symmetric(T_true) if isinstance(candidate.matrix, HermToeplitz) else T_true
    try:
        ref = maximize_lr(Rhat, start, cfg)
    except DomainError as exc:
        return GlobalCheck(False, cond1, False, lr_true, np.nan, np.inf, np.inf, f"re-optimization failed: {exc}")
    if not ref.converged:
        return GlobalCheck(False, cond1, False, lr_true, ref.lr, np.inf, np.inf,
                           f"re-optimization ended with {ref.status.value}")
    a, b = _lags_vector(candidate.matrix), _lags_vector(ref.matrix)
    lag_diff = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
    lr_diff = float(abs(candidate.lr - ref.lr) / ref.lr)
    cond2 = lag_diff <= 1e-4 and lr_diff <= 1e-6
    return GlobalCheck(cond1 and cond2, cond1, cond2, lr_true, ref.lr, lag_diff, lr_diff)


def is_global(candidate: OptimizeOutcome, Rhat, T_true: SymToeplitz, cfg: OptimizerConfig | None = None) -> bool:
    return global_check(candidate, Rhat, T_true, cfg).passed
