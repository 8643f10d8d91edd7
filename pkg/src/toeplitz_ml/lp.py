"""Dense bounded-variable revised simplex.

Problems are given as::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                lb <= x <= ub          (entries may be infinite)

Internally every variable is mapped to [0, u] form (shifted, mirrored or split
when free), slacks are added for inequality rows, and a two-phase method with
artificial variables is run on an explicit basis inverse updated by eta
transforms and refactorized every 50 pivots.

Pricing is Dantzig's largest reduced cost with lowest-index tie-breaking; after
a run of degenerate pivots it switches to Bland's rule, which cannot cycle, until
the objective moves again. Both rules are deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError

__all__ = ["LpStatus", "LpProblem", "LpSolution", "solve_lp"]

MAX_PIVOTS = 10_000
REFACTOR_EVERY = 50
# Consecutive degenerate pivots after which pricing switches from Dantzig to Bland.
BLAND_AFTER = 10


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


def _mat(a, ncol):
    if a is None:
        return np.zeros((0, ncol))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.zeros((0, ncol))
    return a


def _vec(b, n):
    if b is None:
        return np.zeros(n)
    return np.asarray(b, dtype=float).ravel()


@dataclass(eq=False)
class LpProblem:
    cost: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float).ravel()
        n = self.cost.size
        self.A_ub = _mat(self.A_ub, n)
        self.A_eq = _mat(self.A_eq, n)
        self.b_ub = _vec(self.b_ub, self.A_ub.shape[0])
        self.b_eq = _vec(self.b_eq, self.A_eq.shape[0])
        self.lb = np.zeros(n) if self.lb is None else np.broadcast_to(np.asarray(self.lb, float), (n,)).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.broadcast_to(np.asarray(self.ub, float), (n,)).copy()
        if self.A_ub.shape[1] != n or self.A_eq.shape[1] != n:
            raise DomainError("constraint matrix column count must match cost length")
        if self.b_ub.size != self.A_ub.shape[0] or self.b_eq.size != self.A_eq.shape[0]:
            raise DomainError("right-hand side length mismatch")
        if np.any(self.lb > self.ub) or np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise DomainError("inconsistent variable bounds")
        for arr in (self.cost, self.A_ub, self.b_ub, self.A_eq, self.b_eq):
            if not np.all(np.isfinite(arr)):
                raise DomainError("problem data must be finite")

    @property
    def n(self) -> int:
        return self.cost.size


@dataclass(eq=False)
class LpSolution:
    x: np.ndarray
    objective: float
    status: LpStatus
    iterations: int = 0
    message: str = field(default="")
    # Final standard-form basis and at-upper flags, reusable as a warm start.
    basis: tuple | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Simplex:
    """Bounded simplex on  min c@z  s.t.  A@z = b,  0 <= z <= u  (b >= 0)."""

    def __init__(self, A, b, u, basis, at_upper=None):
        self.A = A
        self.b = b
        self.u = u
        self.m, self.n = A.shape
        self.basis = np.array(basis, dtype=int)
        self.at_upper = np.zeros(self.n, dtype=bool) if at_upper is None else at_upper.copy()
        self.pivots = 0
        self.since_refactor = 0
        self.refactor()

    def refactor(self):
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        self.since_refactor = 0

    def basic_values(self):
        rhs = self.b - self.A[:, self.at_upper] @ self.u[self.at_upper]
        return self.Binv @ rhs

    def run(self, c, allowed, dtol):
        """Iterate to optimality for cost ``c``; ``allowed`` masks candidate entering columns."""
        ptol = 1e-9
        degenerate_run = 0
        A, u, up = self.A, self.u, self.at_upper
        movable = allowed & (u > 0)
        xb = self.basic_values()
        nonbasic = np.ones(self.n, dtype=bool)
        nonbasic[self.basis] = False
        t = np.empty(self.m)
        while True:
            if self.pivots >= MAX_PIVOTS:
                return LpStatus.NUMERICAL_FAILURE
            d = c - (c[self.basis] @ self.Binv) @ A
            # Objective decrease per unit move of each eligible nonbasic column.
            gain = np.where(up, d, -d)
            gain[~(nonbasic & (up | movable))] = 0.0
            if degenerate_run >= BLAND_AFTER:
                idx = np.flatnonzero(gain > dtol)
                if idx.size == 0:
                    return LpStatus.OPTIMAL
                j = int(idx[0])  # Bland: lowest index
            else:
                j = int(np.argmax(gain))  # Dantzig, lowest index on ties
                if gain[j] <= dtol:
                    return LpStatus.OPTIMAL
            sigma = -1.0 if up[j] else 1.0
            w = self.Binv @ A[:, j]
            sw = sigma * w
            lim = ptol * max(1.0, float(np.abs(w).max()))
            t.fill(np.inf)
            np.divide(np.maximum(xb, 0.0), sw, out=t, where=sw > lim)
            np.divide(np.maximum(u[self.basis] - xb, 0.0), -sw, out=t, where=sw < -lim)
            theta = u[j]
            leave = -1
            tmin = t.min() if t.size else np.inf
            if tmin < theta:
                ties = np.flatnonzero(t == tmin)
                leave = int(ties[np.argmin(self.basis[ties])]) if ties.size > 1 else int(ties[0])
                theta = tmin
            if not np.isfinite(theta):
                return LpStatus.UNBOUNDED
            self.pivots += 1
            degenerate_run = degenerate_run + 1 if theta <= 0 else 0
            xb -= (sigma * theta) * w
            if leave < 0:
                up[j] = not up[j]
                continue
            out = self.basis[leave]
            up[out] = sw[leave] < 0
            up[j] = False
            nonbasic[out] = True
            nonbasic[j] = False
            self.basis[leave] = j
            self.since_refactor += 1
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
                xb = self.basic_values()
            else:
                row = self.Binv[leave] / w[leave]
                self.Binv -= np.outer(w, row)
                self.Binv[leave] = row
                xb[leave] = (u[j] if sigma < 0 else 0.0) + sigma * theta


def _warm_simplex(A, b, u, warm):
    """Simplex positioned at a previous basis if it is still primal feasible here."""
    basis, at_upper = warm
    m, n = A.shape
    if basis.shape != (m,) or at_upper.shape != (n,) or np.any(at_upper & ~np.isfinite(u)):
        return None
    try:
        sx = _Simplex(A, b, u, basis, at_upper)
    except np.linalg.LinAlgError:
        return None
    xb = sx.basic_values()
    tol = 1e-9 * max(1.0, float(np.max(np.abs(b))))
    if not np.all(np.isfinite(xb)) or np.any(xb < -tol) or np.any(xb > u[basis] + tol):
        return None
    return sx


def solve_lp(p: LpProblem, warm_start: tuple | None = None) -> LpSolution:
    """Solve ``p`` to optimality or report Infeasible / Unbounded / NumericalFailure.

    ``warm_start`` is the ``basis`` of an earlier solution of a problem with the
    same shape and bound pattern; it is used only when no artificial variables
    are needed and the basis is still primal feasible.
    """
    n = p.n
    lb, ub = p.lb, p.ub
    # Column map: x_j = off_j + sum_s coef * z_s over its std-form columns.
    cols = []  # (orig index, coefficient)
    ubs = []
    offset = np.zeros(n)
    for j in range(n):
        if np.isfinite(lb[j]):
            offset[j] = lb[j]
            cols.append((j, 1.0))
            ubs.append(ub[j] - lb[j])
        elif np.isfinite(ub[j]):
            offset[j] = ub[j]
            cols.append((j, -1.0))
            ubs.append(np.inf)
        else:
            cols.append((j, 1.0))
            ubs.append(np.inf)
            cols.append((j, -1.0))
            ubs.append(np.inf)
    nz = len(cols)
    M = np.zeros((n, nz))
    for s, (j, coef) in enumerate(cols):
        M[j, s] = coef

    m_ub, m_eq = p.A_ub.shape[0], p.A_eq.shape[0]
    m = m_ub + m_eq
    A = np.zeros((m, nz + m_ub))
    A[:m_ub, :nz] = p.A_ub @ M
    A[m_ub:, :nz] = p.A_eq @ M
    A[:m_ub, nz:] = np.eye(m_ub)
    b = np.concatenate([p.b_ub - p.A_ub @ offset, p.b_eq - p.A_eq @ offset])
    c = np.concatenate([p.cost @ M, np.zeros(m_ub)])
    u = np.concatenate([np.array(ubs, dtype=float), np.full(m_ub, np.inf)])

    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # Initial basis: slack where it enters with +1, artificial elsewhere.
    art_rows = [i for i in range(m) if i >= m_ub or neg[i]]
    n_real = A.shape[1]
    n_art = len(art_rows)
    A_full = np.hstack([A, np.zeros((m, n_art))])
    basis_by_row = np.array([nz + i if i < m_ub else -1 for i in range(m)], dtype=int)
    for k, i in enumerate(art_rows):
        A_full[i, n_real + k] = 1.0
        basis_by_row[i] = n_real + k
    u_full = np.concatenate([u, np.full(n_art, np.inf)])

    if m == 0:
        return _solve_unconstrained(p)

    sx = None
    if warm_start is not None and n_art == 0:
        sx = _warm_simplex(A_full, b, u_full, warm_start)
    if sx is None:
        sx = _Simplex(A_full, b, u_full, basis_by_row)
    allowed = np.ones(n_real + n_art, dtype=bool)
    if n_art:
        c1 = np.concatenate([np.zeros(n_real), np.ones(n_art)])
        st = sx.run(c1, allowed, 1e-11)
        if st is LpStatus.NUMERICAL_FAILURE:
            return _fail(n, sx.pivots, "pivot cap reached in phase I")
        sx.refactor()
        infeas = float(np.sum(sx.basic_values()[sx.basis >= n_real]))
        if infeas > 1e-9 * max(1.0, float(np.max(np.abs(b)))):
            return LpSolution(np.full(n, np.nan), np.nan, LpStatus.INFEASIBLE, sx.pivots,
                              f"phase I residual {infeas:.3g}")
        # Artificials stay pinned at zero for phase II.
        sx.u[n_real:] = 0.0
        sx.at_upper[n_real:] = False
        allowed[n_real:] = False

    c2 = np.concatenate([c, np.zeros(n_art)])
    cscale = float(np.max(np.abs(c2))) if c2.size else 0.0
    dtol = 1e-10 * cscale if cscale > 0 else 1e-12
    st = sx.run(c2, allowed, dtol)
    if st is LpStatus.NUMERICAL_FAILURE:
        return _fail(n, sx.pivots, "pivot cap reached in phase II")
    if st is LpStatus.UNBOUNDED:
        return LpSolution(np.full(n, np.nan), -np.inf, LpStatus.UNBOUNDED, sx.pivots)

    sx.refactor()
    z = np.where(sx.at_upper, sx.u, 0.0)
    z[sx.basis] = np.clip(sx.basic_values(), 0.0, sx.u[sx.basis])
    x = offset + M @ z[:nz]
    x = np.clip(x, lb, ub)
    return LpSolution(x, float(p.cost @ x), LpStatus.OPTIMAL, sx.pivots,
                      basis=(sx.basis.copy(), sx.at_upper.copy()))


def _fail(n, pivots, msg):
    return LpSolution(np.full(n, np.nan), np.nan, LpStatus.NUMERICAL_FAILURE, pivots, msg)


def _solve_unconstrained(p: LpProblem) -> LpSolution:
    x = np.where(p.cost > 0, p.lb, np.where(p.cost < 0, p.ub, np.where(np.isfinite(p.lb), p.lb, np.where(np.isfinite(p.ub), p.ub, 0.0))))
    if not np.all(np.isfinite(x)):
        return LpSolution(np.full(p.n, np.nan), -np.inf, LpStatus.UNBOUNDED, 0)
    return LpSolution(x, float(p.cost @ x), LpStatus.OPTIMAL, 0)
