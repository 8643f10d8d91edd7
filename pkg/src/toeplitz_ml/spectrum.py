"""Phase-invariant inputs to reconstruction.

Lag moduli by redundancy averaging, noise-subspace order by MDL/AIC, and a
random-matrix-theory (Mestre type) correction of the sample eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .matrix import to_dense

__all__ = [
    "ModuliVector",
    "OrderSelection",
    "CorrectedSpectrum",
    "redundancy_moduli",
    "select_order",
    "rmt_correct",
    "rmt_roots",
]


@dataclass(frozen=True, eq=False)
class ModuliVector:
    """Estimated |t_0|..|t_{N-1}|."""

    moduli: np.ndarray

    def __post_init__(self):
        m = np.array(self.moduli, dtype=float).ravel()
        if m.size < 2 or np.any(m < 0) or not m[0] > 0 or not np.all(np.isfinite(m)):
            raise DomainError("moduli must be finite, non-negative, with moduli[0] > 0")
        m.setflags(write=False)
        object.__setattr__(self, "moduli", m)

    @property
    def n(self) -> int:
        return self.moduli.size


@dataclass(frozen=True, eq=False)
class OrderSelection:
    k_noise: int
    criterion_curve: np.ndarray
    method: str


@dataclass(frozen=True, eq=False)
class CorrectedSpectrum:
    """Corrected eigenvalues (descending); the last ``k_noise`` equal ``noise_value``."""

    values: np.ndarray
    noise_value: float
    clusters: tuple[tuple[int, int], ...]

    @property
    def k_noise(self) -> int:
        return self.clusters[-1][1]


def redundancy_moduli(Rhat) -> ModuliVector:
    """Average |R(k, k+n)| along each superdiagonal n."""
    R = to_dense(Rhat)
    n = R.shape[0]
    mods = np.array([np.mean(np.abs(np.diagonal(R, offset=k))) for k in range(n)])
    return ModuliVector(mods)


def select_order(eigs, T: int, method: str = "MDL") -> OrderSelection:
    """Noise-subspace multiplicity by MDL or AIC.

    For k = 0..N-1 the objective is
    ``-(N-k) T log(geo/arith of the N-k smallest eigenvalues) + penalty(k)`` with
    penalty ``k(2N-k) log(T) / 2`` (MDL) or ``2 k (2N-k)`` (AIC). The first minimum
    wins, so ties favour the larger noise multiplicity.
    """
    lam = np.sort(np.asarray(eigs, dtype=float))[::-1]
    method = method.upper()
    if method not in ("MDL", "AIC"):
        raise DomainError(f"unknown order-selection method {method!r}")
    if np.any(lam <= 0):
        raise DomainError("eigenvalues must be positive")
    n = lam.size
    if T < 1:
        raise DomainError("T must be >= 1")
    curve = np.empty(n)
    for k in range(n):
        tail = lam[k:]
        log_ratio = np.mean(np.log(tail)) - np.log(np.mean(tail))
        pen = k * (2 * n - k)
        pen = 0.5 * pen * np.log(T) if method == "MDL" else 2.0 * pen
        curve[k] = -(n - k) * T * log_ratio + pen
    k_best = int(np.argmin(curve))
    return OrderSelection(n - k_best, curve, method)


def rmt_roots(eigs, T: int) -> np.ndarray:
    """Real roots of sum_n lam_n / (lam_n - mu) = T, returned aligned with ``eigs``.

    ``eigs`` must be descending with distinct entries. The root paired with lam_j
    lies in (lam_{j+1}, lam_j); the one paired with the smallest lies in (0, lam_N),
    since the left side equals N < T at mu = 0 and diverges upward at each pole.
    """
    lam = np.asarray(eigs, dtype=float)
    hi = lam.copy()
    lo = np.concatenate([lam[1:], [0.0]])

    def f(mu):
        return np.sum(lam[None, :] / (lam[None, :] - mu[:, None]), axis=1) - T

    # Bisection; f increases on each bracket from -inf (or N - T) to +inf.
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        up = val > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(np.abs(hi), 1e-300)):
            break
    mu = 0.5 * (lo + hi)
    if not np.all((mu > np.concatenate([lam[1:], [0.0]])) & (mu < lam)):
        raise NumericalError(f"root bracketing failed for eigenvalues {lam}")
    return mu


def rmt_correct(eigs, T: int, k_noise: int) -> CorrectedSpectrum:
    """Consistent re-estimation of the spectrum with the noise cluster merged.

    Each signal eigenvalue is its own cluster; the ``k_noise`` smallest form one
    cluster. Corrected value of a cluster = (T/K) * sum over it of (lam - mu).
    """
    lam = np.sort(np.asarray(eigs, dtype=float))[::-1]
    n = lam.size
    if not 1 <= k_noise <= n:
        raise DomainError(f"k_noise must lie in [1, {n}], got {k_noise}")
    if T <= n:
        raise DomainError(f"need T > N, got T={T}, N={n}")
    if np.any(lam <= 0):
        raise DomainError("eigenvalues must be positive")
    n_sig = n - k_noise
    clusters = tuple([(j, 1) for j in range(n_sig)] + [(n_sig, k_noise)])
    if lam[0] - lam[-1] < 1e-12 * lam[0]:
        vals = lam.copy()
        noise = float(np.mean(lam[n_sig:]))
        vals[n_sig:] = noise
        return CorrectedSpectrum(vals, noise, clusters)

    # Exactly repeated sample eigenvalues collapse a bracket; nudge them apart.
    work = lam.copy()
    for j in range(n - 2, -1, -1):
        if work[j] <= work[j + 1]:
            work[j] = np.nextafter(work[j + 1], np.inf) * (1 + 1e-15)
    mu = rmt_roots(work, T)
    gap = T * (work - mu)
    vals = np.empty(n)
    vals[:n_sig] = gap[:n_sig]
    noise = float(np.mean(gap[n_sig:]))
    vals[n_sig:] = noise

    # Keep the output descending: lift any value below its successor.
    vals = np.maximum.accumulate(vals[::-1])[::-1]
    # Never widen the dynamic range beyond the sample spectrum's.
    vals = np.minimum(vals, noise * lam[0] / lam[-1])
    return CorrectedSpectrum(vals, noise, clusters)
