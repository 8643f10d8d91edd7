"""Core matrix types and functionals.

Toeplitz containers, the sinc covariance model, phase progression / calibration
errors, complex Gaussian snapshot generation, eigendecomposition and the
sphericity likelihood ratio.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg as sla

from .errors import DomainError, NumericalError

__all__ = [
    "SymToeplitz",
    "HermToeplitz",
    "EigenSystem",
    "PhaseVector",
    "SnapshotSet",
    "build_sinc_model",
    "to_dense",
    "hermitize",
    "eigh",
    "apply_phase",
    "generate_snapshots",
    "sample_covariance",
    "log_likelihood_ratio",
    "likelihood_ratio",
    "likelihood_ratio_eig",
    "sigma2_ml",
    "make_rng",
]


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used everywhere a seed is recorded."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True, eq=False)
class SymToeplitz:
    """Real symmetric Toeplitz matrix stored as its first-row lags t_0..t_{N-1}.

    ``W2`` and ``sigma2`` are kept when the matrix was built from the sinc model.
    """

    lags: np.ndarray
    W2: float | None = None
    sigma2: float | None = None

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=float).ravel()
        if lags.size < 2:
            raise DomainError(f"need N >= 2 lags, got {lags.size}")
        if not np.all(np.isfinite(lags)):
            raise DomainError("lags must be finite")
        if not lags[0] > 0:
            raise DomainError(f"t_0 must be positive, got {lags[0]!r}")
        object.__setattr__(self, "lags", _frozen(lags, float))

    @property
    def n(self) -> int:
        return self.lags.size

    def dense(self) -> np.ndarray:
        return sla.toeplitz(self.lags)

    def normalized(self) -> "SymToeplitz":
        return SymToeplitz(self.lags / self.lags[0])

    def scaled(self, c: float) -> "SymToeplitz":
        return SymToeplitz(self.lags * float(c))

    def __repr__(self):
        return f"SymToeplitz(N={self.n}, lags={np.array2string(self.lags, precision=4)})"


@dataclass(frozen=True, eq=False)
class HermToeplitz:
    """Hermitian Toeplitz matrix: real ``lag0`` and complex upper-diagonal lags.

    entry(i, j) = lags[j - i - 1] for j > i, and its conjugate below the diagonal.
    """

    lag0: float
    lags: np.ndarray

    def __post_init__(self):
        lag0 = float(self.lag0)
        lags = np.asarray(self.lags, dtype=complex).ravel()
        if lags.size < 1:
            raise DomainError("need N >= 2")
        if not lag0 > 0 or not np.all(np.isfinite(lags)):
            raise DomainError("lag0 must be positive and lags finite")
        object.__setattr__(self, "lag0", lag0)
        object.__setattr__(self, "lags", _frozen(lags, complex))

    @classmethod
    def from_symmetric(cls, T: SymToeplitz) -> "HermToeplitz":
        return cls(T.lags[0], T.lags[1:].astype(complex))

    @property
    def n(self) -> int:
        return self.lags.size + 1

    def dense(self) -> np.ndarray:
        row = np.concatenate([[self.lag0], self.lags])
        return sla.toeplitz(np.conj(row), row)

    def normalized(self) -> "HermToeplitz":
        return HermToeplitz(1.0, self.lags / self.lag0)

    def scaled(self, c: float) -> "HermToeplitz":
        return HermToeplitz(self.lag0 * float(c), self.lags * float(c))

    def __repr__(self):
        return f"HermToeplitz(N={self.n}, lag0={self.lag0:.4g})"


Toeplitz = Union[SymToeplitz, HermToeplitz]


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues in descending order with matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True, eq=False)
class PhaseVector:
    """Per-element phases in radians, wrapped to (-pi, pi], first element 0."""

    angles: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float).ravel()
        a = np.pi - np.mod(np.pi - a, 2 * np.pi)
        if a.size < 1 or abs(a[0]) > 1e-12:
            raise DomainError("angles[0] must be 0 (reference element)")
        a[0] = 0.0
        object.__setattr__(self, "angles", _frozen(a, float))

    @property
    def n(self) -> int:
        return self.angles.size

    @classmethod
    def zeros(cls, n: int) -> "PhaseVector":
        return cls(np.zeros(n))

    @classmethod
    def steering(cls, n: int, theta: float, d_over_lambda: float = 0.5) -> "PhaseVector":
        """Beam-steering progression n * 2*pi*d/lambda*sin(theta)."""
        return cls(np.arange(n) * 2 * np.pi * d_over_lambda * np.sin(theta))

    @classmethod
    def calibration(cls, n: int, phi_max: float, rng: np.random.Generator) -> "PhaseVector":
        """Independent uniform errors in (-phi_max, phi_max) on elements 1..N-1."""
        a = np.zeros(n)
        a[1:] = rng.uniform(-phi_max, phi_max, size=n - 1)
        return cls(a)

    def compose(self, other: "PhaseVector") -> "PhaseVector":
        return PhaseVector(self.angles + other.angles)

    def diag(self) -> np.ndarray:
        return np.exp(1j * self.angles)


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Columns X_t of an N x T complex array, plus the seed that produced them."""

    snapshots: np.ndarray
    seed: int

    def __post_init__(self):
        x = np.asarray(self.snapshots, dtype=complex)
        if x.ndim != 2 or x.shape[1] < 1:
            raise DomainError("snapshots must be an N x T array with T >= 1")
        object.__setattr__(self, "snapshots", _frozen(x, complex))

    @property
    def n(self) -> int:
        return self.snapshots.shape[0]

    @property
    def t(self) -> int:
        return self.snapshots.shape[1]


def build_sinc_model(N: int, W2: float, sigma2: float) -> SymToeplitz:
    """sigma2 * I + sinc(W2) with the kernel's lag-0 limit 2*W2 on the diagonal."""
    if N < 2:
        raise DomainError(f"N must be >= 2, got {N}")
    if not 0 < W2 < 0.5:
        raise DomainError(f"W2 must lie in (0, 0.5), got {W2}")
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    k = np.arange(1, N)
    lags = np.concatenate([[2 * W2 + sigma2], np.sin(2 * np.pi * W2 * k) / (np.pi * k)])
    return SymToeplitz(lags, W2=float(W2), sigma2=float(sigma2))


def to_dense(M) -> np.ndarray:
    if isinstance(M, (SymToeplitz, HermToeplitz)):
        return M.dense()
    return np.asarray(M)


def hermitize(M) -> np.ndarray:
    M = np.asarray(M)
    return 0.5 * (M + M.conj().T)


def eigh(M) -> EigenSystem:
    """Hermitian eigendecomposition, eigenvalues descending."""
    A = hermitize(to_dense(M))
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError("eigendecomposition returned non-finite values")
    return EigenSystem(_frozen(w[::-1], float), _frozen(V[:, ::-1], V.dtype))


def apply_phase(M, p: PhaseVector) -> np.ndarray:
    """D M D^H with D = diag(exp(i * angles))."""
    A = to_dense(M)
    if A.shape[0] != p.n:
        raise DomainError(f"size mismatch: matrix {A.shape[0]}, phases {p.n}")
    d = p.diag()
    return d[:, None] * A * d.conj()[None, :]


def _psd_sqrt(A: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(hermitize(A))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def generate_snapshots(T_true, T: int, p: PhaseVector | None = None, seed: int = 0) -> SnapshotSet:
    """X_t = D(phases) T_true^{1/2} xi_t with xi_t ~ CN(0, I)."""
    A = to_dense(T_true)
    n = A.shape[0]
    if T < 1:
        raise DomainError("T must be >= 1")
    if np.linalg.eigvalsh(hermitize(A))[0] <= 0:
        raise DomainError("true covariance must be positive definite")
    rng = make_rng(seed)
    xi = (rng.standard_normal((n, T)) + 1j * rng.standard_normal((n, T))) / np.sqrt(2.0)
    X = _psd_sqrt(A) @ xi
    if p is not None:
        if p.n != n:
            raise DomainError("phase vector size mismatch")
        X = p.diag()[:, None] * X
    return SnapshotSet(X, int(seed))


def sample_covariance(S: SnapshotSet | np.ndarray) -> np.ndarray:
    X = S.snapshots if isinstance(S, SnapshotSet) else np.asarray(S)
    return hermitize(X @ X.conj().T / X.shape[1])


def _chol(A: np.ndarray, what: str):
    try:
        return sla.cho_factor(hermitize(A), lower=True)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"{what} is not positive definite") from exc


def _logdet(cf) -> float:
    return 2.0 * float(np.sum(np.log(np.abs(np.diag(cf[0])))))


def log_likelihood_ratio(Rhat, T0) -> float:
    """log of det(R T^-1) / [tr(R T^-1)/N]^N, via Cholesky solves (no inverse)."""
    R = to_dense(Rhat)
    A = to_dense(T0)
    n = R.shape[0]
    cr = _chol(R, "sample matrix")
    ct = _chol(A, "model matrix")
    tr = float(np.real(np.trace(sla.cho_solve(ct, R))))
    if not tr > 0:
        raise DomainError("non-positive trace of R T^-1")
    return _logdet(cr) - _logdet(ct) - n * np.log(tr / n)


def likelihood_ratio(Rhat, T0) -> float:
    """Sphericity likelihood ratio in (0, 1]; invariant to scaling of either argument."""
    return float(np.exp(min(log_likelihood_ratio(Rhat, T0), 0.0)))


def likelihood_ratio_eig(Rhat, T0) -> float:
    """Same ratio from the eigenvalues of R^{1/2} T^-1 R^{1/2} (geometric/arithmetic mean)^N."""
    R = hermitize(to_dense(Rhat))
    A = to_dense(T0)
    s = _psd_sqrt(R)
    w = np.linalg.eigvalsh(hermitize(s @ np.linalg.solve(A, s)))
    if w[0] <= 0:
        raise DomainError("whitened matrix is not positive definite")
    n = w.size
    return float(np.exp(np.mean(np.log(w)) * n - n * np.log(np.mean(w))))


def sigma2_ml(Rhat, T0_normalized) -> float:
    """ML power estimate tr(R T0^-1)/N for a unit-diagonal shape matrix T0."""
    R = to_dense(Rhat)
    A = to_dense(T0_normalized)
    if np.max(np.abs(np.real(np.diag(A)) - 1.0)) > 1e-9:
        raise DomainError("T0 must have unit diagonal")
    ct = _chol(A, "model matrix")
    return float(np.real(np.trace(sla.cho_solve(ct, R)))) / R.shape[0]
