"""Plain-text CSV formats for matrices, Toeplitz lags and snapshot sets.

Complex entries are written as ``re+imi`` (e.g. ``0.5-0.25i``); floats use
``repr`` so files round-trip bit-for-bit.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DomainError
from .matrix import HermToeplitz, SnapshotSet, SymToeplitz

__all__ = [
    "format_complex",
    "parse_complex",
    "write_matrix",
    "read_matrix",
    "write_toeplitz",
    "read_toeplitz",
    "write_snapshots",
    "read_snapshots",
]


def format_complex(z: complex) -> str:
    z = complex(z)
    im = z.imag
    sign = "-" if (im < 0 or (im == 0 and np.signbit(im))) else "+"
    return f"{float(z.real)!r}{sign}{abs(float(im))!r}i"


def parse_complex(s: str) -> complex:
    s = s.strip()
    if not s.endswith("i"):
        return complex(float(s), 0.0)
    try:
        return complex(s[:-1] + "j")
    except ValueError as exc:
        raise DomainError(f"cannot parse complex entry {s!r}") from exc


def _rows(path) -> list[str]:
    lines = Path(path).read_text().splitlines()
    return [ln for ln in lines if ln.strip()]


def write_matrix(path, M: np.ndarray) -> None:
    """One CSV row per matrix row; real arrays written as reals."""
    M = np.asarray(M)
    fmt = format_complex if np.iscomplexobj(M) else (lambda v: repr(float(v)))
    with open(path, "w") as fh:
        for row in M:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_matrix(path) -> np.ndarray:
    rows = [[parse_complex(c) for c in ln.split(",")] for ln in _rows(path)]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise DomainError(f"{path}: ragged or empty matrix")
    M = np.array(rows, dtype=complex)
    if np.all(M.imag == 0):
        return M.real.copy()
    return M


def write_toeplitz(path, T: SymToeplitz | HermToeplitz) -> None:
    with open(path, "w") as fh:
        if isinstance(T, SymToeplitz):
            fh.write(f"toeplitz-sym,{T.n}\n")
            fh.write(",".join(repr(float(v)) for v in T.lags) + "\n")
        else:
            fh.write(f"toeplitz-herm,{T.n}\n")
            vals = [format_complex(T.lag0)] + [format_complex(v) for v in T.lags]
            fh.write(",".join(vals) + "\n")


def read_toeplitz(path) -> SymToeplitz | HermToeplitz:
    """Read a lag file; a headerless square matrix is accepted via its first row."""
    rows = _rows(path)
    if not rows:
        raise DomainError(f"{path}: empty file")
    head = rows[0].split(",")
    if head[0] in ("toeplitz-sym", "toeplitz-herm"):
        n = int(head[1])
        vals = [parse_complex(c) for c in rows[1].split(",")]
        if len(vals) != n:
            raise DomainError(f"{path}: header says N={n}, found {len(vals)} lags")
        if head[0] == "toeplitz-sym":
            return SymToeplitz(np.real(vals))
        return HermToeplitz(np.real(vals[0]), np.array(vals[1:]))
    M = read_matrix(path)
    if np.iscomplexobj(M):
        return HermToeplitz(M[0, 0].real, M[0, 1:])
    return SymToeplitz(M[0])


def write_snapshots(path, S: SnapshotSet) -> None:
    with open(path, "w") as fh:
        fh.write(f"snapshots,{S.n},{S.t},{S.seed}\n")
        for row in S.snapshots:
            fh.write(",".join(format_complex(v) for v in row) + "\n")


def read_snapshots(path) -> SnapshotSet:
    rows = _rows(path)
    head = rows[0].split(",") if rows else []
    if len(head) != 4 or head[0] != "snapshots":
        raise DomainError(f"{path}: missing 'snapshots,N,T,seed' header")
    n, t, seed = int(head[1]), int(head[2]), int(head[3])
    X = np.array([[parse_complex(c) for c in ln.split(",")] for ln in rows[1:]], dtype=complex)
    if X.shape != (n, t):
        raise DomainError(f"{path}: header says {n}x{t}, found {X.shape}")
    return SnapshotSet(X, seed)
