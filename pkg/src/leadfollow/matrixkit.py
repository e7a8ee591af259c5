"""Dense real-matrix kernels.

Everything here works on plain ``numpy`` arrays. :func:`as_matrix` is the
single entry point that validates shape and finiteness and hands back a
read-only ``float64`` copy, so downstream code can share matrices freely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "EIG_TOL",
    "RANK_TOL",
    "EigenvalueError",
    "NotHurwitzError",
    "Spectrum",
    "as_matrix",
    "as_square",
    "kron",
    "eigenvalues",
    "rank",
    "is_hurwitz",
    "spectral_abscissa",
    "solve_lyapunov",
]

#: absolute tolerance on real parts for sign decisions
EIG_TOL = 1e-9
#: relative tolerance for numerical rank
RANK_TOL = 1e-9

Matrix = NDArray[np.float64]


class EigenvalueError(ArithmeticError):
    """Raised when the eigenvalue iteration fails to converge."""


class NotHurwitzError(ValueError):
    """Raised when an operation requires a Hurwitz matrix and gets another."""


def as_matrix(m: ArrayLike, name: str = "matrix") -> Matrix:
    """Return ``m`` as an immutable 2-D float64 array.

    Scalars become 1x1 and 1-D inputs become a single row. Non-finite
    entries and complex input are rejected.
    """
    if np.iscomplexobj(m):
        raise TypeError(f"{name} must be real")
    arr = np.array(m, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def as_square(m: ArrayLike, name: str = "matrix") -> Matrix:
    arr = as_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a square matrix, with multiplicity."""

    values: NDArray[np.complex128]
    tolerance: float = EIG_TOL

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def real(self) -> NDArray[np.float64]:
        return self.values.real

    @property
    def abscissa(self) -> float:
        """Largest real part."""
        return float(self.values.real.max())

    @property
    def min_real(self) -> float:
        """Smallest real part."""
        return float(self.values.real.min())


def kron(a: ArrayLike, b: ArrayLike) -> Matrix:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    out = np.kron(as_matrix(a, "a"), as_matrix(b, "b"))
    out.setflags(write=False)
    return out


def eigenvalues(m: ArrayLike, tol: float = EIG_TOL) -> Spectrum:
    """All eigenvalues of a real square matrix.

    Uses LAPACK's Hessenberg reduction plus shifted QR. A failure to
    converge raises :class:`EigenvalueError` rather than returning a
    partial spectrum.
    """
    arr = as_square(m)
    try:
        vals = scipy.linalg.eigvals(arr, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenvalueError(str(exc)) from exc
    vals = np.asarray(vals, dtype=np.complex128)
    # sort for reproducible output: by real part, then imaginary part
    vals = vals[np.lexsort((vals.imag, vals.real))]
    vals.setflags(write=False)
    return Spectrum(vals, tol)


def rank(m: ArrayLike, tol: float = RANK_TOL) -> int:
    """Numerical rank: singular values above ``tol`` times the largest."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    s = np.linalg.svd(as_matrix(m), compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def spectral_abscissa(m: ArrayLike) -> float:
    return eigenvalues(m).abscissa


def is_hurwitz(m: ArrayLike, margin: float = 0.0, tol: float = EIG_TOL) -> bool:
    """True iff every eigenvalue has real part below ``-margin``.

    ``tol`` guards the decision: a real part within ``tol`` of the
    boundary counts as *not* strictly inside.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return bool(eigenvalues(m, tol).abscissa < -margin - tol)


def solve_lyapunov(a: ArrayLike, q: ArrayLike) -> Matrix:
    """Solve ``a.T @ X + X @ a + q = 0`` for symmetric ``X``.

    ``a`` must be Hurwitz so the solution exists and is unique.
    """
    a = as_square(a, "a")
    q = as_square(q, "q")
    if q.shape != a.shape:
        raise ValueError(f"q has shape {q.shape}, expected {a.shape}")
    if not np.allclose(q, q.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(q).max())):
        raise ValueError("q must be symmetric")
    if not is_hurwitz(a):
        raise NotHurwitzError("Lyapunov solve needs a Hurwitz matrix")
    # scipy solves A X + X A^H = Q (Bartels-Stewart)
    x = scipy.linalg.solve_continuous_lyapunov(a.T, -q)
    x = 0.5 * (x + x.T)
    x.setflags(write=False)
    return x
