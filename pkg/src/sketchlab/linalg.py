"""Dense numerical kernels: orthogonalization, compact SVD, ranks, norms.

These routines serve double duty.  They are the dense engine behind the
sketching algorithms, and they are the brute-force oracle that the fast
structured paths are tested against.  Every tolerance in the docstrings
below is contractual and exercised by the test suite.

Matrices are plain numpy arrays, row-major, real (float64) or complex
(complex128).  A matrix is treated as real exactly when its dtype is not
complex; real inputs never acquire spurious imaginary parts.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .rng import RngStream, as_stream

# Residual-norm floor used when an orthonormalization at drop_tol=0 must
# still discard numerically dependent columns (64 ulps of the largest
# column norm).
_DEPENDENCE_FLOOR = 64.0 * np.finfo(np.float64).eps


class CompactSvd(NamedTuple):
    """Compact singular value decomposition M = S @ diag(sigma) @ T^H.

    S is m x rho and T is n x rho with orthonormal columns; sigma holds
    the rho positive singular values in non-increasing order, where rho
    is the count of singular values above eps * max(m, n) * sigma_1.
    """

    S: np.ndarray
    sigma: np.ndarray
    T: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.sigma)

    def reconstruct(self) -> np.ndarray:
        return (self.S * self.sigma) @ self.T.conj().T


def _require_matrix(M: np.ndarray, op: str) -> np.ndarray:
    A = np.asarray(M)
    if A.ndim != 2 or A.size == 0:
        raise ValueError(f"{op} requires a nonempty 2-d matrix, got shape {A.shape}")
    return A


def gaussian_matrix(m: int, n: int, rng) -> np.ndarray:
    """m x n matrix of i.i.d. standard normal entries.

    Deterministic per seed: the entries are drawn row-major from the
    stream's ziggurat sampler in a single call.
    """
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got {m}x{n}")
    return as_stream(rng).normal((m, n))


def orthonormalize_columns(M: np.ndarray, drop_tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis for the numerically significant column span of M.

    Column-pivoted QR: a pivot column is kept while its residual norm
    after projection onto the previously kept columns exceeds
    ``max(drop_tol, 64 eps) * (largest column norm)``.  The largest
    column norm stands in for ||M|| (it matches it within a factor
    sqrt(cols)), which keeps this usable on wide matrices without an
    extra SVD.  Dropping all columns returns an explicit m x 0 basis.
    """
    A = _require_matrix(M, "orthonormalize_columns")
    if drop_tol < 0:
        raise ValueError("drop_tol must be nonnegative")
    Q, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros((A.shape[0], 0), dtype=A.dtype)
    threshold = max(drop_tol, _DEPENDENCE_FLOOR) * diag[0]
    keep = int(np.searchsorted(-diag, -threshold))
    return np.ascontiguousarray(Q[:, :keep])


def svd(M: np.ndarray) -> CompactSvd:
    """Compact SVD with the rank cut at eps * max(m, n) * sigma_1."""
    A = _require_matrix(M, "svd")
    if not np.all(np.isfinite(A)):
        raise ValueError("svd requires finite entries")
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    if s.size and s[0] > 0.0:
        cutoff = np.finfo(np.float64).eps * max(A.shape) * s[0]
        rho = int(np.count_nonzero(s > cutoff))
    else:
        rho = 0
    return CompactSvd(S=U[:, :rho], sigma=s[:rho].copy(), T=Vh[:rho].conj().T)


def singular_values(M: np.ndarray) -> np.ndarray:
    """All min(m, n) singular values, non-increasing."""
    A = _require_matrix(M, "singular_values")
    return scipy.linalg.svdvals(A)


def numerical_rank(M: np.ndarray, xi: float) -> int:
    """Count of singular values strictly greater than the threshold xi.

    The threshold is absolute; callers wanting a relative cut pass
    xi * spectral_norm(M).
    """
    if xi <= 0:
        raise ValueError("numerical rank threshold xi must be positive")
    return int(np.count_nonzero(singular_values(M) > xi))


def truncate_svd(M: np.ndarray, r: int):
    """Closest rank-r approximation Mr and its residual E = M - Mr.

    ||E|| equals sigma_{r+1}(M) and ||E||_F^2 equals the tail sum of
    squared singular values, both within the contractual tolerances.
    """
    A = _require_matrix(M, "truncate_svd")
    if not 1 <= r <= min(A.shape):
        raise ValueError(f"truncation rank {r} out of range for shape {A.shape}")
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    Mr = (U[:, :r] * s[:r]) @ Vh[:r]
    if not np.iscomplexobj(A):
        Mr = Mr.real
    return Mr, A - Mr


def pseudo_inverse(M: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse via the compact SVD.

    The zero matrix maps to the zero matrix of transposed shape.
    """
    A = _require_matrix(M, "pseudo_inverse")
    dec = svd(A)
    if dec.rank == 0:
        return np.zeros((A.shape[1], A.shape[0]), dtype=A.dtype)
    out = (dec.T / dec.sigma) @ dec.S.conj().T
    if not np.iscomplexobj(A):
        out = out.real
    return out


def spectral_norm(M: np.ndarray, method: str = "svd", iters: int = 200,
                  tol: float = 1e-12, rng=None) -> float:
    """Largest singular value.

    method="svd" computes it exactly; method="power" runs the power
    iteration on M^H M with a seeded start vector and a relative
    convergence test, which is accurate to ~1e-10 on spectra with any
    gap and still lands inside the dominant cluster on flat spectra.
    """
    A = _require_matrix(M, "spectral_norm")
    if method == "svd":
        sv = scipy.linalg.svdvals(A)
        return float(sv[0]) if sv.size else 0.0
    if method != "power":
        raise ValueError(f"unknown spectral_norm method: {method!r}")
    stream = as_stream(rng) if rng is not None else RngStream(0x5EED)
    x = stream.normal(A.shape[1])
    if np.iscomplexobj(A):
        x = x + 1j * stream.normal(A.shape[1])
    nx = np.linalg.norm(x)
    if nx == 0.0:
        return 0.0
    x /= nx
    prev = 0.0
    for _ in range(iters):
        y = A @ x
        z = A.conj().T @ y
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0
        est = float(np.linalg.norm(y))
        if abs(est - prev) <= tol * max(est, 1e-300):
            return est
        prev = est
        x = z / nz
    return prev


def frobenius_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(M)))
