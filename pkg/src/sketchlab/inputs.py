"""Deterministic and randomized test-matrix generators.

Four families: matrices with a prescribed singular spectrum, a
discretized single-layer potential kernel between two concentric
circles, off-diagonal blocks of inverted finite-difference Laplacians,
and factor-Gaussian matrices (random products of expected rank r).
"""

from __future__ import annotations

import dataclasses
import functools

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from . import linalg
from .rng import as_stream


@dataclasses.dataclass(frozen=True)
class SpectrumSpec:
    """Spectrum rule: sigma_j = 1/j for j <= r, a flat tail after.

    With head sigma_1 = 1 the generated matrix has unit spectral norm
    and condition number 1/tail.
    """

    n: int
    r: int
    tail: float = 1e-10

    def __post_init__(self):
        if not 0 <= self.r < self.n:
            raise ValueError(f"need 0 <= r < n, got r={self.r}, n={self.n}")
        if not 0.0 < self.tail < 1.0:
            raise ValueError("tail must lie in (0, 1)")

    def singular_values(self) -> np.ndarray:
        sigma = np.full(self.n, self.tail)
        if self.r:
            sigma[:self.r] = 1.0 / np.arange(1, self.r + 1)
        return sigma


@dataclasses.dataclass(frozen=True)
class FactorGaussianSpec:
    """Product of Gaussian factors of inner dimension r plus noise of
    spectral norm exactly noise_norm."""

    m: int
    n: int
    r: int
    noise_norm: float = 0.0

    def __post_init__(self):
        if self.r > min(self.m, self.n):
            raise ValueError("inner rank r cannot exceed min(m, n)")
        if self.r < 0 or self.noise_norm < 0.0:
            raise ValueError("rank and noise norm must be nonnegative")


def svd_spectrum_matrix(spec: SpectrumSpec, rng) -> np.ndarray:
    """M = S diag(sigma) T^T for orthonormalized Gaussian S, T."""
    stream = as_stream(rng)
    n = spec.n
    S = np.linalg.qr(stream.normal((n, n)))[0]
    T = np.linalg.qr(stream.normal((n, n)))[0]
    return (S * spec.singular_values()) @ T.T


def _gauss_legendre_arc(lo: float, hi: float, order: int) -> float:
    """Integral of log|2 - e^(i theta)| over [lo, hi] by Gauss-Legendre."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    theta = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    values = np.log(np.abs(2.0 - np.exp(1j * theta)))
    return 0.5 * (hi - lo) * float(weights @ values)


@functools.lru_cache(maxsize=8)
def _laplacian_first_row(n: int) -> tuple:
    """Arc integrals for every source arc against the target at angle 0.

    Starts at 16-point Gauss-Legendre per arc and doubles the order
    until every entry moves by less than 1e-12.  The integrand is
    smooth (the target circle has radius 2, the source radius 1), so
    convergence is immediate.
    """
    step = 2.0 * np.pi / n
    order = 16
    row = np.array([_gauss_legendre_arc(j * step, (j + 1) * step, order)
                    for j in range(n)])
    while order <= 256:
        order *= 2
        refined = np.array([_gauss_legendre_arc(j * step, (j + 1) * step, order)
                            for j in range(n)])
        if np.max(np.abs(refined - row)) <= 1e-12:
            row = refined
            break
        row = refined
    return tuple(row)


def laplacian_matrix(n: int) -> np.ndarray:
    """Discretized single-layer potential between concentric circles.

    Entry (i, j) integrates log|2 w^i - y| over the j-th arc of the
    unit circle (w = e^(2 pi i / n)), which by rotational symmetry
    depends only on (j - i) mod n: the matrix is exactly circulant.
    Scaled so the spectral norm is 1 (circulant matrices are normal, so
    the norm is the largest eigenvalue magnitude, read off the FFT of
    the generating row).
    """
    if n < 8:
        raise ValueError("order must be at least 8")
    row = np.array(_laplacian_first_row(n))
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    M = row[idx]
    # first column c[i] = row[(-i) mod n]; eigenvalues of M^T = fft(c)
    first_col = row[(-np.arange(n)) % n]
    norm = float(np.max(np.abs(np.fft.fft(first_col))))
    return M / norm


# grid geometry per preset, calibrated so the extracted block matches
# the target shapes and the numerical ranks land near 5, 43, 64
_FD_PRESETS = {
    "small": {"rows": 88, "cols": 160, "grid_h": 30, "grid_w": 12},
    "medium": {"rows": 208, "cols": 400, "grid_h": 14, "grid_w": 68},
    "large": {"rows": 408, "cols": 800, "grid_h": 16, "grid_w": 110},
}


def _dirichlet_laplacian(grid_h: int, grid_w: int) -> scipy.sparse.spmatrix:
    """Five-point discrete Laplacian with Dirichlet boundary, row-major."""
    ih = scipy.sparse.identity(grid_h, format="csr")
    iw = scipy.sparse.identity(grid_w, format="csr")
    th = scipy.sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1],
                            shape=(grid_h, grid_h), format="csr")
    tw = scipy.sparse.diags([-1.0, 2.0, -1.0], [-1, 0, 1],
                            shape=(grid_w, grid_w), format="csr")
    return (scipy.sparse.kron(th, iw) + scipy.sparse.kron(ih, tw)).tocsc()


def finite_difference_inverse(preset: str = "small", grid_h: int | None = None,
                              grid_w: int | None = None,
                              rows: int | None = None,
                              cols: int | None = None) -> np.ndarray:
    """Off-diagonal block of an inverted finite-difference Laplacian.

    Assembles the five-point Dirichlet Laplacian on a grid_h x grid_w
    grid, inverts it by sparse factorization, and extracts the block
    coupling the first `rows` grid nodes (top strip, row-major order)
    to the last `cols` nodes (bottom strip).  The two strips are
    disjoint and well separated, so the block has low numerical rank.
    Scaled to unit spectral norm.  Presets reproduce the documented
    shapes 88x160, 208x400, and 408x800.
    """
    if grid_h is None or grid_w is None or rows is None or cols is None:
        if preset not in _FD_PRESETS:
            raise ValueError(f"unknown preset {preset!r}; "
                             f"choose from {sorted(_FD_PRESETS)}")
        p = _FD_PRESETS[preset]
        grid_h, grid_w = p["grid_h"], p["grid_w"]
        rows, cols = p["rows"], p["cols"]
    size = grid_h * grid_w
    if rows + cols > size:
        raise ValueError("requested strips overlap: grid too small")
    A = _dirichlet_laplacian(grid_h, grid_w)
    lu = scipy.sparse.linalg.splu(A)
    rhs = np.zeros((size, cols))
    rhs[np.arange(size - cols, size), np.arange(cols)] = 1.0
    X = lu.solve(rhs)
    block = X[:rows, :]
    return block / linalg.spectral_norm(block)


def factor_gaussian(spec: FactorGaussianSpec, rng) -> np.ndarray:
    """M = U V + E for Gaussian factors, ||E|| = noise_norm exactly."""
    stream = as_stream(rng)
    if spec.r == 0:
        M = np.zeros((spec.m, spec.n))
    else:
        U = stream.normal((spec.m, spec.r))
        V = stream.normal((spec.r, spec.n))
        M = U @ V
    if spec.noise_norm > 0.0:
        E = stream.normal((spec.m, spec.n))
        M = M + E * (spec.noise_norm / linalg.spectral_norm(E))
    return M
