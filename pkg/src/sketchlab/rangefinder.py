"""Range finding, recursive block growth, compression, and error bounds.

The central routine sketches an m x n matrix M through a structured
multiplier B, orthonormalizes the sketch into a basis Q, and accepts
when the residual norm ||M - Q Q^H M|| falls below a tolerance.  The
recursive variant grows the multiplier prefix block by block, reusing
prior projections so the residual norm is non-increasing across stages.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.linalg

from . import linalg
from .multipliers import FlopTally, Multiplier, dense_multiplier, multiplier_sum
from .rng import RngStream, as_stream

SUCCESS = "success"
FAILURE = "failure"

_ESTIMATOR_MODES = ("exact", "frievalds", "power")


@dataclasses.dataclass(frozen=True)
class ErrorEstimator:
    """How the residual norm ||M - Q Q^H M|| is evaluated.

    exact      spectral norm of the materialized residual
    frievalds  probabilistic probe ||(M - Q Q^H M) H|| / sqrt(k) for a
               Gaussian n x k matrix H, never materializing Q Q^H M
    power      power iteration on the implicit residual operator
    """

    mode: str = "exact"
    k: int = 8
    rng: object = None

    def __post_init__(self):
        if self.mode not in _ESTIMATOR_MODES:
            raise ValueError(f"estimator mode must be one of {_ESTIMATOR_MODES}, "
                             f"got {self.mode!r}")
        if self.k < 1:
            raise ValueError("probe width k must be at least 1")


def _as_estimator(est) -> ErrorEstimator:
    if isinstance(est, ErrorEstimator):
        return est
    if isinstance(est, str):
        return ErrorEstimator(mode=est)
    raise TypeError(f"expected ErrorEstimator or mode string, got {type(est).__name__}")


@dataclasses.dataclass
class RangeFinderResult:
    """Outcome of a range-finding run.

    Q is the orthonormal basis (m x l_bar), delta the estimated residual
    norm, l_used the number of multiplier columns consumed, flops the
    field-operation tally of the structured sketch applies, and stage
    the 1-based block index at which the recursive variant stopped.
    history holds (stage, l_used, delta) triples for recursive runs.
    """

    Q: np.ndarray
    delta: float
    status: str
    l_used: int
    flops: FlopTally
    stage: int = 1
    history: list = dataclasses.field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == SUCCESS

    def approximation(self, M: np.ndarray) -> np.ndarray:
        """Materialize the rank-l_bar approximation Q Q^H M on demand."""
        if self.Q.shape[1] == 0:
            return np.zeros_like(np.asarray(M))
        return self.Q @ (self.Q.conj().T @ np.asarray(M))


def _coerce_multiplier(B) -> Multiplier:
    if isinstance(B, Multiplier):
        return B
    return dense_multiplier(np.asarray(B), source="explicit")


def frievalds_error_estimate(M: np.ndarray, Q: np.ndarray, k: int = 8,
                             rng=0) -> float:
    """Probabilistic residual estimate ||(M - Q Q^H M) H|| / sqrt(k).

    H is a fresh Gaussian n x k probe; the residual is probed through
    two tall-thin products without forming Q Q^H M.  The sqrt(k)
    normalization centers the estimate on the exact spectral norm: the
    probe of the dominant residual direction has expected squared norm
    k, while the Gaussian factor inflates the norm by at most about
    1 + sqrt(rank/k).
    """
    if k < 1:
        raise ValueError("probe width k must be at least 1")
    M = np.asarray(M)
    stream = as_stream(rng)
    H = stream.normal((M.shape[1], k))
    S = M @ H
    if Q is not None and Q.size:
        S = S - Q @ (Q.conj().T @ S)
    return linalg.spectral_norm(S) / math.sqrt(k)


def _residual_power_norm(matvec, rmatvec, shape, rng, iters=60, tol=1e-10) -> float:
    """Power iteration on an implicit operator given by closures."""
    m, n = shape
    stream = as_stream(rng)
    x = stream.normal(n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = matvec(x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        z = rmatvec(y / ny)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return float(ny)
        x = z / nz
        if abs(nz - est) <= tol * max(nz, 1e-300):
            return float(nz)
        est = nz
    return float(est)


def _residual_delta(M, Q, est: ErrorEstimator, residual=None) -> float:
    """Residual norm of M - Q Q^H M under the chosen estimator.

    A precomputed dense residual short-circuits the exact and power
    modes (the recursive reuse path maintains one incrementally).
    """
    if est.mode == "frievalds":
        rng = est.rng if est.rng is not None else 0
        if residual is not None:
            return frievalds_error_estimate(residual, None, est.k, rng)
        return frievalds_error_estimate(M, Q, est.k, rng)
    if residual is None:
        if Q is None or Q.size == 0:
            residual = M
        else:
            residual = M - Q @ (Q.conj().T @ M)
    if est.mode == "exact":
        return linalg.spectral_norm(residual)
    rng = est.rng if est.rng is not None else 0x9E11
    return _residual_power_norm(lambda x: residual @ x,
                                lambda y: residual.conj().T @ y,
                                residual.shape, rng)


def range_finder(M: np.ndarray, B, tau: float, est="exact",
                 drop_tol: float = 1e-12) -> RangeFinderResult:
    """Sketch M through B, orthonormalize, and test the residual norm.

    Computes W = M B by the multiplier's fast transpose applies, drops
    near-dependent sketch columns, orthonormalizes the rest into Q, and
    reports success when the estimated ||M - Q Q^H M|| is at most tau.
    The approximation Q Q^H M itself is materialized only on demand via
    the result.  An empty basis (every column dropped) reports
    delta = ||M|| so that only tau >= ||M|| accepts.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("input matrix must be 2-d")
    if tau < 0:
        raise ValueError("tolerance tau must be nonnegative")
    B = _coerce_multiplier(B)
    if B.n_rows != M.shape[1]:
        raise ValueError(f"multiplier order {B.n_rows} does not match "
                         f"matrix column count {M.shape[1]}")
    est = _as_estimator(est)
    tally = FlopTally()
    W = B.sketch(M, tally)
    Q = linalg.orthonormalize_columns(W, drop_tol=drop_tol)
    delta = float(_residual_delta(M, Q, est))
    status = SUCCESS if delta <= tau else FAILURE
    return RangeFinderResult(Q=Q, delta=delta, status=status,
                             l_used=B.n_cols, flops=tally, stage=1,
                             history=[(1, B.n_cols, delta)])


def recursive_range_finder(M: np.ndarray, Bhat, block_sizes, tau: float,
                           est="exact", reuse: bool = True,
                           drop_tol: float = 1e-12,
                           debug_check: bool = False) -> RangeFinderResult:
    """Grow the multiplier prefix block by block until the residual
    passes, per the recursive scheme.

    Bhat is a nonsingular n x n multiplier whose column blocks of sizes
    block_sizes are appended one stage at a time; the run stops at the
    first stage whose residual norm estimate is at most tau.  Because
    the full prefix spans all of R^n, the final stage captures the
    whole range regardless of tau.

    With reuse on (the default), each stage projects only the new sketch
    columns against the accumulated basis and downdates a maintained
    residual, so the residual norm is non-increasing across stages.
    reuse=False rebuilds the basis from the accumulated sketch at every
    stage.  debug_check recomputes the reused residual from scratch and
    verifies agreement.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("input matrix must be 2-d")
    Bhat = _coerce_multiplier(Bhat)
    n = M.shape[1]
    if Bhat.n_rows != n or Bhat.n_cols != n:
        raise ValueError(f"recursive multiplier must be {n}x{n}, got {Bhat.shape}")
    blocks = [int(b) for b in block_sizes]
    if any(b < 1 for b in blocks) or sum(blocks) != n:
        raise ValueError(f"block sizes must be positive and sum to {n}, "
                         f"got {block_sizes}")
    est = _as_estimator(est)

    tally = FlopTally()
    dtype = complex if Bhat.field == "complex" else np.result_type(M.dtype, float)
    Q = np.zeros((M.shape[0], 0), dtype=dtype)
    residual = np.array(M, dtype=dtype, copy=True) if reuse else None
    sketch_acc = None
    history = []
    l_used = 0
    delta = float(linalg.spectral_norm(M))
    stage = 0

    for stage, width in enumerate(blocks, start=1):
        cols = np.arange(l_used, l_used + width)
        l_used += width
        W = _sketch_block(M, Bhat, cols, tally)
        if reuse:
            fresh = W - Q @ (Q.conj().T @ W) if Q.shape[1] else W
            # second projection pass keeps the accumulated basis orthonormal
            if Q.shape[1]:
                fresh = fresh - Q @ (Q.conj().T @ fresh)
            Qi = linalg.orthonormalize_columns(fresh, drop_tol=drop_tol)
            if Qi.shape[1]:
                Q = np.concatenate([Q, Qi.astype(dtype, copy=False)], axis=1)
                residual = residual - Qi @ (Qi.conj().T @ residual)
            delta = float(_residual_delta(M, Q, est, residual=residual))
            if debug_check:
                fresh_delta = float(_residual_delta(M, Q,
                                                    ErrorEstimator("exact")))
                ref = float(linalg.spectral_norm(residual))
                if abs(ref - fresh_delta) > 1e-8 * max(1.0, fresh_delta):
                    raise AssertionError(
                        f"reuse drift at stage {stage}: maintained residual "
                        f"norm {ref} vs recomputed {fresh_delta}")
        else:
            sketch_acc = W if sketch_acc is None else np.concatenate(
                [sketch_acc, W], axis=1)
            Q = linalg.orthonormalize_columns(sketch_acc, drop_tol=drop_tol)
            delta = float(_residual_delta(M, Q, est))
        history.append((stage, l_used, delta))
        if delta <= tau:
            return RangeFinderResult(Q=Q, delta=delta, status=SUCCESS,
                                     l_used=l_used, flops=tally, stage=stage,
                                     history=history)
    return RangeFinderResult(Q=Q, delta=delta, status=FAILURE,
                             l_used=l_used, flops=tally, stage=stage,
                             history=history)


def _sketch_block(M, Bhat, cols, tally):
    """M times the selected columns of Bhat: applies the multiplier to
    scattered unit blocks so structured applies stay fast."""
    n = Bhat.n_rows
    width = len(cols)
    E = np.zeros((n, width), dtype=float)
    E[cols, np.arange(width)] = 1.0
    block = Bhat.apply(E, tally)          # dense n x width slice of Bhat
    return M @ block


def randomized_compression(M: np.ndarray, B, l_minus: int, rng=None,
                           G=None) -> np.ndarray:
    """Compress the sketch M B from width l to width l_minus by a fresh
    Gaussian factor: returns (M B) G.

    Raises for l_minus >= l when G is sampled here; an explicit G (the
    identity test hook) may keep l_minus = l, in which case M B passes
    through unchanged.
    """
    M = np.asarray(M)
    B = _coerce_multiplier(B)
    l = B.n_cols
    if l_minus < 1:
        raise ValueError("compressed width must be positive")
    W = B.sketch(M)
    if G is None:
        if l_minus >= l:
            raise ValueError(f"compressed width {l_minus} must be smaller "
                             f"than the sketch width {l}")
        if rng is None:
            raise ValueError("randomized compression needs rng when G is not given")
        G = as_stream(rng).normal((l, l_minus))
    else:
        G = np.asarray(G)
        if G.shape != (l, l_minus):
            raise ValueError(f"explicit compression factor must be "
                             f"{l}x{l_minus}, got {G.shape}")
    return W @ G


def heuristic_compression(blocks, signs=None, rng=None) -> Multiplier:
    """Recombine candidate multipliers into B = sum_j c_j B_j, |c_j| = 1.

    The blocks are typically multipliers that failed individually; a
    random sign (or given unit-modulus) combination frequently sketches
    what each block alone misses.  Returns the sum-combinator operator.
    """
    blocks = list(blocks)
    if not blocks:
        raise ValueError("need at least one block")
    shape = blocks[0].shape
    for b in blocks[1:]:
        if b.shape != shape:
            raise ValueError(f"block shape mismatch: {b.shape} vs {shape}")
    if signs is not None:
        coeffs = np.asarray(signs)
        if coeffs.shape != (len(blocks),):
            raise ValueError("need one sign per block")
        if np.any(np.abs(np.abs(coeffs) - 1.0) > 1e-12):
            raise ValueError("combination coefficients must have modulus 1")
        return multiplier_sum(blocks, coeffs=coeffs)
    if rng is None:
        raise ValueError("heuristic compression needs signs or rng")
    return multiplier_sum(blocks, rng=as_stream(rng))


def power_scheme(M: np.ndarray, i: int) -> np.ndarray:
    """Power iterations M_i = (M M^H)^i M, so sigma_j(M_i) =
    sigma_j(M)^(2i+1) exactly while the column space is preserved."""
    if i < 0:
        raise ValueError("iteration count must be nonnegative")
    M = np.asarray(M)
    X = M
    for _ in range(int(i)):
        X = M @ (M.conj().T @ X)
    return X


def low_rank_factors(M: np.ndarray, Q: np.ndarray):
    """Two-factor form (U, V) = (Q, Q^H M) with ||U V - M|| equal to the
    exact-mode residual norm for this basis."""
    M = np.asarray(M)
    Q = np.asarray(Q)
    return Q, Q.conj().T @ M


@dataclasses.dataclass(frozen=True)
class BoundReport:
    """Evaluated expectation bounds for the error amplification factors.

    expected_f bounds the Gaussian-multiplier factor; expected_f_dual
    bounds the dual factor for an average (factor-Gaussian) input with a
    fixed multiplier of condition number kappa_B, and shrinks like
    r/((m-r)p): the dual bound converges to the optimum as m grows.
    """

    m: int
    n: int
    r: int
    l: int
    p: int
    kappa_B: float
    kind: str
    expected_f: float
    expected_f_dual: float | None
    note: str


def theoretical_error_bound(m: int, n: int, r: int, l: int,
                            kappa_B: float = 1.0,
                            kind: str = "primal") -> BoundReport:
    """Closed-form expectation bounds on the error amplification factors.

        E(f)   < (1 + sqrt(n) + sqrt(l)) (e/p) sqrt(8 (n-r) r l)
        E(f_d) < e^2 sqrt(8 (n-r) l) kappa(B) r / ((m-r) p)

    with p = l - r.  Both are evaluated when defined; p <= 0 raises
    since the expectations are undefined there, and the dual form
    additionally needs m > r.
    """
    if kind not in ("primal", "dual"):
        raise ValueError(f"kind must be 'primal' or 'dual', got {kind!r}")
    if not (0 <= r <= min(n, l)):
        raise ValueError("rank r must satisfy 0 <= r <= min(n, l)")
    if n <= r:
        raise ValueError("order n must exceed the rank r")
    p = l - r
    if p < 1:
        raise ValueError("expectation undefined: oversampling p = l - r "
                         "must be at least 1")
    if kappa_B < 1.0:
        raise ValueError("condition number kappa_B must be at least 1")
    e = math.e
    expected_f = (1.0 + math.sqrt(n) + math.sqrt(l)) * (e / p) \
        * math.sqrt(8.0 * (n - r) * r * l)
    if m > r:
        expected_f_dual = e * e * math.sqrt(8.0 * (n - r) * l) * kappa_B \
            * r / ((m - r) * p)
    else:
        expected_f_dual = None
        if kind == "dual":
            raise ValueError("dual bound needs m > r")
    note = ("dual bound decreases like r/((m-r)p): the expected error "
            "approaches the optimal sigma_{r+1} as m grows")
    return BoundReport(m=m, n=n, r=r, l=l, p=p, kappa_B=kappa_B, kind=kind,
                       expected_f=expected_f, expected_f_dual=expected_f_dual,
                       note=note)
