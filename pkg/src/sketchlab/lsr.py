"""Sketch-and-solve overdetermined least squares.

The sketched solver replaces min ||Ax - b|| by min ||FAx - Fb|| for a
short, pre-scaled sketching operator F: either (1/sqrt(k)) times a
dense Gaussian, or sqrt(m/k) times k rows of an orthonormalized
structured multiplier.  With those scalings the residual-norm ratio
||F M y|| / ||M y|| (M = (A|b), y = (x; -1)) concentrates around 1, so
a sketched solution certifies itself against the exact one.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.linalg

from . import multipliers as mp
from .multipliers import Multiplier
from .rng import as_stream


@dataclasses.dataclass(frozen=True)
class LsrProblem:
    """Overdetermined least-squares instance min_x ||A x - b||."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A)
        b = np.asarray(self.b)
        if A.ndim != 2:
            raise ValueError("A must be a matrix")
        m, d = A.shape
        if not m > d >= 1:
            raise ValueError(f"need m > d >= 1, got {m}x{d}")
        if b.shape != (m,):
            raise ValueError(f"b must have length {m}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def stacked(self) -> np.ndarray:
        """The m x (d+1) matrix (A | b)."""
        return np.concatenate([self.A, self.b[:, None]], axis=1)


@dataclasses.dataclass(frozen=True)
class SketchParams:
    """Sketch-dimension rule k = ceil((d + log(1/delta) xi^-2) theta)."""

    d: int
    delta: float
    xi: float
    theta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("failure probability delta must lie in (0, 1)")
        if not 0.0 < self.xi <= 1.0:
            raise ValueError("distortion xi must lie in (0, 1]")
        if self.theta <= 0.0:
            raise ValueError("constant theta must be positive")
        if self.d < 1:
            raise ValueError("column count d must be at least 1")

    @property
    def k(self) -> int:
        return sketch_dimension(self.d, self.delta, self.xi, self.theta)


def sketch_dimension(d: int, delta: float, xi: float, theta: float = 1.0) -> int:
    """Rows needed for distortion xi at failure probability delta.

    The constant theta is left unnamed by the theory; it is a config
    knob (default 1) and coverage is reported empirically rather than
    asserted from the formula.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("failure probability delta must lie in (0, 1)")
    if not 0.0 < xi <= 1.0:
        raise ValueError("distortion xi must lie in (0, 1]")
    if theta <= 0.0:
        raise ValueError("constant theta must be positive")
    if d < 1:
        raise ValueError("column count d must be at least 1")
    return math.ceil((d + math.log(1.0 / delta) * xi ** -2) * theta)


@dataclasses.dataclass(frozen=True)
class LsrCertificate:
    """Accuracy certificate for a sketched solve.

    ratio = residual_sketched / residual_exact is at least 1 up to
    roundoff: the sketched solution cannot beat the true optimum in the
    original norm.  rank_deficient flags a sketched system solved by
    pseudoinverse because FA lost full column rank.
    """

    residual_exact: float
    residual_sketched: float
    sketch_residual: float
    ratio: float
    rank_deficient: bool = False


def lsr_exact(problem: LsrProblem) -> np.ndarray:
    """Minimum-norm least-squares solution via orthogonal factorization."""
    x, _, _, _ = scipy.linalg.lstsq(problem.A, problem.b,
                                    lapack_driver="gelsd")
    return x


def gaussian_sketch_operator(m: int, k: int, rng) -> Multiplier:
    """Pre-scaled Gaussian sketch F = (1/sqrt(k)) G for G k x m i.i.d."""
    if not 1 <= k <= m:
        raise ValueError(f"sketch rows k={k} out of range 1..{m}")
    return mp.scale(mp.dense_gaussian(k, m, rng), 1.0 / math.sqrt(k))


def structured_sketch_operator(m: int, k: int, rng, depth: int = 3,
                               kind: str = "asph") -> Multiplier:
    """Row-restricted orthogonal structured sketch, pre-scaled.

    Takes an m-order transform with random scaling and permutation,
    normalizes it to orthonormal columns, keeps the topmost k rows (the
    built-in output permutation makes those a random row sample), and
    scales by sqrt(m/k) so that E||Fx||^2 = ||x||^2.
    """
    if not 1 <= k <= m:
        raise ValueError(f"sketch rows k={k} out of range 1..{m}")
    stream = as_stream(rng)
    if kind == "asph":
        base = mp.asph(m, depth, stream)
    elif kind == "aspf":
        base = mp.aspf(m, depth, stream)
    else:
        raise ValueError(f"unknown structured sketch kind {kind!r}")
    ortho = base.normalized()
    return mp.scale(mp.restrict_rows(ortho, k), math.sqrt(m / k))


def lsr_sketched(problem: LsrProblem, F=None, k: int | None = None,
                 rng=None, kind: str = "gaussian", depth: int = 3):
    """Solve the sketched problem min ||F A x - F b||.

    F may be a ready k x m operator (Multiplier or dense array); with
    F=None one is built: kind "gaussian" gives (1/sqrt(k)) G, kind
    "asph"/"aspf" the scaled structured row restriction.  Returns the
    sketched solution and a certificate against the exact solve.
    """
    m = problem.m
    if F is None:
        if k is None or rng is None:
            raise ValueError("need k and rng when F is not supplied")
        if k > m:
            raise ValueError(f"sketch rows k={k} exceed m={m}")
        if kind == "gaussian":
            F = gaussian_sketch_operator(m, k, rng)
        else:
            F = structured_sketch_operator(m, k, rng, depth=depth, kind=kind)
    if isinstance(F, np.ndarray):
        F = mp.dense_multiplier(F, source="explicit")
    if F.n_cols != m:
        raise ValueError(f"sketch operator expects {F.n_cols} rows, "
                         f"problem has {m}")
    FA = F.apply(problem.A)
    Fb = F.apply(problem.b)
    x, _, rank, _ = scipy.linalg.lstsq(FA, Fb, lapack_driver="gelsd")
    rank_deficient = rank < problem.d

    x_star = lsr_exact(problem)
    residual_exact = float(np.linalg.norm(problem.A @ x_star - problem.b))
    residual_sketched = float(np.linalg.norm(problem.A @ x - problem.b))
    sketch_residual = float(np.linalg.norm(FA @ x - Fb))
    # Consistent systems leave both residuals at roundoff scale; their
    # quotient is then noise, so report the mathematical limit 1 instead.
    scale_b = max(float(np.linalg.norm(problem.b)), 1e-300)
    if residual_exact <= 1e-12 * scale_b:
        ratio = 1.0 if residual_sketched <= 1e-9 * scale_b else math.inf
    else:
        ratio = residual_sketched / residual_exact
    cert = LsrCertificate(residual_exact=residual_exact,
                          residual_sketched=residual_sketched,
                          sketch_residual=sketch_residual,
                          ratio=ratio,
                          rank_deficient=bool(rank_deficient))
    return x, cert


@dataclasses.dataclass(frozen=True)
class RatioSummary:
    """Empirical distribution of the sketch residual ratio."""

    samples: np.ndarray
    quantiles: dict

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    @property
    def std(self) -> float:
        return float(np.std(self.samples))

    def coverage(self, lo: float, hi: float) -> float:
        """Fraction of samples inside [lo, hi]."""
        inside = (self.samples >= lo) & (self.samples <= hi)
        return float(np.mean(inside))


def residual_ratio_trial(m: int, d: int, k: int, f_kind: str, trials: int,
                         rng, depth: int = 3) -> RatioSummary:
    """Monte Carlo distribution of ||F M y|| / ||M y||.

    Each trial draws a Gaussian problem M = (A | b), solves it exactly,
    forms y = (x; -1) (normalized so its last entry is -1, making M y
    the exact residual vector), draws a fresh sketch F of the requested
    kind, and records the ratio.  With the pre-scaled operators the
    ratios concentrate around 1; f_kind "orthogonal" exercises the dual
    setting of a fixed orthogonal sketch against random Gaussian input.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if not 1 <= k <= m:
        raise ValueError(f"sketch rows k={k} out of range 1..{m}")
    stream = as_stream(rng)
    samples = np.empty(trials)
    for t in range(trials):
        A = stream.normal((m, d))
        b = stream.normal(m)
        problem = LsrProblem(A, b)
        x_star = lsr_exact(problem)
        y = np.concatenate([x_star, [-1.0]])
        My = problem.stacked() @ y
        norm_My = np.linalg.norm(My)
        if f_kind == "gaussian":
            F = gaussian_sketch_operator(m, k, stream)
        elif f_kind == "orthogonal":
            F = structured_sketch_operator(m, k, stream, depth=depth)
        else:
            raise ValueError(f"unknown sketch kind {f_kind!r}")
        FMy = F.apply(My)
        samples[t] = np.linalg.norm(FMy) / norm_My
    qs = (0.05, 0.25, 0.50, 0.75, 0.95)
    quantiles = {q: float(np.quantile(samples, q)) for q in qs}
    return RatioSummary(samples=samples, quantiles=quantiles)
