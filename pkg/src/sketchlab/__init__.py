"""Structured sketching for low-rank approximation and least squares.

The library builds cheap structured random multipliers (abridged
Hadamard/Fourier transforms, sparse circulants, inverse bidiagonals,
sums and products of these), sketches a matrix through them, and
certifies rank-r approximations through a residual-norm test.  A
recursive variant grows the sketch until the test passes.  The same
operator toolkit provides sketching-based least-squares solvers with
accuracy certificates, plus an experiment harness that reproduces the
published accuracy tables.
"""

from .bench import (
    ExperimentConfig,
    ExperimentReport,
    MULTIPLIER_RECIPES,
    NormSummary,
    TableReport,
    build_multiplier,
    flop_audit,
    monte_carlo_gaussian_norms,
    reproduce_table,
    run_experiment,
)
from .inputs import (
    FactorGaussianSpec,
    SpectrumSpec,
    factor_gaussian,
    finite_difference_inverse,
    laplacian_matrix,
    svd_spectrum_matrix,
)
from .linalg import (
    numerical_rank,
    orthonormalize_columns,
    singular_values,
    spectral_norm,
)
from .lsr import (
    LsrCertificate,
    LsrProblem,
    RatioSummary,
    SketchParams,
    gaussian_sketch_operator,
    lsr_exact,
    lsr_sketched,
    residual_ratio_trial,
    sketch_dimension,
    structured_sketch_operator,
)
from .matio import read_matrix, read_tsv, write_matrix
from .multipliers import (
    FlopTally,
    Multiplier,
    abridged_fourier,
    abridged_f_circulant,
    abridged_hadamard,
    aph,
    apf,
    asph,
    aspf,
    column_permuted,
    dense_gaussian,
    dense_multiplier,
    dense_pm1_0,
    diagonal,
    from_descriptor,
    gaussian_toeplitz,
    givens_chain,
    hadamard_primitive,
    inverse_bidiagonal,
    multiplier_product,
    multiplier_sum,
    permutation,
    randomized_abridged,
    restrict_columns,
    restrict_rows,
    scale,
    shift,
    sparse_f_circulant,
    uniformly_sparse,
)
from .rangefinder import (
    ErrorEstimator,
    RangeFinderResult,
    frievalds_error_estimate,
    heuristic_compression,
    low_rank_factors,
    power_scheme,
    randomized_compression,
    range_finder,
    recursive_range_finder,
    theoretical_error_bound,
)
from .rng import RngStream, as_stream, derive_seed

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
