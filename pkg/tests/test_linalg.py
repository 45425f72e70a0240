"""Dense kernel tests: each routine is checked against either closed-form
values or an independent SVD-based oracle."""

import numpy as np
import pytest

from sketchlab import inputs, linalg
from sketchlab.rng import RngStream


# -- gaussian_matrix --------------------------------------------------------

def test_gaussian_matrix_deterministic_per_seed():
    a = linalg.gaussian_matrix(1, 1, 7)
    b = linalg.gaussian_matrix(1, 1, 7)
    assert a.shape == (1, 1)
    assert a[0, 0] == b[0, 0]


def test_gaussian_matrix_bitwise_reproducible():
    A = linalg.gaussian_matrix(17, 9, 123)
    B = linalg.gaussian_matrix(17, 9, 123)
    assert np.array_equal(A, B)
    C = linalg.gaussian_matrix(17, 9, 124)
    assert not np.array_equal(A, C)


def test_gaussian_matrix_sample_moments():
    G = linalg.gaussian_matrix(200, 200, 42)
    assert abs(G.mean()) < 0.02
    assert abs(G.var() - 1.0) < 0.05


def test_gaussian_matrix_rejects_zero_dimension():
    with pytest.raises(ValueError):
        linalg.gaussian_matrix(0, 4, 1)
    with pytest.raises(ValueError):
        linalg.gaussian_matrix(4, 0, 1)


def test_gaussian_spectral_norm_rarely_exceeds_bound():
    # 1 + sqrt(64) + sqrt(64) = 17; the bound fails with tiny probability
    over = 0
    for t in range(1000):
        G = linalg.gaussian_matrix(64, 64, 5000 + t)
        if np.linalg.norm(G, 2) >= 17.0:
            over += 1
    assert over <= 10


# -- orthonormalize_columns -------------------------------------------------

def test_orthonormalize_identity_is_fixed_point():
    U = linalg.orthonormalize_columns(np.eye(4), drop_tol=0.0)
    assert U.shape == (4, 4)
    assert np.allclose(U @ U.T, np.eye(4), atol=1e-14)
    # identity columns survive up to sign
    assert np.allclose(np.abs(U), np.eye(4), atol=1e-14)


def test_orthonormalize_drops_duplicate_column():
    c = np.array([[1.0], [2.0], [2.0]])
    U = linalg.orthonormalize_columns(np.hstack([c, c]))
    assert U.shape == (3, 1)
    assert abs(np.linalg.norm(U[:, 0]) - 1.0) <= 1e-12


def test_orthonormalize_all_columns_dropped():
    U = linalg.orthonormalize_columns(np.zeros((5, 3)))
    assert U.shape == (5, 0)


def test_orthonormalize_span_matches_svd_projector():
    M = linalg.gaussian_matrix(50, 10, 3)
    U = linalg.orthonormalize_columns(M)
    assert U.shape == (50, 10)
    assert np.linalg.norm(U.T @ U - np.eye(10), 2) <= 1e-12 * 10
    S = np.linalg.svd(M, full_matrices=False)[0]
    assert np.linalg.norm(U @ U.T - S @ S.T, 2) <= 1e-10


def test_orthonormalize_gram_identity_invariant():
    for seed, (m, n) in enumerate([(30, 6), (80, 25), (12, 12)]):
        U = linalg.orthonormalize_columns(linalg.gaussian_matrix(m, n, 60 + seed))
        w = U.shape[1]
        assert np.linalg.norm(U.T @ U - np.eye(w), 2) <= 1e-12 * max(w, 1)


# -- svd --------------------------------------------------------------------

def test_svd_diagonal():
    out = linalg.svd(np.diag([3.0, 2.0, 1.0]))
    assert np.allclose(out.sigma, [3.0, 2.0, 1.0])
    assert np.allclose(np.abs(out.S), np.eye(3), atol=1e-14)
    # column signs must agree pairwise so the product reconstructs
    assert np.allclose(out.reconstruct(), np.diag([3.0, 2.0, 1.0]))


def test_svd_rank_one_outer_product():
    rng = RngStream(11)
    u = rng.normal(8)
    u *= 2.0 / np.linalg.norm(u)
    v = rng.normal(5)
    v *= 5.0 / np.linalg.norm(v)
    out = linalg.svd(np.outer(u, v))
    assert out.rank == 1
    assert out.sigma[0] == pytest.approx(10.0, rel=1e-12)


def test_svd_reconstruction_residual():
    M = linalg.gaussian_matrix(30, 20, 8)
    out = linalg.svd(M)
    assert np.linalg.norm(out.reconstruct() - M, 2) <= 1e-10 * out.sigma[0]
    assert np.linalg.norm(out.S.T @ out.S - np.eye(out.rank), 2) <= 1e-12 * out.rank
    assert np.linalg.norm(out.T.T @ out.T - np.eye(out.rank), 2) <= 1e-12 * out.rank
    assert np.all(np.diff(out.sigma) <= 0)
    assert np.all(out.sigma > 0)


def test_svd_roundtrip_large():
    M = linalg.gaussian_matrix(512, 512, 99)
    out = linalg.svd(M)
    assert np.linalg.norm(out.reconstruct() - M, 2) <= 1e-10 * out.sigma[0]


def test_svd_rejects_nonfinite():
    M = np.eye(3)
    M[1, 1] = np.nan
    with pytest.raises(ValueError):
        linalg.svd(M)


# -- numerical_rank ---------------------------------------------------------

def test_numerical_rank_spectrum_input():
    M = inputs.svd_spectrum_matrix(inputs.SpectrumSpec(n=256, r=8), 21)
    assert linalg.numerical_rank(M, 1e-5) == 8


def test_numerical_rank_zero_matrix():
    assert linalg.numerical_rank(np.zeros((4, 6)), 1e-5) == 0


def test_numerical_rank_threshold_straddles():
    assert linalg.numerical_rank(np.diag([1.0, 1e-7]), 1e-5) == 1


# -- truncate_svd -----------------------------------------------------------

def test_truncate_diagonal():
    Mr, E = linalg.truncate_svd(np.diag([3.0, 2.0, 1.0]), 2)
    assert np.allclose(Mr, np.diag([3.0, 2.0, 0.0]), atol=1e-12)
    assert np.linalg.norm(E, 2) == pytest.approx(1.0, abs=1e-12)


def test_truncate_full_rank_leaves_no_error():
    M = linalg.gaussian_matrix(6, 6, 2)
    _, E = linalg.truncate_svd(M, 6)
    assert np.linalg.norm(E, 2) <= 1e-10 * np.linalg.norm(M, 2)


def test_truncate_frobenius_tail_identity():
    M = linalg.gaussian_matrix(40, 40, 5)
    _, E = linalg.truncate_svd(M, 5)
    sv = np.linalg.svd(M, compute_uv=False)
    tail = np.sum(sv[5:] ** 2)
    assert np.sum(np.abs(E) ** 2) == pytest.approx(tail, rel=1e-9)


def test_truncate_rejects_oversized_rank():
    with pytest.raises(ValueError):
        linalg.truncate_svd(np.eye(3), 4)


def test_eckart_young_floor():
    M = linalg.gaussian_matrix(20, 12, 31)
    sv = np.linalg.svd(M, compute_uv=False)
    for r in (1, 3, 7):
        _, E = linalg.truncate_svd(M, r)
        assert np.linalg.norm(E, 2) == pytest.approx(sv[r], abs=1e-10 * sv[0])


# -- pseudo_inverse ---------------------------------------------------------

def test_pseudo_inverse_of_invertible_matrix():
    M = linalg.gaussian_matrix(3, 3, 17) + 3.0 * np.eye(3)
    P = linalg.pseudo_inverse(M)
    assert np.allclose(P, np.linalg.inv(M), rtol=1e-10, atol=1e-12)


def test_pseudo_inverse_zero_convention():
    P = linalg.pseudo_inverse(np.zeros((4, 7)))
    assert P.shape == (7, 4)
    assert not P.any()


def test_pseudo_inverse_moore_penrose_identities():
    rng = RngStream(23)
    M = rng.normal((10, 3)) @ rng.normal((3, 6))
    P = linalg.pseudo_inverse(M)
    s = np.linalg.norm(M, 2)
    assert np.linalg.norm(M @ P @ M - M, 2) <= 1e-9 * s
    assert np.linalg.norm(P @ M @ P - P, 2) <= 1e-9 / s
    assert np.linalg.norm((M @ P).T - M @ P, 2) <= 1e-9
    assert np.linalg.norm((P @ M).T - P @ M, 2) <= 1e-9


def test_pseudo_inverse_norm_is_reciprocal_smallest_sigma():
    M = linalg.gaussian_matrix(12, 7, 40)
    sv = np.linalg.svd(M, compute_uv=False)
    assert np.linalg.norm(linalg.pseudo_inverse(M), 2) == pytest.approx(
        1.0 / sv[-1], rel=1e-10)


# -- norms ------------------------------------------------------------------

def test_norms_of_diagonal():
    M = np.diag([5.0, 1.0])
    assert linalg.spectral_norm(M) == pytest.approx(5.0, rel=1e-12)
    assert linalg.frobenius_norm(M) == pytest.approx(np.sqrt(26.0), rel=1e-12)


def test_spectral_norm_unitary_invariance():
    M = linalg.gaussian_matrix(20, 14, 6)
    Q = np.linalg.qr(linalg.gaussian_matrix(20, 20, 7))[0]
    assert linalg.spectral_norm(Q @ M) == pytest.approx(
        linalg.spectral_norm(M), rel=1e-12)


def test_spectral_norm_power_iteration_agrees_with_svd():
    M = linalg.gaussian_matrix(20, 20, 9)
    ref = np.linalg.svd(M, compute_uv=False)[0]
    assert linalg.spectral_norm(M, method="power") == pytest.approx(ref, rel=1e-8)


def test_frobenius_spectral_inequality():
    for seed in range(3):
        M = linalg.gaussian_matrix(15, 10, 70 + seed)
        assert linalg.frobenius_norm(M) <= np.sqrt(10) * linalg.spectral_norm(M) + 1e-12
