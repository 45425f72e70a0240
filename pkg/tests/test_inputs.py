"""Benchmark input generators: planted-spectrum matrices, the averaging
Laplacian, discretized inverse operators, and noisy factor products."""

import numpy as np
import pytest

import sketchlab.inputs as si
from sketchlab.linalg import numerical_rank, spectral_norm
from sketchlab.rangefinder import power_scheme
from sketchlab.rng import RngStream


# -- planted spectrum ----------------------------------------------------------

def test_spectrum_matrix_planted_singular_values():
    M = si.svd_spectrum_matrix(si.SpectrumSpec(256, 8), RngStream(1))
    s = np.linalg.svd(M, compute_uv=False)
    assert M.shape == (256, 256)
    assert abs(s[0] - 1.0) <= 1e-10
    assert abs(s[7] - 1.0 / 8.0) <= 1e-10
    assert s[8] <= 2e-10
    assert numerical_rank(M, 1e-5) == 8


def test_spectrum_matrix_rank_zero_is_pure_tail():
    M = si.svd_spectrum_matrix(si.SpectrumSpec(64, 0), RngStream(2))
    assert spectral_norm(M) <= 1e-10 * (1 + 1e-6)


def test_spectrum_matrix_recovers_prescribed_values():
    spec = si.SpectrumSpec(64, 4, tail=1e-12)
    s = np.linalg.svd(si.svd_spectrum_matrix(spec, RngStream(3)),
                      compute_uv=False)
    expect = 1.0 / np.arange(1, 5)
    assert np.max(np.abs(s[:4] - expect) / expect) <= 1e-10


def test_spectrum_matrix_deterministic():
    spec = si.SpectrumSpec(64, 4)
    a = si.svd_spectrum_matrix(spec, RngStream(9))
    b = si.svd_spectrum_matrix(spec, RngStream(9))
    assert np.array_equal(a, b)


def test_spectrum_spec_validation():
    with pytest.raises(ValueError):
        si.SpectrumSpec(8, 9)
    with pytest.raises(ValueError):
        si.SpectrumSpec(0, 0)
    with pytest.raises(ValueError):
        si.SpectrumSpec(8, 2, tail=-1.0)


# -- averaging Laplacian -------------------------------------------------------

def test_laplacian_is_normalized_real_circulant():
    L = si.laplacian_matrix(200)
    assert L.shape == (200, 200)
    assert np.isrealobj(L)
    assert abs(spectral_norm(L) - 1.0) <= 1e-10
    # circulant: invariant under a simultaneous row and column rotation
    assert np.allclose(L, np.roll(np.roll(L, 1, 0), 1, 1), atol=1e-15)


def test_laplacian_spectrum_decay_pattern():
    s = np.linalg.svd(si.laplacian_matrix(200), compute_uv=False)
    # top value simple, then doubled pairs decaying geometrically
    assert abs(s[0] - 1.0) <= 1e-12
    assert abs(s[1] - s[2]) <= 1e-12
    assert abs(s[3] - s[4]) <= 1e-12
    assert s[1] < s[0] and s[3] < s[1]


@pytest.mark.parametrize("n", [200, 400])
def test_laplacian_powered_numerical_rank_three(n):
    L = si.laplacian_matrix(n)
    assert numerical_rank(power_scheme(L, 3), 1e-5) == 3


# -- discretized inverse operators ----------------------------------------------

@pytest.mark.parametrize("preset,shape,rank", [("small", (88, 160), 5),
                                               ("medium", (208, 400), 44),
                                               ("large", (408, 800), 66)])
def test_fd_presets(preset, shape, rank):
    F = si.finite_difference_inverse(preset)
    assert F.shape == shape
    assert abs(spectral_norm(F) - 1.0) <= 1e-10
    got = numerical_rank(F, 1e-5)
    assert abs(got - rank) <= max(2, 0.2 * rank)


def test_fd_custom_grid_matches_small_preset():
    F = si.finite_difference_inverse(grid_h=5, grid_w=8)
    assert np.array_equal(F, si.finite_difference_inverse("small"))


def test_fd_deterministic():
    assert np.array_equal(si.finite_difference_inverse("small"),
                          si.finite_difference_inverse("small"))


def test_fd_rejects_unknown_preset():
    with pytest.raises(ValueError):
        si.finite_difference_inverse("bogus")


# -- factor products -------------------------------------------------------------

def test_factor_gaussian_exact_rank_without_noise():
    M = si.factor_gaussian(si.FactorGaussianSpec(20, 15, 3, 0.0), RngStream(4))
    assert M.shape == (20, 15)
    assert np.linalg.matrix_rank(M) == 3


def test_factor_gaussian_noise_floor():
    spec = si.FactorGaussianSpec(512, 512, 16, 1e-12)
    M = si.factor_gaussian(spec, RngStream(5))
    s = np.linalg.svd(M, compute_uv=False)
    assert numerical_rank(M, 1e-6) == 16
    # tail sits at the requested absolute noise level, up to svd roundoff
    # (computed tail values carry absolute error of order eps * sigma_1)
    roundoff = 64 * np.finfo(float).eps * s[0]
    assert s[16] <= 1e-12 + roundoff
    assert s[16] >= 1e-14


def test_factor_gaussian_square_full_rank():
    M = si.factor_gaussian(si.FactorGaussianSpec(6, 6, 6, 0.0), RngStream(6))
    assert np.linalg.matrix_rank(M) == 6


def test_factor_gaussian_deterministic():
    spec = si.FactorGaussianSpec(20, 15, 3, 0.0)
    assert np.array_equal(si.factor_gaussian(spec, RngStream(4)),
                          si.factor_gaussian(spec, RngStream(4)))


def test_factor_gaussian_spec_validation():
    with pytest.raises(ValueError):
        si.FactorGaussianSpec(4, 5, 6)
    with pytest.raises(ValueError):
        si.FactorGaussianSpec(4, 5, 2, noise_norm=-1.0)
