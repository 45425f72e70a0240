"""Reproducibility contract of the seeded stream."""

import numpy as np
import pytest

from sketchlab.rng import RngStream, as_stream, derive_seed


def test_equal_seeds_give_equal_sequences():
    a = RngStream(1234).normal((3, 4))
    b = RngStream(1234).normal((3, 4))
    assert np.array_equal(a, b)


def test_distinct_seeds_differ():
    assert not np.array_equal(RngStream(1).normal(8), RngStream(2).normal(8))


def test_seed_must_be_integer():
    with pytest.raises(TypeError):
        RngStream(1.5)


def test_derive_seed_is_xor():
    assert derive_seed(1729, 0) == 1729
    seeds = {derive_seed(1729, i) for i in range(100)}
    assert len(seeds) == 100


def test_signs_are_unit_and_balanced():
    s = RngStream(7).signs(10000)
    assert set(np.unique(s)) == {-1.0, 1.0}
    assert abs(s.mean()) < 0.05


def test_unit_modulus_lies_on_circle():
    z = RngStream(8).unit_modulus(500)
    assert np.max(np.abs(np.abs(z) - 1.0)) <= 1e-12


def test_choice_without_replacement_is_distinct():
    idx = RngStream(9).choice_without_replacement(64, 10)
    assert len(np.unique(idx)) == 10
    assert idx.min() >= 0 and idx.max() < 64


def test_child_streams_are_reproducible():
    parent = RngStream(77)
    child_seed = RngStream(77).spawn_seed()
    assert np.array_equal(parent.child().normal(5), RngStream(child_seed).normal(5))


def test_as_stream_passthrough_and_coercion():
    s = RngStream(3)
    assert as_stream(s) is s
    assert np.array_equal(as_stream(3).normal(4), RngStream(3).normal(4))
