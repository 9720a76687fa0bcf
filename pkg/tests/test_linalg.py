import numpy as np
import pytest
from hypothesis import given, strategies as st

from stiefel_radon.errors import NotPositiveDefinite, RankDeficient
from stiefel_radon.linalg import (Stream, abs_det, chisquare_batch, gaussian_batch, polar_decompose,
                                  qr_positive, sqrt_inv_sqrt)

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(0, 5000), st.integers(1, 3000))
def test_draws_depend_only_on_index(seed, start, count):
    s = Stream(seed).child("x")
    whole = gaussian_batch(2, 3, s, start, count)
    cut = count // 2
    parts = np.concatenate([gaussian_batch(2, 3, s, start, cut), gaussian_batch(2, 3, s, start + cut, count - cut)])
    assert np.array_equal(whole, parts)


def test_children_are_independent_streams():
    a = gaussian_batch(3, 3, Stream(1).child("a"), 0, 10)
    b = gaussian_batch(3, 3, Stream(1).child("b"), 0, 10)
    assert not np.allclose(a, b)
    assert np.array_equal(a, gaussian_batch(3, 3, Stream(1).child("a"), 0, 10))


def test_chisquare_mean():
    x = chisquare_batch(np.array([2.5, 7.0]), Stream(3), 0, 200_000)
    assert np.allclose(x.mean(axis=0), [2.5, 7.0], rtol=0.02)


@given(seeds, st.integers(1, 6), st.integers(0, 3))
def test_qr_positive(seed, c, extra):
    x = np.random.default_rng(seed).standard_normal((c + extra, c))
    q, r = qr_positive(x)
    assert np.allclose(q @ r, x)
    assert np.allclose(q.T @ q, np.eye(c), atol=1e-12)
    assert np.all(np.diag(r) > 0)
    assert np.allclose(np.tril(r, -1), 0)


def test_qr_rank_deficient():
    x = np.ones((4, 2))
    with pytest.raises(RankDeficient):
        qr_positive(x)


@given(seeds, st.integers(1, 4), st.integers(0, 3))
def test_polar(seed, m, extra):
    x = np.random.default_rng(seed).standard_normal((m + extra, m))
    v, r = polar_decompose(x)
    root, inv_root = sqrt_inv_sqrt(r)
    assert np.allclose(v.T @ v, np.eye(m), atol=1e-10)
    assert np.allclose(v @ root, x, atol=1e-10)
    assert np.allclose(root @ inv_root, np.eye(m), atol=1e-10)
    assert np.isclose(abs_det(x), np.sqrt(np.linalg.det(r)))


def test_sqrt_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        sqrt_inv_sqrt(np.diag([1.0, -1.0]))
    with pytest.raises(NotPositiveDefinite):
        sqrt_inv_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))
