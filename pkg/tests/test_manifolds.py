import numpy as np
import pytest
from hypothesis import given, strategies as st

from stiefel_radon.errors import InadmissibleParameters
from stiefel_radon.linalg import Stream
from stiefel_radon.manifolds import (check_frame, cos_metric, frame_complement, is_frame, pivot_complement,
                                     rotation_to_frame, sample_relative, sample_stiefel, sin_metric,
                                     smooth_basis)
from stiefel_radon.special import cosine_mass

seeds = st.integers(0, 2**31)
dims = st.tuples(st.integers(2, 7), st.integers(1, 6)).filter(lambda t: t[1] < t[0])


@given(seeds, dims)
def test_samples_are_frames(seed, nm):
    n, m = nm
    v = sample_stiefel(n, m, Stream(seed), 5)
    assert all(is_frame(x) for x in v)


def test_haar_second_moment():
    v = sample_stiefel(5, 2, Stream(1), 100_000)
    p = (v @ np.swapaxes(v, -1, -2)).mean(axis=0)
    assert np.allclose(p, 0.4 * np.eye(5), atol=6e-3)


@given(seeds, dims)
def test_complement_and_rotation(seed, nm):
    n, k = nm
    u = sample_stiefel(n, k, Stream(seed))[0]
    c = frame_complement(u)
    full = np.concatenate([u, c], axis=1)
    assert np.allclose(full.T @ full, np.eye(n), atol=1e-10)
    anchor = np.eye(n)[:, n - k:]
    g = rotation_to_frame(u, anchor)
    assert np.allclose(g @ anchor, u, atol=1e-10)
    assert np.allclose(g.T @ g, np.eye(n), atol=1e-10)


@given(seeds, dims)
def test_smooth_basis_spans_x(seed, nm):
    n, m = nm
    x = np.random.default_rng(seed).standard_normal((n, m))
    b = smooth_basis(x, pivot_complement(x))
    assert np.allclose(b.T @ b, np.eye(n), atol=1e-9)
    # first m columns span x: projecting x onto them loses nothing
    assert np.allclose(b[:, :m] @ (b[:, :m].T @ x), x, atol=1e-9)


@pytest.mark.parametrize("p,q", [(1, 2), (2, 1), (2, 2), (2, 3)])
def test_relative_sampler_nu_zero_is_haar(p, q):
    n = 6
    w = sample_relative(n, p, q, 0.0, Stream(2), 100_000)
    proj = (w @ np.swapaxes(w, -1, -2)).mean(axis=0)
    assert np.allclose(proj, q / n * np.eye(n), atol=8e-3)


@pytest.mark.parametrize("n,p,q,nu", [(4, 1, 1, 2.0), (5, 2, 1, 1.5), (6, 3, 2, -0.5)])
def test_relative_sampler_tilts_by_kernel(n, p, q, nu):
    # E_tilt[g] * mass(nu) = E_haar[g |a'w|^nu] for g = |a'w|^2
    a = np.eye(n)[:, :p]
    w = sample_relative(n, p, q, nu, Stream(3), 200_000)
    c = cos_metric(a, w) if q <= p else cos_metric(w, a)
    r, s = min(p, q), max(p, q)
    lhs = (c ** 2).mean() * cosine_mass(n, r, s, nu).value
    assert np.isclose(lhs, cosine_mass(n, r, s, nu + 2).value, rtol=0.01)


def test_relative_sampler_region():
    with pytest.raises(InadmissibleParameters):
        sample_relative(5, 1, 3, -3.5, Stream(0))
    with pytest.raises(InadmissibleParameters):
        sample_relative(4, 3, 2, 0.0, Stream(0))


@given(seeds)
def test_sylvester_complement(seed):
    u, v = sample_stiefel(6, 2, Stream(seed), 2)
    assert np.isclose(sin_metric(u, v), cos_metric(frame_complement(u), v) ** 2, atol=1e-12)


def test_check_frame_rejects():
    with pytest.raises(Exception):
        check_frame(np.ones((3, 1)))
