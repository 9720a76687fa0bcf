import numpy as np
from hypothesis import given, strategies as st

from stiefel_radon import jets as J
from stiefel_radon.linalg import qr_positive

seeds = st.integers(0, 2**31)


def _fd_second(F, x, h1, h2, eps=1e-4):
    f = lambda s, t: F(x + s * h1 + t * h2)
    return (f(eps, eps) - f(eps, -eps) - f(-eps, eps) + f(-eps, -eps)) / (4 * eps * eps)


@given(seeds)
def test_det_power_second_derivative(seed):
    rng = np.random.default_rng(seed)
    x, h1, h2 = rng.standard_normal((3, 5, 2))
    F = lambda z: J.power(J.det(J.transpose(z) @ z), -0.65)
    jet = F(J.seed_directions(x, np.stack([h1, h2])))
    assert np.isclose(jet.value, F(x))
    assert np.isclose(jet.top, _fd_second(F, x, h1, h2), rtol=1e-5, atol=1e-7)


@given(seeds)
def test_inverse_and_trace(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    h = rng.standard_normal((1, 3, 3))
    jet = J.trace(J.inv(J.seed_directions(x, h)))
    # d tr(x^{-1})[h] = -tr(x^{-1} h x^{-1})
    xi = np.linalg.inv(x)
    assert np.isclose(jet.top, -np.trace(xi @ h[0] @ xi))


def test_cos_exp_series():
    x = np.array([[0.3]])
    h = np.ones((3, 1, 1))
    assert np.isclose(J.cos(J.seed_directions(x, h)).top, np.sin(0.3))
    assert np.isclose(J.exp(J.seed_directions(x, h)).top, np.exp(0.3))


@given(seeds, st.integers(1, 3))
def test_gram_schmidt_is_positive_qr(seed, p):
    a = np.random.default_rng(seed).standard_normal((5, p))
    assert np.allclose(J.gram_schmidt(a), qr_positive(a)[0], atol=1e-12)


def test_gram_schmidt_derivative_matches_fd(rng):
    a, h = rng.standard_normal((2, 4, 2))
    jet = J.gram_schmidt(J.seed_directions(a, h[None]))
    eps = 1e-6
    fd = (J.gram_schmidt(a + eps * h) - J.gram_schmidt(a - eps * h)) / (2 * eps)
    assert np.allclose(jet.top, fd, atol=1e-7)


def test_concat_broadcasts_constant_block(rng):
    x = rng.standard_normal((7, 4, 1))
    jet = J.seed_directions(x, rng.standard_normal((7, 1, 4, 1)))
    out = J.concat([jet, np.eye(4)[:, 1:]], axis=-1)
    assert out.shape == (7, 4, 4)
    assert np.allclose(out.top[..., 1:], 0)
