import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stiefel_radon import jets as J
from stiefel_radon.diffops import (apply_diffop, beltrami_delta_lambda, bernstein_check, cayley_laplace_expand,
                                   delta_lambda_ell, fd_stencil, kernel_diff_cosine_dual, kernel_diff_sine,
                                   kernel_margin_ok)
from stiefel_radon.errors import (BackendDisagreement, InadmissibleParameters, OutOfConvergenceRegion,
                                  SingularKernelDerivative, TooLarge)
from stiefel_radon.linalg import Stream
from stiefel_radon.manifolds import sample_orthogonal, sample_stiefel
from stiefel_radon.montecarlo import combined_stderr
from stiefel_radon.special import normalized_cosine_mass
from stiefel_radon.testfuncs import make_test_function as mk
from stiefel_radon.transforms import cosine_dual, sine_transform

seeds = st.integers(0, 2**31)


def test_expansion_structure():
    assert cayley_laplace_expand(1, 1).terms == ((1, ((0, 0),)),)
    # (sum d_i1^2)(sum d_i2^2) - (sum d_i1 d_i2)^2
    assert cayley_laplace_expand(2, 1).terms == ((1, ((0, 0), (1, 1))), (-1, ((0, 1), (0, 1))))
    assert cayley_laplace_expand(1, 3).order == 6
    # the two 3-cycles give the same multiset of factors and merge
    assert sum(abs(c) for c, _ in cayley_laplace_expand(3, 1).terms) == math.factorial(3)
    assert len(cayley_laplace_expand(2, 1).coordinate_terms(6)) == 45
    with pytest.raises(TooLarge):
        cayley_laplace_expand(2, 2)


@pytest.mark.parametrize("m,ell,n", [(1, 1, 4), (1, 2, 4), (2, 1, 4), (2, 1, 6), (1, 3, 3)])
@given(seed=seeds, lam=st.floats(-2.9, 1.5))
def test_bernstein_identity_jets(m, ell, n, seed, lam):
    x = np.random.default_rng(seed).standard_normal((3, n, m))
    assert np.max(bernstein_check(m, ell, n, lam, x)) < 1e-8


def test_bernstein_identity_order_six_m3():
    x = np.random.default_rng(7).standard_normal((2, 5, 3))
    assert np.max(bernstein_check(3, 1, 5, -0.8, x)) < 1e-8


def test_bernstein_identity_fd():
    x = np.random.default_rng(0).standard_normal((5, 6, 2))
    assert np.max(bernstein_check(2, 1, 6, -1.3, x, "fd")) < 1e-2


@settings(max_examples=10)
@given(seeds, st.sampled_from([(4, 1), (4, 2), (5, 3)]))
def test_fourier_symbol(seed, nm):
    n, m = nm
    rng = np.random.default_rng(seed)
    y, x = rng.standard_normal((2, n, m))
    op = cayley_laplace_expand(m, 1)
    got = apply_diffop(op, lambda z: J.cos(J.trace(J.transpose(y) @ z)), x)
    want = (-1) ** m * np.linalg.det(y.T @ y) * np.cos(np.trace(y.T @ x))
    assert np.isclose(got, want, rtol=1e-8, atol=1e-10)


def test_linear_functions_are_killed(rng):
    a = rng.standard_normal((4, 2))
    op = cayley_laplace_expand(2, 1)
    x = rng.standard_normal((4, 2))
    assert apply_diffop(op, lambda z: J.trace(J.transpose(z) @ a) + 3.0, x) == 0.0


@given(seeds)
def test_left_invariance(seed):
    rng = np.random.default_rng(seed)
    rho = sample_orthogonal(5, Stream(seed))[0]
    x = rng.standard_normal((5, 2))
    s = np.diag([1.0, 2, 3, 4, 5])
    F = lambda z: J.power(J.det(J.transpose(z) @ (s @ z)), 0.7)
    op = cayley_laplace_expand(2, 1)
    assert np.isclose(apply_diffop(op, lambda z: F(rho @ z), x), apply_diffop(op, F, rho @ x), rtol=1e-8)


def test_fd_stencil_validates_step():
    with pytest.raises(InadmissibleParameters):
        fd_stencil(cayley_laplace_expand(1, 1), 4, h=0.5)


def test_cross_validation():
    x = np.random.default_rng(2).standard_normal((4, 1))
    F = lambda z: J.power(J.det(J.transpose(z) @ z), -0.4)
    op = cayley_laplace_expand(1, 1)
    apply_diffop(op, F, x, cross_validate=True)
    # a function that is only piecewise smooth at the scale of the step
    G = lambda z: J.cos(J.trace(J.transpose(z) @ z) * 400.0)
    with pytest.raises(BackendDisagreement):
        apply_diffop(op, G, x, cross_validate=True, h=0.05)


def test_delta_lambda_constant_and_beltrami():
    v = sample_stiefel(4, 1, Stream(1), 5)
    assert np.allclose(delta_lambda_ell(mk("constant", n=4, m=1), v, -3.0, 1), 0.25)
    for d in (2, 4):
        f = mk("sphere_harmonic", {"d": d}, n=4, m=1)
        got = delta_lambda_ell(f, v, -3.0, 1) / f.eval_frame(v)
        assert np.allclose(got, ((d + 1) / 2) ** 2, rtol=1e-8)
        assert math.isclose(beltrami_delta_lambda(4, d, -3.0), ((d + 1) / 2) ** 2)


@given(seeds, st.floats(-2.5, 1.0))
def test_delta_lambda_right_invariant(seed, lam):
    f = mk("trace_quadratic", {"S": np.diag([1.0, 2, 3, 4, 5])}, n=5, m=2)
    v = sample_stiefel(5, 2, Stream(seed))[0]
    beta = sample_orthogonal(2, Stream(seed).child("b"))[0]
    assert np.isclose(delta_lambda_ell(f, v @ beta, lam, 1), delta_lambda_ell(f, v, lam, 1), rtol=1e-8)


def test_kernel_margin():
    assert kernel_margin_ok(1, 2, -1.5, 1)
    assert not kernel_margin_ok(1, 2, -2.9, 1)
    with pytest.raises(SingularKernelDerivative):
        kernel_diff_cosine_dual(mk("constant", n=4, m=2), np.eye(4)[:, :1], -2.9, 1, 100, 0, mode="kernel")
    with pytest.raises(OutOfConvergenceRegion):
        kernel_diff_cosine_dual(mk("constant", n=4, m=2), np.eye(4)[:, :1], -5.0, 1, 100, 0)


def test_kernel_diff_cosine_dual_constant_matches_mass():
    v = sample_stiefel(4, 1, Stream(3))[0]
    est = kernel_diff_cosine_dual(mk("constant", n=4, m=2), v, -1.5, 1, 50_000, 1)
    assert abs(est.mean - normalized_cosine_mass(4, 1, 2, -1.5).value) < 4 * est.stderr


def test_kernel_and_function_modes_agree():
    phi = mk("trace_quadratic", {"S": np.diag([1.0, 2, 3, 4])}, n=4, m=2)
    v = sample_stiefel(4, 1, Stream(4))[0]
    a = kernel_diff_cosine_dual(phi, v, -1.5, 1, 40_000, 1, mode="kernel")
    b = kernel_diff_cosine_dual(phi, v, -1.5, 1, 40_000, 2, mode="function")
    c = cosine_dual(phi, v, -1.5, 40_000, 3, sampler="tilted", normalized=True)
    assert abs(a.mean - c.mean) < 4 * combined_stderr(a, c)
    assert abs(b.mean - c.mean) < 4 * combined_stderr(b, c)


def test_sine_closed_loop_and_fast_path():
    f = mk("trace_quadratic", {"S": np.diag([1.0, 2, 3, 4])}, n=4, m=1)
    u = sample_stiefel(4, 1, Stream(6))[0]
    a = kernel_diff_sine(f, u, -2.5, 1, 40_000, 1)
    b = sine_transform(f, u, -2.5, 40_000, 2, sampler="tilted")
    assert abs(a.mean - b.mean) < 4 * combined_stderr(a, b)
    fast = kernel_diff_sine(f, u, -3.0, 1, 20_000, 1, mode="function")
    slow = kernel_diff_sine(f, u, -3.0, 1, 20_000, 1, mode="function", fast=False)
    assert np.isclose(fast.mean, slow.mean, rtol=1e-8)


def test_sine_reconstruction_sphere_harmonic():
    f = mk("sphere_harmonic", {"d": 2}, n=4, m=1)
    u = sample_stiefel(4, 1, Stream(8))[0]
    est = kernel_diff_sine(f, u, -3.0, 1, 40_000, 1)
    assert abs(est.mean - f.eval_frame(u)) < 4 * est.stderr
