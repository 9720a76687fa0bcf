import numpy as np
import pytest

from stiefel_radon.errors import InadmissibleParameters, NotRightInvariant, OutOfConvergenceRegion, PoleAtLambda
from stiefel_radon.linalg import Stream
from stiefel_radon.manifolds import sample_stiefel
from stiefel_radon.montecarlo import combined_stderr
from stiefel_radon.special import cosine_mass, normalized_cosine_mass, sine_mass
from stiefel_radon.testfuncs import InvariantFunction, make_test_function as mk
from stiefel_radon.transforms import (a_km, cosine_dual, cosine_transform, duality_pairing, funk_dual,
                                      funk_transform, grassmann_composition, grassmann_radon, intermediate_funk,
                                      intermediate_funk_dual, normalized_cosine, sine_transform)


def close(a, b, sigmas=4.0):
    return abs(a.mean - b.mean) <= sigmas * combined_stderr(a, b)


def test_cosine_mass_haar_and_tilted():
    one = mk("constant", n=5, m=1)
    u = np.eye(5)[:, 3:]
    haar = cosine_transform(one, u, 1.0, 100_000, 1)
    assert abs(haar.mean - cosine_mass(5, 1, 2, 1.0).value) < 4 * haar.stderr
    # with kernel-tilted samples a constant integrand gives the mass exactly
    tilt = cosine_transform(one, u, 1.0, 1000, 1, sampler="tilted")
    assert np.isclose(tilt.mean, cosine_mass(5, 1, 2, 1.0).value, rtol=1e-12)


def test_tilted_and_haar_agree_on_nonconstant():
    f = mk("trace_quadratic", {"S": np.diag([3.0, 1, 0, 2, 1])}, n=5, m=2)
    u = sample_stiefel(5, 3, Stream(4))[0]
    a = cosine_transform(f, u, 1.5, 100_000, 2)
    b = cosine_transform(f, u, 1.5, 100_000, 3, sampler="tilted")
    assert close(a, b)


def test_dual_cosine_tilted_vs_haar():
    phi = mk("trace_quadratic", {"S": np.diag([1.0, 2, 3, 4])}, n=4, m=2)
    v = sample_stiefel(4, 1, Stream(5))[0]
    a = cosine_dual(phi, v, 0.5, 100_000, 2)
    b = cosine_dual(phi, v, 0.5, 100_000, 3, sampler="tilted")
    assert close(a, b)


def test_sine_mass():
    one = mk("constant", n=6, m=2)
    u = sample_stiefel(6, 2, Stream(3))[0]
    est = sine_transform(one, u, 2.0, 100_000, 1, normalized=False)
    assert abs(est.mean - sine_mass(6, 2, 2.0).value) < 4 * est.stderr


def test_convergence_region_and_poles():
    one = mk("constant", n=4, m=1)
    with pytest.raises(OutOfConvergenceRegion):
        cosine_transform(one, np.eye(4)[:, 3:], -2.0, 10, 0)
    with pytest.raises(OutOfConvergenceRegion):
        sine_transform(one, np.eye(4)[:, :1], -3.0, 10, 0)
    with pytest.raises(PoleAtLambda):
        normalized_cosine(mk("constant", n=6, m=2), np.eye(6)[:, 3:], 0.0, 10, 0)


def test_funk_on_sphere():
    # average of v_1^2 over the great sphere orthogonal to e_4 is 1/3
    f = mk("trace_quadratic", {"S": np.diag([1.0, 0, 0, 0])}, n=4, m=1)
    est = funk_transform(f, np.eye(4)[:, 3:], 100_000, 2)
    assert abs(est.mean - 1 / 3) < 4 * est.stderr
    assert funk_transform(f, np.eye(4)[:, :1], 100, 2).mean == 0.0


def test_intermediate_reductions():
    f = mk("trace_quadratic", {"S": np.diag([1.0, 2, 3, 4, 5])}, n=5, m=2)
    u = sample_stiefel(5, 2, Stream(9))[0]
    assert close(intermediate_funk(f, u, 0, 40_000, 3), funk_transform(f, u, 40_000, 4))
    assert close(intermediate_funk(f, u, 1, 40_000, 3), grassmann_composition(f, u, 1, 40_000, 4))
    phi = mk("trace_quadratic", {"S": np.diag([2.0, 1, 0, 3, 1])}, n=5, m=2)
    v = sample_stiefel(5, 2, Stream(7))[0]
    assert close(intermediate_funk_dual(phi, v, 0, 40_000, 3), funk_dual(phi, v, 40_000, 4))


def test_funk_convention_invariance():
    f = mk("trace_quadratic", {"S": np.diag([1.0, 2, 3, 4, 5])}, n=5, m=1)
    u = sample_stiefel(5, 2, Stream(1))[0]
    a = funk_transform(f, u, 40_000, 3)
    b = funk_transform(f, u, 40_000, 4, convention="reversed")
    assert close(a, b)


@pytest.mark.parametrize("tag,n,m,k,lam,j", [("funk", 4, 1, 1, None, 0), ("cosine", 4, 1, 2, 1.0, 0),
                                             ("ifunk", 5, 2, 2, None, 1)])
def test_duality(tag, n, m, k, lam, j):
    f = mk("trace_quadratic", {"S": np.diag(np.arange(1.0, n + 1))}, n=n, m=m)
    phi = mk("trace_quadratic", {"S": np.diag(np.arange(n, 0.0, -1))}, n=n, m=k)
    lhs, rhs = duality_pairing(tag, f, phi, 200, 200, 11, lam=lam, j=j)
    assert close(lhs, rhs)


def test_akm_and_radon_identities():
    phi = mk("trace_quadratic", {"S": np.diag([1.0, 2, 3, 4, 5])}, n=5, m=2)
    v = sample_stiefel(5, 2, Stream(2))[0]
    est = a_km(phi, v, 100, 0)
    assert est.stderr == 0 and np.isclose(est.mean, phi.eval_frame(v))
    assert np.isclose(grassmann_radon(phi, v, "dual", 2, 2, 10, 0).mean, phi.eval_frame(v))
    bad = InvariantFunction(5, 2, "x", phi.extension, right_invariant=False)
    with pytest.raises(NotRightInvariant):
        a_km(bad, v, 10, 0)


def test_radon_matches_funk():
    f = mk("trace_quadratic", {"S": np.diag([1.0, 0, 0, 0])}, n=4, m=1)
    a = funk_transform(f, np.eye(4)[:, 3:], 50_000, 1)
    b = grassmann_radon(f, np.eye(4)[:, :3], "forward", 1, 3, 50_000, 2)
    assert close(a, b)


def test_determinism_and_seed_dependence():
    f = mk("trace_quadratic", {"S": np.diag([1.0, 2, 3, 4])}, n=4, m=1)
    u = np.eye(4)[:, 2:]
    a = cosine_transform(f, u, 1.0, 10_000, 5)
    assert a == cosine_transform(f, u, 1.0, 10_000, 5)
    assert a.mean != cosine_transform(f, u, 1.0, 10_000, 6).mean


def test_admissibility():
    f = mk("constant", n=5, m=3)
    with pytest.raises(InadmissibleParameters):
        funk_transform(f, np.eye(5)[:, :3], 10, 0)
