import numpy as np
import pytest

from stiefel_radon.errors import InadmissibleParameters
from stiefel_radon.inversion import (intertwined_inversion, local_inversion, nonlocal_inversion,
                                     sphere_chain_multiplier)
from stiefel_radon.linalg import Stream
from stiefel_radon.manifolds import sample_stiefel
from stiefel_radon.montecarlo import combined_stderr
from stiefel_radon.testfuncs import make_test_function as mk


@pytest.mark.parametrize("d", [2, 4])
def test_sphere_chain_is_identity(d):
    r = sphere_chain_multiplier(4, d)
    assert np.isclose(r["product"], 1.0, rtol=1e-12)
    assert np.isclose(r["multiplier"], r["multiplier_quadrature"], rtol=1e-10)
    assert np.isclose(r["eigenvalue"], ((d + 1) / 2) ** 2)


def test_local_inversion_recovers_f():
    f = mk("trace_quadratic", {"S": np.diag([1.0, 0, 0, 0])}, n=4, m=1)
    v = sample_stiefel(4, 1, Stream(11))[0]
    est = local_inversion(f, v, 1, 0, 30_000, 1)
    assert abs(est.mean - f.eval_frame(v)) < 4 * est.stderr + 0.01


def test_local_inversion_fast_path_agrees():
    f = mk("trace_quadratic", {"S": np.diag([1.0, 2, 0, 0])}, n=4, m=1)
    v = sample_stiefel(4, 1, Stream(2))[0]
    a = local_inversion(f, v, 1, 0, 20_000, 1)
    b = local_inversion(f, v, 1, 0, 20_000, 2, fast=True)
    assert abs(a.mean - b.mean) < 4 * combined_stderr(a, b)


def test_local_inversion_harmonic():
    f = mk("sphere_harmonic", {"d": 2}, n=4, m=1)
    v = sample_stiefel(4, 1, Stream(5))[0]
    est = local_inversion(f, v, 1, 0, 30_000, 3)
    assert abs(est.mean - f.eval_frame(v)) < 4 * est.stderr + 0.01


def test_intertwining_orders():
    f = mk("trace_quadratic", {"S": np.diag([1.0, 0, 0, 0])}, n=4, m=1)
    v = sample_stiefel(4, 1, Stream(12))[0]
    for order in ("DF", "FD"):
        est = intertwined_inversion(f, v, order, 20_000, 1)
        assert abs(est.mean - f.eval_frame(v)) < 4 * est.stderr + 0.01
    with pytest.raises(InadmissibleParameters):
        intertwined_inversion(f, v, "XY", 10, 1)


def test_nonlocal_fast_and_general_agree():
    f = mk("trace_quadratic", {"S": np.diag([1.0, 2, 3, 4, 5, 6])}, n=6, m=2)
    v = sample_stiefel(6, 2, Stream(5))[0]
    fast = nonlocal_inversion(f, v, 3, 100_000, 1)
    slow = nonlocal_inversion(f, v, 3, 600, 2, fast=False)
    assert abs(fast.mean - f.eval_frame(v)) < 4 * fast.stderr + 0.02 * f.eval_frame(v)
    assert abs(fast.mean - slow.mean) < 4 * combined_stderr(fast, slow)


def test_admissibility():
    f = mk("constant", n=6, m=2)
    v = np.eye(6)[:, :2]
    with pytest.raises(InadmissibleParameters):
        nonlocal_inversion(f, v, 2, 10, 0)  # m < k violated
    with pytest.raises(InadmissibleParameters):
        nonlocal_inversion(mk("constant", n=7, m=2), np.eye(7)[:, :2], 3, 10, 0)  # n - k - m even
    with pytest.raises(InadmissibleParameters):
        local_inversion(f, v, 3, 0, 10, 0)  # n - m + j - k odd
    with pytest.raises(InadmissibleParameters):
        intertwined_inversion(mk("constant", n=5, m=1), np.eye(5)[:, :1], "DF", 10, 0)
