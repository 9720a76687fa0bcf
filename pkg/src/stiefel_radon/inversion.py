"""Inversion of the Funk-type transforms by the operators ``Delta_{lam,ell}``.

Each chain is evaluated the same way: a composite transform is written as a
Monte Carlo average over sample tuples whose frames are built from smooth
bases of the argument ``x``. The ``Delta_{m-n,ell}`` of the homogeneous
extension is then applied per sample with the jets backend (or finite
differences), so the same samples are used at every point of a stencil.

Chains:

* ``local_inversion`` - ``f = delta_j Delta_{m-n,ell} *F^{(j)} F^{(j)} f`` with
  ``ell = (n - m + j - k) / 2``.
* ``nonlocal_inversion`` - ``f = c Delta_{m-n,ell} *F^{(1)} F f`` for
  ``n - k - m`` odd, ``ell = (n - k - m + 1) / 2``.
* ``intertwined_inversion`` - ``f = F D F f`` with ``D = c Delta_{m-n,ell}``,
  ``ell = (n - 2m) / 2`` (``n`` even, ``k = m``).
"""

from __future__ import annotations

import numpy as np

from . import jets as J
from .diffops import FD_STEP, _prefactor, apply_diffop, cayley_laplace_expand
from .errors import InadmissibleParameters, require
from .linalg import Stream
from .manifolds import (anchor_u0, check_frame, pivot_complement, rotation_to_frame,
                        sample_orthogonal, sample_stiefel, smooth_basis)
from .montecarlo import TransformEstimate, estimate
from .special import constant
from .testfuncs import (InvariantFunction, beltrami_eigenvalue, funk_hecke_multiplier,
                        funk_hecke_quadrature)
from .transforms import _finite, _params, as_stream, ifunk_dual_relative, ifunk_from_basis


def _det_power(x, p):
    return J.power(J.det(J.transpose(x) @ x), p)


def _last_columns_basis(x, e, k):
    """Smooth orthogonal basis whose last ``k`` columns span ``x``."""
    b = smooth_basis(x, e)
    return J.concat([b[..., :, k:], b[..., :, :k]], axis=-1)


def _check_point(v, f: InvariantFunction):
    v = check_frame(v, "v")
    require(v.shape == (f.n, f.m), "v is a frame in V(n, m) of f")
    return v


# --------------------------------------------------------------------------
# Chains *F^{(j1)} F^{(j2)}


class _ChainSamples:
    """Sample tuples for ``*F^{(jd)}`` followed by ``F^{(jf)}``.

    Tuple ``i`` holds ``b`` in ``O(n-m)``, ``a`` in ``O(n-k+jd)`` (dual step)
    and ``gam`` in ``O(k)``, ``omega`` in ``V(n-k+jf, m)`` (forward step).
    """

    def __init__(self, n, m, k, jd, jf, stream: Stream):
        self.n, self.m, self.k, self.jd, self.jf = n, m, k, jd, jf
        self.stream = stream

    def dual(self, lo, hi):
        n, m, k, jd = self.n, self.m, self.k, self.jd
        b = sample_orthogonal(n - m, self.stream.child("b"), hi - lo, lo)
        a = sample_orthogonal(n - k + jd, self.stream.child("a"), hi - lo, lo)
        return ifunk_dual_relative(b, a, n, m, k, jd)

    def forward(self, lo, hi):
        n, m, k, jf = self.n, self.m, self.k, self.jf
        gam = sample_orthogonal(k, self.stream.child("gam"), hi - lo, lo)
        om = sample_stiefel(n - k + jf, m, self.stream.child("omega"), hi - lo, lo)
        return gam, om


def _chain_estimate(f: InvariantFunction, v, k: int, jd: int, jf: int, ell: int, scale: float, N: int,
                    stream: Stream, params: dict, backend: str, h: float, fast: bool) -> TransformEstimate:
    """``scale * Delta_{m-n,ell} (*F^{(jd)} F^{(jf)} f)(v)`` by per-sample differentiation."""
    n, m = v.shape
    mu = m - n + 2 * ell
    op = cayley_laplace_expand(m, ell)
    pref = _prefactor(m, ell) * scale
    ss = _ChainSamples(n, m, k, jd, jf, stream)
    ev = pivot_complement(v)

    if fast and f.quadratic_form is not None:
        # The forward step of tr(w'Sw) is exact: averaging over gam and omega
        # gives alpha (tr S - beta tr(u'Su)) with the constants below.
        S = f.quadratic_form
        alpha = m / (n - k + jf)
        beta = 1.0 - jf / k

        def G(x):
            b = smooth_basis(x, ev)
            return _det_power(x, mu / 2)[..., None, None] * (J.transpose(b) @ (S @ b))

        T = apply_diffop(op, G, v, backend, h)
        T0 = apply_diffop(op, lambda x: _det_power(x, mu / 2), v, backend, h)
        tr = float(np.trace(S))

        def chunk(lo, hi):
            rel = ss.dual(lo, hi)
            return pref * alpha * (tr * T0 - beta * np.einsum("ij,sia,sja->s", T, rel, rel))

        return estimate(chunk, N, stream.seed, dict(params, fast=True))

    bv = smooth_basis(v, ev)

    def chunk(lo, hi):
        rel = ss.dual(lo, hi)
        gam, om = ss.forward(lo, hi)
        eu = pivot_complement(bv @ rel)

        def F(x):
            u = smooth_basis(x, ev)[..., None, :, :] @ rel
            w = ifunk_from_basis(_last_columns_basis(u, eu, k), gam, om, k, jf)
            return _det_power(x, mu / 2)[..., None] * f.eval_extension(w, 0.0)

        return pref * apply_diffop(op, F, v, backend, h)

    return estimate(chunk, N, stream.seed, params)


def local_inversion(f: InvariantFunction, v, k: int, j: int, N: int, stream, backend: str = "jets",
                    h: float = FD_STEP, fast: bool = False) -> TransformEstimate:
    """Reconstruct ``f(v)`` as ``delta_j Delta_{m-n,ell} *F^{(j)} F^{(j)} f``.

    Needs ``1 <= m <= k <= n - m``, ``0 <= j < k`` and ``n - m + j - k`` even
    and positive; then ``ell = (n - m + j - k) / 2``. With ``j = 0`` the
    chain is the Funk transform followed by its dual.

    Parameters
    ----------
    fast : bool
        For ``f(v) = tr(v'Sv)`` evaluate the forward step in closed form.
    """
    v = _check_point(v, f)
    n, m = v.shape
    require(m <= k <= n - m, "m <= k <= n-m")
    require(0 <= j < k, "0 <= j < k")
    if (n - m + j - k) % 2 or n - m + j - k <= 0:
        raise InadmissibleParameters("violated: n - m + j - k even and positive")
    ell = (n - m + j - k) // 2
    scale = _finite(constant("delta_j", n, m, k, j), "delta_j")
    params = _params(n=n, m=m, k=k, j=j, ell=ell, chain="local")
    return _chain_estimate(f, v, k, j, j, ell, scale, N, as_stream(stream).child("inv-local"),
                           params, backend, h, fast)


def nonlocal_inversion(f: InvariantFunction, v, k: int, N: int, stream, backend: str = "jets",
                       h: float = FD_STEP, fast: bool = True) -> TransformEstimate:
    """Reconstruct ``f(v)`` as ``c Delta_{m-n,ell} *F^{(1)} F f``.

    Needs ``1 <= m < k <= n - m`` and ``n - k - m`` odd; then
    ``ell = (n - k - m + 1) / 2``. ``fast`` as in :func:`local_inversion`.
    """
    v = _check_point(v, f)
    n, m = v.shape
    require(m < k <= n - m, "m < k <= n-m")
    if (n - k - m) % 2 == 0:
        raise InadmissibleParameters("violated: n - k - m odd")
    ell = (n - k - m + 1) // 2
    scale = _finite(constant("nonlocal_c", n, m, k), "inversion constant")
    params = _params(n=n, m=m, k=k, ell=ell, chain="nonlocal")
    return _chain_estimate(f, v, k, 1, 0, ell, scale, N, as_stream(stream).child("inv-nonlocal"),
                           params, backend, h, fast)


def intertwined_inversion(f: InvariantFunction, v, order: str, N: int, stream, backend: str = "jets",
                          h: float = FD_STEP) -> TransformEstimate:
    """Reconstruct ``f(v)`` from ``phi = F f`` with ``D = c Delta_{m-n,ell}``.

    ``order="DF"`` evaluates ``(D F phi)(v)``; ``order="FD"`` evaluates
    ``(F D phi)(v)``, differentiating around each Funk sample frame. Both
    need ``n`` even and ``k = m <= n/2``; ``ell = (n - 2m) / 2``.
    """
    v = _check_point(v, f)
    n, m = v.shape
    if n % 2 or 2 * m >= n:
        raise InadmissibleParameters("violated: n even and 2m < n")
    ell = (n - 2 * m) // 2
    scale = _finite(constant("intertwining_c", n, m), "intertwining constant")
    stream = as_stream(stream).child("inv-intertwined")
    params = _params(n=n, m=m, k=m, ell=ell, order=order, chain="intertwined")
    if order == "DF":
        return _chain_estimate(f, v, m, 0, 0, ell, scale, N, stream, params, backend, h, False)
    if order != "FD":
        raise InadmissibleParameters(f"unknown order {order!r}")
    mu = m - n + 2 * ell
    op = cayley_laplace_expand(m, ell)
    pref = _prefactor(m, ell) * scale
    g = rotation_to_frame(v, anchor_u0(n, m))

    def chunk(lo, hi):
        # outer Funk sample u_i orthogonal to v, inner Funk sample of phi at u_i
        th = sample_stiefel(n - m, m, stream.child("theta"), hi - lo, lo)
        om = sample_stiefel(n - m, m, stream.child("omega"), hi - lo, lo)
        u = g[:, : n - m] @ th
        eu = pivot_complement(u)

        def F(x):
            b = _last_columns_basis(x, eu, m)
            w = b[..., :, : n - m] @ om
            return _det_power(x, mu / 2) * f.eval_extension(w, 0.0)

        return pref * apply_diffop(op, F, u, backend, h)

    return estimate(chunk, N, stream.seed, params)


# --------------------------------------------------------------------------
# Exact sphere chain


def sphere_chain_multiplier(n: int, d: int) -> dict:
    """Multiplier of ``delta_0 Delta_{1-n,ell} *F F`` on degree-``d`` harmonics, ``m = k = 1``.

    Combines ``delta_0``, the eigenvalue of ``Delta_{1-n,1}`` from the
    Beltrami formula and the squared Funk-Hecke multiplier. Only the
    ``ell = 1`` case (``n = 4``) is covered. The quadrature value of the
    multiplier is returned for comparison.
    """
    require(n == 4, "n = 4 (ell = 1)")
    lam = 1 - n
    eig = -0.25 * ((lam + 2) * (n + lam) + beltrami_eigenvalue(n, d))
    delta0 = _finite(constant("delta_0", n, 1, 1), "delta_0")
    c = funk_hecke_multiplier(n, d)
    cq = funk_hecke_quadrature(n, d, 0.3)
    return {"delta_0": delta0, "eigenvalue": eig, "multiplier": c, "multiplier_quadrature": cq,
            "product": delta0 * eig * c * c}
