"""Monte Carlo estimators for the cosine, sine and Funk-type transforms.

Every estimator takes a sample count ``N`` and a :class:`~stiefel_radon.linalg.Stream`
(or an integer seed). Samples are addressed by index, so the result does not
depend on how the index range is split across workers.

Frame conventions: ``u0 = [0; I_k]`` and ``v0 = [I_m; 0]``; ``g_u`` is an
orthogonal matrix with ``g_u u0 = u`` built by :func:`rotation_to_frame`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (InadmissibleParameters, NotRightInvariant, OutOfConvergenceRegion,
                     PoleAtLambda, require)
from .linalg import Stream
from .manifolds import (anchor_u0, anchor_v0, check_frame, cos_metric, frame_complement,
                        rotation_to_frame, sample_orthogonal, sample_relative, sample_stiefel,
                        sin_metric)
from .montecarlo import TransformEstimate, estimate, exact, nested_counts
from .special import (MeroValue, constant, cosine_mass, normalized_cosine_mass,
                      normalized_sine_mass, sine_mass)
from .testfuncs import InvariantFunction


def as_stream(stream) -> Stream:
    if isinstance(stream, Stream):
        return stream
    return Stream(int(stream))


def _finite(value: MeroValue, what: str) -> float:
    if value.is_pole:
        raise PoleAtLambda(f"{what} has a pole of order {value.pole_order}", value.pole_order)
    return value.value


def _params(**kw) -> dict:
    return {k: (float(v) if isinstance(v, float) else v) for k, v in kw.items() if v is not None}


# --------------------------------------------------------------------------
# Sample sets


@dataclass(frozen=True)
class SampleSet:
    """Frames drawn once in coordinates relative to an anchor, reusable at
    any evaluation point.

    Samples are ``q``-frames ``X_i`` in ``R^n`` expressed in a basis whose
    first ``p`` vectors span the anchor subspace. With ``nu = None`` they are
    Haar; otherwise they have density ``|a'X|^nu / mass`` (see
    :func:`~stiefel_radon.manifolds.sample_relative`), and :meth:`weights`
    returns the importance weights that turn averages back into Haar
    integrals of ``|a'X|^nu`` times the integrand.
    """

    n: int
    p: int
    q: int
    count: int
    stream: Stream
    nu: float | None = None

    def frames(self, lo: int, hi: int) -> np.ndarray:
        if self.nu is None:
            return sample_stiefel(self.n, self.q, self.stream, hi - lo, lo)
        return sample_relative(self.n, self.p, self.q, self.nu, self.stream, hi - lo, lo)

    def cosines(self, x: np.ndarray) -> np.ndarray:
        """``|a'x|`` with ``a = [I_p; 0]``."""
        a = np.eye(self.n)[:, : self.p]
        return cos_metric(a, x) if self.q <= self.p else cos_metric(x, a)

    def mass(self) -> float:
        if self.nu is None:
            return 1.0
        r, s = min(self.p, self.q), max(self.p, self.q)
        return _finite(cosine_mass(self.n, r, s, self.nu), "mass")


def _completed(u: np.ndarray) -> np.ndarray:
    """``[u | u~]``, an orthogonal matrix whose first columns are ``u``."""
    return np.concatenate([u, frame_complement(u)], axis=-1)


# --------------------------------------------------------------------------
# Cosine and sine transforms


def _check_cosine(n, m, k, lam):
    require(1 <= m, "1 <= m")
    require(m <= k, "m <= k")
    require(k <= n - 1, "k <= n-1")
    if lam <= m - k - 1:
        raise OutOfConvergenceRegion(f"violated: lam > m-k-1 = {m - k - 1}")


def _kernel_average(values, kernel, sampler: str, N: int, stream: Stream, n: int, p: int, q: int,
                    lam: float, basis: np.ndarray, params: dict) -> TransformEstimate:
    """Shared driver: Haar samples weighted by the kernel, or kernel-tilted samples.

    ``basis`` is an orthogonal matrix whose first ``p`` columns span the
    anchor subspace of the kernel; ``kernel(w)`` evaluates the kernel at
    ambient frames ``w``; ``values(w)`` is the integrand without kernel.
    """
    if sampler == "haar":
        def chunk(lo, hi):
            w = sample_stiefel(n, q, stream, hi - lo, lo)
            return values(w) * kernel(w) ** lam
        return estimate(chunk, N, stream.seed, params)
    if sampler != "tilted":
        raise ValueError(f"unknown sampler {sampler!r}")
    ss = SampleSet(n, p, q, N, stream.child("tilted"), lam)
    mass = ss.mass()

    def chunk(lo, hi):
        return mass * values(basis @ ss.frames(lo, hi))

    return estimate(chunk, N, stream.seed, dict(params, sampler="tilted"))


def cosine_transform(f: InvariantFunction, u, lam: float, N: int, stream, sampler: str = "haar",
                     normalized: bool = False) -> TransformEstimate:
    """``(C^lam f)(u) = int f(v) |u'v|_m^lam d_*v`` over ``V(n, m)``.

    Parameters
    ----------
    f : InvariantFunction on ``V(n, m)``
    u : frame, shape ``(n, k)``
    lam : float
        Must satisfy ``lam > m - k - 1``.
    sampler : {"haar", "tilted"}
        ``"tilted"`` draws ``v`` with density proportional to the kernel,
        which keeps the variance finite for negative ``lam``.
    normalized : bool
        Multiply by ``gamma_{m,k}(lam)``; raises :class:`PoleAtLambda` at its poles.
    """
    u = check_frame(u, "u")
    n, k, m = u.shape[0], u.shape[1], f.m
    _check_cosine(n, m, k, lam)
    stream = as_stream(stream)
    scale = 1.0
    if normalized:
        scale = _finite(constant("gamma_mk", n, m, k, lam=lam), "gamma_mk")
    p = _params(n=n, m=m, k=k, lam=lam, normalized=normalized or None)
    est = _kernel_average(f.eval_frame, lambda w: cos_metric(u, w), sampler, N, stream.child("cosine"),
                          n, k, m, lam, _completed(u), p)
    return est.scaled(scale) if normalized else est


def cosine_dual(phi: InvariantFunction, v, lam: float, N: int, stream, sampler: str = "haar",
                normalized: bool = False) -> TransformEstimate:
    """``(*C^lam phi)(v) = int phi(u) |u'v|_m^lam d_*u`` over ``V(n, k)``."""
    v = check_frame(v, "v")
    n, m, k = v.shape[0], v.shape[1], phi.m
    _check_cosine(n, m, k, lam)
    stream = as_stream(stream)
    scale = 1.0
    if normalized:
        scale = _finite(constant("gamma_mk", n, m, k, lam=lam), "gamma_mk")
    p = _params(n=n, m=m, k=k, lam=lam, normalized=normalized or None)
    est = _kernel_average(phi.eval_frame, lambda w: cos_metric(w, v), sampler, N,
                          stream.child("cosine-dual"), n, m, k, lam, _completed(v), p)
    return est.scaled(scale) if normalized else est


def normalized_cosine(f, u, lam, N, stream, sampler="haar") -> TransformEstimate:
    return cosine_transform(f, u, lam, N, stream, sampler, normalized=True)


def normalized_cosine_dual(phi, v, lam, N, stream, sampler="haar") -> TransformEstimate:
    return cosine_dual(phi, v, lam, N, stream, sampler, normalized=True)


def sine_transform(f: InvariantFunction, u, lam: float, N: int, stream, sampler: str = "haar",
                   normalized: bool = True) -> TransformEstimate:
    """``(S^lam f)(u) = delta_m(lam) int det(I - v'uu'v)^{lam/2} f(v) d_*v``.

    With ``normalized=False`` the factor ``delta_m(lam)`` is omitted.
    """
    u = check_frame(u, "u")
    n, m = u.shape
    require(f.m == m and f.n == n, "f and u live on the same V(n, m)")
    require(2 * m <= n, "2m <= n")
    if lam <= 2 * m - 1 - n:
        raise OutOfConvergenceRegion(f"violated: lam > 2m-1-n = {2 * m - 1 - n}")
    stream = as_stream(stream)
    scale = 1.0
    if normalized:
        scale = _finite(constant("delta_m", n, m, lam=lam), "delta_m")
    # sin-kernel of u equals the cos-kernel of the complement of u
    ut = frame_complement(u)
    basis = np.concatenate([ut, u], axis=-1)
    p = _params(n=n, m=m, lam=lam, normalized=normalized or None)
    est = _kernel_average(f.eval_frame, lambda w: np.sqrt(sin_metric(u, w)), sampler, N,
                          stream.child("sine"), n, n - m, m, lam, basis, p)
    return est.scaled(scale) if normalized else est


# --------------------------------------------------------------------------
# Funk-type transforms (frame-level kernels, batched over leading axes)


def funk_frames(u, theta, convention: str = "standard") -> np.ndarray:
    """``g_u [theta; 0]`` for ``theta`` in ``V(n-k, m)``."""
    n, k = u.shape[-2:]
    g = rotation_to_frame(u, anchor_u0(n, k), convention)
    return g[..., :, : n - k] @ theta


def funk_dual_frames(v, theta, convention: str = "standard") -> np.ndarray:
    """``g_v [0; theta]`` for ``theta`` in ``V(n-m, k)``."""
    n, m = v.shape[-2:]
    g = rotation_to_frame(v, anchor_v0(n, m), convention)
    return g[..., :, m:] @ theta


def _check_funk(n, m, k):
    require(1 <= m, "1 <= m")
    require(1 <= k, "1 <= k")
    require(k + m <= n, "k+m <= n")


def funk_transform(f: InvariantFunction, u, N: int, stream, convention: str = "standard") -> TransformEstimate:
    """``(F_{m,k} f)(u)``: average of ``f`` over ``m``-frames orthogonal to ``u``."""
    u = check_frame(u, "u")
    n, k = u.shape
    m = f.m
    _check_funk(n, m, k)
    stream = as_stream(stream).child("funk")

    def chunk(lo, hi):
        theta = sample_stiefel(n - k, m, stream, hi - lo, lo)
        return f.eval_frame(funk_frames(u, theta, convention))

    return estimate(chunk, N, stream.seed, _params(n=n, m=m, k=k))


def funk_dual(phi: InvariantFunction, v, N: int, stream, convention: str = "standard") -> TransformEstimate:
    """``(*F_{m,k} phi)(v)``: average of ``phi`` over ``k``-frames orthogonal to ``v``."""
    v = check_frame(v, "v")
    n, m = v.shape
    k = phi.m
    _check_funk(n, m, k)
    stream = as_stream(stream).child("funk-dual")

    def chunk(lo, hi):
        theta = sample_stiefel(n - m, k, stream, hi - lo, lo)
        return phi.eval_frame(funk_dual_frames(v, theta, convention))

    return estimate(chunk, N, stream.seed, _params(n=n, m=m, k=k))


def _check_interm(n, m, k, j):
    require(1 <= m, "1 <= m")
    require(m <= k, "m <= k")
    require(k <= n - 1, "k <= n-1")
    require(n - k + j >= m, "n-k+j >= m")
    require(0 <= j <= m - 1, "0 <= j <= m-1")


def ifunk_frames(u, gam, omega, j: int, convention: str = "standard") -> np.ndarray:
    """``g_u diag(I_{n-k}, gam) [omega; 0]`` with ``gam`` in ``O(k)``, ``omega`` in ``V(n-k+j, m)``."""
    n, k = u.shape[-2:]
    return ifunk_from_basis(rotation_to_frame(u, anchor_u0(n, k), convention), gam, omega, k, j)


def ifunk_from_basis(g, gam, omega, k: int, j: int):
    """As :func:`ifunk_frames` for a given ``g`` whose last ``k`` columns span ``u``.

    ``g`` may be a jet.
    """
    n = g.shape[-1]
    out = g[..., :, : n - k] @ omega[..., : n - k, :]
    if j:
        out = out + g[..., :, n - k :] @ (gam[..., :, :j] @ omega[..., n - k :, :])
    return out


def ifunk_dual_frames(v, b, a, k: int, j: int, convention: str = "standard") -> np.ndarray:
    """``g_v diag(I_m, b) diag(a, I_{k-j}) u0`` with ``b`` in ``O(n-m)``, ``a`` in ``O(n-k+j)``."""
    n, m = v.shape[-2:]
    return ifunk_dual_from_basis(rotation_to_frame(v, anchor_v0(n, m), convention), b, a, m, k, j)


def ifunk_dual_relative(b, a, n: int, m: int, k: int, j: int) -> np.ndarray:
    """``diag(I_m, b) diag(a, I_{k-j}) u0``, the dual sample frame before rotation."""
    r = n - k + j
    # diag(a, I_{k-j}) u0: the first j columns of u0 sit inside the a-block
    au = np.zeros(np.broadcast_shapes(a.shape[:-2], b.shape[:-2]) + (n, k))
    au[..., :r, :j] = a[..., :, r - j :]
    au[..., r:, j:] = np.eye(k - j)
    out = au.copy()
    out[..., m:, :] = b @ au[..., m:, :]
    return out


def ifunk_dual_from_basis(g, b, a, m: int, k: int, j: int):
    """As :func:`ifunk_dual_frames` for a given ``g`` whose first ``m`` columns span ``v``."""
    return g @ ifunk_dual_relative(b, a, g.shape[-1], m, k, j)


def _nested(per_outer, n_outer: int, stream: Stream, params: dict) -> TransformEstimate:
    """Estimate over outer indices of inner means; stderr from the outer level."""
    est = estimate(per_outer, n_outer, stream.seed, params, chunk=64)
    return est


def intermediate_funk(f: InvariantFunction, u, j: int, N: int, stream, n_outer: int | None = None,
                      n_inner: int | None = None, convention: str = "standard") -> TransformEstimate:
    """``(F^{(j)}_{m,k} f)(u)``: double average over ``gam`` in ``O(k)`` and ``omega`` in ``V(n-k+j, m)``."""
    u = check_frame(u, "u")
    n, k = u.shape
    m = f.m
    _check_interm(n, m, k, j)
    stream = as_stream(stream).child("ifunk")
    no, ni = nested_counts(N, n_outer, n_inner)

    def per_outer(lo, hi):
        gam = sample_orthogonal(k, stream.child("gamma"), hi - lo, lo)
        om = sample_stiefel(n - k + j, m, stream.child("omega"), (hi - lo) * ni, lo * ni)
        om = om.reshape(hi - lo, ni, n - k + j, m)
        w = ifunk_frames(u, gam[:, None], om, j, convention)
        return f.eval_frame(w).mean(axis=1)

    return _nested(per_outer, no, stream, _params(n=n, m=m, k=k, j=j, n_outer=no, n_inner=ni))


def intermediate_funk_dual(phi: InvariantFunction, v, j: int, N: int, stream, n_outer: int | None = None,
                           n_inner: int | None = None, convention: str = "standard") -> TransformEstimate:
    """``(*F^{(j)}_{m,k} phi)(v)`` for right-``O(k)``-invariant ``phi`` on ``V(n, k)``."""
    v = check_frame(v, "v")
    n, m = v.shape
    k = phi.m
    _check_interm(n, m, k, j)
    if not phi.right_invariant:
        raise NotRightInvariant("intermediate_funk_dual needs a right O(k)-invariant phi")
    stream = as_stream(stream).child("ifunk-dual")
    no, ni = nested_counts(N, n_outer, n_inner)

    def per_outer(lo, hi):
        b = sample_orthogonal(n - m, stream.child("b"), hi - lo, lo)
        a = sample_orthogonal(n - k + j, stream.child("a"), (hi - lo) * ni, lo * ni)
        a = a.reshape(hi - lo, ni, n - k + j, n - k + j)
        w = ifunk_dual_frames(v, b[:, None], a, k, j, convention)
        return phi.eval_frame(w).mean(axis=1)

    return _nested(per_outer, no, stream, _params(n=n, m=m, k=k, j=j, n_outer=no, n_inner=ni))


def akm_frames(v, a, k: int) -> np.ndarray:
    """``g_v diag(a, I_m)`` with ``g_v [0; I_m] = v`` and ``a`` in ``V(n-m, k-m)``."""
    n, m = v.shape[-2:]
    anchor = np.zeros((n, m))
    anchor[n - m :, :] = np.eye(m)
    g = rotation_to_frame(v, anchor)
    first = g[..., :, : n - m] @ a
    return np.concatenate(np.broadcast_arrays(first, np.broadcast_to(v, first.shape[:-1] + (m,))), axis=-1)


def a_km(phi: InvariantFunction, v, N: int, stream) -> TransformEstimate:
    """``(A_{k,m} phi)(v)``; the identity (zero variance) when ``k = m``."""
    v = check_frame(v, "v")
    n, m = v.shape
    k = phi.m
    require(1 <= m, "1 <= m")
    require(m <= k, "m <= k")
    require(k <= n - 1, "k <= n-1")
    if not phi.right_invariant:
        raise NotRightInvariant("a_km needs a right O(k)-invariant phi")
    stream = as_stream(stream).child("akm")
    params = _params(n=n, m=m, k=k)
    if k == m:
        return exact(float(phi.eval_frame(v)), stream.seed, params, samples=N)

    def chunk(lo, hi):
        a = sample_stiefel(n - m, k - m, stream, hi - lo, lo)
        return phi.eval_frame(akm_frames(v, a, k))

    return estimate(chunk, N, stream.seed, params)


def grassmann_radon(f: InvariantFunction, eta, direction: str, p: int, q: int, N: int, stream) -> TransformEstimate:
    """Radon transforms between Grassmannians, on frame representatives.

    ``forward``: ``eta`` spans a ``q``-plane; average of ``f`` over Haar
    ``p``-planes inside it. ``dual``: ``eta`` spans a ``p``-plane; average of
    ``f`` over Haar ``q``-planes containing it. ``p = q`` is the identity.
    """
    eta = check_frame(eta, "eta")
    n = eta.shape[0]
    require(1 <= p, "1 <= p")
    require(p <= q, "p <= q")
    require(q <= n - 1, "q <= n-1")
    if direction not in ("forward", "dual"):
        raise InadmissibleParameters(f"unknown direction {direction!r}")
    given, target = (q, p) if direction == "forward" else (p, q)
    require(eta.shape[1] == given, f"eta has {given} columns")
    require(f.m == target, f"f lives on V(n, {target})")
    stream = as_stream(stream).child("radon", direction)
    params = _params(n=n, p=p, q=q, direction=direction)
    if p == q:
        return exact(float(f.eval_frame(eta)), stream.seed, params, samples=N)
    if direction == "forward":
        def chunk(lo, hi):
            om = sample_stiefel(q, p, stream, hi - lo, lo)
            return f.eval_frame(eta @ om)
    else:
        comp = frame_complement(eta)

        def chunk(lo, hi):
            a = sample_stiefel(n - p, q - p, stream, hi - lo, lo)
            x = comp @ a
            return f.eval_frame(np.concatenate([np.broadcast_to(eta, (hi - lo, n, p)), x], axis=-1))

    return estimate(chunk, N, stream.seed, params)


def grassmann_composition(f: InvariantFunction, u, j: int, N: int, stream, n_outer: int | None = None,
                          n_inner: int | None = None) -> TransformEstimate:
    """``F^{(j)}_{m,k} f`` as a composition of Grassmann Radon transforms.

    With ``eta = u~`` (the ``(n-k)``-plane orthogonal to ``u``), average over
    ``(n-k+j)``-planes ``zeta`` containing ``eta`` of the average of ``f``
    over ``m``-planes inside ``zeta``.
    """
    u = check_frame(u, "u")
    n, k = u.shape
    m = f.m
    _check_interm(n, m, k, j)
    stream = as_stream(stream).child("composition")
    no, ni = nested_counts(N, n_outer, n_inner)
    eta = frame_complement(u)
    r = n - k + j

    def per_outer(lo, hi):
        a = sample_stiefel(k, j, stream.child("a"), hi - lo, lo) if j else np.zeros((hi - lo, k, 0))
        zeta = np.concatenate([np.broadcast_to(eta, (hi - lo, n, n - k)), u @ a], axis=-1)
        om = sample_stiefel(r, m, stream.child("omega"), (hi - lo) * ni, lo * ni).reshape(hi - lo, ni, r, m)
        return f.eval_frame(zeta[:, None] @ om).mean(axis=1)

    return _nested(per_outer, no, stream, _params(n=n, m=m, k=k, j=j, n_outer=no, n_inner=ni))


# --------------------------------------------------------------------------
# Duality


TRANSFORM_TAGS = ("funk", "cosine", "ifunk", "radon")


def duality_pairing(tag: str, f: InvariantFunction, phi: InvariantFunction, N_outer: int, N_inner: int,
                    stream, lam: float | None = None, j: int = 0) -> tuple[TransformEstimate, TransformEstimate]:
    """``<T f, phi>`` on ``V(n, k)`` and ``<f, T* phi>`` on ``V(n, m)``.

    Each side is a nested estimate: Haar outer points, and at each the
    transform estimated with ``N_inner`` fresh samples. For ``cosine`` the
    kernel is ``|u'v|^lam``; for ``ifunk`` the intermediate transform of
    order ``j``. Returns ``(lhs, rhs)``.
    """
    if tag not in ("funk", "cosine", "ifunk"):
        raise InadmissibleParameters(f"unknown transform tag {tag!r}")
    n, m, k = f.n, f.m, phi.m
    require(phi.n == n, "f and phi share n")
    stream = as_stream(stream).child("pairing", tag)
    if tag == "cosine":
        require(lam is not None, "cosine pairing needs lam")
        _check_cosine(n, m, k, lam)
    elif tag == "funk":
        _check_funk(n, m, k)
    else:
        _check_interm(n, m, k, j)
    params = _params(tag=tag, n=n, m=m, k=k, lam=lam, j=j if tag == "ifunk" else None,
                     n_outer=N_outer, n_inner=N_inner)
    ni = N_inner
    s_l, s_r = stream.child("lhs"), stream.child("rhs")

    def lhs_outer(lo, hi):
        c = hi - lo
        u = sample_stiefel(n, k, s_l.child("point"), c, lo)
        if tag == "funk":
            th = sample_stiefel(n - k, m, s_l.child("inner"), c * ni, lo * ni).reshape(c, ni, n - k, m)
            vals = f.eval_frame(funk_frames(u[:, None], th))
        elif tag == "cosine":
            v = sample_stiefel(n, m, s_l.child("inner"), c * ni, lo * ni).reshape(c, ni, n, m)
            vals = f.eval_frame(v) * cos_metric(u[:, None], v) ** lam
        else:
            gam = sample_orthogonal(k, s_l.child("gamma"), c, lo)
            om = sample_stiefel(n - k + j, m, s_l.child("inner"), c * ni, lo * ni).reshape(c, ni, n - k + j, m)
            vals = f.eval_frame(ifunk_frames(u[:, None], gam[:, None], om, j))
        return vals.mean(axis=1) * phi.eval_frame(u)

    def rhs_outer(lo, hi):
        c = hi - lo
        v = sample_stiefel(n, m, s_r.child("point"), c, lo)
        if tag == "funk":
            th = sample_stiefel(n - m, k, s_r.child("inner"), c * ni, lo * ni).reshape(c, ni, n - m, k)
            vals = phi.eval_frame(funk_dual_frames(v[:, None], th))
        elif tag == "cosine":
            u = sample_stiefel(n, k, s_r.child("inner"), c * ni, lo * ni).reshape(c, ni, n, k)
            vals = phi.eval_frame(u) * cos_metric(u, v[:, None]) ** lam
        else:
            b = sample_orthogonal(n - m, s_r.child("b"), c, lo)
            a = sample_orthogonal(n - k + j, s_r.child("inner"), c * ni, lo * ni).reshape(c, ni, n - k + j, n - k + j)
            vals = phi.eval_frame(ifunk_dual_frames(v[:, None], b[:, None], a, k, j))
        return vals.mean(axis=1) * f.eval_frame(v)

    lhs = estimate(lhs_outer, N_outer, stream.seed, dict(params, side="lhs"), chunk=64)
    rhs = estimate(rhs_outer, N_outer, stream.seed, dict(params, side="rhs"), chunk=64)
    return lhs, rhs


def mass_cosine(n: int, m: int, k: int, lam: float) -> MeroValue:
    return cosine_mass(n, m, k, lam)


def mass_sine(n: int, m: int, lam: float) -> MeroValue:
    return sine_mass(n, m, lam)


def normalized_masses(n: int, m: int, k: int, lam: float) -> tuple[MeroValue, MeroValue]:
    return normalized_cosine_mass(n, m, k, lam), normalized_sine_mass(n, m, lam)
