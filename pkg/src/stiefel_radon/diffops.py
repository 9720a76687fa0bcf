"""The Cayley-Laplace operator ``det(d'd)``, its powers, and order reduction.

``Delta = det(d'd)`` acts on functions of ``n x m`` matrices, where ``d`` is
the matrix of partials ``d/dx_{ia}``. Expanding the determinant gives signed
products of the commuting second-order factors ``L_ab = sum_i d_ia d_ib``.

Two evaluation backends:

* ``jets`` - multilinear truncated Taylor arithmetic; exact to round-off.
* ``fd`` - central differences with Richardson extrapolation, the auditor.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import jets as J
from .errors import (BackendDisagreement, InadmissibleParameters, OutOfConvergenceRegion,
                     PoleAtLambda, SingularKernelDerivative, TooLarge, require)
from .manifolds import check_frame, frame_complement, pivot_complement, smooth_basis
from .montecarlo import TransformEstimate, estimate
from .special import (bernstein_poly, constant, cosine_mass, normalized_cosine_mass,
                      normalized_sine_mass, sine_mass)
from .testfuncs import InvariantFunction
from .transforms import SampleSet, _finite, _params, as_stream

MAX_ORDER_PRODUCT = 3  # gate on m * ell (operator order <= 6)
FD_STEP = 1e-2
DISAGREEMENT_TOL = 1e-3
KERNEL_MARGIN = 0.5


@dataclass(frozen=True)
class DiffOperator:
    """``Delta^ell`` for ``n x m`` matrices as a sum of ``coef * prod L_ab``.

    ``terms`` holds ``(coef, factors)`` with ``factors`` a sorted tuple of
    column pairs ``(a, b)``, ``a <= b``. Equal products are merged, so
    coefficients may exceed one in magnitude.
    """

    m: int
    ell: int
    terms: tuple

    @property
    def order(self) -> int:
        return 2 * self.m * self.ell

    def coordinate_terms(self, n: int) -> dict:
        """Expand every ``L_ab`` over rows: ``{sorted coordinate tuple: coef}``.

        A coordinate is the flat index ``i * m + a`` of entry ``x[i, a]``.
        """
        return _coordinate_terms(self, n)


def cayley_laplace_expand(m: int, ell: int) -> DiffOperator:
    """Leibniz expansion of ``det(d'd)^ell``.

    Raises
    ------
    TooLarge
        If ``m * ell > 3``.
    """
    if m < 1 or ell < 0:
        raise InadmissibleParameters("violated: m >= 1, ell >= 0")
    if m * ell > MAX_ORDER_PRODUCT:
        raise TooLarge(f"m * ell = {m * ell} exceeds the gate {MAX_ORDER_PRODUCT}")
    base = Counter()
    for perm in itertools.permutations(range(m)):
        sign = _perm_sign(perm)
        factors = tuple(sorted((min(a, b), max(a, b)) for a, b in enumerate(perm)))
        base[factors] += sign
    acc = Counter({(): 1})
    for _ in range(ell):
        nxt = Counter()
        for fa, ca in acc.items():
            for fb, cb in base.items():
                nxt[tuple(sorted(fa + fb))] += ca * cb
        acc = nxt
    terms = tuple((c, f) for f, c in sorted(acc.items()) if c != 0)
    return DiffOperator(m, ell, terms)


def _perm_sign(p) -> int:
    sign = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


@lru_cache(maxsize=64)
def _coordinate_terms(op: DiffOperator, n: int) -> dict:
    m = op.m
    out = Counter()
    for coef, factors in op.terms:
        for rows in itertools.product(range(n), repeat=len(factors)):
            coords = []
            for (a, b), i in zip(factors, rows):
                coords += [i * m + a, i * m + b]
            out[tuple(sorted(coords))] += coef
    return {k: v for k, v in out.items() if v != 0}


def _unit(n: int, m: int, coords) -> np.ndarray:
    e = np.zeros((len(coords), n, m))
    for r, c in enumerate(coords):
        e[r, c // m, c % m] = 1.0
    return e


def fd_stencil(op: DiffOperator, n: int, h: float = FD_STEP, levels: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights of the finite-difference rule for ``op``.

    Each mixed partial ``d_{c1}...d_{cD}`` uses the central rule
    ``sum_s prod(s) F(x + h sum_r s_r e_{c_r}) / (2h)^D``; ``levels = 2``
    combines steps ``h`` and ``h/2`` by Richardson extrapolation.

    Returns
    -------
    offsets : ndarray, shape (P, n, m)
    weights : ndarray, shape (P,)
    """
    if not 0 < h <= 0.1:
        raise InadmissibleParameters("violated: finite-difference step in (0, 0.1]")
    m = op.m
    if levels == 1:
        rich = [(h, 1.0)]
    elif levels == 2:
        rich = [(h, -1.0 / 3.0), (h / 2, 4.0 / 3.0)]
    else:
        raise InadmissibleParameters("levels must be 1 or 2")
    acc = Counter()
    for coords, coef in op.coordinate_terms(n).items():
        d = len(coords)
        for step, rw in rich:
            for signs in itertools.product((-1, 1), repeat=d):
                off = Counter()
                for s, c in zip(signs, coords):
                    off[c] += s
                key = tuple(sorted((c, v) for c, v in off.items() if v))
                acc[(step, key)] += rw * coef * math.prod(signs) / (2 * step) ** d
    pts, wts = [], []
    for (step, key), w in sorted(acc.items()):
        if w == 0.0:
            continue
        o = np.zeros((n, m))
        for c, v in key:
            o[c // m, c % m] = v * step
        pts.append(o)
        wts.append(w)
    return np.array(pts), np.array(wts)


def _apply_jets(op: DiffOperator, F: Callable, x: np.ndarray) -> np.ndarray:
    n, m = x.shape[-2:]
    total = None
    for coords, coef in op.coordinate_terms(n).items():
        if not coords:
            val = np.asarray(F(x), dtype=float) * coef
        else:
            jet = J.seed_directions(x, _unit(n, m, coords))
            out = F(jet)
            val = coef * (out.top if isinstance(out, J.Jet) else np.zeros_like(np.asarray(out, dtype=float)))
        total = val if total is None else total + val
    return total


def _apply_fd(op: DiffOperator, F: Callable, x: np.ndarray, h: float, levels: int) -> np.ndarray:
    pts, wts = fd_stencil(op, x.shape[-2], h, levels)
    batch = x.ndim - 2
    pts = pts.reshape((pts.shape[0],) + (1,) * batch + pts.shape[1:])
    vals = np.asarray(F(x[None] + pts), dtype=float)
    return np.tensordot(wts, vals, axes=(0, 0))


def apply_diffop(op: DiffOperator, F: Callable, x, backend: str = "jets", h: float = FD_STEP,
                 levels: int = 2, cross_validate: bool = False):
    """``(op F)(x)``.

    Parameters
    ----------
    op : DiffOperator
    F : callable
        Maps arrays (and, for the jets backend, jets) of shape
        ``(..., n, m)`` to values with the same leading shape, possibly
        followed by trailing axes (e.g. one value per Monte Carlo sample).
    x : array_like, shape (..., n, m)
    backend : {"jets", "fd"}
    cross_validate : bool
        Evaluate both backends and raise :class:`BackendDisagreement` if they
        differ by more than ``1e-3`` relative.
    """
    x = np.asarray(x, dtype=float)
    if backend not in ("jets", "fd"):
        raise InadmissibleParameters(f"unknown backend {backend!r}")
    if cross_validate:
        a = _apply_jets(op, F, x)
        b = _apply_fd(op, F, x, h, levels)
        scale = np.maximum(np.abs(a), 1e-12)
        if np.any(np.abs(a - b) > DISAGREEMENT_TOL * scale):
            worst = float(np.max(np.abs(a - b) / scale))
            raise BackendDisagreement(f"jets and finite differences differ by {worst:.3g} relative")
        return a if backend == "jets" else b
    if backend == "jets":
        return _apply_jets(op, F, x)
    return _apply_fd(op, F, x, h, levels)


def bernstein_check(m: int, ell: int, n: int, lam: float, x, backend: str = "jets") -> np.ndarray:
    """Relative error of ``Delta^ell |x|^{lam+2 ell} = B(lam) |x|^lam`` at each ``x``."""
    op = cayley_laplace_expand(m, ell)
    x = np.asarray(x, dtype=float)
    F = lambda y: J.power(J.det(J.transpose(y) @ y), (lam + 2 * ell) / 2)
    got = apply_diffop(op, F, x, backend)
    want = bernstein_poly(ell, m, n, lam) * np.linalg.det(np.swapaxes(x, -1, -2) @ x) ** (lam / 2)
    return np.abs(got - want) / np.abs(want)


# --------------------------------------------------------------------------
# Delta_{lam, ell}


def _prefactor(m: int, ell: int) -> float:
    return (-0.25) ** (m * ell)


def delta_lambda_ell(f: InvariantFunction, v, lam: float, ell: int, backend: str = "jets",
                     h: float = FD_STEP, cross_validate: bool = False):
    """``(Delta_{lam,ell} f)(v) = (-1/4)^{m ell} (Delta^ell E_{lam+2ell} f)(v)``.

    ``v`` may be a stack of frames.
    """
    v = np.asarray(v, dtype=float)
    op = cayley_laplace_expand(f.m, ell)
    val = apply_diffop(op, lambda x: f.eval_extension(x, lam + 2 * ell), v, backend, h,
                       cross_validate=cross_validate)
    return _prefactor(f.m, ell) * val


def beltrami_delta_lambda(n: int, d: int, lam: float) -> float:
    """Eigenvalue of ``Delta_lam`` (``m = 1``, ``ell = 1``) on degree-``d`` harmonics:
    ``-(1/4) [-d(d+n-2) + (lam+2)(n+lam)]``."""
    return -0.25 * (-d * (d + n - 2) + (lam + 2) * (n + lam))


# --------------------------------------------------------------------------
# Differentiated transforms


def kernel_margin_ok(m: int, k: int, lam: float, ell: int) -> bool:
    """Integrability margin for differentiating ``|u'x|^{lam+2ell}`` under the integral."""
    return lam + 2 * ell >= 2 * m * ell + (m - k - 1) + KERNEL_MARGIN


def _check_pole_free(value, what):
    if value.is_pole:
        raise PoleAtLambda(f"{what} has a pole of order {value.pole_order}", value.pole_order)


def _diff_samples(op: DiffOperator, per_sample: Callable, x0: np.ndarray, count: int, seed,
                  params: dict, backend: str, h: float, scale: float) -> TransformEstimate:
    """Mean over samples of ``op`` applied to each per-sample function at ``x0``.

    ``per_sample(x, lo, hi)`` returns one value per sample in ``lo..hi``
    (trailing axis). The same samples are used at every stencil point.
    """
    def chunk(lo, hi):
        return scale * apply_diffop(op, lambda x: per_sample(x, lo, hi), x0, backend, h)

    return estimate(chunk, count, seed, params)


def _rescaled_points(x, ss: SampleSet, rel: np.ndarray, lam: float, mass: float):
    """Per-sample evaluation points and weights for kernel mode.

    With kernel-tilted samples the estimator needs ``Delta k(x) / |a'x|^lam``,
    which is homogeneous of degree zero in ``x``. Evaluating it at ``c x``
    with ``|a'(c x)| = 1`` avoids overflow for samples close to the singular
    set. Haar samples keep ``x`` and unit weights.
    """
    count = rel.shape[0]
    if ss.nu is None:
        return np.broadcast_to(x, (count,) + x.shape).copy(), 1.0
    m = x.shape[-1]
    c = ss.cosines(rel) ** (-1.0 / m)
    return c[:, None, None] * x, mass


def _function_mode_frames(x, e, frames):
    """Ambient frames ``B(x) X_i`` for relative sample frames ``X_i``.

    ``B(x)`` is the smooth basis whose first columns span ``x``; the result
    has shape ``x.batch + (S, n, q)``.
    """
    b = smooth_basis(x, e)
    return b[..., None, :, :] @ frames


def _det_power(x, p):
    return J.power(J.det(J.transpose(x) @ x), p)


def kernel_diff_cosine_dual(phi: InvariantFunction, v, lam: float, ell: int, N: int, stream,
                            mode: str = "auto", backend: str = "jets", h: float = FD_STEP,
                            samples: SampleSet | None = None) -> TransformEstimate:
    """Normalized ``*C^lam phi (v)`` as ``Delta_{lam,ell}`` of ``*C^{lam+2ell} phi``.

    ``kernel`` mode differentiates ``|u'x|^{lam+2ell}`` per sample (needs
    the integrability margin); samples are drawn with density proportional to
    ``|u'v|^lam`` and reweighted. ``function`` mode differentiates the
    extension ``|x|^mu (*C^mu phi)(x (x'x)^{-1/2})`` estimated with one
    shared kernel-tilted sample set moved rigidly with ``x``.
    """
    v = check_frame(v, "v")
    n, m = v.shape
    k = phi.m
    require(1 <= m, "1 <= m")
    require(m <= k, "m <= k")
    require(k <= n - 1, "k <= n-1")
    require(ell >= 0, "ell >= 0")
    mu = lam + 2 * ell
    if mu <= m - k - 1:
        raise OutOfConvergenceRegion(f"violated: lam + 2 ell > m-k-1 = {m - k - 1}")
    stream = as_stream(stream).child("kdiff-cosine-dual")
    gmu = constant("gamma_mk", n, m, k, lam=mu)
    _check_pole_free(gmu, "gamma_mk(lam + 2 ell)")
    _check_pole_free(constant("gamma_mk", n, m, k, lam=lam), "gamma_mk(lam)")
    params = _params(n=n, m=m, k=k, lam=lam, ell=ell)
    if ell == 0:
        from .transforms import cosine_dual
        return cosine_dual(phi, v, lam, N, stream, sampler="tilted", normalized=True)
    if mode == "auto":
        mode = "kernel" if kernel_margin_ok(m, k, lam, ell) else "function"
    op = cayley_laplace_expand(m, ell)
    pref = _prefactor(m, ell)
    basis = np.concatenate([v, frame_complement(v)], axis=-1)
    if mode == "kernel":
        if not kernel_margin_ok(m, k, lam, ell):
            raise SingularKernelDerivative(
                f"violated: lam+2ell >= 2m ell + (m-k-1) + {KERNEL_MARGIN}")
        ss = samples or SampleSet(n, m, k, N, stream.child("samples"), lam)
        mass = ss.mass()

        def chunk(lo, hi):
            rel = ss.frames(lo, hi)
            u = basis @ rel
            ut = np.swapaxes(u, -1, -2)

            def kern(x):
                y = ut @ x
                return J.power(J.det(J.transpose(y) @ y), mu / 2)

            x0, wt = _rescaled_points(v, ss, rel, lam, mass)
            dk = apply_diffop(op, kern, x0, backend, h)
            return pref * gmu.value * dk * wt * phi.eval_frame(u)

        return estimate(chunk, N, stream.seed, dict(params, mode="kernel"))
    if mode != "function":
        raise InadmissibleParameters(f"unknown mode {mode!r}")
    ss = samples or SampleSet(n, m, k, N, stream.child("samples"), mu)
    weight = _finite(normalized_cosine_mass(n, m, k, mu), "normalized mass") if ss.nu is not None else None
    e = pivot_complement(v)

    def per_sample(x, lo, hi):
        rel = ss.frames(lo, hi)
        u = _function_mode_frames(x, e, rel)
        vals = phi.eval_extension(u, 0.0)
        if weight is None:
            return _det_power(x, mu / 2)[..., None] * gmu.value * vals * ss.cosines(rel) ** mu
        return _det_power(x, mu / 2)[..., None] * weight * vals

    return _diff_samples(op, per_sample, v, N, stream.seed, dict(params, mode="function"), backend, h, pref)


def kernel_diff_sine(f: InvariantFunction, u, lam: float, ell: int, N: int, stream, mode: str = "auto",
                     backend: str = "jets", h: float = FD_STEP, samples: SampleSet | None = None,
                     fast: bool = True) -> TransformEstimate:
    """``S^lam f (u)`` (normalized) as ``Delta_{lam,ell} S^{lam+2ell} f``.

    Valid at every ``lam`` off the poles ``1-m, 2-m, ...`` of ``delta_m``,
    including the reconstruction point ``lam = m - n`` where it returns an
    estimate of ``f(u)``.

    Parameters
    ----------
    mode : {"auto", "kernel", "function"}
        ``kernel`` differentiates the per-sample sine kernel (needs the
        integrability margin with ``k`` replaced by ``n - m``); ``function``
        differentiates the extension of the Monte Carlo estimate of
        ``S^{lam+2ell} f`` on a shared kernel-tilted sample set.
    fast : bool
        In function mode with ``f(v) = tr(v'Sv)``, differentiate the matrix
        ``|x|^mu B(x)'SB(x)`` once and pair it with each sample's projection.
    """
    u = check_frame(u, "u")
    n, m = u.shape
    require(f.n == n and f.m == m, "f and u live on the same V(n, m)")
    require(2 * m <= n, "2m <= n")
    require(ell >= 0, "ell >= 0")
    mu = lam + 2 * ell
    if mu <= 2 * m - 1 - n:
        raise OutOfConvergenceRegion(f"violated: lam + 2 ell > 2m-1-n = {2 * m - 1 - n}")
    stream = as_stream(stream).child("kdiff-sine")
    dmu = constant("delta_m", n, m, lam=mu)
    _check_pole_free(dmu, "delta_m(lam + 2 ell)")
    params = _params(n=n, m=m, lam=lam, ell=ell)
    if ell == 0:
        from .transforms import sine_transform
        return sine_transform(f, u, lam, N, stream, sampler="tilted")
    _check_pole_free(constant("delta_m", n, m, lam=lam), "delta_m(lam)")
    if mode == "auto":
        mode = "kernel" if kernel_margin_ok(m, n - m, lam, ell) else "function"
    op = cayley_laplace_expand(m, ell)
    pref = _prefactor(m, ell)
    ut = frame_complement(u)
    basis = np.concatenate([ut, u], axis=-1)
    if mode == "kernel":
        if not kernel_margin_ok(m, n - m, lam, ell):
            raise SingularKernelDerivative(
                f"violated: lam+2ell >= 2m ell + (2m-n-1) + {KERNEL_MARGIN}")
        ss = samples or SampleSet(n, n - m, m, N, stream.child("samples"), lam)
        mass = ss.mass()

        def chunk(lo, hi):
            rel = ss.frames(lo, hi)
            w = basis @ rel
            wt_ = np.swapaxes(frame_complement(w), -1, -2)

            def kern(x):
                # |x|^mu det(I - w'P_x w)^{mu/2} = det(x'(I - ww')x)^{mu/2}
                y = wt_ @ x
                return J.power(J.det(J.transpose(y) @ y), mu / 2)

            x0, wt = _rescaled_points(u, ss, rel, lam, mass)
            dk = apply_diffop(op, kern, x0, backend, h)
            return pref * dmu.value * dk * wt * f.eval_frame(w)

        return estimate(chunk, N, stream.seed, dict(params, mode="kernel"))
    if mode != "function":
        raise InadmissibleParameters(f"unknown mode {mode!r}")
    ss = samples or SampleSet(n, n - m, m, N, stream.child("samples"), mu)
    if ss.nu is None:
        raise InadmissibleParameters("function mode needs a kernel-tilted sample set")
    weight = _finite(normalized_sine_mass(n, m, mu), "normalized sine mass")
    e = pivot_complement(u)
    # relative frames put the anchor (complement of u) first; smooth_basis
    # puts span(x) first, so rotate the coordinate blocks
    perm = np.r_[np.arange(n - m, n), np.arange(n - m)]
    params = dict(params, mode="function")
    if fast and f.quadratic_form is not None:
        S = f.quadratic_form

        def G(x):
            b = smooth_basis(x, e)
            return _det_power(x, mu / 2)[..., None, None] * (J.transpose(b) @ (S @ b))

        T = pref * weight * apply_diffop(op, G, u, backend, h)

        def chunk(lo, hi):
            rel = ss.frames(lo, hi)[:, perm, :]
            return np.einsum("ij,sia,sja->s", T, rel, rel)

        return estimate(chunk, N, stream.seed, dict(params, fast=True))

    def per_sample(x, lo, hi):
        rel = ss.frames(lo, hi)[:, perm, :]
        w = _function_mode_frames(x, e, rel)
        return _det_power(x, mu / 2)[..., None] * weight * f.eval_extension(w, 0.0)

    return _diff_samples(op, per_sample, u, N, stream.seed, params, backend, h, pref)

