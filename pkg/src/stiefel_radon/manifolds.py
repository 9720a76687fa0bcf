"""Stiefel manifold sampling, frame completion and frame metrics.

A frame in ``V(n, m)`` is an ``n x m`` array with orthonormal columns; stacks
of frames have shape ``(..., n, m)``. Grassmann points are frames taken
modulo the right action of ``O(m)``.
"""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from .errors import DegenerateCompletion, InadmissibleParameters
from . import jets as J
from .linalg import Stream, _positive_qr, chisquare_batch, gaussian_batch
from .montecarlo import TransformEstimate, estimate, exact

FRAME_TOL = 1e-10
# Trailing diagonal of R below this marks the reference columns as dependent.
COMPLETION_TOL = 1e-8


def anchor_u0(n: int, k: int) -> np.ndarray:
    """``u0 = [0; I_k]``."""
    a = np.zeros((n, k))
    a[n - k :, :] = np.eye(k)
    return a


def anchor_v0(n: int, m: int) -> np.ndarray:
    """``v0 = [I_m; 0]``."""
    a = np.zeros((n, m))
    a[:m, :] = np.eye(m)
    return a


def is_frame(x, tol: float = FRAME_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    g = np.swapaxes(x, -1, -2) @ x
    return bool(np.max(np.abs(g - np.eye(m))) < tol)


def check_frame(x, name: str = "frame") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim < 2 or x.shape[-1] > x.shape[-2]:
        raise ValueError(f"{name} must be n x m with m <= n")
    if not is_frame(x):
        raise ValueError(f"{name} does not have orthonormal columns")
    return x


def sample_stiefel(n: int, m: int, stream: Stream, count: int = 1, start: int = 0) -> np.ndarray:
    """Haar samples on ``V(n, m)`` for indices ``start .. start+count-1``.

    Each sample is the ``Q`` factor, with positive diagonal ``R``, of a
    Gaussian ``n x m`` matrix. Returns shape ``(count, n, m)``.
    """
    if not 1 <= m <= n:
        raise InadmissibleParameters("violated: 1 <= m <= n")
    g = gaussian_batch(n, m, stream, start, count)
    q, r = _positive_qr(g)
    d = np.abs(np.diagonal(r, axis1=-2, axis2=-1))
    bad = d.min(axis=-1) <= 1e-10 * d.max(axis=-1)
    if np.any(bad):  # measure-zero event; redraw from a side stream
        for i in np.flatnonzero(bad):
            q[i] = sample_stiefel(n, m, stream.child("redraw", start + i), 1)[0]
    return q


def sample_orthogonal(n: int, stream: Stream, count: int = 1, start: int = 0) -> np.ndarray:
    return sample_stiefel(n, n, stream, count, start)


def _reference_order(n: int, convention: str) -> list[int]:
    if convention == "standard":
        return list(range(n))
    if convention == "reversed":
        return list(range(n - 1, -1, -1))
    raise ValueError(f"unknown completion convention {convention!r}")


def frame_complement(u, convention: str = "standard") -> np.ndarray:
    """Orthonormal frame of ``span(u)^perp`` by completing ``[u | E]``.

    ``E`` holds fixed coordinate columns (``e_1, e_2, ...`` for the standard
    convention). The positive-diagonal QR makes the result a smooth function
    of ``u`` wherever the reference columns stay independent of ``span(u)``;
    otherwise the next reference subset in a fixed order is tried.

    Parameters
    ----------
    u : array_like, shape (..., n, k) with k < n
    convention : {"standard", "reversed"}

    Returns
    -------
    ndarray, shape (..., n, n-k)
    """
    u = np.asarray(u, dtype=float)
    n, k = u.shape[-2], u.shape[-1]
    if k >= n:
        raise InadmissibleParameters("violated: k < n")
    order = _reference_order(n, convention)
    batch = u.shape[:-2]
    flat = u.reshape((-1, n, k))
    out = np.empty((flat.shape[0], n, n - k))
    todo = np.arange(flat.shape[0])
    for cols in itertools.combinations(order, n - k):
        e = np.zeros((n, n - k))
        e[list(cols), range(n - k)] = 1.0
        x = np.concatenate([flat[todo], np.broadcast_to(e, (todo.size, n, n - k))], axis=-1)
        q, r = _positive_qr(x)
        d = np.diagonal(r, axis1=-2, axis2=-1)[:, k:]
        ok = d.min(axis=-1) > COMPLETION_TOL
        out[todo[ok]] = q[ok][:, :, k:]
        todo = todo[~ok]
        if todo.size == 0:
            return out.reshape(batch + (n, n - k))
    raise DegenerateCompletion("every reference column subset is dependent with span(u)")


def rotation_to_frame(u, anchor, convention: str = "standard") -> np.ndarray:
    """Orthogonal ``g`` with ``g @ anchor = u``.

    Built as ``[u | u~] [anchor | anchor~]'`` from the completions of both
    frames, so it depends smoothly on ``u``. Accepts a stack of ``u``.
    """
    u = np.asarray(u, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    if u.shape[-2:] != anchor.shape:
        raise ValueError("u and anchor must have the same shape")
    n, k = anchor.shape
    if k == n:
        full_u, full_a = u, anchor
    else:
        full_u = np.concatenate([u, frame_complement(u, convention)], axis=-1)
        full_a = np.concatenate([anchor, frame_complement(anchor, convention)], axis=-1)
    return full_u @ full_a.T


def pivot_complement(u) -> np.ndarray:
    """Coordinate columns ``E`` that complete each frame in ``u`` well.

    Greedy row pivoting on ``u`` (shape ``(..., n, k)``) keeps the ``k`` rows
    that are most independent; ``E`` holds the unit vectors of the other
    ``n - k`` coordinates, in increasing order. ``[u | E]`` is then far from
    singular, which keeps :func:`smooth_basis` and its derivatives bounded.
    """
    u = np.asarray(u, dtype=float)
    n, k = u.shape[-2], u.shape[-1]
    flat = u.reshape((-1, n, k)).copy()
    b = flat.shape[0]
    keep = np.zeros((b, n), dtype=bool)
    rows = np.arange(b)
    for _ in range(k):
        norms = np.where(keep, -1.0, np.sum(flat * flat, axis=-1))
        p = np.argmax(norms, axis=-1)
        keep[rows, p] = True
        q = flat[rows, p] / np.sqrt(norms[rows, p])[:, None]
        flat = flat - (flat @ q[:, :, None]) * q[:, None, :]
    idx = np.argsort(keep, axis=-1, kind="stable")[:, : n - k]
    e = np.zeros((b, n, n - k))
    e[rows[:, None], idx, np.arange(n - k)[None, :]] = 1.0
    return e.reshape(u.shape[:-2] + (n, n - k))


def smooth_basis(x, e):
    """Orthogonal ``n x n`` basis whose first ``m`` columns span ``x``.

    Gram-Schmidt of ``[x | e]``; ``x`` may be a jet, so the basis can be
    differentiated in ``x``. ``e`` comes from :func:`pivot_complement` at a
    base point and is held fixed while ``x`` moves.
    """
    return J.gram_schmidt(J.concat([x, e], axis=-1))


def _wishart(r: int, df: float, stream: Stream, start: int, count: int) -> np.ndarray:
    """Bartlett construction of ``Wishart_r(df, I)`` for real ``df > r - 1``."""
    chi = chisquare_batch(df - np.arange(r), stream.child("chi"), start, count)
    low = np.tril(gaussian_batch(r, r, stream.child("normal"), start, count), -1)
    low[:, np.arange(r), np.arange(r)] = np.sqrt(chi)
    return low @ np.swapaxes(low, -1, -2)


def beta_eigenvalues(r: int, a: float, b: float, stream: Stream, start: int = 0, count: int = 1) -> np.ndarray:
    """Eigenvalues of a real matrix Beta ``B_r(a, b)`` variate, shape ``(count, r)``."""
    if 2 * a <= r - 1 or 2 * b <= r - 1:
        raise InadmissibleParameters("violated: matrix Beta parameters a, b > (r-1)/2")
    if r == 1:
        x1 = chisquare_batch(np.array([2 * a]), stream.child("w1"), start, count)
        x2 = chisquare_batch(np.array([2 * b]), stream.child("w2"), start, count)
        return x1 / (x1 + x2)
    w1 = _wishart(r, 2 * a, stream.child("w1"), start, count)
    w2 = _wishart(r, 2 * b, stream.child("w2"), start, count)
    c = np.linalg.cholesky(w1 + w2)
    ci = np.linalg.inv(c)
    return np.clip(np.linalg.eigvalsh(ci @ w1 @ np.swapaxes(ci, -1, -2)), 0.0, 1.0)


def sample_relative(n: int, p: int, q: int, nu: float, stream: Stream, count: int = 1,
                    start: int = 0) -> np.ndarray:
    """``q``-frames with density ``|a'w|^nu / mass`` relative to ``a = [I_p; 0]``.

    The squared principal cosines between ``span(w)`` and ``span(a)`` follow
    the matrix Beta law ``B_r((s + nu)/2, (n - s)/2)`` with ``r = min(p, q)``
    and ``s = max(p, q)``; the remaining orientation is Haar. ``nu = 0``
    reproduces the Haar measure. Needs ``n - s >= r`` and ``nu > r - s - 1``.

    Returns shape ``(count, n, q)``.
    """
    r, s = min(p, q), max(p, q)
    if not (1 <= p < n and 1 <= q < n):
        raise InadmissibleParameters("violated: 1 <= p, q <= n-1")
    if n - s < r:
        raise InadmissibleParameters("violated: n - max(p, q) >= min(p, q)")
    if nu <= r - s - 1:
        raise InadmissibleParameters("violated: nu > min(p,q) - max(p,q) - 1")
    b = beta_eigenvalues(r, (s + nu) / 2, (n - s) / 2, stream.child("cos2"), start, count)
    c, sn = np.sqrt(b), np.sqrt(1.0 - b)
    q2 = sample_stiefel(n - p, q, stream.child("q2"), count, start)
    out = np.zeros((count, n, q))
    if q <= p:
        q1 = sample_stiefel(p, q, stream.child("q1"), count, start)
        out[:, :p, :] = q1 * c[:, None, :]
        out[:, p:, :] = q2 * sn[:, None, :]
    else:
        rot = sample_orthogonal(p, stream.child("q1"), count, start)
        out[:, :p, :p] = rot * c[:, None, :]
        out[:, p:, :p] = q2[:, :, :p] * sn[:, None, :]
        out[:, p:, p:] = q2[:, :, p:]
    return out


def cos_metric(u, v) -> np.ndarray | float:
    """``|u'v|_m = det(v'uu'v)^{1/2}``; zero when ``m > k``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape[-1] > u.shape[-1]:
        return np.zeros(np.broadcast_shapes(u.shape[:-2], v.shape[:-2]))
    w = np.swapaxes(u, -1, -2) @ v
    g = np.swapaxes(w, -1, -2) @ w
    return np.sqrt(np.clip(np.linalg.det(g), 0.0, 1.0))


def sin_metric(u, v) -> np.ndarray | float:
    """``det(I_m - v'uu'v)`` for frames of equal size."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    m = v.shape[-1]
    w = np.swapaxes(u, -1, -2) @ v
    g = np.eye(m) - np.swapaxes(w, -1, -2) @ w
    return np.clip(np.linalg.det(g), 0.0, 1.0)


def average_right(f: Callable[[np.ndarray], np.ndarray], v, stream: Stream, N: int) -> TransformEstimate:
    """Average of ``f(v beta)`` over Haar ``beta`` in ``O(m)``.

    For ``m = 1`` the group is ``{1, -1}`` and the average is exact.
    """
    v = check_frame(v, "v")
    m = v.shape[-1]
    if m == 1:
        return exact(0.5 * (float(f(v)) + float(f(-v))), stream.seed, {"m": 1})

    def values(lo, hi):
        beta = sample_orthogonal(m, stream, hi - lo, lo)
        return f(v @ beta)

    return estimate(values, N, stream.seed, {"m": m})
