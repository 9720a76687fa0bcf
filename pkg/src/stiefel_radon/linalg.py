"""Dense linear algebra helpers and counter-based Gaussian sampling.

Matrices are plain ``numpy`` arrays. Every routine accepts a single matrix
of shape ``(r, c)`` or a stack of shape ``(..., r, c)`` and works along the
last two axes.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefinite, RankDeficient

RANK_TOL = 1e-10

# Samples per RNG block. A block is the unit of generation, so the value of
# sample ``i`` never depends on how a caller partitions the index range.
BLOCK = 1024


def as_matrix(x, name: str = "x") -> np.ndarray:
    """Convert to a float array with at least two dimensions, rejecting NaN/Inf."""
    a = np.asarray(x, dtype=float)
    if a.ndim < 2:
        raise ValueError(f"{name} must have at least two dimensions, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _key_part(k) -> int:
    if isinstance(k, (int, np.integer)):
        if k < 0:
            raise ValueError("stream keys must be non-negative")
        return int(k)
    return zlib.crc32(str(k).encode())


@dataclass(frozen=True)
class Stream:
    """A named, seeded family of random draws addressed by sample index.

    ``Stream(seed).child("theta")`` gives an independent sub-stream. The
    draws for index ``i`` are a pure function of ``(seed, key, i)``.
    """

    seed: int
    key: tuple = field(default=())

    def child(self, *parts) -> "Stream":
        return Stream(self.seed, self.key + tuple(_key_part(p) for p in parts))

    def generator(self) -> np.random.Generator:
        """A plain generator for small, non-indexed draws (test inputs)."""
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))

    def _block_rng(self, tag: tuple, block: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.key + tag + (block,))
        return np.random.Generator(np.random.Philox(ss))


def block_draw(stream: Stream, tag: tuple, draw, shape: tuple, start: int, count: int) -> np.ndarray:
    """Counter-based draws for sample indices ``start .. start+count-1``.

    ``draw(rng, size)`` fills one block of ``BLOCK`` samples of the given
    per-sample ``shape``; ``tag`` separates different kinds of draw.
    """
    out = np.empty((count,) + tuple(shape))
    if count == 0:
        return out
    stop = start + count
    b0, b1 = start // BLOCK, (stop - 1) // BLOCK
    for b in range(b0, b1 + 1):
        block = draw(stream._block_rng(tag, b), (BLOCK,) + tuple(shape))
        lo = max(start, b * BLOCK)
        hi = min(stop, (b + 1) * BLOCK)
        out[lo - start : hi - start] = block[lo - b * BLOCK : hi - b * BLOCK]
    return out


def gaussian_batch(rows: int, cols: int, stream: Stream, start: int, count: int) -> np.ndarray:
    """Standard normal matrices for sample indices ``start .. start+count-1``.

    Returns an array of shape ``(count, rows, cols)``.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    return block_draw(stream, (0, rows, cols), lambda rng, size: rng.standard_normal(size),
                      (rows, cols), start, count)


def chisquare_batch(df: np.ndarray, stream: Stream, start: int, count: int) -> np.ndarray:
    """Independent chi-square draws with (real) degrees of freedom ``df``.

    Returns shape ``(count,) + df.shape``.
    """
    df = np.atleast_1d(np.asarray(df, dtype=float))
    if np.any(df <= 0):
        raise ValueError("chi-square degrees of freedom must be positive")
    tag = (1,) + tuple(int(round(1000 * d)) for d in df.ravel())
    return block_draw(stream, tag, lambda rng, size: rng.chisquare(np.broadcast_to(df, size)),
                      df.shape, start, count)


def gaussian_matrix(rows: int, cols: int, stream: Stream, index: int) -> np.ndarray:
    """The single standard normal ``rows x cols`` matrix of sample ``index``."""
    return gaussian_batch(rows, cols, stream, index, 1)[0]


def _positive_qr(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q, r = np.linalg.qr(x)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d = np.where(d == 0, 1.0, d)
    return q * d[..., None, :], r * d[..., :, None]


def _check_rank(x: np.ndarray) -> None:
    s = np.linalg.svd(x, compute_uv=False)
    bad = s[..., -1] <= RANK_TOL * s[..., 0]
    if np.any(bad):
        raise RankDeficient(f"smallest singular value <= {RANK_TOL:g} x largest")


def qr_positive(x) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization with strictly positive diagonal of ``R``.

    Parameters
    ----------
    x : array_like, shape (..., r, c) with r >= c
        Full column rank input.

    Returns
    -------
    Q : ndarray, shape (..., r, c)
        Orthonormal columns.
    R : ndarray, shape (..., c, c)
        Upper triangular with positive diagonal.
    """
    a = as_matrix(x)
    if a.shape[-2] < a.shape[-1]:
        raise ValueError("qr_positive needs rows >= cols")
    _check_rank(a)
    return _positive_qr(a)


def _sym(r: np.ndarray) -> np.ndarray:
    return 0.5 * (r + np.swapaxes(r, -1, -2))


def sqrt_inv_sqrt(r) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square root and inverse square root via eigendecomposition."""
    a = as_matrix(r, "r")
    if a.shape[-1] != a.shape[-2]:
        raise ValueError("r must be square")
    scale = np.max(np.abs(a), axis=(-2, -1), keepdims=True)
    if np.any(np.abs(a - np.swapaxes(a, -1, -2)) > 1e-12 * np.maximum(scale, 1e-300)):
        raise NotPositiveDefinite("matrix is not symmetric")
    w, vec = np.linalg.eigh(_sym(a))
    dim = a.shape[-1]
    gate = dim * np.finfo(float).eps * np.max(w, axis=-1, keepdims=True)
    if np.any(w <= gate) or np.any(w <= 0):
        raise NotPositiveDefinite("eigenvalue gate failed")
    s = np.sqrt(w)
    vt = np.swapaxes(vec, -1, -2)
    root = (vec * s[..., None, :]) @ vt
    inv_root = (vec / s[..., None, :]) @ vt
    return _sym(root), _sym(inv_root)


def polar_decompose(x) -> tuple[np.ndarray, np.ndarray]:
    """Polar decomposition ``x = v r^{1/2}`` with ``r = x'x`` and ``v`` a frame."""
    a = as_matrix(x)
    if a.shape[-2] < a.shape[-1]:
        raise ValueError("polar_decompose needs rows >= cols")
    _check_rank(a)
    r = _sym(np.swapaxes(a, -1, -2) @ a)
    _, inv_root = sqrt_inv_sqrt(r)
    return a @ inv_root, r


def polar_frame(x) -> np.ndarray:
    return polar_decompose(x)[0]


def gram_det(x: np.ndarray) -> np.ndarray:
    """``det(x'x)`` along the last two axes, clipped at zero."""
    g = np.swapaxes(x, -1, -2) @ x
    return np.maximum(np.linalg.det(g), 0.0)


def abs_det(x) -> np.ndarray | float:
    """``|x|_m = det(x'x)^{1/2}`` for an ``n x m`` matrix or a stack of them."""
    return np.sqrt(gram_det(np.asarray(x, dtype=float)))
