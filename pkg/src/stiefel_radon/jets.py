"""Multilinear truncated Taylor arithmetic ("nested dual numbers").

A :class:`Jet` of order ``D`` carries ``2**D`` coefficient arrays indexed by
subsets ``S`` of ``{eps_1, ..., eps_D}`` with ``eps_r**2 = 0``. Evaluating a
function at ``x + sum_r eps_r h_r`` and reading the coefficient of
``eps_1 ... eps_D`` gives the mixed directional derivative
``d^D F(x)[h_1, ..., h_D]`` exactly up to round-off.

The helpers :func:`det`, :func:`inv`, :func:`power`, :func:`trace` and
:func:`transpose` accept either jets or plain arrays, so closed-form
extensions can be written once and evaluated in both modes.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _submask_pairs(order: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """For each subset ``S``, the pairs ``(T, S \\ T)`` with ``T`` a subset of ``S``."""
    table = []
    for s in range(1 << order):
        pairs = []
        t = s
        while True:
            pairs.append((t, s ^ t))
            if t == 0:
                break
            t = (t - 1) & s
        table.append(tuple(pairs))
    return tuple(table)


class Jet:
    """Array-valued multilinear jet; ``coeffs[0]`` is the value."""

    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, coeffs: np.ndarray, order: int):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != 1 << order:
            raise ValueError("leading axis must have length 2**order")
        self.c = coeffs
        self.order = order

    @classmethod
    def constant(cls, value, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros((1 << order,) + value.shape)
        c[0] = value
        return cls(c, order)

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    @property
    def top(self) -> np.ndarray:
        """Coefficient of ``eps_1 ... eps_D``."""
        return self.c[-1]

    @property
    def shape(self) -> tuple:
        return self.c.shape[1:]

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError("jet orders differ")
            return other
        return Jet.constant(other, self.order)

    def _aligned(self, other_ndim: int) -> np.ndarray:
        """Coefficients with singleton axes inserted so a plain array of
        ``other_ndim`` dimensions broadcasts against the value axes."""
        extra = other_ndim - len(self.shape)
        if extra <= 0:
            return self.c
        return self.c.reshape((self.c.shape[0],) + (1,) * extra + self.shape)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.c + other.c, self.order)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        c = np.broadcast_to(self._aligned(other.ndim), (self.c.shape[0],) + shape).copy()
        c[0] = c[0] + other
        return Jet(c, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _product(self, other, op) -> "Jet":
        other = self._lift(other)
        table = _submask_pairs(self.order)
        out = None
        for s, pairs in enumerate(table):
            acc = None
            for t, u in pairs:
                term = op(self.c[t], other.c[u])
                acc = term if acc is None else acc + term
            if out is None:
                out = np.empty((1 << self.order,) + acc.shape)
            out[s] = acc
        return Jet(out, self.order)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self._aligned(other.ndim) * other, self.order)
        return self._product(other, np.multiply)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * power(other, -1.0)
        other = np.asarray(other, dtype=float)
        return Jet(self._aligned(other.ndim) / other, self.order)

    def __rtruediv__(self, other):
        return power(self, -1.0) * other

    def __matmul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self._aligned(other.ndim) @ other, self.order)
        return self._product(other, np.matmul)

    def __rmatmul__(self, other):
        other = np.asarray(other, dtype=float)
        return Jet(other @ self._aligned(other.ndim), self.order)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.c[(slice(None),) + idx], self.order)

    def swapaxes(self, a: int, b: int) -> "Jet":
        a = a if a < 0 else a + 1
        b = b if b < 0 else b + 1
        return Jet(np.swapaxes(self.c, a, b), self.order)

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(1, self.c.ndim))
        elif isinstance(axis, int):
            axis = axis if axis < 0 else axis + 1
        else:
            axis = tuple(a if a < 0 else a + 1 for a in axis)
        return Jet(np.sum(self.c, axis=axis), self.order)

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, shape={self.shape})"


def apply_series(a: Jet, derivs: list[np.ndarray]) -> Jet:
    """``f(a)`` from the derivatives ``f^(k)(a.value)``, ``k = 0..order``."""
    nil = Jet(a.c.copy(), a.order)
    nil.c[0] = 0.0
    out = Jet.constant(derivs[0], a.order)
    p = None
    for k in range(1, a.order + 1):
        p = nil if p is None else p * nil
        out = out + p * (derivs[k] / math.factorial(k))
    return out


def _binom_derivs(a0: np.ndarray, p: float, order: int) -> list[np.ndarray]:
    out = []
    coef = 1.0
    for k in range(order + 1):
        out.append(coef * a0 ** (p - k))
        coef *= p - k
    return out


def power(a, p: float):
    """``a**p`` for a positive scalar (elementwise) jet or array."""
    if isinstance(a, Jet):
        if float(p).is_integer() and p >= 0:
            return ipow(a, int(p))
        return apply_series(a, _binom_derivs(a.value, float(p), a.order))
    return np.asarray(a, dtype=float) ** p


def ipow(a, p: int):
    if p == 0:
        if isinstance(a, Jet):
            return Jet.constant(np.ones(a.shape), a.order)
        return np.ones(np.shape(a))
    out = a
    for _ in range(p - 1):
        out = out * a
    return out


def cos(a):
    if not isinstance(a, Jet):
        return np.cos(a)
    v = a.value
    cyc = [np.cos(v), -np.sin(v), -np.cos(v), np.sin(v)]
    return apply_series(a, [cyc[k % 4] for k in range(a.order + 1)])


def exp(a):
    if not isinstance(a, Jet):
        return np.exp(a)
    e = np.exp(a.value)
    return apply_series(a, [e] * (a.order + 1))


def transpose(a):
    return a.swapaxes(-1, -2) if isinstance(a, Jet) else np.swapaxes(a, -1, -2)


def trace(a):
    if isinstance(a, Jet):
        m = a.shape[-1]
        out = a[..., 0, 0]
        for i in range(1, m):
            out = out + a[..., i, i]
        return out
    return np.trace(a, axis1=-2, axis2=-1)


def _perm_sign(p: tuple[int, ...]) -> int:
    sign = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def det(a):
    """Determinant along the last two axes (Leibniz expansion for jets)."""
    if not isinstance(a, Jet):
        return np.linalg.det(a)
    m = a.shape[-1]
    if m == 1:
        return a[..., 0, 0]
    if m == 2:
        return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    import itertools

    out = None
    for perm in itertools.permutations(range(m)):
        term = a[..., 0, perm[0]]
        for i in range(1, m):
            term = term * a[..., i, perm[i]]
        term = term if _perm_sign(perm) > 0 else -term
        out = term if out is None else out + term
    return out


def inv(a):
    """Inverse along the last two axes (adjugate over determinant for jets)."""
    if not isinstance(a, Jet):
        return np.linalg.inv(a)
    m = a.shape[-1]
    rdet = power(det(a), -1.0)
    if m == 1:
        c = rdet.c[..., None, None]
        return Jet(c, a.order)
    cof = np.empty(a.c.shape)
    idx = list(range(m))
    for i in range(m):
        for j in range(m):
            rows = [r for r in idx if r != j]
            cols = [c for c in idx if c != i]
            minor = a[..., rows, :][..., :, cols]
            val = det(minor) * rdet
            cof[..., i, j] = val.c if (i + j) % 2 == 0 else -val.c
    return Jet(cof, a.order)


def seed_directions(x: np.ndarray, directions: np.ndarray) -> Jet:
    """Jet for ``x + sum_r eps_r directions[..., r, :, :]``.

    ``directions`` has shape ``(..., D, n, m)``; the result has the broadcast
    batch shape of ``x`` and ``directions`` without the ``D`` axis.
    """
    order = directions.shape[-3]
    base = np.broadcast_shapes(x.shape, directions.shape[:-3] + directions.shape[-2:])
    c = np.zeros((1 << order,) + base)
    c[0] = np.broadcast_to(x, base)
    for r in range(order):
        c[1 << r] = np.broadcast_to(directions[..., r, :, :], base)
    return Jet(c, order)


def stack(items: list, axis: int = -1):
    """``np.stack`` for a list of jets (all of one order) or arrays."""
    if any(isinstance(a, Jet) for a in items):
        order = next(a.order for a in items if isinstance(a, Jet))
        cs = [a.c if isinstance(a, Jet) else Jet.constant(a, order).c for a in items]
        ax = axis if axis < 0 else axis + 1
        return Jet(np.stack(cs, axis=ax), order)
    return np.stack(items, axis=axis)


def gram_schmidt(a):
    """Orthonormalize the columns of ``a`` (shape ``(..., n, p)``) in order.

    Modified Gram-Schmidt with a positive diagonal, so on arrays the result
    equals the ``Q`` factor of the positive-diagonal QR decomposition. Works
    on jets, which makes the map differentiable to any order.
    """
    p = a.shape[-1]
    cols = []
    for j in range(p):
        c = a[..., :, j]
        for q in cols:
            c = c - q * (q * c).sum(-1)[..., None]
        norm = power((c * c).sum(-1), -0.5)
        cols.append(c * norm[..., None])
    return stack(cols, axis=-1)


def concat(items: list, axis: int = -1):
    """Concatenate jets and/or arrays along a trailing ``axis``.

    Leading (batch) dimensions are broadcast first, so a constant block can
    be attached to a batched jet.
    """
    if axis >= 0:
        raise ValueError("concat needs a negative axis")
    shapes = [a.shape for a in items]
    lead = np.broadcast_shapes(*[sh[: len(sh) + axis] for sh in shapes])
    if not any(isinstance(a, Jet) for a in items):
        arrs = [np.broadcast_to(a, lead + a.shape[len(a.shape) + axis :]) for a in items]
        return np.concatenate(arrs, axis=axis)
    order = next(a.order for a in items if isinstance(a, Jet))
    cs = []
    for a in items:
        c = a.c if isinstance(a, Jet) else Jet.constant(np.asarray(a, dtype=float), order).c
        tail = c.shape[c.ndim + axis :]
        pad = len(lead) + len(tail) - (c.ndim - 1)
        c = c.reshape((c.shape[0],) + (1,) * pad + c.shape[1:])
        cs.append(np.broadcast_to(c, (c.shape[0],) + lead + tail))
    return Jet(np.concatenate(cs, axis=axis), order)
