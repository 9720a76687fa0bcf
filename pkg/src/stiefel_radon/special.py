"""Siegel gamma function, Bernstein polynomial and normalization constants.

All gamma ratios are evaluated through leading Laurent coefficients: each
classical factor ``Gamma(a + s*eps)`` contributes either its value (order 0)
or, at a nonpositive integer ``a = -p``, the residue ``(-1)^p / (p! s)`` with
a simple pole. Net pole order decides between ``Pole`` and ``Finite``; when
numerator and denominator poles balance, the product of leading coefficients
is the limit of the ratio, so cancelled poles give the correct finite value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaln, gammasgn

from .errors import InadmissibleParameters, require

_INT_TOL = 1e-12


@dataclass(frozen=True)
class MeroValue:
    """Value of a meromorphic function at a real point: finite or a pole."""

    value: float | None = None
    pole_order: int = 0

    def __post_init__(self):
        if self.pole_order < 0:
            raise ValueError("pole order must be non-negative")
        if self.pole_order == 0 and (self.value is None or not math.isfinite(self.value)):
            raise ValueError("finite MeroValue needs a finite value")

    @property
    def is_pole(self) -> bool:
        return self.pole_order > 0

    def __float__(self) -> float:
        if self.is_pole:
            raise ValueError(f"pole of order {self.pole_order}")
        return float(self.value)

    def to_dict(self) -> dict:
        if self.is_pole:
            return {"pole_order": self.pole_order}
        return {"value": self.value}


def Finite(value: float) -> MeroValue:
    return MeroValue(value=float(value))


def Pole(order: int) -> MeroValue:
    if order < 1:
        raise ValueError("pole order must be >= 1")
    return MeroValue(value=None, pole_order=int(order))


def _nonpositive_integer(a: float) -> int | None:
    r = round(a)
    if r <= 0 and abs(a - r) <= _INT_TOL * max(1.0, abs(a)):
        return -int(r)
    return None


@dataclass
class _Laurent:
    """Leading term ``sign * exp(log) * eps^(-poles)`` of a product of gammas."""

    poles: int = 0
    log: float = 0.0
    sign: float = 1.0

    def times_gamma(self, a: float, slope: float, power: int = 1) -> None:
        p = _nonpositive_integer(a)
        if p is not None:
            lg = -gammaln(p + 1.0) - math.log(abs(slope))
            sg = (-1.0) ** p * math.copysign(1.0, slope)
            self.poles += power
        else:
            lg = float(gammaln(a))
            sg = float(gammasgn(a))
        self.log += power * lg
        self.sign *= sg if power % 2 else 1.0

    def times_siegel(self, m: int, a: float, slope: float, power: int = 1) -> None:
        self.log += power * 0.25 * m * (m - 1) * math.log(math.pi)
        for j in range(m):
            self.times_gamma(a - 0.5 * j, slope, power)

    def value(self) -> MeroValue:
        if self.poles > 0:
            return Pole(self.poles)
        if self.poles < 0:
            return Finite(0.0)
        return Finite(self.sign * math.exp(self.log))


def siegel_gamma(m: int, alpha: float) -> MeroValue:
    """Siegel gamma ``Gamma_m(alpha) = pi^{m(m-1)/4} prod_j Gamma(alpha - j/2)``.

    Returns ``Pole(order)`` where ``order`` counts the factors sitting at a
    nonpositive integer.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    acc = _Laurent()
    acc.times_siegel(m, float(alpha), 1.0)
    return acc.value()


def log_siegel_gamma(m: int, alpha: float) -> tuple[float, float]:
    """``(log|Gamma_m(alpha)|, sign)``; raises at poles."""
    acc = _Laurent()
    acc.times_siegel(m, float(alpha), 1.0)
    if acc.poles:
        raise ValueError(f"Gamma_{m}({alpha}) is a pole")
    return acc.log, acc.sign


def siegel_ratio(
    num: Iterable[tuple[int, float, float]],
    den: Iterable[tuple[int, float, float]] = (),
    log_prefactor: float = 0.0,
) -> MeroValue:
    """Ratio of Siegel gammas, each given as ``(m, argument, d argument / d lambda)``.

    Constants that do not depend on lambda use slope 1; the slope only
    matters when poles cancel.
    """
    acc = _Laurent(log=log_prefactor)
    for m, a, s in num:
        acc.times_siegel(m, a, s, 1)
    for m, a, s in den:
        acc.times_siegel(m, a, s, -1)
    return acc.value()


def bernstein_poly(ell: int, m: int, n: int, lam: float) -> float:
    """``B_{l,m,n}(lam) = prod_{i<m} prod_{j<l} (lam+n-i+2j)(lam+2+2j+i)``."""
    out = 1.0
    for i in range(m):
        for j in range(ell):
            out *= (lam + n - i + 2 * j) * (lam + 2 + 2 * j + i)
    return out


CONSTANT_KINDS = (
    "gamma_mk",
    "delta_m",
    "c_j",
    "tilde_c_j",
    "delta_j",
    "delta_0",
    "tilde_delta",
    "intertwining_c",
    "nonlocal_c",
    "sigma_nm",
)

# Parameters each constant needs.
CONSTANT_PARAMS = {
    "gamma_mk": ("n", "m", "k", "lam"),
    "delta_m": ("n", "m", "lam"),
    "c_j": ("n", "m", "k", "j"),
    "tilde_c_j": ("n", "m", "k", "j"),
    "delta_j": ("n", "m", "k", "j"),
    "delta_0": ("n", "m", "k"),
    "tilde_delta": ("n", "m", "k"),
    "intertwining_c": ("n", "m"),
    "nonlocal_c": ("n", "m", "k"),
    "sigma_nm": ("n", "m"),
}


def _mkn(n, m, k):
    require(1 <= m, "1 <= m")
    require(m <= k, "m <= k")
    require(k <= n - 1, "k <= n-1")


def _interm(n, m, k, j):
    _mkn(n, m, k)
    require(n - k + j >= m, "n-k+j >= m")
    require(0 <= j <= m - 1, "0 <= j <= m-1")


def _liddyz(n, m, k, j):
    require(j >= 0, "j >= 0")
    require(m - n <= j - k, "m-n <= j-k")
    require(j - k <= min(-m, m - k - 1), "j-k <= min(-m, m-k-1)")


def constant(kind: str, n: int | None = None, m: int | None = None, k: int | None = None,
             j: int | None = None, lam: float | None = None) -> MeroValue:
    """Evaluate one of the named normalization constants.

    Parameters
    ----------
    kind : str
        One of :data:`CONSTANT_KINDS`.
    n, m, k, j, lam
        Parameters as required by ``kind`` (see :data:`CONSTANT_PARAMS`).

    Raises
    ------
    InadmissibleParameters
        If a required parameter is missing or an admissibility condition fails.
    """
    if kind not in CONSTANT_PARAMS:
        raise InadmissibleParameters(f"unknown constant kind {kind!r}")
    given = {"n": n, "m": m, "k": k, "j": j, "lam": lam}
    for p in CONSTANT_PARAMS[kind]:
        if given[p] is None:
            raise InadmissibleParameters(f"constant {kind} needs parameter {p}")

    if kind == "gamma_mk":
        _mkn(n, m, k)
        return siegel_ratio(
            [(m, m / 2, 1.0), (m, -lam / 2, -0.5)],
            [(m, n / 2, 1.0), (m, (lam + k) / 2, 0.5)],
        )
    if kind == "delta_m":
        require(m >= 1, "1 <= m")
        require(2 * m <= n, "2m <= n")
        return siegel_ratio(
            [(m, m / 2, 1.0), (m, -lam / 2, -0.5)],
            [(m, n / 2, 1.0), (m, (lam + n - m) / 2, 0.5)],
        )
    if kind == "c_j":
        _interm(n, m, k, j)
        return siegel_ratio([(m, n / 2, 1.0)], [(m, k / 2, 1.0), (m, (n - k + j) / 2, 1.0)])
    if kind == "tilde_c_j":
        _mkn(n, m, k)
        _liddyz(n, m, k, j)
        return siegel_ratio(
            [(m, m / 2, 1.0), (m, (k - j) / 2, 1.0)],
            [(m, k / 2, 1.0), (m, (n - k + j) / 2, 1.0)],
        )
    if kind == "delta_j":
        _mkn(n, m, k)
        require(k <= n - m, "k <= n-m")
        _liddyz(n, m, k, j)
        return siegel_ratio(
            [(m, (k - j) / 2, 1.0), (m, m / 2, 1.0)],
            [(m, (n - k + j) / 2, 1.0), (m, (n - m) / 2, 1.0)],
        )
    if kind == "delta_0":
        _mkn(n, m, k)
        require(k <= n - m, "k <= n-m")
        return siegel_ratio(
            [(m, k / 2, 1.0), (m, m / 2, 1.0)],
            [(m, (n - k) / 2, 1.0), (m, (n - m) / 2, 1.0)],
        )
    if kind == "tilde_delta":
        _mkn(n, m, k)
        require(k <= n - m, "k <= n-m")
        return siegel_ratio([(m, k / 2, 1.0)], [(m, (n - m) / 2, 1.0)])
    if kind == "intertwining_c":
        require(m >= 1, "1 <= m")
        require(m <= n - m, "m <= n-m")
        require(n % 2 == 0, "n even")
        acc = _Laurent()
        acc.times_siegel(m, m / 2, 1.0, 2)
        acc.times_siegel(m, (n - m) / 2, 1.0, -2)
        return acc.value()
    if kind == "nonlocal_c":
        require(m >= 1, "1 <= m")
        require(m < k, "m < k")
        require(k <= n - m, "k <= n-m")
        require((n - k - m) % 2 == 1, "n-k-m odd")
        return siegel_ratio(
            [(m, m / 2, 1.0), (m, (k - 1) / 2, 1.0)],
            [(m, (n - m) / 2, 1.0), (m, (n - k + 1) / 2, 1.0)],
        )
    # sigma_nm
    require(1 <= m <= n, "1 <= m <= n")
    log_pref = m * math.log(2.0) + 0.5 * n * m * math.log(math.pi)
    return siegel_ratio([], [(m, n / 2, 1.0)], log_prefactor=log_pref)


def cosine_mass(n: int, m: int, k: int, lam: float) -> MeroValue:
    """Closed form of ``int |u0'v|_m^lam d_*v`` over ``V(n, m)``."""
    return siegel_ratio(
        [(m, n / 2, 1.0), (m, (lam + k) / 2, 0.5)],
        [(m, k / 2, 1.0), (m, (lam + n) / 2, 0.5)],
    )


def sine_mass(n: int, m: int, lam: float) -> MeroValue:
    """Closed form of ``int det(I - v'uu'v)^{lam/2} d_*v`` over ``V(n, m)``."""
    return siegel_ratio(
        [(m, n / 2, 1.0), (m, (lam + n - m) / 2, 0.5)],
        [(m, (n - m) / 2, 1.0), (m, (lam + n) / 2, 0.5)],
    )


def gaussian_moment(n: int, m: int, lam: float) -> MeroValue:
    """``E |x|_m^lam`` for ``x`` with i.i.d. ``N(0, 1/2)`` entries.

    From polar coordinates, ``x'x`` is Wishart and the moment equals
    ``Gamma_m((n+lam)/2) / Gamma_m(n/2)``.
    """
    return siegel_ratio([(m, (n + lam) / 2, 0.5)], [(m, n / 2, 1.0)])


def half_integer_grid(lo: float, hi: float) -> np.ndarray:
    """Points ``lo, lo+1/2, ..., hi``."""
    return np.arange(round(2 * lo), round(2 * hi) + 1) / 2.0


def normalized_cosine_mass(n: int, m: int, k: int, lam: float) -> MeroValue:
    """``gamma_{m,k}(lam)`` times :func:`cosine_mass` as one meromorphic ratio.

    Keeping the product in a single ratio lets a zero of the normalization
    cancel a pole of the mass, which happens at the a.c. points ``lam = j-k``.
    """
    return siegel_ratio(
        [(m, m / 2, 1.0), (m, -lam / 2, -0.5), (m, n / 2, 1.0), (m, (lam + k) / 2, 0.5)],
        [(m, n / 2, 1.0), (m, (lam + k) / 2, 0.5), (m, k / 2, 1.0), (m, (lam + n) / 2, 0.5)],
    )


def normalized_sine_mass(n: int, m: int, lam: float) -> MeroValue:
    """``delta_m(lam)`` times :func:`sine_mass` as one meromorphic ratio."""
    return siegel_ratio(
        [(m, m / 2, 1.0), (m, -lam / 2, -0.5), (m, n / 2, 1.0), (m, (lam + n - m) / 2, 0.5)],
        [(m, n / 2, 1.0), (m, (lam + n - m) / 2, 0.5), (m, (n - m) / 2, 1.0), (m, (lam + n) / 2, 0.5)],
    )
