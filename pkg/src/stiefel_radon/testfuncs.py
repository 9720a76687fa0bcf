"""Catalog of smooth right-O(m)-invariant test functions on ``V(n, m)``.

Each entry carries a closed-form homogeneous extension

    E_lam f (x) = |x|_m^lam f(x (x'x)^{-1/2})

written with the generic helpers of :mod:`stiefel_radon.jets`, so the same
code evaluates on arrays and on jets. Also home of the Funk-Hecke oracle for
zonal harmonics on the sphere.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special as sps

from . import jets as J
from .errors import InvalidParams


@dataclass(frozen=True)
class InvariantFunction:
    """A function on ``V(n, m)`` with its homogeneous extension.

    Attributes
    ----------
    n, m : int
    kind : str
        Catalog kind.
    extension : callable
        ``extension(x, lam)`` on arrays or jets of shape ``(..., n, m)``.
    right_invariant : bool
    harmonic_degree : int or None
        Degree of the spherical harmonic (``m = 1`` entries only).
    quadratic_form : ndarray or None
        ``S`` when ``f(v) = tr(v'Sv)``; lets estimators average the
        projection ``vv'`` instead of evaluating ``f`` per sample.
    """

    n: int
    m: int
    kind: str
    extension: Callable
    right_invariant: bool = True
    harmonic_degree: int | None = None
    quadratic_form: np.ndarray | None = field(default=None, compare=False)
    params: dict = field(default_factory=dict, compare=False)

    def eval_extension(self, x, lam: float):
        return self.extension(x, lam)

    def eval_frame(self, v):
        """Value at frames ``v``; the extension at ``lam = 0``."""
        return self.extension(v, 0.0)

    def __call__(self, v):
        return self.eval_frame(v)


def _gram(x):
    return J.transpose(x) @ x


def _ext_constant(x, lam):
    return J.power(J.det(_gram(x)), lam / 2)


def _scalar(x):
    """Entry ``[..., 0, 0]`` of a stack of ``1 x 1`` matrices."""
    return x[..., 0, 0]


def make_test_function(kind: str, params: dict | None = None, *, n: int, m: int) -> InvariantFunction:
    """Build a catalog entry.

    Parameters
    ----------
    kind : {"constant", "trace_quadratic", "det_quadratic", "cosine_power", "sphere_harmonic"}
    params : dict
        ``S`` (symmetric ``n x n``) for the quadratic kinds; ``a`` (frame
        ``n x k``) and ``p`` (positive int) for ``cosine_power``; ``d`` (even
        int) and ``direction`` (vector) for ``sphere_harmonic``.
    n, m : int
        Frame dimensions.
    """
    params = dict(params or {})
    if not 1 <= m <= n:
        raise InvalidParams("need 1 <= m <= n")

    if kind == "constant":
        return InvariantFunction(n, m, kind, _ext_constant, quadratic_form=np.eye(n) / m, params=params)

    if kind in ("trace_quadratic", "det_quadratic"):
        S = np.asarray(params.get("S", np.eye(n)), dtype=float)
        if S.shape != (n, n) or not np.allclose(S, S.T, atol=1e-14):
            raise InvalidParams("S must be a symmetric n x n matrix")
        if kind == "trace_quadratic":
            def ext(x, lam, S=S):
                g = _gram(x)
                return J.power(J.det(g), lam / 2) * J.trace(J.inv(g) @ (J.transpose(x) @ (S @ x)))

            return InvariantFunction(n, m, kind, ext, quadratic_form=S, params={"S": S})
        if np.min(np.linalg.eigvalsh(S)) <= 0:
            raise InvalidParams("det_quadratic needs S positive definite")

        def ext(x, lam, S=S):
            return J.power(J.det(_gram(x)), lam / 2 - 1) * J.det(J.transpose(x) @ (S @ x))

        return InvariantFunction(n, m, kind, ext, params={"S": S})

    if kind == "cosine_power":
        a = np.asarray(params.get("a"), dtype=float)
        p = params.get("p", 1)
        if a.ndim != 2 or a.shape[0] != n or not np.allclose(a.T @ a, np.eye(a.shape[1]), atol=1e-10):
            raise InvalidParams("a must be an n x k frame")
        if int(p) != p or p < 1:
            raise InvalidParams("p must be a positive integer")
        p = int(p)
        aa = a @ a.T

        def ext(x, lam, aa=aa, p=p):
            c = J.det(J.transpose(x) @ (aa @ x))
            return J.power(J.det(_gram(x)), lam / 2 - p) * J.ipow(c, p)

        return InvariantFunction(n, m, kind, ext, params={"a": a, "p": p})

    if kind == "sphere_harmonic":
        if m != 1:
            raise InvalidParams("sphere_harmonic is defined for m = 1 only")
        if n < 3:
            raise InvalidParams("sphere_harmonic needs n >= 3")
        d = params.get("d", 2)
        if int(d) != d or d < 0 or d % 2:
            raise InvalidParams("sphere_harmonic needs an even degree d >= 0")
        d = int(d)
        e = np.asarray(params.get("direction", np.eye(n)[0]), dtype=float).reshape(n)
        e = e / np.linalg.norm(e)
        coef = zonal_coefficients(n, d)

        def ext(x, lam, e=e, coef=coef, d=d):
            t = _scalar(J.transpose(x) @ e[:, None])
            r2 = _scalar(_gram(x))
            h = None
            for kk, ck in enumerate(coef):
                term = J.ipow(t, d - 2 * kk) * J.ipow(r2, kk) * ck
                h = term if h is None else h + term
            return J.power(r2, (lam - d) / 2) * h

        return InvariantFunction(n, m, kind, ext, harmonic_degree=d, params={"d": d, "direction": e})

    raise InvalidParams(f"unknown test function kind {kind!r}")


def zonal_coefficients(n: int, d: int) -> list[float]:
    """Coefficients ``c_k`` of the monic solid zonal harmonic
    ``sum_k c_k t^{d-2k} |x|^{2k}``, ``t = e.x``, in ``R^n``.

    Taken from the Gegenbauer polynomial ``C_d^{(n-2)/2}`` divided by its
    leading coefficient.
    """
    alpha = (n - 2) / 2
    raw = [
        (-1) ** k * math.gamma(d - k + alpha) / (math.gamma(alpha) * math.factorial(k) * math.factorial(d - 2 * k))
        * 2.0 ** (d - 2 * k)
        for k in range(d // 2 + 1)
    ]
    return [c / raw[0] for c in raw]


def legendre_normalized(n: int, d: int, t):
    """Gegenbauer polynomial of degree ``d`` for ``S^{n-1}``, scaled to 1 at ``t = 1``."""
    alpha = (n - 2) / 2
    return sps.eval_gegenbauer(d, alpha, t) / sps.eval_gegenbauer(d, alpha, 1.0)


def funk_hecke_multiplier(n: int, d: int) -> float:
    """Eigenvalue of the sphere Funk transform on degree-``d`` harmonics.

    Equals the normalized Gegenbauer polynomial at zero, which for even ``d``
    is ``(-1)^{d/2} (1*3*...*(d-1)) / ((n-1)(n+1)...(n+d-3))``.
    """
    if d % 2:
        return 0.0
    num = 1.0
    den = 1.0
    for i in range(d // 2):
        num *= 2 * i + 1
        den *= n - 1 + 2 * i
    return (-1) ** (d // 2) * num / den


def funk_hecke_quadrature(n: int, d: int, beta: float) -> float:
    """Sphere Funk transform of the zonal ``P_d(e . v)`` at a point at angle
    ``beta`` from ``e``, divided by ``P_d(cos beta)``, via 1-D quadrature.

    On the great subsphere orthogonal to the point, ``e . w = sin(beta) t``
    where ``t`` has density proportional to ``(1 - t^2)^{(n-4)/2}``.
    """
    w = lambda t: (1.0 - t * t) ** ((n - 4) / 2)
    num = integrate.quad(lambda t: legendre_normalized(n, d, math.sin(beta) * t) * w(t), -1, 1, limit=200)[0]
    den = integrate.quad(w, -1, 1, limit=200)[0]
    return num / den / float(legendre_normalized(n, d, math.cos(beta)))


def beltrami_eigenvalue(n: int, d: int) -> float:
    """Beltrami-Laplace eigenvalue ``-d(d+n-2)`` on degree-``d`` harmonics."""
    return -d * (d + n - 2)


# --------------------------------------------------------------------------
# String keys, e.g. "trace_quadratic:S=diag(1,2,3,4)"

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def _parse_value(text: str, n: int):
    text = text.strip()
    mt = re.fullmatch(r"diag\((.*)\)", text)
    if mt:
        vals = [float(s) for s in mt.group(1).split(",")]
        if len(vals) != n:
            raise InvalidParams(f"diag(...) needs {n} entries")
        return np.diag(vals)
    mt = re.fullmatch(r"e(\d+)", text)
    if mt:
        i = int(mt.group(1))
        if not 1 <= i <= n:
            raise InvalidParams(f"e{i} is out of range for n = {n}")
        return np.eye(n)[i - 1]
    mt = re.fullmatch(r"anchor(\d+)", text)
    if mt:
        k = int(mt.group(1))
        a = np.zeros((n, k))
        a[n - k :, :] = np.eye(k)
        return a
    if re.fullmatch(_NUM, text):
        return float(text)
    if text == "I":
        return np.eye(n)
    raise InvalidParams(f"cannot parse parameter value {text!r}")


def parse_catalog_key(key: str, n: int, m: int) -> InvariantFunction:
    """Build a catalog function from ``kind[:name=value;name=value]``.

    Values: numbers, ``I``, ``diag(a,b,...)``, ``e<i>`` (unit vector) and
    ``anchor<k>`` (the frame ``[0; I_k]``).
    """
    kind, _, rest = key.partition(":")
    params = {}
    if rest:
        for item in re.split(r";(?![^()]*\))", rest):
            if not item.strip():
                continue
            name, eq, value = item.partition("=")
            if not eq:
                raise InvalidParams(f"malformed parameter {item!r}")
            params[name.strip()] = _parse_value(value, n)
    return make_test_function(kind.strip(), params, n=n, m=m)
