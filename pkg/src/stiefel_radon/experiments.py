"""Declarative verification experiments and suite reports.

An experiment is a tag plus parameters. Running it produces a list of checks,
each comparing an observed value (with standard error) to an expected value
that carries a provenance string. A check passes when

    |observed - expected| <= max(sigma_multiplier * stderr, relative_cap * |expected|, absolute)

Suites are TOML files::

    seed = 1234

    [[experiment]]
    name = "mass-cosine"
    samples = 1000000
    params = { cases = [[4, 1, 1, 2.0]] }
    tolerance = { relative_cap = 0.01 }
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import jets as J
from .diffops import (apply_diffop, bernstein_check, cayley_laplace_expand, kernel_diff_cosine_dual,
                      kernel_diff_sine)
from .errors import ConfigError, InadmissibleParameters, OutOfConvergenceRegion, PoleAtLambda, StiefelRadonError
from .inversion import intertwined_inversion, local_inversion, nonlocal_inversion, sphere_chain_multiplier
from .linalg import Stream
from .manifolds import cos_metric, frame_complement, sample_orthogonal, sample_stiefel, sin_metric
from .montecarlo import combined_stderr, workers
from .special import (constant, cosine_mass, half_integer_grid, normalized_cosine_mass, sine_mass,
                      siegel_gamma)
from .testfuncs import funk_hecke_multiplier, funk_hecke_quadrature, make_test_function, parse_catalog_key
from .transforms import (a_km, cosine_transform, duality_pairing, grassmann_composition, grassmann_radon,
                         intermediate_funk, normalized_cosine_dual, sine_transform)

SCHEMA = 1
SEED_ENV = "STIEFEL_RADON_SEED"
DEFAULT_SUITE = Path(__file__).with_name("default_suite.toml")


@dataclass(frozen=True)
class Tolerance:
    sigma_multiplier: float = 4.0
    relative_cap: float = 0.05
    absolute: float = 0.0

    def passes(self, observed: float, stderr: float, expected: float) -> bool:
        if not (math.isfinite(observed) and math.isfinite(expected)):
            return False
        bound = max(self.sigma_multiplier * stderr, self.relative_cap * abs(expected), self.absolute)
        return abs(observed - expected) <= bound


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment of a suite.

    ``samples`` is the Monte Carlo budget (per side, per point); ``inner``
    splits it into outer x inner for nested estimators.
    """

    name: str
    params: dict = field(default_factory=dict)
    samples: int = 100_000
    inner: int | None = None
    seed: int = 0
    tolerance: Tolerance = field(default_factory=Tolerance)
    label: str | None = None

    @property
    def id(self) -> str:
        return self.label or self.name


@dataclass
class Check:
    label: str
    expected: float
    provenance: str
    observed: float
    stderr: float = 0.0
    tolerance: Tolerance | None = None
    extra: dict = field(default_factory=dict)

    def record(self, default: Tolerance) -> dict:
        tol = self.tolerance or default
        out = {
            "label": self.label,
            "expected": {"value": _num(self.expected), "provenance": self.provenance},
            "observed": {"mean": _num(self.observed), "stderr": _num(self.stderr)},
            "tolerance": asdict(tol),
            "pass": bool(tol.passes(self.observed, self.stderr, self.expected)),
        }
        if self.extra:
            out["extra"] = self.extra
        return out


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _stream(spec: ExperimentSpec, *parts) -> Stream:
    return Stream(spec.seed).child(spec.name, *parts)


def _points(spec: ExperimentSpec, n: int, m: int, count: int) -> np.ndarray:
    return sample_stiefel(n, m, _stream(spec, "points"), count)


def _func(key: str, n: int, m: int):
    return parse_catalog_key(key, n, m)


def _exact_tol(rel: float) -> Tolerance:
    return Tolerance(0.0, rel, 0.0)


def _bound_tol(bound: float) -> Tolerance:
    return Tolerance(0.0, 0.0, bound)


def _linf(observed: np.ndarray, exact: np.ndarray) -> float:
    """``max |observed - exact| / max |exact|``."""
    return float(np.max(np.abs(observed - exact)) / np.max(np.abs(exact)))


# --------------------------------------------------------------------------
# Experiments


def exp_siegel_gamma(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    count = int(p.get("count", 50))
    max_m = int(p.get("max_m", 4))
    rng = _stream(spec).generator()
    checks = [Check("Gamma_2(1) = pi", math.pi, "trivial: Gamma_2(1) = pi^{1/2} Gamma(1) Gamma(1/2)",
                    siegel_gamma(2, 1.0).value, tolerance=_exact_tol(1e-12))]
    worst = 0.0
    tested = 0
    for m in range(2, max_m + 1):
        while tested < count * (m - 1):
            a = float(rng.uniform(-6.0, 6.0))
            lhs, prev = siegel_gamma(m, a), siegel_gamma(m - 1, a - 0.5)
            g = math.gamma(a) if not (a <= 0 and a == int(a)) else None
            if lhs.is_pole or prev.is_pole or g is None:
                continue
            rhs = math.pi ** ((m - 1) / 2) * g * prev.value
            worst = max(worst, abs(lhs.value - rhs) / abs(rhs))
            tested += 1
    checks.append(Check(f"recursion, {tested} random arguments, max relative error", 0.0,
                        "formula: Gamma_m(a) = pi^{(m-1)/2} Gamma(a) Gamma_{m-1}(a - 1/2)", worst,
                        tolerance=_bound_tol(1e-12)))
    grid = half_integer_grid(float(p.get("grid_lo", -5.0)), float(p.get("grid_hi", 2.0)))
    mismatch = 0
    for m in range(1, max_m + 1):
        for a in grid:
            # poles where a - i/2 is a nonpositive integer for some i < m
            polar = any((a - i / 2) <= 0 and float(a - i / 2).is_integer() for i in range(m))
            mismatch += polar != siegel_gamma(m, float(a)).is_pole
    checks.append(Check("pole set on the half-integer grid, mismatches", 0.0,
                        "oracle: factorwise pole set of the product formula", float(mismatch),
                        tolerance=_bound_tol(0.0)))
    return checks


def exp_bernstein(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    cases = p.get("cases", [[1, 1, 4], [1, 2, 4], [2, 1, 4], [2, 1, 6]])
    lams = p.get("lambdas", [-2.5, -1.3, 0.7])
    count = int(p.get("points", 20))
    bounds = {"jets": float(p.get("jets_tol", 1e-6)), "fd": float(p.get("fd_tol", 1e-2))}
    checks = []
    rng = _stream(spec).generator()
    for m, ell, n in cases:
        x = rng.standard_normal((count, n, m))
        for lam in lams:
            for backend, bound in bounds.items():
                err = float(np.max(bernstein_check(m, ell, n, lam, x, backend)))
                checks.append(Check(f"(m,l,n)=({m},{ell},{n}) lam={lam} {backend}: max relative error", 0.0,
                                    "formula: Bernstein polynomial B_{l,m,n}(lam)", err,
                                    tolerance=_bound_tol(bound)))
    return checks


def exp_fourier_symbol(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    rng = _stream(spec).generator()
    checks = []
    for n, m in p.get("cases", [[4, 1], [4, 2], [6, 2]]):
        op = cayley_laplace_expand(m, 1)
        y = rng.standard_normal((n, m))
        x = rng.standard_normal((n, m))
        val = apply_diffop(op, lambda z: J.cos(J.trace(J.transpose(y) @ z)), x)
        expected = (-1) ** m * np.linalg.det(y.T @ y) * np.cos(np.trace(y.T @ x))
        checks.append(Check(f"n={n} m={m}", expected, "trivial: symbol (-1)^m |y|^2 of det(d'd) on cos(tr y'x)",
                            float(val), tolerance=_exact_tol(1e-8)))
    return checks


def exp_mass_cosine(spec: ExperimentSpec) -> list[Check]:
    cases = spec.params.get("cases", [[4, 1, 1, 2.0], [5, 1, 2, 1.0], [5, 2, 2, 1.0], [6, 2, 3, 2.0]])
    checks = []
    for n, m, k, lam in cases:
        u = np.eye(n)[:, n - k :]
        est = cosine_transform(make_test_function("constant", n=n, m=m), u, float(lam), spec.samples,
                               _stream(spec, n, m, k, lam))
        checks.append(Check(f"cosine mass (n,m,k,lam)=({n},{m},{k},{lam})", cosine_mass(n, m, k, lam).value,
                            "formula: cosine mass as a Siegel gamma ratio", est.mean, est.stderr))
        if (n, m, k, lam) == (4, 1, 1, 2.0):
            checks.append(Check("closed form at (4,1,1,2) equals 1/n", 0.25,
                                "oracle: E[(u.v)^2] = 1/n on the sphere", cosine_mass(n, m, k, lam).value,
                                tolerance=_exact_tol(1e-12)))
    return checks


def exp_mass_sine(spec: ExperimentSpec) -> list[Check]:
    cases = spec.params.get("cases", [[4, 1, 2.0], [6, 2, 2.0]])
    checks = []
    for n, m, lam in cases:
        u = np.eye(n)[:, :m]
        est = sine_transform(make_test_function("constant", n=n, m=m), u, float(lam), spec.samples,
                             _stream(spec, n, m, lam), normalized=False)
        checks.append(Check(f"sine mass (n,m,lam)=({n},{m},{lam})", sine_mass(n, m, lam).value,
                            "formula: sine mass as a Siegel gamma ratio", est.mean, est.stderr))
    return checks


def exp_identities(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    count = int(p.get("count", 50))
    n, m, k = int(p.get("n", 6)), int(p.get("m", 2)), int(p.get("k", 3))
    st = _stream(spec)
    u = sample_stiefel(n, k, st.child("u"), count)
    v = sample_stiefel(n, m, st.child("v"), count)
    um = sample_stiefel(n, m, st.child("um"), count)
    tol = _bound_tol(1e-10)
    checks = []
    err = np.max(np.abs(sin_metric(um, v) - cos_metric(frame_complement(um), v) ** 2))
    checks.append(Check("sin_metric = |complement' v|^2", 0.0, "trivial: Sylvester determinant identity", err,
                        tolerance=tol))
    al = sample_orthogonal(k, st.child("alpha"), count)
    be = sample_orthogonal(m, st.child("beta"), count)
    err = np.max(np.abs(cos_metric(u @ al, v @ be) - cos_metric(u, v)))
    checks.append(Check("|u'v| basis independent", 0.0, "trivial: |det| of an orthogonal factor is 1", err,
                        tolerance=tol))
    rho = sample_orthogonal(n, st.child("rho"), count)
    err = np.max(np.abs(cos_metric(rho @ u, rho @ v) - cos_metric(u, v)))
    checks.append(Check("|u'v| orthogonally invariant", 0.0, "trivial: (rho u)'(rho v) = u'v", err, tolerance=tol))
    phi = _func(p.get("phi", "trace_quadratic:S=diag(1,2,3,4,5,6)"), n, m)
    err = max(abs(a_km(phi, vi, 10, st.child("akm")).mean - float(phi.eval_frame(vi))) for vi in v[:5])
    checks.append(Check("A_{m,m} = identity", 0.0, "trivial: no averaging at k = m", err, tolerance=tol))
    err = max(abs(grassmann_radon(phi, vi, "forward", m, m, 10, st.child("radon")).mean - float(phi.eval_frame(vi)))
              for vi in v[:5])
    checks.append(Check("p = q Radon transform = identity", 0.0, "trivial: the only p-plane in a p-plane", err,
                        tolerance=tol))
    return checks


def exp_duality(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    cases = p.get("cases", [
        {"tag": "funk", "n": 4, "m": 1, "k": 1},
        {"tag": "funk", "n": 5, "m": 1, "k": 2},
        {"tag": "cosine", "n": 4, "m": 1, "k": 2, "lam": 1.0},
        {"tag": "ifunk", "n": 5, "m": 2, "k": 2, "j": 1},
    ])
    inner = spec.inner or int(round(math.sqrt(spec.samples)))
    outer = max(1, spec.samples // inner)
    checks = []
    for c in cases:
        n, m, k = c["n"], c["m"], c["k"]
        f = _func(c.get("f", "trace_quadratic:S=diag(" + ",".join(str(i + 1) for i in range(n)) + ")"), n, m)
        phi = _func(c.get("phi", "trace_quadratic:S=diag(" + ",".join(str((2 * i) % n) for i in range(n)) + ")"),
                    n, k)
        lhs, rhs = duality_pairing(c["tag"], f, phi, outer, inner, _stream(spec, c["tag"], n, m, k),
                                   lam=c.get("lam"), j=c.get("j", 0))
        label = f"{c['tag']} (n,m,k)=({n},{m},{k})" + (f" lam={c['lam']}" if "lam" in c else "") + \
            (f" j={c['j']}" if "j" in c else "")
        checks.append(Check(label, rhs.mean, "identity: <f, T* phi> estimated independently", lhs.mean,
                            combined_stderr(lhs, rhs), extra={"rhs_stderr": rhs.stderr}))
    return checks


def exp_ifunk_equivalence(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    n, m, k, j = int(p.get("n", 5)), int(p.get("m", 2)), int(p.get("k", 2)), int(p.get("j", 1))
    f = _func(p.get("f", "trace_quadratic:S=diag(1,2,3,4,5)"), n, m)
    checks = []
    for i, u in enumerate(_points(spec, n, k, int(p.get("points", 3)))):
        a = intermediate_funk(f, u, j, spec.samples, _stream(spec, "stiefel", i))
        b = grassmann_composition(f, u, j, spec.samples, _stream(spec, "grassmann", i))
        checks.append(Check(f"point {i}", b.mean, "identity: Grassmann composition estimated independently",
                            a.mean, combined_stderr(a, b)))
    return checks


def exp_order_reduction_cosine(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    n, m, k = int(p.get("n", 4)), int(p.get("m", 1)), int(p.get("k", 2))
    lam, ell = float(p.get("lam", -1.5)), int(p.get("ell", 1))
    phi = _func(p.get("phi", "trace_quadratic:S=diag(1,2,3,4)"), n, k)
    checks = []
    for i, v in enumerate(_points(spec, n, m, int(p.get("points", 3)))):
        a = kernel_diff_cosine_dual(phi, v, lam, ell, spec.samples, _stream(spec, "kernel", i))
        b = normalized_cosine_dual(phi, v, lam, spec.samples, _stream(spec, "direct", i), sampler="tilted")
        checks.append(Check(f"point {i}", b.mean, "identity: direct normalized dual cosine transform", a.mean,
                            combined_stderr(a, b), extra={"mode": a.params.get("mode")}))
    return checks


def exp_order_reduction_sine(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    n, m = int(p.get("n", 4)), int(p.get("m", 1))
    lam, ell = float(p.get("lam", -2.5)), int(p.get("ell", 1))
    f = _func(p.get("f", "trace_quadratic:S=diag(1,2,3,4)"), n, m)
    checks = []
    for i, u in enumerate(_points(spec, n, m, int(p.get("points", 3)))):
        a = kernel_diff_sine(f, u, lam, ell, spec.samples, _stream(spec, "kernel", i))
        b = sine_transform(f, u, lam, spec.samples, _stream(spec, "direct", i), sampler="tilted")
        checks.append(Check(f"point {i}", b.mean, "identity: direct normalized sine transform", a.mean,
                            combined_stderr(a, b), extra={"mode": a.params.get("mode")}))
    return checks


def exp_invert_local_sphere(spec: ExperimentSpec) -> list[Check]:
    checks = []
    for d in spec.params.get("degrees", [2, 4]):
        r = sphere_chain_multiplier(4, d)
        checks.append(Check(f"d={d}: delta_0 * eigenvalue * c_d^2", 1.0,
                            "oracle: Funk-Hecke multiplier, Beltrami eigenvalue and delta_0", r["product"],
                            tolerance=_exact_tol(1e-10), extra=r))
        for beta in (0.3, 0.9, 1.4):
            checks.append(Check(f"d={d}: Funk-Hecke multiplier by quadrature at beta={beta}",
                                funk_hecke_multiplier(4, d), "oracle: 1-D Gegenbauer quadrature",
                                funk_hecke_quadrature(4, d, beta), tolerance=_exact_tol(1e-10)))
    return checks


def _reconstruction(spec: ExperimentSpec, f, pts, run, tag: str) -> list[Check]:
    p = spec.params
    est = [run(v, i) for i, v in enumerate(pts)]
    obs = np.array([e.mean for e in est])
    ref = np.array([float(f.eval_frame(v)) for v in pts])
    if p.get("norm", "linf") == "linf":
        return [Check(f"{tag}: max |f_hat - f| / max |f| over {len(pts)} points", 0.0,
                      "trivial: exact f at the evaluation points", _linf(obs, ref),
                      tolerance=_bound_tol(float(p.get("bound", spec.tolerance.relative_cap))),
                      extra={"observed": obs.tolist(), "stderr": [e.stderr for e in est], "exact": ref.tolist()})]
    return [Check(f"{tag}: point {i}", r, "trivial: exact f at the evaluation point", e.mean, e.stderr)
            for i, (r, e) in enumerate(zip(ref, est))]


def exp_invert_local(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    n, m, k, j = int(p.get("n", 4)), int(p.get("m", 1)), int(p.get("k", 1)), int(p.get("j", 0))
    f = _func(p.get("f", "trace_quadratic:S=diag(1,0,0,0)"), n, m)
    st = _stream(spec)
    fast = bool(p.get("fast", False))
    return _reconstruction(spec, f, _points(spec, n, m, int(p.get("points", 20))),
                           lambda v, i: local_inversion(f, v, k, j, spec.samples, st, fast=fast), "local chain")


def exp_intertwining(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    n, m = int(p.get("n", 4)), int(p.get("m", 1))
    f = _func(p.get("f", "trace_quadratic:S=diag(1,0,0,0)"), n, m)
    pts = _points(spec, n, m, int(p.get("points", 10)))
    out = []
    for order in ("DF", "FD"):
        st = _stream(spec, order)
        out += _reconstruction(spec, f, pts, lambda v, i: intertwined_inversion(f, v, order, spec.samples, st),
                               order)
    return out


def exp_reconstruct_sine(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    n, m = int(p.get("n", 6)), int(p.get("m", 2))
    lam = float(p.get("lam", m - n))
    ell = int(p.get("ell", 1))
    f = _func(p.get("f", "trace_quadratic:S=diag(1,2,3,4,5,6)"), n, m)
    st = _stream(spec)
    return _reconstruction(spec, f, _points(spec, n, m, int(p.get("points", 5))),
                           lambda v, i: kernel_diff_sine(f, v, lam, ell, spec.samples, st), "sine")


def exp_invert_nonlocal(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    n, m, k = int(p.get("n", 6)), int(p.get("m", 2)), int(p.get("k", 3))
    f = _func(p.get("f", "trace_quadratic:S=diag(1,2,3,4,5,6)"), n, m)
    st = _stream(spec)
    fast = bool(p.get("fast", True))
    return _reconstruction(spec, f, _points(spec, n, m, int(p.get("points", 3))),
                           lambda v, i: nonlocal_inversion(f, v, k, spec.samples, st, fast=fast), "nonlocal chain")


def exp_bridge(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    n, m, k, j = int(p.get("n", 6)), int(p.get("m", 2)), int(p.get("k", 3)), int(p.get("j", 1))
    lam = j - k
    if lam > min(-m, m - k - 1):
        raise InadmissibleParameters(f"violated: j - k <= min(-m, m-k-1) = {min(-m, m - k - 1)}")
    got = normalized_cosine_mass(n, m, k, lam)
    return [Check(f"normalized cosine mass at lam = j-k = {lam}", constant("tilde_c_j", n, m, k, j).value,
                  "identity: intermediate Funk transforms preserve constants", got.value,
                  tolerance=_exact_tol(1e-10))]


def exp_identity_akm(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    n, m = int(p.get("n", 5)), int(p.get("m", 2))
    phi = _func(p.get("phi", "trace_quadratic:S=diag(1,2,3,4,5)"), n, m)
    v = _points(spec, n, m, 1)[0]
    est = a_km(phi, v, spec.samples, _stream(spec))
    return [Check("A_{m,m} phi (v) = phi(v)", float(phi.eval_frame(v)), "trivial: no averaging at k = m",
                  est.mean, est.stderr, tolerance=_exact_tol(1e-12))]


def exp_sweep_cosine_mass(spec: ExperimentSpec) -> list[Check]:
    p = spec.params
    n, m, k = int(p.get("n", 4)), int(p.get("m", 1)), int(p.get("k", 2))
    out = []
    for lam in p.get("lambdas", [-1.5, -1.0, -0.5, 0.5, 1.0, 2.0]):
        u = np.eye(n)[:, n - k :]
        est = cosine_transform(make_test_function("constant", n=n, m=m), u, float(lam), spec.samples,
                               _stream(spec, lam), sampler=p.get("sampler", "tilted"))
        out.append(Check(f"lam={lam}", cosine_mass(n, m, k, lam).value, "formula: cosine mass", est.mean,
                         est.stderr, extra={"lambda": float(lam)}))
    return out


@dataclass(frozen=True)
class Tag:
    run: Callable[[ExperimentSpec], list[Check]]
    params: str
    criterion: int | None = None


TAGS: dict[str, Tag] = {
    "siegel-gamma": Tag(exp_siegel_gamma, "count, max_m, grid_lo, grid_hi", 1),
    "bernstein": Tag(exp_bernstein, "cases [[m,l,n]], lambdas, points, jets_tol, fd_tol", 2),
    "fourier-symbol": Tag(exp_fourier_symbol, "cases [[n,m]]"),
    "mass-cosine": Tag(exp_mass_cosine, "cases [[n,m,k,lam]]; samples", 3),
    "mass-sine": Tag(exp_mass_sine, "cases [[n,m,lam]]; samples", 3),
    "identities": Tag(exp_identities, "n, m, k, count, phi", 4),
    "identity-akm": Tag(exp_identity_akm, "n, m, phi; samples", 4),
    "duality": Tag(exp_duality, "cases [{tag,n,m,k,lam?,j?,f?,phi?}]; samples, inner", 5),
    "ifunk-equivalence": Tag(exp_ifunk_equivalence, "n, m, k, j, f, points; samples", 6),
    "order-reduction-cosine": Tag(exp_order_reduction_cosine, "n, m, k, lam, ell, phi, points; samples", 7),
    "order-reduction-sine": Tag(exp_order_reduction_sine, "n, m, lam, ell, f, points; samples", 7),
    "invert-local-sphere": Tag(exp_invert_local_sphere, "degrees", 8),
    "invert-local": Tag(exp_invert_local, "n, m, k, j, f, points, norm, bound, fast; samples", 8),
    "intertwining": Tag(exp_intertwining, "n, m, f, points, norm, bound; samples", 9),
    "reconstruct-sine": Tag(exp_reconstruct_sine, "n, m, lam, ell, f, points, norm; samples", 10),
    "invert-nonlocal": Tag(exp_invert_nonlocal, "n, m, k, f, points, norm, fast; samples", 11),
    "bridge": Tag(exp_bridge, "n, m, k, j"),
    "sweep-cosine-mass": Tag(exp_sweep_cosine_mass, "n, m, k, lambdas, sampler; samples"),
}


# --------------------------------------------------------------------------
# Running


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run one experiment and return its report record.

    Inadmissible parameters and estimator errors are recorded, not raised.
    """
    if spec.name not in TAGS:
        raise ConfigError(f"unknown experiment tag {spec.name!r}")
    t0 = time.perf_counter()
    rec = {"id": spec.id, "name": spec.name, "criterion": TAGS[spec.name].criterion, "params": spec.params,
           "samples": spec.samples, "seed": spec.seed, "tolerance": asdict(spec.tolerance)}
    try:
        checks = [c.record(spec.tolerance) for c in TAGS[spec.name].run(spec)]
        ok = all(c["pass"] for c in checks)
        rec.update(status="pass" if ok else "fail", checks=checks)
    except (InadmissibleParameters, OutOfConvergenceRegion, PoleAtLambda) as exc:
        rec.update(status="inadmissible", checks=[], error=f"{type(exc).__name__}: {exc}")
    except StiefelRadonError as exc:
        rec.update(status="error", checks=[], error=f"{type(exc).__name__}: {exc}")
    rec["pass"] = rec["status"] == "pass"
    rec["runtime"] = time.perf_counter() - t0
    return rec


def run_suite(specs: list[ExperimentSpec], threads: int = 1, jobs: int = 1, csv_dir=None,
              progress=None) -> dict:
    """Run experiments and assemble a report.

    ``threads`` is the worker count of each estimator; ``jobs`` runs that many
    experiments concurrently. Neither affects the numbers.
    """
    t0 = time.perf_counter()

    def one(spec):
        with workers(threads):
            rec = run_experiment(spec)
        if progress:
            progress(rec)
        return rec

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(one, specs))
    else:
        records = [one(s) for s in specs]
    report = {"schema": SCHEMA, "experiments": records, "pass": all(r["pass"] for r in records),
              "runtime": time.perf_counter() - t0}
    if csv_dir is not None:
        write_sweeps(report, csv_dir)
    return report


def strip_runtime(report: dict) -> dict:
    """Copy of ``report`` without the wall-clock fields."""
    if isinstance(report, dict):
        return {k: strip_runtime(v) for k, v in report.items() if k != "runtime"}
    if isinstance(report, list):
        return [strip_runtime(v) for v in report]
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_sweeps(report: dict, csv_dir) -> list[Path]:
    """Write one CSV per sweep experiment (checks carrying a ``lambda``)."""
    out = []
    d = Path(csv_dir)
    for rec in report["experiments"]:
        rows = [c for c in rec.get("checks", []) if "lambda" in c.get("extra", {})]
        if not rows:
            continue
        d.mkdir(parents=True, exist_ok=True)
        path = d / f"{rec['id']}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "expected", "observed", "stderr", "pass"])
            for c in rows:
                w.writerow([c["extra"]["lambda"], c["expected"]["value"], c["observed"]["mean"],
                            c["observed"]["stderr"], int(c["pass"])])
        out.append(path)
    return out


# --------------------------------------------------------------------------
# Config


def _load_toml(path):
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    text = Path(path).read_text()
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


_SPEC_FIELDS = {"name", "label", "params", "samples", "inner", "seed", "tolerance"}
_TOL_FIELDS = {"sigma_multiplier", "relative_cap", "absolute"}


def _field_error(where: str, msg: str):
    return ConfigError(f"{where}: {msg}")


def parse_suite(data: dict, source: str = "<config>", seed: int | None = None) -> list[ExperimentSpec]:
    """Validate a decoded suite and build its specs.

    The seed is taken from ``seed`` if given, else the environment variable
    ``STIEFEL_RADON_SEED``, else the file (default 0).
    """
    unknown = set(data) - {"seed", "experiment", "tolerance"}
    if unknown:
        raise _field_error(source, f"unknown top-level fields {sorted(unknown)}")
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    base_seed = data.get("seed", 0) if seed is None else seed
    if not isinstance(base_seed, int):
        raise _field_error(f"{source}: seed", "expected an integer")
    base_tol = _tolerance(data.get("tolerance", {}), f"{source}: tolerance", Tolerance())
    exps = data.get("experiment", [])
    if not isinstance(exps, list):
        raise _field_error(f"{source}: experiment", "expected an array of tables [[experiment]]")
    specs = []
    for i, e in enumerate(exps):
        where = f"{source}: experiment[{i}]"
        if not isinstance(e, dict):
            raise _field_error(where, "expected a table")
        bad = set(e) - _SPEC_FIELDS
        if bad:
            raise _field_error(where, f"unknown fields {sorted(bad)}")
        name = e.get("name")
        if name not in TAGS:
            raise _field_error(f"{where}.name", f"unknown experiment tag {name!r}")
        for key in ("samples", "inner", "seed"):
            if key in e and (not isinstance(e[key], int) or e[key] < (0 if key == "seed" else 1)):
                raise _field_error(f"{where}.{key}", "expected a positive integer")
        params = e.get("params", {})
        if not isinstance(params, dict):
            raise _field_error(f"{where}.params", "expected a table")
        specs.append(ExperimentSpec(
            name=name, params=params, samples=e.get("samples", 100_000), inner=e.get("inner"),
            seed=e.get("seed", base_seed), tolerance=_tolerance(e.get("tolerance", {}), f"{where}.tolerance",
                                                                base_tol),
            label=e.get("label")))
    ids = [s.id for s in specs]
    dup = {x for x in ids if ids.count(x) > 1}
    if dup:
        raise _field_error(source, f"duplicate experiment labels {sorted(dup)}")
    return specs


def _tolerance(d, where: str, base: Tolerance) -> Tolerance:
    if not isinstance(d, dict):
        raise _field_error(where, "expected a table")
    bad = set(d) - _TOL_FIELDS
    if bad:
        raise _field_error(where, f"unknown fields {sorted(bad)}")
    for k, v in d.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
            raise _field_error(f"{where}.{k}", "expected a nonnegative number")
    return replace(base, **{k: float(v) for k, v in d.items()})


def load_suite(path=None, seed: int | None = None) -> list[ExperimentSpec]:
    path = Path(path) if path else DEFAULT_SUITE
    return parse_suite(_load_toml(path), str(path), seed)
