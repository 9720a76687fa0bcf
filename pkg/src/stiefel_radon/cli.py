"""Command line interface: ``stiefel-radon <command> ...``.

Every command prints JSON on stdout. ``verify run`` exits with status 0 iff
all experiments pass.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import jets as J
from .diffops import (apply_diffop, bernstein_check, beltrami_delta_lambda, cayley_laplace_expand,
                      delta_lambda_ell, kernel_diff_cosine_dual, kernel_diff_sine)
from .errors import ConfigError, StiefelRadonError
from .experiments import TAGS, load_suite, report_json, run_suite
from .linalg import Stream
from .manifolds import sample_orthogonal, sample_stiefel
from .special import CONSTANT_PARAMS, constant
from .testfuncs import make_test_function, parse_catalog_key
from .transforms import (a_km, cosine_dual, cosine_transform, funk_dual, funk_transform, grassmann_radon,
                         intermediate_funk, intermediate_funk_dual, sine_transform)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=lambda o: np.asarray(o).tolist()))


def _point(spec: str, n: int, k: int) -> np.ndarray:
    """``anchor`` gives ``[0; I_k]``; ``seed:<s>`` a Haar random frame."""
    if spec == "anchor":
        return np.eye(n)[:, n - k :]
    if spec.startswith("seed:"):
        try:
            s = int(spec[5:])
        except ValueError:
            raise SystemExit(f"bad --point {spec!r}") from None
        return sample_stiefel(n, k, Stream(s).child("point"))[0]
    raise SystemExit(f"bad --point {spec!r}; use anchor or seed:<s>")


def cmd_constants(args) -> int:
    v = constant(args.kind, args.n, args.m, args.k, args.j, args.lam)
    params = {p: getattr(args, "lam" if p == "lam" else p) for p in CONSTANT_PARAMS[args.kind]}
    out = {"kind": args.kind, "params": params}
    out.update({"pole_order": v.pole_order} if v.is_pole else {"value": v.value})
    _emit(out)
    return 0


def cmd_transform(args) -> int:
    n, m, k, name = args.n, args.m, args.k, args.name
    N, seed = args.samples, args.seed
    if name == "cosine":
        est = cosine_transform(parse_catalog_key(args.f, n, m), _point(args.point, n, k), args.lam, N, seed,
                               sampler=args.sampler, normalized=args.normalized)
    elif name == "cosine-dual":
        est = cosine_dual(parse_catalog_key(args.f, n, k), _point(args.point, n, m), args.lam, N, seed,
                          sampler=args.sampler, normalized=args.normalized)
    elif name == "sine":
        est = sine_transform(parse_catalog_key(args.f, n, m), _point(args.point, n, m), args.lam, N, seed,
                             sampler=args.sampler, normalized=args.normalized)
    elif name == "funk":
        est = funk_transform(parse_catalog_key(args.f, n, m), _point(args.point, n, k), N, seed)
    elif name == "funk-dual":
        est = funk_dual(parse_catalog_key(args.f, n, k), _point(args.point, n, m), N, seed)
    elif name == "ifunk":
        est = intermediate_funk(parse_catalog_key(args.f, n, m), _point(args.point, n, k), args.j, N, seed)
    elif name == "ifunk-dual":
        est = intermediate_funk_dual(parse_catalog_key(args.f, n, k), _point(args.point, n, m), args.j, N, seed)
    elif name == "akm":
        est = a_km(parse_catalog_key(args.f, n, k), _point(args.point, n, m), N, seed)
    else:
        if args.direction == "forward":
            f, eta = parse_catalog_key(args.f, n, m), _point(args.point, n, k)
        else:
            f, eta = parse_catalog_key(args.f, n, k), _point(args.point, n, m)
        est = grassmann_radon(f, eta, args.direction, m, k, N, seed)
    _emit(est.to_dict())
    return 0


def cmd_diffop(args) -> int:
    rng = Stream(args.seed).child("diffop").generator()
    n, m, ell, lam = args.n, args.m, args.ell, args.lam
    if args.check == "bernstein":
        x = rng.standard_normal((args.points, n, m))
        out = {"check": "bernstein", "params": {"n": n, "m": m, "ell": ell, "lambda": lam}}
        for backend in ("jets", "fd"):
            out[f"max_relative_error_{backend}"] = float(np.max(bernstein_check(m, ell, n, lam, x, backend)))
    elif args.check == "beltrami":
        f = make_test_function("sphere_harmonic", {"d": args.d}, n=n, m=1)
        v = sample_stiefel(n, 1, Stream(args.seed).child("points"), args.points)
        got = delta_lambda_ell(f, v, lam, 1) / f.eval_frame(v)
        out = {"check": "beltrami", "params": {"n": n, "d": args.d, "lambda": lam},
               "expected": beltrami_delta_lambda(n, args.d, lam), "observed": got.tolist()}
    else:
        f = parse_catalog_key(args.f, n, m)
        v = sample_stiefel(n, m, Stream(args.seed).child("points"), args.points)
        beta = sample_orthogonal(m, Stream(args.seed).child("beta"), args.points)
        a = delta_lambda_ell(f, v, lam, ell)
        b = delta_lambda_ell(f, v @ beta, lam, ell)
        op = cayley_laplace_expand(m, ell)
        rho = sample_orthogonal(n, Stream(args.seed).child("rho"))[0]
        x = rng.standard_normal((args.points, n, m))
        F = lambda z: J.power(J.det(J.transpose(z) @ z), (lam + 2 * ell) / 2) * J.trace(J.transpose(z) @ z)
        left = apply_diffop(op, lambda z: F(rho @ z), x)
        right = apply_diffop(op, F, rho @ x)
        out = {"check": "invariance", "params": {"n": n, "m": m, "ell": ell, "lambda": lam, "f": args.f},
               "right_max_relative_error": float(np.max(np.abs(a - b) / np.abs(a))),
               "left_max_relative_error": float(np.max(np.abs(left - right) / np.abs(right)))}
    _emit(out)
    return 0


def cmd_continue(args) -> int:
    n, m, k = args.n, args.m, args.k
    if args.kind == "sine":
        f = parse_catalog_key(args.f, n, m)
        est = kernel_diff_sine(f, _point(args.point, n, m), args.lam, args.ell, args.samples, args.seed,
                               mode=args.mode)
        exact = float(f.eval_frame(_point(args.point, n, m))) if args.lam == m - n else None
    else:
        phi = parse_catalog_key(args.f, n, k)
        est = kernel_diff_cosine_dual(phi, _point(args.point, n, m), args.lam, args.ell, args.samples, args.seed,
                                      mode=args.mode)
        exact = None
    out = {"kind": args.kind, "estimate": est.to_dict()}
    if exact is not None:
        out["f_at_point"] = exact
    _emit(out)
    return 0


def cmd_verify(args) -> int:
    if args.verify_cmd == "list":
        for name, tag in TAGS.items():
            crit = f"  [criterion {tag.criterion}]" if tag.criterion else ""
            print(f"{name:24s} {tag.params}{crit}")
        return 0
    specs = load_suite(args.config, args.seed)

    def progress(rec):
        print(f"{rec['id']:28s} {rec['status']:12s} {rec['runtime']:8.1f}s", file=sys.stderr)

    report = run_suite(specs, threads=args.threads, jobs=args.jobs, csv_dir=args.csv, progress=progress)
    text = report_json(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0 if report["pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stiefel-radon", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constants", help="normalizing constants")
    c.add_argument("--kind", required=True, choices=sorted(CONSTANT_PARAMS))
    for name in ("n", "m", "k", "j"):
        c.add_argument(f"--{name}", type=int)
    c.add_argument("--lambda", dest="lam", type=float)
    c.set_defaults(func=cmd_constants)

    t = sub.add_parser("transform", help="Monte Carlo transform at one point")
    t.add_argument("--name", required=True, choices=["cosine", "cosine-dual", "sine", "funk", "funk-dual",
                                                     "ifunk", "ifunk-dual", "akm", "radon"])
    t.add_argument("--n", type=int, required=True)
    t.add_argument("--m", type=int, required=True)
    t.add_argument("--k", type=int)
    t.add_argument("--j", type=int, default=0)
    t.add_argument("--lambda", dest="lam", type=float, default=0.0)
    t.add_argument("--f", default="constant")
    t.add_argument("--point", default="anchor")
    t.add_argument("--samples", type=int, default=100_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--sampler", choices=["haar", "tilted"], default="haar")
    t.add_argument("--normalized", action="store_true")
    t.add_argument("--direction", choices=["forward", "dual"], default="forward")
    t.set_defaults(func=cmd_transform)

    d = sub.add_parser("diffop", help="Cayley-Laplace operator checks")
    d.add_argument("--check", required=True, choices=["bernstein", "beltrami", "invariance"])
    d.add_argument("--n", type=int, default=4)
    d.add_argument("--m", type=int, default=1)
    d.add_argument("--ell", type=int, default=1)
    d.add_argument("--d", type=int, default=2)
    d.add_argument("--lambda", dest="lam", type=float, default=-3.0)
    d.add_argument("--f", default="trace_quadratic")
    d.add_argument("--points", type=int, default=5)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_diffop)

    k = sub.add_parser("continue", help="analytic continuation by order reduction")
    k.add_argument("--kind", choices=["sine", "cosine-dual"], default="sine")
    k.add_argument("--lambda", dest="lam", type=float, required=True)
    k.add_argument("--ell", type=int, default=1)
    k.add_argument("--n", type=int, required=True)
    k.add_argument("--m", type=int, required=True)
    k.add_argument("--k", type=int)
    k.add_argument("--f", default="constant")
    k.add_argument("--point", default="anchor")
    k.add_argument("--mode", choices=["auto", "kernel", "function"], default="auto")
    k.add_argument("--samples", type=int, default=100_000)
    k.add_argument("--seed", type=int, default=0)
    k.set_defaults(func=cmd_continue)

    v = sub.add_parser("verify", help="verification suites")
    vs = v.add_subparsers(dest="verify_cmd", required=True)
    r = vs.add_parser("run", help="run a suite")
    r.add_argument("--config", help="suite TOML (default: the built-in suite)")
    r.add_argument("--out", help="report path (default: stdout)")
    r.add_argument("--csv", help="directory for lambda-sweep CSV files")
    r.add_argument("--threads", type=int, default=1, help="worker threads per estimator")
    r.add_argument("--jobs", type=int, default=1, help="experiments run concurrently")
    r.add_argument("--seed", type=int, help="override the suite seed")
    vs.add_parser("list", help="list experiment tags")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StiefelRadonError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
