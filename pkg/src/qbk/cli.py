"""Command-line interface: ``qbk construct | modulus | dilatation | verify | render``."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import modulus as mod
from . import verify as ver
from .dilatation import DEFAULT_SEED, DEFAULT_STEP, annulus_sampler, ball_sampler, box_sampler, sample_dilatation
from .geometry import DimensionError
from .qcmaps import from_json as map_from_json
from .quasiball import BallChain, ChainValidationError, construct, validate_chain, verify_construction

EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int(s: str) -> int:
    return int(s, 0)


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# commands


def cmd_construct(args) -> int:
    chain = BallChain.from_json(_load(args.chain))
    if args.n is not None and args.n != chain.dim:
        raise DimensionError(f"chain lives in R^{chain.dim}, --n {args.n} requested")
    check = validate_chain(chain)
    if not check:
        raise ChainValidationError(check.message)
    qc = construct(chain)
    out = qc.to_json()
    if args.verify_samples:
        rep = verify_construction(
            qc, samples=args.verify_samples, dilatation_samples=min(args.verify_samples, 10_000), seed=args.seed
        )
        out["verification"] = rep.to_json()
    if args.svg:
        from .render import construction_svg

        with open(args.svg, "w") as fh:
            fh.write(construction_svg(qc))
    _emit(out, args.out)
    return 0


def cmd_modulus(args) -> int:
    k = args.kind
    if k == "annulus":
        out = {"value": mod.annulus_modulus(args.a, args.b, args.n)}
    elif k == "grotzsch":
        out = {"interval": mod.grotzsch_bounds(args.s, args.n).to_json()}
    elif k == "teichmuller":
        out = {"interval": mod.teichmuller_bounds(args.t, args.n).to_json()}
    elif k == "lambda":
        lo, hi = mod.lambda_bounds(args.n)
        out = {"interval": {"lower": lo, "upper": hi}}
    elif k == "comparison":
        out = {"value": mod.comparison_constant(args.n, args.r0, args.lam), "lambda": args.lam}
    else:
        ring = mod.RingDomain.from_json(_load(args.ring))
        r = mod.solve_capacity_2d(ring, args.res)
        out = {"value": r.value, "sweeps": r.sweeps, "residual": r.residual, "res": r.resolution}
    _emit(out)
    return 0


def cmd_dilatation(args) -> int:
    e = map_from_json(_load(args.map))
    n = args.n
    center = np.zeros(n) if args.center is None else np.asarray(args.center, dtype=float)
    if args.sampler == "ball":
        sampler = ball_sampler(center, args.radius)
    elif args.sampler == "annulus":
        sampler = annulus_sampler(args.inner, args.radius, n)
    else:
        sampler = box_sampler(center - args.radius, center + args.radius)
    rep = sample_dilatation(e, sampler, args.count, h=args.step, seed=args.seed, keep_samples=bool(args.csv))
    if args.csv:
        rep.write_csv(args.csv)
    _emit(rep.to_json(), args.out)
    return 0


def _family(d: dict):
    t = d.get("type")
    if t == "annulus":
        return ver.AnnulusFamily(float(d["a"]), float(d["b"]), int(d.get("n", 2)))
    if t == "sector":
        return ver.SectorFamily(float(d["a"]), float(d["b"]), float(d["gamma"]), float(d["alpha"]))
    if t == "ring":
        return ver.RingFamily(mod.RingDomain.from_json(d["ring"]), int(d.get("grid", 256)))
    raise ValueError(f"unknown family type {t!r}")


def cmd_verify(args) -> int:
    k = args.kind
    if k == "suite":
        report = ver.run_suite(threads=args.threads)
        text = report.dumps()
        if args.json:
            with open(args.json, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        failed = [c.name for c in report.checks if not c.passed]
        for name in failed:
            sys.stderr.write(f"qbk: check failed: {name}\n")
        return 0 if not failed else EXIT_NUMERIC
    if k in ("poletskii", "ko"):
        e = map_from_json(_load(args.map))
        fam = _family(_load(args.family))
        c = ver.check_poletskii(e, fam) if k == "poletskii" else ver.check_ko(e, fam, args.N)
        _emit(c.to_json())
        return 0 if c.passed else EXIT_NUMERIC
    h = ver.preimage_size_bound(args.d2, args.n, args.K, args.p, args.t)
    _emit({"value": h})
    return 0


def cmd_render(args) -> int:
    from .render import construction_svg, point_cloud

    qc = construct(BallChain.from_json(_load(args.chain)))
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(construction_svg(qc))
    if args.cloud:
        P = point_cloud(qc, args.samples, args.seed)
        n = qc.dim
        header = ",".join([f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)])
        np.savetxt(args.cloud, P, delimiter=",", header=header, comments="", fmt="%.17g")
    if not (args.svg or args.cloud):
        raise UsageError("render needs --svg and/or --cloud")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qbk", description="Quasiballs from ball chains, dilatation sampling and modulus checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("construct", help="build the quasiconformal map of a ball chain")
    c.add_argument("chain")
    c.add_argument("--n", type=int)
    c.add_argument("--out")
    c.add_argument("--svg")
    c.add_argument("--verify-samples", type=int, default=0)
    c.add_argument("--seed", type=_int, default=DEFAULT_SEED)
    c.set_defaults(func=cmd_construct)

    m = sub.add_parser("modulus", help="closed forms, capacity bounds and grid capacity")
    ms = m.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    a = ms.add_parser("annulus")
    a.add_argument("--a", type=float, required=True)
    a.add_argument("--b", type=float, required=True)
    a.add_argument("--n", type=int, default=2)
    g = ms.add_parser("grotzsch")
    g.add_argument("--s", type=float, required=True)
    g.add_argument("--n", type=int, default=2)
    t = ms.add_parser("teichmuller")
    t.add_argument("--t", type=float, required=True)
    t.add_argument("--n", type=int, default=2)
    la = ms.add_parser("lambda")
    la.add_argument("--n", type=int, default=2)
    co = ms.add_parser("comparison")
    co.add_argument("--n", type=int, default=2)
    co.add_argument("--r0", type=float, required=True)
    co.add_argument("--lam", choices=("upper", "lower"), default="upper")
    gr = ms.add_parser("grid")
    gr.add_argument("--ring", required=True)
    gr.add_argument("--res", type=int, default=512)
    m.set_defaults(func=cmd_modulus)

    d = sub.add_parser("dilatation", help="sampled dilatation of a map")
    d.add_argument("--map", required=True)
    d.add_argument("--count", type=int, default=10_000)
    d.add_argument("--n", type=int, default=2)
    d.add_argument("--sampler", choices=("ball", "annulus", "box"), default="ball")
    d.add_argument("--center", type=float, nargs="+")
    d.add_argument("--radius", type=float, default=1.0)
    d.add_argument("--inner", type=float, default=0.5)
    d.add_argument("--step", type=float, default=DEFAULT_STEP)
    d.add_argument("--seed", type=_int, default=DEFAULT_SEED)
    d.add_argument("--csv")
    d.add_argument("--out")
    d.set_defaults(func=cmd_dilatation)

    v = sub.add_parser("verify", help="modulus inequality checks")
    vs = v.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    s = vs.add_parser("suite")
    s.add_argument("--json")
    s.add_argument("--threads", type=int)
    for name in ("poletskii", "ko"):
        q = vs.add_parser(name)
        q.add_argument("--map", required=True)
        q.add_argument("--family", required=True)
        if name == "ko":
            q.add_argument("--N", type=int)
    pr = vs.add_parser("preimage")
    pr.add_argument("--d2", type=float, required=True)
    pr.add_argument("--n", type=int, default=2)
    pr.add_argument("--K", type=float, default=1.0)
    pr.add_argument("--p", type=int, default=1)
    pr.add_argument("--t", type=float, required=True)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("render", help="SVG boundaries and point clouds of a construction")
    r.add_argument("chain")
    r.add_argument("--svg")
    r.add_argument("--cloud")
    r.add_argument("--samples", type=int, default=10_000)
    r.add_argument("--seed", type=_int, default=DEFAULT_SEED)
    r.set_defaults(func=cmd_render)
    return p


def _fail(kind: str, code: int, exc) -> int:
    msg = " ".join(str(exc).split())
    sys.stderr.write(f"qbk: error[{kind}]: {msg}\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    except ArithmeticError as exc:
        return _fail("numeric", EXIT_NUMERIC, exc)
    except (ValueError, KeyError, TypeError, OSError) as exc:
        return _fail("validation", EXIT_VALIDATION, exc)


if __name__ == "__main__":
    sys.exit(main())
