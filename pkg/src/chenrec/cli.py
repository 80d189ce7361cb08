"""Command line interface.

    chenrec verify --scene FILE [--checks a,b,c] [--degree N] [--tol T]
                   [--report text|json]
    chenrec lvalue --qexp FILE --n K [--tol T]
    chenrec tame-symbol --scene FILE --pole INDEX [--report text|json]
    chenrec qexp-delta --out FILE --cutoff M

Exit codes: 0 all requested checks pass, 1 any failure, 2 input error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .harness import (
    KNOWN_CHECKS,
    SceneFormatError,
    emit_report,
    load_scene,
    run_checks,
)
from .modular import (
    ModularError,
    delta_qexp,
    load_qexp,
    lvalue_iterated,
    lvalue_moment_reference,
    save_qexp,
)
from .reciprocity import SceneError, scene_tame_symbol
from .regularization import RegularizationError
from .forms import INFINITY


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chenrec",
        description="iterated-integral generating series and reciprocity checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="run checks from a scene file")
    verify.add_argument("--scene", required=True)
    verify.add_argument(
        "--checks",
        default=None,
        help=f"comma separated subset of: {','.join(KNOWN_CHECKS)}",
    )
    verify.add_argument("--degree", type=int, default=None)
    verify.add_argument("--tol", type=float, default=None)
    verify.add_argument("--report", choices=("text", "json"), default="text")

    lvalue = sub.add_parser("lvalue", help="iterated-integral L-value of a cusp form")
    lvalue.add_argument("--qexp", required=True, help="q-expansion file")
    lvalue.add_argument("--n", type=int, required=True)
    lvalue.add_argument("--tol", type=float, default=1e-10)

    tame = sub.add_parser("tame-symbol", help="tame symbol at one scene pole")
    tame.add_argument("--scene", required=True)
    tame.add_argument("--pole", type=int, required=True, help="index into the ordered pole list")
    tame.add_argument("--report", choices=("text", "json"), default="text")

    qd = sub.add_parser("qexp-delta", help="write the weight-12 cusp generator")
    qd.add_argument("--out", required=True)
    qd.add_argument("--cutoff", type=int, default=160)
    return parser


def _cmd_verify(args) -> int:
    hs = load_scene(args.scene)
    if args.degree is not None:
        hs.scene = dataclasses.replace(hs.scene, truncation=args.degree)
    if args.tol is not None:
        hs.tolerances = {"default": args.tol}
    checks = None
    if args.checks is not None:
        checks = [c for c in args.checks.split(",") if c]
    report = run_checks(hs, checks)
    print(emit_report(report, args.report))
    return report.exit_code


def _cmd_lvalue(args) -> int:
    form = load_qexp(args.qexp)
    value = lvalue_iterated(form, args.n, tol=args.tol)
    reference = lvalue_moment_reference(form, args.n, tol=args.tol)
    rel = abs(value - reference) / max(abs(reference), 1e-300)
    print(f"L(F,{args.n}) iterated route : {value}")
    print(f"L(F,{args.n}) oracle moment  : {reference}")
    print(f"relative difference          : {rel:.3e}")
    return 0 if rel < max(args.tol * 1e4, 1e-6) else 1


def _cmd_tame_symbol(args) -> int:
    hs = load_scene(args.scene)
    order = hs.scene.ordered_poles()
    if not 0 <= args.pole < len(order):
        raise SceneError(
            f"pole index {args.pole} out of range (scene has {len(order)} poles)"
        )
    pole = order[args.pole]
    series = scene_tame_symbol(hs.scene, pole)
    if args.report == "json":
        payload = {
            "pole": "infinity" if pole is INFINITY else [pole.real, pole.imag],
            "coefficients": {
                "".join(map(str, w)): [c.real, c.imag]
                for w, c in series.items()
            },
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"tame symbol at pole {pole}:")
        for w, c in series.items():
            name = "1" if not w else ".".join(f"A{i}" for i in w)
            print(f"  {name:<12} {c.real:+.12e} {c.imag:+.12e}j")
    return 0


def _cmd_qexp_delta(args) -> int:
    save_qexp(delta_qexp(args.cutoff), args.out)
    print(f"wrote delta q-expansion (cutoff {args.cutoff}) to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "lvalue":
            return _cmd_lvalue(args)
        if args.command == "tame-symbol":
            return _cmd_tame_symbol(args)
        if args.command == "qexp-delta":
            return _cmd_qexp_delta(args)
        parser.error(f"unknown command {args.command!r}")
    except (SceneFormatError, SceneError, ModularError, RegularizationError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
