"""Command-line front end.

Exit codes: 0 pass, 1 analysis-negative, 2 input or format error,
3 singularity or sampling failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

from .errors import (FlatlabError, InputError, ObstructionError, SingularityError,
                     SingularPointError, IntegrationError)
from .expr import to_string
from .fileformat import (SystemFile, format_system, load_certificate, load_system,
                         load_transform)
from .flatness import (check_sfl, linearizing_output_check, verify_certificate_numeric,
                       verify_certificate_symbolic)
from .numerics import PolySignal
from .obstructions import extract_obstructions, obstruction_chain
from .parsing import parse
from .repro import STAGES, repro_counterexample
from .sysmodel import apply_input_transform, prolong, relative_degree
from .vfields import DEFAULT_SAMPLES, DEFAULT_SEED

EXIT_PASS, EXIT_NEGATIVE, EXIT_INPUT, EXIT_SINGULAR = 0, 1, 2, 3
STATUS = {EXIT_PASS: "pass", EXIT_NEGATIVE: "negative", EXIT_INPUT: "input-error",
          EXIT_SINGULAR: "singular"}
DEFAULT_TOL = 1e-6
DEFAULT_SIGNALS = ("2 + t/2", "1 + t^2")


def report_schema():
    """The JSON schema every ``--json`` report validates against."""
    text = (resources.files("flatlab") / "schemas" / "report.schema.json").read_text()
    return json.loads(text)


class Outcome:
    """What a command hands back: exit code, JSON result, text lines."""

    def __init__(self, code, result, lines):
        self.code = code
        self.result = result
        self.lines = lines


def _int(text):
    return int(text, 0)


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("FLATLAB_SEED")
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise InputError(f"FLATLAB_SEED={env!r} is not an integer") from None
    return DEFAULT_SEED


def _plan(args, system):
    return system.sample_plan(args.seed_value, args.samples)


# ---------------------------------------------------------------------------
# check-sfl


def _field_text(bracket):
    return " + ".join(f"({c})*d/d{name}" for name, c in bracket.items()) or "0"


def cmd_check_sfl(args):
    sf = load_system(args.system)
    report = check_sfl(sf.system, _plan(args, sf.system), args.mode)
    lines = [f"system: n = {sf.system.n}, m = {sf.system.m}"]
    for lv in report.levels:
        flag = "involutive" if lv.involutive else "NOT involutive"
        lines.append(f"D^{lv.index}: dim {lv.dimension}, {flag}")
        if lv.witness is not None:
            w = lv.witness.to_dict()
            i, j = w["pair"]
            lines.append(f"  witness [g{i}, g{j}] = {_field_text(w['bracket'])}")
    lines.append("dimensions: " + ", ".join(str(d) for d in report.dimensions))
    lines.append("verdict: " + ("static feedback linearizable" if report.verdict
                                else "not static feedback linearizable"))
    return Outcome(EXIT_PASS if report.verdict else EXIT_NEGATIVE, report.to_dict(), lines)


# ---------------------------------------------------------------------------
# verify-flat


def _x0(text, n):
    if text is None:
        return [1.0] * n
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise InputError(f"cannot read initial state {text!r}") from None
    if len(vals) != n:
        raise InputError(f"initial state has {len(vals)} entries, system has {n} states")
    return vals


def cmd_verify_flat(args):
    sf = load_system(args.system)
    system = sf.system
    cert = load_certificate(args.certificate, system)
    result = {"mode": args.mode}
    if args.mode == "symbolic":
        check = verify_certificate_symbolic(system, cert)
        result.update(check.to_dict())
        lines = [f"{name}: residual {to_string(r)}" for name, r in check.residuals.items()]
        bad = [name for name, r in check.residuals.items() if not r.is_zero()]
        lines += [f"nonzero residual: {name}" for name in bad]
        lines += [f"defect: {d}" for d in check.defects]
        ok = check.ok
    else:
        signals = [PolySignal.parse(s) for s in (args.signal or DEFAULT_SIGNALS)]
        x0 = _x0(args.x0, system.n)
        check = verify_certificate_numeric(system, cert, signals, x0,
                                           (0, args.t_end), args.step)
        ok = check.passed(args.tol)
        result.update(check.to_dict())
        result.update({"tol": args.tol, "signals": [str(s) for s in signals],
                       "x0": x0, "t_end": args.t_end, "step": args.step, "ok": ok})
        lines = [f"{name}: max relative residual {v:.3e}" for name, v in check.residuals.items()]
        bad = [name for name, v in check.residuals.items() if not v < args.tol]
        lines += [f"residual above tolerance {args.tol:g}: {name}" for name in bad]
    lines.append("certificate: " + ("valid" if ok else "INVALID"))
    return Outcome(EXIT_PASS if ok else EXIT_NEGATIVE, result, lines)


# ---------------------------------------------------------------------------
# prolong


def cmd_prolong(args):
    sf = load_system(args.system)
    system = sf.system
    if args.order < 0:
        raise InputError("prolongation order must be >= 0")
    if args.transform is None and args.order == 0:
        text = format_system(sf)
    else:
        if args.transform is not None:
            t = load_transform(args.transform, system)
            system = apply_input_transform(system, t, _plan(args, system))
        target = args.input if args.input is not None else system.inputs[0].name
        system = prolong(system, system.input_index(target), args.order)
        text = format_system(SystemFile(system))
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    result = {"system": text, "n": system.n, "order": args.order}
    return Outcome(EXIT_PASS, result, None if args.output else text)


# ---------------------------------------------------------------------------
# obstruct


def cmd_obstruct(args):
    sf = load_system(args.system)
    plan = _plan(args, sf.system)
    if args.ansatz == "none":
        obs = extract_obstructions(sf.system, args.level, plan, args.brackets)
        lines = [f"level-{args.level} conditions ({len(obs)}):"]
        lines += [f"  {o.condition} = 0    from {o.source}" for o in obs]
        return Outcome(EXIT_PASS, obs.to_dict(), lines)
    if not sf.ansatz:
        raise InputError("--ansatz affine needs an [ansatz] section in the template")
    chain = obstruction_chain(sf.system, sf.ansatz, sf.transform, plan, args.brackets)
    keep = {"level-1", "ansatz", "level-1 under ansatz", "forced"}
    if args.level == 2:
        keep.add("level-2")
    lines = []
    for step in chain.steps:
        if step.name not in keep:
            continue
        head = f"{step.name}:"
        if step.note:
            head += f" {step.note}"
        lines.append(head)
        lines += [f"  {c} = 0" for c in step.conditions]
    result = {"level": args.level,
              "steps": [s.to_dict() for s in chain.steps if s.name in keep]}
    if args.level == 2:
        for b in chain.branches:
            row = dict(b)
            rank = row.get("jacobian_rank")
            rank_text = "" if rank is None else f", inverse input transform has Jacobian rank {rank}"
            lines.append(f"branch: {row['alternative']}{rank_text}")
        if chain.contradiction:
            lines.append("every branch makes the input transform singular: contradiction")
        result["branches"] = [dict(b) for b in chain.branches]
        result["contradiction"] = chain.contradiction
    return Outcome(EXIT_PASS, result, lines)


# ---------------------------------------------------------------------------
# relative-degree


def cmd_relative_degree(args):
    sf = load_system(args.system)
    system = sf.system
    phi = [parse(text, system.chart, system.functions) for text in args.outputs]
    rho = [relative_degree(system, p, args.cap) for p in phi]
    lines = [f"rho({to_string(p)}) = {'none' if r is None else r}" for p, r in zip(phi, rho)]
    result = {"outputs": [to_string(p) for p in phi], "rho": rho}
    ok = None not in rho
    if len(phi) == 2:
        lin = linearizing_output_check(system, phi, _plan(args, system))
        result["linearizing"] = lin.to_dict()
        lines.append(f"rho1 + rho2 = {sum(r or 0 for r in rho)}, n = {system.n}")
        if lin.rank is not None:
            lines.append(f"decoupling matrix rank {lin.rank}")
        lines.append("linearizing output: " + ("yes" if lin.ok else "no"))
        ok = lin.ok
    return Outcome(EXIT_PASS if ok else EXIT_NEGATIVE, result, lines)


# ---------------------------------------------------------------------------
# repro-paper


def cmd_repro(args):
    report = repro_counterexample(args.stage, args.fixtures, None, args.prolongation_order,
                                  args.seed_value, args.samples)
    lines = [f"{s.name}: {'PASS' if s.passed else 'FAIL'}" for s in report.stages]
    for s in report.stages:
        if s.name in ("case1", "case2") and s.passed:
            lines.append(f"  {s.name}: every remaining alternative makes the input "
                         f"transform singular")
        if "error" in s.details:
            lines.append(f"  {s.name}: {s.details['error']}")
    passed = sum(s.passed for s in report.stages)
    lines.append(f"{passed}/{len(report.stages)} stages pass")
    if report.failed():
        lines.append("failed: " + ", ".join(report.failed()))
    return Outcome(EXIT_PASS if report.passed else EXIT_NEGATIVE, report.to_dict(), lines)


# ---------------------------------------------------------------------------
# argument parsing


def _common(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=_int, default=d(None),
                        help=f"sampling seed (default FLATLAB_SEED or {DEFAULT_SEED:#x})")
    parser.add_argument("--samples", type=int, default=d(DEFAULT_SAMPLES),
                        help="generic sample points")
    parser.add_argument("--json", action="store_true", default=d(False),
                        help="print a JSON report")
    parser.add_argument("--tol", type=float, default=d(DEFAULT_TOL),
                        help="numeric tolerance")


def build_parser():
    p = argparse.ArgumentParser(prog="flatlab",
                                description="Flatness and static feedback linearization checks.")
    _common(p, False)
    common = argparse.ArgumentParser(add_help=False)
    _common(common, True)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check-sfl", parents=[common], help="static feedback linearizability test")
    c.add_argument("system")
    c.add_argument("--mode", choices=("numeric", "symbolic"), default="numeric")
    c.set_defaults(func=cmd_check_sfl)

    c = sub.add_parser("verify-flat", parents=[common], help="check a flat parameterization")
    c.add_argument("system")
    c.add_argument("certificate")
    c.add_argument("--mode", choices=("symbolic", "numeric"), default="symbolic")
    c.add_argument("--signal", action="append",
                   help="polynomial input signal in t, one per input (repeatable)")
    c.add_argument("--x0", help="initial state, comma separated (default all ones)")
    c.add_argument("--t-end", type=float, default=1.0)
    c.add_argument("--step", type=float, default=1e-3)
    c.set_defaults(func=cmd_verify_flat)

    c = sub.add_parser("prolong", parents=[common], help="input transform and prolongation")
    c.add_argument("system")
    c.add_argument("--input", help="input to prolong (default: the first input)")
    c.add_argument("--order", type=int, default=1)
    c.add_argument("--transform", help="input transform file applied first")
    c.add_argument("-o", "--output", help="write the system file here")
    c.set_defaults(func=cmd_prolong)

    c = sub.add_parser("obstruct", parents=[common], help="involutivity conditions of a template")
    c.add_argument("system")
    c.add_argument("--level", type=int, choices=(1, 2), default=1)
    c.add_argument("--ansatz", choices=("affine", "none"), default="affine")
    c.add_argument("--brackets", choices=("coordinate", "all"), default="coordinate")
    c.set_defaults(func=cmd_obstruct)

    c = sub.add_parser("relative-degree", parents=[common], help="relative degrees of outputs")
    c.add_argument("system")
    c.add_argument("outputs", nargs="+", help="output expressions (two for a linearizing check)")
    c.add_argument("--cap", type=int, help="highest derivative order tried")
    c.set_defaults(func=cmd_relative_degree)

    c = sub.add_parser("repro-paper", parents=[common], help="reproduce the counterexample analysis")
    c.add_argument("--stage", action="append", choices=STAGES)
    c.add_argument("--fixtures", help="directory whose files shadow the bundled fixtures")
    c.add_argument("--prolongation-order", type=int, default=4)
    c.set_defaults(func=cmd_repro)
    return p


def _code_for(exc):
    if isinstance(exc, (SingularityError, SingularPointError, IntegrationError)):
        return EXIT_SINGULAR
    return EXIT_INPUT


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        args.seed_value = _seed(args)
        out = args.func(args)
    except (FlatlabError, ValueError, OSError) as exc:
        code = _code_for(exc)
        if isinstance(exc, ObstructionError):
            code = EXIT_INPUT
        msg = f"{type(exc).__name__}: {exc}"
        extra = {"rank": exc.rank} if getattr(exc, "rank", None) is not None else {}
        out = Outcome(code, {"error": msg, **extra}, None)
        print(f"flatlab: {msg}", file=stderr)
    if args.json:
        report = {"command": args.command, "seed": args.seed_value if hasattr(args, "seed_value")
                  else None, "samples": args.samples, "exit_code": out.code,
                  "status": STATUS[out.code], "result": out.result}
        stdout.write(json.dumps(report, sort_keys=True, indent=2, default=str) + "\n")
    elif out.lines is not None:
        if isinstance(out.lines, str):
            stdout.write(out.lines)
        else:
            stdout.write("\n".join(out.lines) + "\n")
    return out.code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
