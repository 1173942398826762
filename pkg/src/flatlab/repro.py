"""End-to-end reproduction of the counterexample analysis on the bundled
fixtures."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import FlatlabError
from .fileformat import (fixture_text, parse_certificate, parse_system,
                         parse_transform)
from .flatness import check_sfl, verify_certificate_symbolic
from .obstructions import normalize_condition, obstruction_chain
from .sysmodel import apply_input_transform, prolong
from .vfields import contains

STAGES = ("sfl-original", "certificate", "sfl-prolonged", "case1", "case2")
PROLONGED_DIMS = (2, 4, 6, 8, 9)


@dataclass(frozen=True)
class StageResult:
    name: str
    passed: bool
    details: dict

    def to_dict(self):
        return {"stage": self.name, "passed": self.passed, "details": self.details}


@dataclass(frozen=True)
class ReproReport:
    stages: tuple

    @property
    def passed(self):
        return all(s.passed for s in self.stages)

    def failed(self):
        return [s.name for s in self.stages if not s.passed]

    def to_dict(self):
        return {"passed": self.passed, "stages": [s.to_dict() for s in self.stages]}


class _Fixtures:
    def __init__(self, directory=None, overrides=None):
        self.directory = Path(directory) if directory else None
        self.overrides = dict(overrides or {})

    def text(self, name):
        if name in self.overrides:
            return self.overrides[name]
        if self.directory is not None and (self.directory / name).is_file():
            return (self.directory / name).read_text()
        return fixture_text(name)

    def system(self, name):
        return parse_system(self.text(name), name)


def _stage_sfl_original(fx, plan_for, order):
    sys = fx.system("eq3.sys").system
    report = check_sfl(sys, plan_for(sys))
    fail = report.first_failure()
    details = report.to_dict()
    ok = not report.verdict and fail is not None and fail.index == 1
    if ok:
        w = fail.witness.bracket
        x3 = sys.states[2]
        outside_only_x3 = all(c.is_zero() for s, c in zip(w.chart, w.components) if s != x3)
        D1 = _level(sys, 1)
        details["witness_outside_D1"] = not contains(D1, w, mode="symbolic")
        ok = outside_only_x3 and details["witness_outside_D1"]
    return ok, details


def _level(sys, i):
    from .flatness import distribution_chain
    return distribution_chain(sys, i)[i][0]


def _stage_certificate(fx, plan_for, order, cert_text=None):
    sys = fx.system("eq3.sys").system
    cert = parse_certificate(cert_text or fx.text("eq3.cert"), sys, "eq3.cert")
    check = verify_certificate_symbolic(sys, cert)
    return check.ok, check.to_dict()


def _stage_sfl_prolonged(fx, plan_for, order):
    sys = fx.system("eq3.sys").system
    t = parse_transform(fx.text("eq3_input.tr"), sys, "eq3_input.tr")
    p = prolong(apply_input_transform(sys, t, plan_for(sys)), t.new_inputs[0], order)
    report = check_sfl(p, plan_for(p))
    details = report.to_dict()
    details["prolongation_order"] = order
    return report.verdict and report.dimensions == PROLONGED_DIMS, details


def _case(name, expected):
    def stage(fx, plan_for, order):
        sf = fx.system(f"{name}.sys")
        if not sf.ansatz or sf.transform is None:
            raise FlatlabError(f"{name}.sys needs [ansatz] and [transform] sections")
        chain = obstruction_chain(sf.system, sf.ansatz, sf.transform, plan_for(sf.system))
        steps = {s.name: s.conditions for s in chain.steps}
        fns = {f.name: f for f in sf.declared}
        want_1, want_2 = expected(fns)
        got_1 = steps.get("level-1 under ansatz", ())
        got_2 = steps.get("level-2", ())
        details = chain.to_dict()
        details["expected"] = {"level-1 under ansatz": [str(c) for c in want_1],
                               "level-2": [str(c) for c in want_2]}
        ok = chain.contradiction and tuple(got_1) == want_1 and tuple(got_2) == want_2
        return ok, details
    return stage


def _case1_expected(fns):
    a, b = fns["a"], fns["b"]
    v1 = b.args[3]
    return (normalize_condition(a.expr() ** 2),), (normalize_condition(b.expr(v1)),)


def _case2_expected(fns):
    a, b = fns["a"], fns["b"]
    v1 = b.args[3]
    return ((normalize_condition(a.expr() ** 2),),
            (normalize_condition(b.expr() * b.expr(v1)),))


_RUNNERS = {
    "sfl-original": _stage_sfl_original,
    "certificate": _stage_certificate,
    "sfl-prolonged": _stage_sfl_prolonged,
    "case1": _case("case1", _case1_expected),
    "case2": _case("case2", _case2_expected),
}


def repro_counterexample(stages=None, fixtures_dir=None, overrides=None,
                         prolongation_order=4, seed=None, samples=None):
    """Run the reproduction stages in their canonical order.

    ``overrides`` maps fixture names to replacement file contents (used to
    exercise failure reporting); ``fixtures_dir`` supplies a directory that
    shadows the bundled fixtures.
    """
    selected = STAGES if not stages else tuple(s for s in STAGES if s in set(stages))
    unknown = set(stages or ()) - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stage(s): {', '.join(sorted(unknown))}")
    fx = _Fixtures(fixtures_dir, overrides)
    plan_for = lambda sys: sys.sample_plan(seed, samples)
    results = []
    for name in selected:
        try:
            ok, details = _RUNNERS[name](fx, plan_for, prolongation_order)
        except FlatlabError as exc:
            ok, details = False, {"error": f"{type(exc).__name__}: {exc}"}
        results.append(StageResult(name, bool(ok), details))
    return ReproReport(tuple(results))
