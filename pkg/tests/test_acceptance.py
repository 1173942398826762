"""Acceptance criteria 1-7.  Each test prints one PASS/FAIL line."""
import math
import random
import time
from fractions import Fraction

import mpmath

from flatlab.cli import run
from flatlab.expr import Expr, Symbol, jet, substitute
from flatlab.fileformat import load_certificate, load_system
from flatlab.flatness import (check_sfl, distribution_chain, linearizing_output_check, verify_certificate_numeric,
                              verify_certificate_symbolic)
from flatlab.numerics import PolySignal, integrate_rk4
from flatlab.obstructions import normalize_condition, obstruction_chain
from flatlab.parsing import parse
from flatlab.sysmodel import (InputTransform, apply_input_transform, brunovsky, prolong,
                              time_derivative)
from flatlab.vfields import Chart, VectorField, contains, lie_bracket


def criterion(capsys, number, title, check):
    start = time.perf_counter()
    try:
        detail = check()
        ok = True
    except AssertionError as exc:
        ok, detail = False, str(exc).splitlines()[0] if str(exc) else "assertion failed"
    elapsed = time.perf_counter() - start
    with capsys.disabled():
        print(f"\n[acceptance] criterion {number} {title}: {'PASS' if ok else 'FAIL'}"
              f" ({elapsed:.1f} s) {detail}")
    assert ok, detail


def quiet(argv):
    import io
    out = io.StringIO()
    return run(argv, out, io.StringIO()), out.getvalue()


# -- 1 ----------------------------------------------------------------------


def test_criterion_1_appendix_linearizability(capsys):
    def check():
        t0 = time.perf_counter()
        code, out = quiet(["check-sfl", "appendix_prolonged.sys"])
        report = check_sfl(load_system("appendix_prolonged.sys").system)
        elapsed = time.perf_counter() - t0
        assert code == 0, f"exit code {code}"
        assert report.dimensions == (2, 4, 6, 8, 9), f"dimensions {report.dimensions}"
        assert all(lv.involutive for lv in report.levels), "a level is not involutive"
        assert report.verdict
        assert elapsed < 10, f"runtime {elapsed:.1f} s"
        return f"dims {report.dimensions}"
    criterion(capsys, 1, "appendix linearizability", check)


# -- 2 ----------------------------------------------------------------------


def test_criterion_2_counterexample_not_sfl(capsys):
    def check():
        t0 = time.perf_counter()
        sys = load_system("eq3.sys").system
        report = check_sfl(sys)
        again = check_sfl(sys)
        elapsed = time.perf_counter() - t0
        assert report.verdict is False, "verdict true"
        assert report.to_dict() == again.to_dict(), "not deterministic"
        fail = report.first_failure()
        assert fail is not None and fail.index == 1, "no witness at level 1"
        w = fail.witness.bracket
        # hand oracle: g = d/dx1 - u2^2/(2 u1^2) d/dx3 is df/du1; the chain holds
        # [f, d/du1] = -g, so the witness is [d/du2, -g]
        ch = sys.chart
        x1, x3 = sys.states[0], sys.states[2]
        g = VectorField.from_mapping(ch, {x1: Expr.const(1),
                                          x3: parse("-u2^2/(2*u1^2)", tuple(ch))})
        oracle = lie_bracket(VectorField.coordinate(ch, sys.inputs[1]), g)
        assert set(w.nonzero()) == {"x3"}, f"witness {w}"
        assert w == -oracle, f"witness {w} vs oracle {-oracle}"
        D1 = distribution_chain(sys, 1)[1][0]
        assert not contains(D1, w, mode="symbolic"), "witness lies in D^1"
        assert elapsed < 5, f"runtime {elapsed:.1f} s"
        return f"witness ({w.nonzero()['x3']})*d/dx3 at level 1"
    criterion(capsys, 2, "counterexample non-linearizability", check)


# -- 3 ----------------------------------------------------------------------


def test_criterion_3_certificate(capsys):
    def check():
        t0 = time.perf_counter()
        sys = load_system("eq3.sys").system
        cert = load_certificate("eq3.cert", sys)
        sym = verify_certificate_symbolic(sys, cert)
        assert len(sym.residuals) == 5
        assert all(r.is_zero() for r in sym.residuals.values()), "nonzero symbolic residual"
        u = [PolySignal.parse("2 + t/2"), PolySignal.parse("1 + t^2")]
        num = verify_certificate_numeric(sys, cert, u, [1, 1, 1], (0, 1), 1e-3)
        elapsed = time.perf_counter() - t0
        assert num.max_residual < 1e-6, f"max relative residual {num.max_residual:.3e}"
        assert elapsed < 30, f"runtime {elapsed:.1f} s"
        return f"symbolic residuals 0, numeric {num.max_residual:.2e}"
    criterion(capsys, 3, "certificate validity", check)


# -- 4 ----------------------------------------------------------------------


def test_criterion_4_obstruction_chains(capsys):
    def check():
        t0 = time.perf_counter()
        out = []
        for name, want2 in (("case1.sys", "b1"), ("case2.sys", "bb1")):
            sf = load_system(name)
            fns = {f.name: f for f in sf.declared}
            a, b = fns["a"], fns["b"]
            chain = obstruction_chain(sf.system, sf.ansatz, sf.transform)
            steps = {s.name: s for s in chain.steps}
            h = fns["h"]
            v2 = sf.system.inputs[1]
            affine = normalize_condition(h.expr(v2, v2))
            assert affine in steps["ansatz"].conditions, "h is not forced affine"
            assert steps["forced"].conditions == (normalize_condition(a.expr() ** 2),)
            assert steps["forced"].note == f"{a.expr()} = 0"
            bv = b.expr(b.args[3])
            expected = bv if want2 == "b1" else b.expr() * bv
            assert steps["level-2"].conditions == (normalize_condition(expected),), \
                f"{name}: level-2 {[str(c) for c in steps['level-2'].conditions]}"
            assert chain.contradiction, f"{name}: no contradiction"
            out.append(f"{name}: {steps['level-2'].conditions[0]}")
        elapsed = time.perf_counter() - t0
        assert elapsed < 20, f"runtime {elapsed:.1f} s"
        return "; ".join(out)
    criterion(capsys, 4, "obstruction chains", check)


# -- 5 ----------------------------------------------------------------------


def test_criterion_5_linearizing_output(capsys):
    def check():
        p = load_system("appendix_prolonged.sys").system
        chart = p.states + p.inputs
        phi = [parse("v1", chart),
               parse("(v1^2*x1 - 2*v1*x2 + 2*x3)*v1_1 - 2*v1*x1 + 2*x2", chart)]
        lin = linearizing_output_check(p, phi)
        assert lin.ok and sum(lin.rho) == 7 and lin.rank == 2, f"{lin}"
        sys = load_system("eq3.sys").system
        cert = load_certificate("eq3.cert", sys)
        u1, u2 = sys.inputs
        ch = sys.states + sys.inputs + (jet(u1, 1), jet(u2, 1))
        vbar = parse("u2/u1", ch)
        binding = {p.states[3]: vbar, p.states[4]: time_derivative(vbar, sys)}
        assert binding[p.states[4]] == parse("(u2'*u1 - u2*u1')/u1^2", ch)
        x = {s.name: s for s in sys.states}
        binding.update({s: Expr.symbol(x[s.name]) for s in p.states[:3]})
        got = tuple(substitute(e, binding) for e in phi)
        assert got == cert.phi, "substitution does not reproduce the flat output"
        return f"rho {lin.rho}, decoupling rank {lin.rank}"
    criterion(capsys, 5, "linearizing output", check)


# -- 6 ----------------------------------------------------------------------


def _random_poly(rng, syms, terms=3):
    acc = Expr.const(0)
    for _ in range(rng.randint(1, terms)):
        mono = Expr.const(Fraction(rng.randint(-4, 4), rng.randint(1, 3)))
        for s in rng.sample(syms, min(2, len(syms))):
            k = rng.randint(0, 2)
            if k:
                mono = mono * Expr.symbol(s) ** k
        acc = acc + mono
    return acc


def _random_rational(rng, syms):
    num = _random_poly(rng, syms)
    den = _random_poly(rng, syms, terms=2)
    return num if den.is_zero() else num / den


def test_criterion_6_property_suites(capsys):
    def check():
        t0 = time.perf_counter()
        rng = random.Random(0xF1A7)
        xs = tuple(Symbol(n, "state") for n in ("x", "y", "z"))
        ch = Chart(xs)
        fields = [VectorField(ch, tuple(_random_poly(rng, xs) for _ in xs)) for _ in range(24)]
        for i in range(0, 24, 3):
            u, v, w = fields[i:i + 3]
            assert lie_bracket(u, v) == -lie_bracket(v, u), "antisymmetry"
            jac = (lie_bracket(u, lie_bracket(v, w)) + lie_bracket(v, lie_bracket(w, u))
                   + lie_bracket(w, lie_bracket(u, v)))
            assert jac.is_zero(), "Jacobi"

        sys = load_system("eq3.sys").system
        syms = sys.states + sys.inputs + (jet(sys.inputs[0], 1), jet(sys.inputs[1], 1))
        for _ in range(50):
            a, b = _random_rational(rng, syms), _random_rational(rng, syms)
            lhs = time_derivative(a * b, sys)
            assert lhs == time_derivative(a, sys) * b + a * time_derivative(b, sys), "Leibniz"

        forms = [(r1, r2) for r1 in range(1, 6) for r2 in range(1, 6) if r1 + r2 <= 6]
        for r1, r2 in forms:
            assert check_sfl(brunovsky(r1, r2)).verdict, f"brunovsky({r1},{r2})"
            for k in (1, 2, 3):
                for which in (0, 1):
                    assert check_sfl(prolong(brunovsky(r1, r2), which, k)).verdict, \
                        f"prolonged brunovsky({r1},{r2}) k={k}"

        fixtures = ["eq3.sys", "appendix_prolonged.sys", "chained.sys", "brunovsky_1_1.sys",
                    "brunovsky_2_1.sys", "brunovsky_2_2.sys", "brunovsky_3_2.sys",
                    "brunovsky_5_2.sys"]
        w = (Symbol("w1", "input"), Symbol("w2", "input"))
        W = [Expr.symbol(s) for s in w]
        for name in fixtures:
            base = load_system(name).system
            verdict = check_sfl(base).verdict
            done = 0
            while done < 10:
                m = [[Fraction(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(2)]
                     for _ in range(2)]
                if m[0][0] * m[1][1] == m[0][1] * m[1][0]:
                    continue
                t = InputTransform(w, (W[0] * m[0][0] + W[1] * m[0][1],
                                       W[0] * m[1][0] + W[1] * m[1][1]))
                assert check_sfl(apply_input_transform(base, t)).verdict == verdict, \
                    f"{name}: verdict changed under mixing {m}"
                done += 1
        elapsed = time.perf_counter() - t0
        assert elapsed < 180, f"runtime {elapsed:.1f} s"
        return (f"24 fields, 50 Leibniz pairs, {len(forms)} Brunovsky forms x 6 prolongations, "
                f"{len(fixtures)} fixtures x 10 mixings")
    criterion(capsys, 6, "property suites", check)


# -- 7 ----------------------------------------------------------------------


def test_criterion_7_rk4_self_convergence(capsys):
    def check():
        sys = load_system("eq3.sys").system
        u = [PolySignal.parse("2 + t/2"), PolySignal.parse("1 + t^2")]

        def end(step):
            return integrate_rk4(sys, [1, 1, 1], u, (0, 1), step, precision=40).states[-1]
        ref = end(1e-5)
        coarse, fine = end(1e-3), end(5e-4)
        with mpmath.workdps(40):
            e1 = max(abs(a - b) for a, b in zip(coarse, ref))
            e2 = max(abs(a - b) for a, b in zip(fine, ref))
            order = float(mpmath.log(e1 / e2, 2))
        assert math.isfinite(order) and order >= 3.5, f"observed order {order:.3f}"
        return f"observed order {order:.3f}"
    criterion(capsys, 7, "RK4 self-convergence", check)
