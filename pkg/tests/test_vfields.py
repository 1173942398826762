import random
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from conftest import CHART, X, Y, Z, polynomial_texts, to_sympy
from flatlab.errors import ChartError, SingularityError
from flatlab.linalg import exact_rank, symbolic_rank
from flatlab.parsing import parse
from flatlab.vfields import (Chart, Distribution, SamplePlan, VectorField, contains,
                             generic_rank, is_involutive, lie_bracket)

C = Chart(CHART)


def field(*texts):
    return VectorField(C, tuple(parse(t, CHART) for t in texts))


fields = st.tuples(polynomial_texts, polynomial_texts, polynomial_texts).map(
    lambda t: field(*t))


def sympy_bracket(v, w):
    xs = [sympy.Symbol(s.name) for s in CHART]
    V = [to_sympy(c) for c in v.components]
    W = [to_sympy(c) for c in w.components]
    return [sum(V[j] * sympy.diff(W[i], xs[j]) - W[j] * sympy.diff(V[i], xs[j])
                for j in range(3)) for i in range(3)]


def test_bracket_hand_example():
    # [d/dx, x*y d/dz] = y d/dz
    assert lie_bracket(field("1", "0", "0"), field("0", "0", "x*y")) == field("0", "0", "y")
    # [x d/dy, y d/dx] = x d/dx - y d/dy
    assert lie_bracket(field("0", "x", "0"), field("y", "0", "0")) == field("x", "-y", "0")


@settings(max_examples=30, deadline=None)
@given(fields, fields)
def test_bracket_matches_sympy(v, w):
    ours = [to_sympy(c) for c in lie_bracket(v, w).components]
    for a, b in zip(ours, sympy_bracket(v, w)):
        assert sympy.expand(a - b) == 0


@settings(max_examples=25, deadline=None)
@given(fields, fields)
def test_bracket_antisymmetry(v, w):
    assert lie_bracket(v, w) == -lie_bracket(w, v)


@settings(max_examples=25, deadline=None)
@given(fields, fields, fields)
def test_jacobi_identity(u, v, w):
    total = (lie_bracket(u, lie_bracket(v, w)) + lie_bracket(v, lie_bracket(w, u))
             + lie_bracket(w, lie_bracket(u, v)))
    assert total.is_zero()


def test_apply_is_directional_derivative():
    v = field("y", "1", "0")
    assert v.apply(parse("x*y", CHART)) == parse("y^2 + x", CHART)


def test_chart_mismatch_rejected():
    other = Chart((X, Y))
    with pytest.raises(ChartError):
        lie_bracket(field("1", "0", "0"), VectorField.coordinate(other, X))


def test_exact_rank_matches_sympy():
    rng = random.Random(7)
    for _ in range(40):
        r, c = rng.randint(1, 5), rng.randint(1, 5)
        k = rng.randint(1, min(r, c))
        A = sympy.randMatrix(r, k, -3, 3, seed=rng.randint(0, 9999))
        B = sympy.randMatrix(k, c, -3, 3, seed=rng.randint(0, 9999))
        M = (A * B).applyfunc(lambda e: sympy.Rational(e, rng.randint(1, 3)) if e else e)
        rows = [[Fraction(int(sympy.numer(e)), int(sympy.denom(e))) for e in M.row(i)]
                for i in range(r)]
        assert exact_rank(rows) == M.rank()


def test_symbolic_rank():
    rows = [[parse(t, CHART) for t in row] for row in
            [["x", "y", "0"], ["x^2", "x*y", "0"], ["0", "0", "z"]]]
    assert symbolic_rank(rows) == 2


def test_generic_rank_and_membership():
    D = Distribution(C, (field("1", "0", "y"), field("0", "1", "0")))
    assert generic_rank(D) == 2
    assert contains(D, field("2", "3", "2*y"))
    assert not contains(D, field("0", "0", "1"))
    assert contains(D, field("2", "3", "2*y"), mode="symbolic")
    assert not contains(D, field("0", "0", "1"), mode="symbolic")


def test_involutivity_witness():
    # span{d/dx + y d/dz, d/dy} is the contact distribution: not involutive
    D = Distribution(C, (field("1", "0", "y"), field("0", "1", "0")))
    res = is_involutive(D)
    assert not res.involutive
    assert res.witness.bracket == field("0", "0", "-1")
    assert is_involutive(Distribution(C, (field("1", "0", "0"), field("0", "1", "x"))),
                         mode="symbolic").involutive is False
    assert is_involutive(Distribution.coordinates(C, (X, Y))).involutive


def test_sample_plan_is_deterministic_and_avoids_exclusions():
    x = parse("x", CHART)
    p = SamplePlan(seed=3, samples=5, exclusions=(x,))
    a = p.evaluate([parse("x*y", CHART)])
    assert a == p.evaluate([parse("x*y", CHART)])
    assert all(val[0] != 0 for val in p.evaluate([x]))
    assert SamplePlan(seed=4, samples=5).evaluate([x]) != SamplePlan(seed=3, samples=5).evaluate([x])


class _Degenerate(SamplePlan):
    def value(self, sample, attempt, name):
        return Fraction(0)


def test_sample_plan_reports_exhaustion():
    z = parse("z", CHART)
    with pytest.raises(SingularityError):
        _Degenerate(exclusions=(z,), max_attempts=3).evaluate([z])
