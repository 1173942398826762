"""Shared helpers: sympy oracles and random expression strategies."""
from __future__ import annotations

import random
from fractions import Fraction

import pytest
import sympy
from hypothesis import strategies as st

from flatlab.errors import InputError
from flatlab.expr import Expr
from flatlab.fileformat import load_system
from flatlab.parsing import parse, symbols

X, Y, Z = symbols("x y z", "state")
CHART = (X, Y, Z)


def to_sympy(e):
    """Independent sympy image of an Expr, built term by term."""
    def poly(p):
        acc = sympy.Integer(0)
        for c, factors in p.terms():
            t = sympy.Integer(int(c))
            for s, k in factors:
                t *= sympy.Symbol(s.name) ** k
            acc += t
        return acc
    return poly(e.numerator()) / poly(e.denominator())


def sympy_image(text):
    return sympy.sympify(text.replace("^", "**"),
                         locals={n: sympy.Symbol(n) for n in ("x", "y", "z")})


def random_point(names, rng):
    return {n: Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for n in names}


def sympy_value(expr, point):
    return expr.subs({sympy.Symbol(k): sympy.Rational(v.numerator, v.denominator)
                      for k, v in point.items()})


def as_fraction(v):
    v = sympy.nsimplify(v)
    return Fraction(int(sympy.numer(v)), int(sympy.denom(v)))


def atoms():
    return st.one_of(st.sampled_from(["x", "y", "z"]),
                     st.integers(-5, 5).map(lambda k: f"({k})"))


def _combine(children):
    binop = st.tuples(children, st.sampled_from(["+", "-", "*", "/"]), children).map(
        lambda t: f"({t[0]} {t[1]} {t[2]})")
    power = st.tuples(children, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}")
    return st.one_of(binop, power)


expression_texts = st.recursive(atoms(), _combine, max_leaves=8)
polynomial_texts = st.recursive(
    atoms(),
    lambda ch: st.tuples(ch, st.sampled_from(["+", "-", "*"]), ch).map(
        lambda t: f"({t[0]} {t[1]} {t[2]})"),
    max_leaves=6)


def parse_or_none(text):
    try:
        return parse(text, CHART)
    except (InputError, ZeroDivisionError):
        return None


@pytest.fixture
def rng():
    return random.Random(20240611)


@pytest.fixture(scope="session")
def eq3():
    return load_system("eq3.sys").system


@pytest.fixture(scope="session")
def appendix():
    return load_system("appendix_prolonged.sys").system


def close(a: Expr, b: Expr):
    return (a - b).is_zero()
