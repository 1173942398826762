"""Polynomial input signals and fixed-step RK4 integration."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .errors import InputError, IntegrationError, SingularPointError
from .expr import Symbol, compile_expr, jet
from .parsing import parse
from .sysmodel import Trajectory

MAX_DEGREE = 8


@dataclass(frozen=True)
class PolySignal:
    """u(t) = c0 + c1 t + ... with rational coefficients (ascending)."""

    coeffs: tuple

    def __post_init__(self):
        cs = [Fraction(c) for c in self.coeffs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        if not cs:
            cs = [Fraction(0)]
        if len(cs) - 1 > MAX_DEGREE:
            raise InputError(f"signal degree {len(cs) - 1} exceeds {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", tuple(cs))

    @classmethod
    def parse(cls, text, var="t"):
        """``PolySignal.parse("1 + t^2")``."""
        t = Symbol(var)
        e = parse(text, [t])
        den = e.denominator()
        if not den.is_constant():
            raise InputError(f"signal {text!r} is not a polynomial in {var}")
        scale = den.constant_value()
        coeffs = [Fraction(0)] * (e.degree(t) + 1)
        for c, factors in e.terms():
            k = dict((s.name, p) for s, p in factors).get(var, 0)
            coeffs[k] += Fraction(c) / scale
        return cls(tuple(coeffs))

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def derivative(self, k=1):
        cs = list(self.coeffs)
        for _ in range(k):
            cs = [c * i for i, c in enumerate(cs)][1:] or [Fraction(0)]
        return PolySignal(tuple(cs))

    def value(self, t):
        acc = _coerce(0, t)
        for c in reversed(self.coeffs):
            acc = acc * t + _coerce(c, t)
        return acc

    def __str__(self):
        parts = []
        for i, c in enumerate(self.coeffs):
            if not c:
                continue
            mono = "" if i == 0 else "t" if i == 1 else f"t^{i}"
            if not mono:
                parts.append(str(c))
            else:
                parts.append(mono if c == 1 else f"{c}*{mono}")
        return " + ".join(parts) or "0"


def _coerce(c, like):
    """``c`` in the number type of ``like`` (exact for rationals)."""
    if isinstance(like, (Fraction, int)):
        return Fraction(c)
    if isinstance(like, mpmath.mpf):
        c = Fraction(c)
        return mpmath.mpf(c.numerator) / c.denominator
    if isinstance(like, np.ndarray):
        return float(c)
    return float(c)


def jet_values(u, t, order):
    """(u(t), u'(t), ..., u^(order)(t)); exact for rational ``t``."""
    out = []
    sig = u
    for _ in range(order + 1):
        out.append(sig.value(t))
        sig = sig.derivative()
    return out


def _grid(t_span, step):
    t0, t1 = t_span
    if step <= 0:
        raise ValueError("step must be positive")
    length = float(t1) - float(t0)
    if length <= 0:
        raise ValueError("time span must be increasing")
    n = round(length / float(step))
    if n < 1 or abs(n * float(step) - length) > 1e-9 * length:
        raise ValueError(f"step {step} does not divide the time span {t_span}")
    return Fraction(t0), Fraction(t1), n


def integrate_rk4(sys, x0, u, t_span, step, precision=None, jet_order=0):
    """Classical fixed-step RK4 for x' = f(x, u(t)).

    ``precision`` switches to mpmath arithmetic with that many decimal
    digits (used for convergence studies below double round-off).  The
    trajectory records input jets up to ``jet_order``.
    """
    if sys.functions:
        raise InputError("cannot integrate a system containing unknown functions")
    if len(u) != sys.m:
        raise InputError(f"{len(u)} input signals for {sys.m} inputs")
    if len(x0) != sys.n:
        raise InputError(f"initial state has {len(x0)} entries, system has {sys.n} states")
    t0, t1, n = _grid(t_span, step)
    if precision is None:
        return _integrate(sys, x0, u, t0, t1, n, float, jet_order)
    with mpmath.workdps(precision):
        return _integrate(sys, x0, u, t0, t1, n,
                          lambda c: _coerce(c, mpmath.mpf(0)), jet_order)


def _integrate(sys, x0, u, t0, t1, n, num, jet_order):
    states, inputs = sys.states, sys.inputs
    fns = []
    for e in sys.dynamics:
        idx = [(0, states.index(s)) if s in states else (1, inputs.index(s))
               for s in e.free_symbols]
        fns.append((compile_expr(e), idx))
    h = num(t1 - t0) / n
    half = h / 2

    def rhs(t, x):
        uv = [sig.value(t) for sig in u]
        out = []
        for fn, idx in fns:
            v = fn(*[x[i] if k == 0 else uv[i] for k, i in idx])
            out.append(num(v) if isinstance(v, (Fraction, int)) else v)
        return out

    x = [num(v) for v in x0]
    ts = [num(t0)]
    xs = [list(x)]
    base = num(t0)
    for i in range(n):
        t = base + h * i
        try:
            k1 = rhs(t, x)
            k2 = rhs(t + half, [a + half * b for a, b in zip(x, k1)])
            k3 = rhs(t + half, [a + half * b for a, b in zip(x, k2)])
            k4 = rhs(t + h, [a + h * b for a, b in zip(x, k3)])
        except SingularPointError:
            raise SingularPointError(
                f"singular right-hand side near t = {float(t):.6g}") from None
        x = [a + h / 6 * (p + 2 * q + 2 * r + s) for a, p, q, r, s in zip(x, k1, k2, k3, k4)]
        if not all(math.isfinite(float(v)) for v in x):
            raise IntegrationError(f"non-finite state at t = {float(t + h):.6g}")
        ts.append(base + h * (i + 1))
        xs.append(x)
    dtype = float if num is float else object
    jets = {}
    for v, sig in zip(inputs, u):
        for k in range(jet_order + 1):
            d = sig.derivative(k)
            jets[jet(v, k).name] = np.array([d.value(t) for t in ts], dtype=dtype)
    return Trajectory(np.array(ts, dtype=dtype), np.array(xs, dtype=dtype), jets)
