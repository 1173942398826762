"""Exact symbolic expressions over a coordinate chart.

An :class:`Expr` is always held in canonical form: a reduced fraction
``num/den`` of multivariate polynomials with integer coefficients, where the
two polynomials share no common factor (integer content included) and the
leading coefficient of ``den`` is positive under lexicographic order of the
naturally sorted symbol names.  Two expressions are equal iff their canonical
forms are identical, so zero testing is exact.

Unknown functions are supported through *formal partial symbols*: every
partial derivative ``d^alpha h`` of an :class:`UnknownFunction` is a fresh
indeterminate keyed by its multi-index, and differentiation applies the chain
rule to them.

Polynomial arithmetic and GCDs are delegated to the sparse polynomial rings
of :mod:`sympy.polys`; everything above that layer (symbols, jets, formal
partials, differentiation, substitution, evaluation, printing) lives here.
"""
from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from math import gcd
from numbers import Rational

import numpy as np
import sympy
from sympy.polys.domains import ZZ
from sympy.polys.orderings import lex
from sympy.polys.rings import PolyRing

from .errors import ChartError, SingularPointError

STATE = "state"
INPUT = "input"
JET = "jet"
PARAMETER = "parameter"
FORMAL = "formal-partial"
KINDS = (STATE, INPUT, JET, PARAMETER, FORMAL)

IDENTIFIER = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


def natural_key(name):
    """Sort key ordering ``x2`` before ``x10``."""
    return tuple((0, int(p)) if p.isdigit() else (1, p)
                 for p in re.split(r"(\d+)", name) if p)


class Symbol:
    """A named coordinate.  Identity is the name; ``kind`` is metadata."""

    __slots__ = ("name", "kind", "base", "order", "function", "index", "key")

    def __init__(self, name, kind=PARAMETER, *, base=None, order=0,
                 function=None, index=()):
        if kind not in KINDS:
            raise ValueError(f"unknown symbol kind {kind!r}")
        if kind not in (JET, FORMAL) and not IDENTIFIER.match(name) \
                and not name.startswith("_"):
            raise ValueError(f"invalid identifier {name!r}")
        if kind == JET and (base is None or order < 1):
            raise ValueError("jet symbols need a base symbol and order >= 1")
        self.name = name
        self.kind = kind
        self.base = base
        self.order = order
        self.function = function
        self.index = tuple(index)
        self.key = natural_key(name)

    def __eq__(self, other):
        return isinstance(other, Symbol) and other.name == self.name

    def __hash__(self):
        return hash(self.name)

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return f"Symbol({self.name!r}, {self.kind!r})"

    __str__ = lambda self: self.name

    def with_kind(self, kind):
        return Symbol(self.name, kind)

    @property
    def root(self):
        """The underlying base symbol of a jet (the symbol itself otherwise)."""
        return self.base if self.kind == JET else self

    @property
    def jet_order(self):
        return self.order if self.kind == JET else 0


def jet(base, order):
    """Symbol for the ``order``-th time derivative of ``base``.

    Order 0 is ``base`` itself; orders 1 and 2 print as ``u1'`` and ``u1''``,
    higher orders as ``D(u1,k)``.
    """
    if order < 0:
        raise ValueError("jet order must be >= 0")
    if base.kind == JET:
        return jet(base.base, base.order + order)
    if order == 0:
        return base
    if order <= 2:
        name = base.name + "'" * order
    else:
        name = f"D({base.name},{order})"
    return Symbol(name, JET, base=base, order=order)


class UnknownFunction:
    """A formal function ``h(args)`` of an ordered list of symbols."""

    __slots__ = ("name", "args")

    def __init__(self, name, args):
        if not IDENTIFIER.match(name):
            raise ValueError(f"invalid function name {name!r}")
        args = tuple(args)
        if len(set(args)) != len(args):
            raise ValueError(f"repeated argument in {name}{args}")
        self.name = name
        self.args = args

    def __eq__(self, other):
        return (isinstance(other, UnknownFunction) and other.name == self.name
                and other.args == self.args)

    def __hash__(self):
        return hash((self.name, self.args))

    def __repr__(self):
        return f"UnknownFunction({str(self)!r})"

    def __str__(self):
        return f"{self.name}({','.join(a.name for a in self.args)})"

    def multi_index(self, *wrt):
        counts = [0] * len(self.args)
        for s in wrt:
            try:
                counts[self.args.index(s)] += 1
            except ValueError:
                raise ChartError(f"{s} is not an argument of {self}") from None
        return tuple(counts)

    def partial_symbol(self, index):
        index = tuple(index)
        if len(index) != len(self.args) or min(index, default=0) < 0:
            raise ValueError(f"bad multi-index {index} for {self}")
        if not any(index):
            name = str(self)
        else:
            wrt = [a.name for a, k in zip(self.args, index) for _ in range(k)]
            name = f"diff({self},{','.join(wrt)})"
        return Symbol(name, FORMAL, function=self, index=index)

    def symbol(self, *wrt):
        """Formal symbol of the partial derivative w.r.t. ``wrt`` (value if empty)."""
        return self.partial_symbol(self.multi_index(*wrt))

    def expr(self, *wrt):
        return Expr.symbol(self.symbol(*wrt))


# ---------------------------------------------------------------------------
# polynomial plumbing


@lru_cache(maxsize=None)
def _ring(names):
    return PolyRing(tuple(sympy.Symbol(n) for n in names), ZZ, lex)


def _names(syms):
    return tuple(s.name for s in syms)


def _merge(a, b):
    seen = {s.name: s for s in a}
    for s in b:
        seen.setdefault(s.name, s)
    return tuple(sorted(seen.values(), key=lambda s: s.key))


def _lift(poly, old, new, ring):
    """Re-express ``poly`` (over symbols ``old``) in ``ring`` over ``new``."""
    if old == new:
        return poly
    pos = {s.name: i for i, s in enumerate(new)}
    idx = [pos[s.name] for s in old]
    n = len(new)
    out = {}
    for monom, c in poly.items():
        m = [0] * n
        for j, e in zip(idx, monom):
            m[j] = e
        out[tuple(m)] = c
    return ring.from_dict(out)


def _content(p):
    return int(p.content()) if p else 0


class Expr:
    """Immutable canonical rational function.  Build with :meth:`const`,
    :meth:`symbol`, :func:`parse` or arithmetic on existing values."""

    __slots__ = ("num", "den", "syms", "_hash", "_fn")

    def __init__(self, num, den, syms):
        # trusted constructor: (num, den) must already be canonical
        self.num = num
        self.den = den
        self.syms = syms
        self._hash = None
        self._fn = None

    # -- construction ------------------------------------------------------
    @staticmethod
    def const(value):
        if isinstance(value, Expr):
            return value
        if isinstance(value, float) or not isinstance(value, (Rational, str)):
            raise TypeError(f"symbolic constants must be exact rationals, got {value!r}")
        q = Fraction(value)
        R = _ring(())
        return Expr(R(q.numerator), R(q.denominator), ())

    @staticmethod
    def symbol(s):
        R = _ring((s.name,))
        return Expr(R.gens[0], R.one, (s,))

    @staticmethod
    def _make(num, den, syms):
        if not den:
            raise ZeroDivisionError("division by the zero expression")
        if not num:
            return ZERO
        if den.is_ground:
            d = int(den.LC)
            c = gcd(_content(num), d)
            if d < 0:
                c = -c
            if c != 1:
                num = num.quo_ground(c)
                den = den.quo_ground(c)
        else:
            _, num, den = num.cofactors(den)
            c = gcd(_content(num), _content(den))
            if den.LC < 0:
                c = -c
            if c != 1:
                num = num.quo_ground(c)
                den = den.quo_ground(c)
        return Expr._shrink(num, den, syms)

    @staticmethod
    def _shrink(num, den, syms):
        if not syms:
            return Expr(num, den, syms)
        used = [False] * len(syms)
        for p in (num, den):
            for monom in p:
                for i, e in enumerate(monom):
                    if e:
                        used[i] = True
        if all(used):
            return Expr(num, den, syms)
        keep = tuple(s for s, u in zip(syms, used) if u)
        cols = [i for i, u in enumerate(used) if u]
        R = _ring(_names(keep))
        proj = lambda p: R.from_dict({tuple(m[i] for i in cols): c for m, c in p.items()})
        return Expr(proj(num), proj(den), keep)

    # -- inspection --------------------------------------------------------
    @property
    def free_symbols(self):
        return self.syms

    def is_zero(self):
        return not self.num

    def is_constant(self):
        return not self.syms

    def is_polynomial(self):
        return self.den.is_ground and int(self.den.LC) == 1

    def constant_value(self):
        if self.syms:
            raise ValueError(f"{self} is not constant")
        return Fraction(int(self.num.LC) if self.num else 0, int(self.den.LC))

    def numerator(self):
        return Expr._shrink(self.num, self.num.ring.one, self.syms)

    def denominator(self):
        return Expr._shrink(self.den, self.den.ring.one, self.syms)

    def formal_symbols(self):
        return tuple(s for s in self.syms if s.kind == FORMAL)

    def functions(self):
        out = []
        for s in self.formal_symbols():
            if s.function not in out:
                out.append(s.function)
        return tuple(out)

    def is_application(self):
        """True if the expression is a bare unknown-function value ``h(args)``."""
        return (len(self.syms) == 1 and self.syms[0].kind == FORMAL
                and not any(self.syms[0].index) and self == Expr.symbol(self.syms[0]))

    def terms(self):
        """Numerator terms ``(coeff, ((symbol, exp), ...))`` in print order."""
        return _terms(self.num, self.syms)

    def degree(self, s):
        """Degree of the numerator in ``s``."""
        if s not in self.syms:
            return 0
        i = self.syms.index(s)
        return max((m[i] for m in self.num), default=0)

    # -- arithmetic --------------------------------------------------------
    def _unify(self, other):
        if _names(self.syms) == _names(other.syms):
            return self.num, self.den, other.num, other.den, self.syms
        syms = _merge(self.syms, other.syms)
        R = _ring(_names(syms))
        lift = lambda p, old: _lift(p, old, syms, R)
        return (lift(self.num, self.syms), lift(self.den, self.syms),
                lift(other.num, other.syms), lift(other.den, other.syms), syms)

    def __add__(self, other):
        other = as_expr(other)
        n1, d1, n2, d2, syms = self._unify(other)
        if d1 == d2:
            if d1.is_ground and int(d1.LC) == 1:
                return Expr._shrink(n1 + n2, d1, syms) if n1 + n2 else ZERO
            return Expr._make(n1 + n2, d1, syms)
        return Expr._make(n1 * d2 + n2 * d1, d1 * d2, syms)

    __radd__ = __add__

    def __neg__(self):
        return Expr(-self.num, self.den, self.syms)

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) + (-self)

    def __mul__(self, other):
        other = as_expr(other)
        n1, d1, n2, d2, syms = self._unify(other)
        if d1.is_ground and d2.is_ground and int(d1.LC) == 1 and int(d2.LC) == 1:
            p = n1 * n2
            return Expr._shrink(p, d1, syms) if p else ZERO
        return Expr._make(n1 * n2, d1 * d2, syms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_expr(other)
        if other.is_zero():
            raise ZeroDivisionError("division by the zero expression")
        n1, d1, n2, d2, syms = self._unify(other)
        return Expr._make(n1 * d2, d1 * n2, syms)

    def __rtruediv__(self, other):
        return as_expr(other) / self

    def __pow__(self, k):
        if isinstance(k, Expr):
            k = k.constant_value()
            if k.denominator != 1:
                raise ValueError("only integer powers are supported")
            k = int(k)
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported")
        if k >= 0:
            return Expr(self.num ** k, self.den ** k, self.syms) if k else ONE
        if self.is_zero():
            raise ZeroDivisionError("negative power of zero")
        num, den = self.den ** -k, self.num ** -k
        if den.LC < 0:
            num, den = -num, -den
        return Expr(num, den, self.syms)

    def __eq__(self, other):
        if not isinstance(other, Expr):
            try:
                other = as_expr(other)
            except (TypeError, ValueError):
                return NotImplemented
        return (_names(self.syms) == _names(other.syms) and self.num == other.num
                and self.den == other.den)

    def __hash__(self):
        if self._hash is None:
            if not self.syms:
                self._hash = hash(self.constant_value())
            else:
                self._hash = hash((_names(self.syms), frozenset(self.num.items()),
                                   frozenset(self.den.items())))
        return self._hash

    def __bool__(self):
        return not self.is_zero()

    # -- calculus and substitution -----------------------------------------
    def diff(self, s):
        return differentiate(self, s)

    def subs(self, bindings):
        return substitute(self, bindings)

    def evaluate(self, point, mode="exact"):
        return evaluate(self, point, mode)

    # -- printing ----------------------------------------------------------
    def __str__(self):
        return to_string(self)

    def __repr__(self):
        return f"Expr({to_string(self)!r})"


def as_expr(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, Symbol):
        return Expr.symbol(x)
    if isinstance(x, bool):
        raise TypeError("booleans are not expressions")
    return Expr.const(x)


ZERO = Expr(_ring(()).zero, _ring(()).one, ())
ONE = Expr(_ring(()).one, _ring(()).one, ())


def _terms(p, syms):
    out = []
    for monom, c in p.terms():
        out.append((int(c), tuple((s, e) for s, e in zip(syms, monom) if e)))
    return out


# ---------------------------------------------------------------------------
# operations


def simplify(e):
    """Canonical rational normal form.  Expressions are canonical on
    construction, so this only coerces its argument."""
    return as_expr(e)


def equals_zero(e):
    return as_expr(e).is_zero()


def _chain_factor(s, wrt):
    """d s / d wrt for a single symbol ``s`` of an expression."""
    if s == wrt:
        return ONE
    if s.kind == FORMAL and wrt in s.function.args:
        index = list(s.index)
        index[s.function.args.index(wrt)] += 1
        return Expr.symbol(s.function.partial_symbol(index))
    return None


def differentiate(e, s):
    """Exact partial derivative by ``s``; formal partials follow the chain rule."""
    e = as_expr(e)
    factors = [(i, f) for i, sym in enumerate(e.syms)
               if (f := _chain_factor(sym, s)) is not None]
    if not factors:
        return ZERO
    R = e.num.ring
    gens = R.gens

    def total(p):
        acc = ZERO
        for i, f in factors:
            dp = p.diff(gens[i])
            if dp:
                acc = acc + Expr._shrink(dp, R.one, e.syms) * f
        return acc

    dn = total(e.num)
    if e.is_polynomial():
        return dn
    dd = total(e.den)
    num = Expr._shrink(e.num, R.one, e.syms)
    den = Expr._shrink(e.den, R.one, e.syms)
    return (dn * den - num * dd) / (den * den)


def _partial_of(E, function, index):
    out = E
    for arg, k in zip(function.args, index):
        for _ in range(k):
            out = differentiate(out, arg)
    return out


def _resolve_key(key, e):
    if isinstance(key, (Symbol, UnknownFunction)):
        return key
    if isinstance(key, str):
        for s in e.syms:
            if s.name == key:
                return s
        return Symbol(key) if IDENTIFIER.match(key) else None
    raise TypeError(f"cannot substitute for {key!r}")


def substitute(e, bindings):
    """Simultaneous substitution followed by canonicalization.

    Keys are :class:`Symbol` (or names) and :class:`UnknownFunction`; binding
    an unknown function replaces each of its formal partials by the computed
    partial of the replacement.
    """
    e = as_expr(e)
    sym_map = {}
    fn_map = {}
    for key, value in bindings.items():
        key = _resolve_key(key, e)
        if key is None:
            continue
        value = as_expr(value)
        if isinstance(key, UnknownFunction):
            fn_map[key.name] = (key, value)
        else:
            sym_map[key] = value
    for s in e.syms:
        if s.kind == FORMAL and s.function.name in fn_map:
            F, value = fn_map[s.function.name]
            if F.args != s.function.args:
                raise ChartError(f"binding for {F} does not match {s.function}")
            if s not in sym_map:
                sym_map[s] = _partial_of(value, F, s.index)
    present = {s.name for s in e.syms}
    sym_map = {s: v for s, v in sym_map.items()
               if s.name in present and v != Expr.symbol(s)}
    if not sym_map:
        return e
    for s in e.syms:
        if s.kind == FORMAL and s not in sym_map:
            clash = [a for a in s.function.args if a in sym_map]
            if clash:
                raise ChartError(
                    f"cannot substitute {clash[0]}: unknown function {s.function} depends on it")
    keys = set(sym_map)
    if any(k in keys for v in sym_map.values() for k in v.syms):
        renamed = {}
        temps = {}
        for i, (s, v) in enumerate(sym_map.items()):
            t = Symbol(f"_t{i}")
            renamed[s] = t
            temps[t] = v
        for s, t in renamed.items():
            e = _subs_one(e, s, Expr.symbol(t))
        sym_map = temps
    for s, v in sym_map.items():
        e = _subs_one(e, s, v)
    return e


def _compose(p, i, pn, qn, ring):
    """``p(s_i = pn/qn) * qn^d`` and the degree ``d`` of ``p`` in ``s_i``."""
    groups = {}
    for monom, c in p.items():
        k = monom[i]
        m = monom[:i] + (0,) + monom[i + 1:]
        groups.setdefault(k, {})[m] = c
    d = max(groups)
    polys = {k: ring.from_dict(g) for k, g in groups.items()}
    qpow = [ring.one]
    for _ in range(d):
        qpow.append(qpow[-1] * qn)
    acc = polys[d]
    for k in range(d - 1, -1, -1):
        acc = acc * pn
        if k in polys:
            acc = acc + polys[k] * qpow[d - k]
    return acc, d, qpow


def _subs_one(e, s, value):
    if s not in e.syms:
        return e
    syms = _merge(e.syms, value.syms)
    R = _ring(_names(syms))
    num = _lift(e.num, e.syms, syms, R)
    den = _lift(e.den, e.syms, syms, R)
    pn = _lift(value.num, value.syms, syms, R)
    qn = _lift(value.den, value.syms, syms, R)
    i = syms.index(s)
    a, dn, qpow = _compose(num, i, pn, qn, R)
    b, dd, qpow2 = _compose(den, i, pn, qn, R)
    if dd >= dn:
        a = a * qpow2[dd - dn]
    else:
        b = b * qpow[dn - dd]
    if b.is_ground and int(b.LC) == 1:
        return Expr._shrink(a, b, syms) if a else ZERO
    return Expr._make(a, b, syms)


# ---------------------------------------------------------------------------
# evaluation


def _nonzero(d):
    if isinstance(d, np.ndarray):
        if not np.all(d != 0):
            raise SingularPointError("denominator vanishes at the sample")
    elif d == 0:
        raise SingularPointError("denominator vanishes at the sample")


def _quotient(n, d):
    if isinstance(n, int) and isinstance(d, int):
        return Fraction(n, d)
    return n / d


def _poly_code(p, syms):
    parts = []
    for c, factors in _terms(p, syms):
        fs = [f"v{syms.index(s)}" if k == 1 else f"v{syms.index(s)}**{k}"
              for s, k in factors]
        parts.append("*".join([str(c)] + fs) if c != 1 or not fs else "*".join(fs))
    if not parts:
        return "0"
    if len(parts) == 1:
        return parts[0]
    return "_sum((" + ", ".join(parts) + ",))"


def compile_expr(e):
    """Callable ``f(*values)`` over ``e.free_symbols`` (in order).

    Works with Fractions, floats, mpmath numbers and numpy arrays alike;
    raises :class:`SingularPointError` where the denominator vanishes.
    """
    e = as_expr(e)
    if e._fn is None:
        args = ", ".join(f"v{i}" for i in range(len(e.syms)))
        src = (f"def _f({args}):\n"
               f"    d = {_poly_code(e.den, e.syms)}\n"
               f"    _nonzero(d)\n"
               f"    return _quotient({_poly_code(e.num, e.syms)}, d)\n")
        ns = {"_sum": sum, "_nonzero": _nonzero, "_quotient": _quotient}
        exec(compile(src, "<flatlab-expr>", "exec"), ns)
        e._fn = ns["_f"]
    return e._fn


def _lookup(point, s):
    if s in point:
        return point[s]
    if s.name in point:
        return point[s.name]
    raise KeyError(f"symbol {s} is not bound at the evaluation point")


def evaluate(e, point, mode="exact"):
    """Evaluate at ``point`` (mapping Symbol or name -> number).

    ``mode="exact"`` returns a Fraction, ``mode="float"`` an IEEE double.
    """
    e = as_expr(e)
    if mode == "exact":
        values = [Fraction(_lookup(point, s)) for s in e.syms]
        out = compile_expr(e)(*values)
        return out if isinstance(out, Fraction) else Fraction(out)
    if mode == "float":
        values = [float(_lookup(point, s)) for s in e.syms]
        return float(compile_expr(e)(*values))
    raise ValueError(f"unknown evaluation mode {mode!r}")


def evaluate_array(e, arrays):
    """Vectorized float evaluation; ``arrays`` maps symbols to equal-length arrays."""
    e = as_expr(e)
    values = [np.asarray(_lookup(arrays, s), dtype=float) for s in e.syms]
    out = compile_expr(e)(*values)
    if np.ndim(out) == 0:
        n = max((len(np.atleast_1d(v)) for v in arrays.values()), default=1)
        return np.full(n, float(out))
    return np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# printing


def _poly_str(p, syms):
    pieces = []
    for c, factors in _terms(p, syms):
        fs = [s.name if k == 1 else f"{s.name}^{k}" for s, k in factors]
        mag = abs(c)
        body = "*".join(([str(mag)] if mag != 1 or not fs else []) + fs)
        if not pieces:
            pieces.append(("-" if c < 0 else "") + body)
        else:
            pieces.append((" - " if c < 0 else " + ") + body)
    return "".join(pieces) or "0"


def to_string(e):
    """Render in the input grammar; ``parse(to_string(e))`` reproduces ``e``."""
    e = as_expr(e)
    num = _poly_str(e.num, e.syms)
    if e.is_polynomial():
        return num
    if len(e.num) > 1:
        num = f"({num})"
    den = _poly_str(e.den, e.syms)
    terms = _terms(e.den, e.syms)
    simple = len(terms) == 1 and (
        not terms[0][1] or (terms[0][0] == 1 and len(terms[0][1]) == 1))
    return f"{num}/{den}" if simple else f"{num}/({den})"
