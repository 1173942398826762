"""Recursive-descent parser for the ASCII expression grammar.

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | IDENT "'"* | IDENT "(" args ")" | "(" expr ")"

Function-call forms: declared unknown functions ``h(x1,x2)``, jets ``D(u1,3)``
and formal partials ``diff(h(x1,x2),x2,x2)`` (the printed form of partials).
Exponents must evaluate to integer constants.
"""
import re

from .errors import ParseError, UnresolvedIdentifierError
from .expr import Expr, Symbol, UnknownFunction, jet

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<ident>[A-Za-z][A-Za-z0-9_]*'*)|(?P<op>[-+*/^(),]))")


def _tokenize(text):
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _symbol_table(chart):
    if chart is None:
        return {}
    if isinstance(chart, dict):
        return dict(chart)
    syms = getattr(chart, "symbols", chart)
    return {s.name: s for s in syms}


class _Parser:
    def __init__(self, text, chart, functions):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.symbols = _symbol_table(chart)
        self.functions = {f.name: f for f in functions or ()}

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            found = tok[1] or "end of input"
            raise ParseError(f"expected {value!r}, found {found!r}", tok[2], self.text)
        self.i += 1
        return tok

    def parse(self):
        if self.peek()[0] == "end":
            raise ParseError("empty expression", 0, self.text)
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected {tok[1]!r}", tok[2], self.text)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            pos = self.peek()[2]
            rhs = self.unary()
            if op == "*":
                e = e * rhs
            else:
                if rhs.is_zero():
                    raise ParseError("division by zero", pos, self.text)
                e = e / rhs
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            pos = self.take()[2]
            exponent = self.unary()
            if not exponent.is_constant() or exponent.constant_value().denominator != 1:
                raise ParseError("exponent must be an integer constant", pos, self.text)
            k = int(exponent.constant_value())
            if k < 0 and base.is_zero():
                raise ParseError("negative power of zero", pos, self.text)
            return base ** k
        return base

    def atom(self):
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return Expr.const(int(value))
        if value == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        if kind == "ident":
            self.take()
            if self.peek()[1] == "(" and not value.endswith("'"):
                return self.call(value, pos)
            return Expr.symbol(self.resolve(value, pos))
        raise ParseError(f"unexpected {value or 'end of input'!r}", pos, self.text)

    def resolve(self, name, pos):
        primes = len(name) - len(name.rstrip("'"))
        root = name.rstrip("'")
        if root in self.symbols:
            return jet(self.symbols[root], primes)
        if not primes and root in self.functions:
            f = self.functions[root]
            return f.symbol()
        raise UnresolvedIdentifierError(f"unresolved identifier {name!r}", pos, self.text)

    def arguments(self):
        self.take("(")
        args = []
        while True:
            tok = self.peek()
            if tok[0] == "ident" and self.tokens[self.i + 1][1] == "(":
                args.append(("callsym", self.call_symbol(), tok[2]))
            elif tok[0] == "ident":
                self.take()
                args.append(("ident", tok[1], tok[2]))
            elif tok[0] == "num":
                self.take()
                args.append(("num", int(tok[1]), tok[2]))
            else:
                raise ParseError(f"unexpected {tok[1] or 'end of input'!r} in argument list",
                                 tok[2], self.text)
            if self.peek()[1] == ",":
                self.take()
                continue
            self.take(")")
            return args

    def call_symbol(self):
        _, name, pos = self.take()
        return self.call(name, pos, as_symbol=True)

    def call(self, name, pos, as_symbol=False):
        if name in self.functions:
            f = self.functions[name]
            args = self.arguments()
            names = tuple(a[1] for a in args)
            if any(a[0] != "ident" for a in args) or names != tuple(s.name for s in f.args):
                raise ParseError(f"{name} must be applied to its declared arguments {f}",
                                 pos, self.text)
            sym = f.symbol()
        elif name == "D":
            args = self.arguments()
            if len(args) != 2 or args[0][0] != "ident" or args[1][0] != "num":
                raise ParseError("jet syntax is D(symbol, order)", pos, self.text)
            sym = jet(self.resolve(args[0][1], args[0][2]), args[1][1])
        elif name == "diff":
            args = self.arguments()
            if not args or args[0][0] != "callsym" or args[0][1].function is None:
                raise ParseError("partial syntax is diff(h(args), s1, ...)", pos, self.text)
            base = args[0][1]
            wrt = []
            for a in args[1:]:
                if a[0] != "ident":
                    raise ParseError("diff variables must be identifiers", a[2], self.text)
                wrt.append(self.resolve(a[1], a[2]))
            f = base.function
            try:
                index = [i + j for i, j in zip(base.index, f.multi_index(*wrt))]
            except Exception as exc:
                raise ParseError(str(exc), pos, self.text) from None
            sym = f.partial_symbol(index)
        else:
            raise UnresolvedIdentifierError(f"unresolved function {name!r}", pos, self.text)
        return sym if as_symbol else Expr.symbol(sym)


def parse(text, chart=None, functions=()):
    """Parse ``text`` over ``chart`` (Symbols, a name map, or a Chart) into a
    canonical :class:`Expr`.  ``functions`` lists declared unknown functions."""
    return _Parser(text, chart, functions).parse()


def parse_function(text, chart):
    """Parse a declaration such as ``h(x1, x2, v1)`` into an UnknownFunction."""
    m = re.fullmatch(r"\s*([A-Za-z][A-Za-z0-9_]*)\s*\(([^()]*)\)\s*", text)
    if not m:
        raise ParseError(f"bad function declaration {text!r}", 0, text)
    table = _symbol_table(chart)
    args = []
    for raw in m.group(2).split(","):
        name = raw.strip()
        if name not in table:
            raise UnresolvedIdentifierError(f"unresolved identifier {name!r}",
                                            text.find(name), text)
        args.append(table[name])
    return UnknownFunction(m.group(1), args)


def symbols(names, kind):
    """``symbols("x1 x2", "state")`` -> tuple of Symbols."""
    return tuple(Symbol(n, kind) for n in names.replace(",", " ").split())
