"""Vector fields, Lie brackets and distributions on coordinate charts.

Ranks are "generic": a distribution is evaluated at a handful of random
rational points (see :class:`SamplePlan`); each evaluation has an exact rank
and the generic rank is the maximum over samples.  Membership and
involutivity can alternatively be decided symbolically over the field of
rational functions.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ChartError, SingularPointError, SingularityError
from .expr import ONE, ZERO, as_expr, differentiate, evaluate
from .linalg import exact_rank, symbolic_rank

DEFAULT_SEED = 0xF1A7
DEFAULT_SAMPLES = 7


class Chart:
    """Ordered, duplicate-free tuple of coordinate symbols."""

    __slots__ = ("symbols", "_pos")

    def __init__(self, symbols):
        symbols = tuple(symbols)
        names = [s.name for s in symbols]
        if len(set(names)) != len(names):
            raise ChartError(f"duplicate coordinates in chart {names}")
        self.symbols = symbols
        self._pos = {s.name: i for i, s in enumerate(symbols)}

    def index(self, s):
        try:
            return self._pos[s.name]
        except KeyError:
            raise ChartError(f"{s} is not a coordinate of the chart") from None

    def __contains__(self, s):
        return s.name in self._pos

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __eq__(self, other):
        return isinstance(other, Chart) and [s.name for s in self] == [s.name for s in other]

    def __hash__(self):
        return hash(tuple(s.name for s in self))

    def __repr__(self):
        return f"Chart({', '.join(s.name for s in self)})"


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    components: tuple

    def __post_init__(self):
        comps = tuple(as_expr(c) for c in self.components)
        if len(comps) != len(self.chart):
            raise ChartError(f"{len(comps)} components for a {len(self.chart)}-dimensional chart")
        object.__setattr__(self, "components", comps)

    @classmethod
    def coordinate(cls, chart, s):
        """The coordinate field d/ds."""
        i = chart.index(s)
        return cls(chart, tuple(ONE if j == i else ZERO for j in range(len(chart))))

    @classmethod
    def from_mapping(cls, chart, mapping):
        comps = [ZERO] * len(chart)
        for s, v in mapping.items():
            comps[chart.index(s)] = as_expr(v)
        return cls(chart, tuple(comps))

    def __getitem__(self, s):
        return self.components[self.chart.index(s)]

    def is_zero(self):
        return all(c.is_zero() for c in self.components)

    def _check(self, other):
        if self.chart != other.chart:
            raise ChartError("vector fields live on different charts")

    def __add__(self, other):
        self._check(other)
        return VectorField(self.chart, tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        self._check(other)
        return VectorField(self.chart, tuple(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return VectorField(self.chart, tuple(-c for c in self.components))

    def scale(self, factor):
        factor = as_expr(factor)
        return VectorField(self.chart, tuple(factor * c for c in self.components))

    def apply(self, e):
        """Directional derivative of the function ``e`` along the field."""
        e = as_expr(e)
        acc = ZERO
        for s, c in zip(self.chart, self.components):
            if not c.is_zero():
                d = differentiate(e, s)
                if not d.is_zero():
                    acc = acc + c * d
        return acc

    def nonzero(self):
        return {s.name: c for s, c in zip(self.chart, self.components) if not c.is_zero()}

    def to_dict(self):
        return {name: str(c) for name, c in self.nonzero().items()}

    def __str__(self):
        parts = [f"({c})*d/d{name}" for name, c in self.nonzero().items()]
        return " + ".join(parts) or "0"


def lie_bracket(v, w):
    """[v, w]_k = sum_j v_j d_j w_k - w_j d_j v_k."""
    v._check(w)
    return VectorField(v.chart, tuple(v.apply(wk) - w.apply(vk)
                                      for vk, wk in zip(v.components, w.components)))


@dataclass(frozen=True)
class Distribution:
    """Span of vector fields; the generator list may be redundant."""

    chart: Chart
    generators: tuple = ()

    def __post_init__(self):
        gens = tuple(self.generators)
        for g in gens:
            if g.chart != self.chart:
                raise ChartError("generator lives on a different chart")
        object.__setattr__(self, "generators", gens)

    @classmethod
    def span(cls, chart, fields):
        return cls(chart, tuple(fields))

    @classmethod
    def coordinates(cls, chart, symbols):
        return cls(chart, tuple(VectorField.coordinate(chart, s) for s in symbols))

    def __len__(self):
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    def plus(self, fields):
        return Distribution(self.chart, self.generators + tuple(fields))

    def matrix(self):
        return [list(g.components) for g in self.generators]


def bracket_extend(D, f):
    """Generators of ``D`` followed by ``[f, g]`` for every generator ``g``."""
    if f.chart != D.chart:
        raise ChartError("drift and distribution live on different charts")
    return D.plus(lie_bracket(f, g) for g in D.generators)


@dataclass(frozen=True)
class SamplePlan:
    """Deterministic generic-point sampler.

    Coordinates default to rationals p/q with p in [-10, 10], q in [1, 4];
    ``box`` overrides the range per symbol name with a rational interval.
    A point is rejected when an exclusion vanishes or any evaluated
    expression is singular there.
    """

    seed: int = DEFAULT_SEED
    samples: int = DEFAULT_SAMPLES
    box: dict = field(default_factory=dict)
    exclusions: tuple = ()
    max_attempts: int = 100

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("sample count must be >= 1")
        for name, (lo, hi) in self.box.items():
            if Fraction(hi) <= Fraction(lo):
                raise ValueError(f"degenerate sampling interval for {name}")
        object.__setattr__(self, "exclusions", tuple(as_expr(e) for e in self.exclusions))

    def with_exclusions(self, extra):
        return SamplePlan(self.seed, self.samples, dict(self.box),
                          self.exclusions + tuple(extra), self.max_attempts)

    def value(self, sample, attempt, name):
        rng = random.Random(f"{self.seed}:{sample}:{attempt}:{name}")
        if name in self.box:
            lo, hi = (Fraction(b) for b in self.box[name])
            return lo + (hi - lo) * Fraction(rng.randint(0, 64), 64)
        return Fraction(rng.randint(-10, 10), rng.randint(1, 4))

    def evaluate(self, exprs):
        """Exact values of ``exprs`` at each accepted sample point."""
        exprs = [as_expr(e) for e in exprs]
        names = {}
        for e in list(exprs) + list(self.exclusions):
            for s in e.free_symbols:
                names.setdefault(s.name, s)
        out = []
        for i in range(self.samples):
            for attempt in range(self.max_attempts):
                point = {s: self.value(i, attempt, name) for name, s in names.items()}
                try:
                    if any(evaluate(x, point) == 0 for x in self.exclusions):
                        continue
                    out.append([evaluate(e, point) for e in exprs])
                    break
                except SingularPointError:
                    continue
            else:
                raise SingularityError(
                    f"no nonsingular sample found after {self.max_attempts} attempts")
        return out


def _as_plan(plan):
    return plan if plan is not None else SamplePlan()


def _ranks(values, nrows, ncols, extra_rows=0):
    """Per-sample ranks of a flattened matrix (first ``nrows`` rows)."""
    ranks = []
    for vals in values:
        rows = [vals[r * ncols:(r + 1) * ncols] for r in range(nrows + extra_rows)]
        ranks.append(exact_rank(rows))
    return ranks


def generic_matrix_rank(rows, plan=None):
    """Generic rank of a matrix of Exprs."""
    rows = [[as_expr(v) for v in row] for row in rows]
    if not rows or not rows[0]:
        return 0
    ncols = len(rows[0])
    flat = [v for row in rows for v in row]
    values = _as_plan(plan).evaluate(flat)
    return max(_ranks(values, len(rows), ncols))


def generic_rank(D, plan=None):
    if not D.generators:
        return 0
    return generic_matrix_rank(D.matrix(), plan)


def contains(D, v, plan=None, mode="numeric"):
    """Whether ``v`` lies in ``D`` at generic points."""
    if v.chart != D.chart:
        raise ChartError("vector field and distribution live on different charts")
    if v.is_zero():
        return True
    if mode == "symbolic":
        return symbolic_rank(D.matrix() + [list(v.components)]) == symbolic_rank(D.matrix())
    if mode != "numeric":
        raise ValueError(f"unknown membership mode {mode!r}")
    return not _outside(D, [v], _as_plan(plan))[0]


def _outside(D, fields, plan):
    """For each field, whether it increases the generic rank of ``D``."""
    ncols = len(D.chart)
    nrows = len(D.generators)
    flat = [c for g in D.generators for c in g.components]
    for f in fields:
        flat.extend(f.components)
    values = plan.evaluate(flat)
    base = max((exact_rank([vals[r * ncols:(r + 1) * ncols] for r in range(nrows)])
                for vals in values), default=0)
    out = []
    for k in range(len(fields)):
        lo = (nrows + k) * ncols
        best = 0
        for vals in values:
            rows = [vals[r * ncols:(r + 1) * ncols] for r in range(nrows)]
            rows.append(vals[lo:lo + ncols])
            best = max(best, exact_rank(rows))
        out.append(best > base)
    return out


@dataclass(frozen=True)
class Witness:
    """A generator pair whose bracket leaves the distribution."""

    i: int
    j: int
    bracket: VectorField

    def to_dict(self):
        return {"pair": [self.i, self.j], "bracket": self.bracket.to_dict()}


@dataclass(frozen=True)
class InvolutivityResult:
    involutive: bool
    witness: Witness | None = None

    def __bool__(self):
        return self.involutive


def is_involutive(D, plan=None, mode="numeric"):
    """Check every pairwise generator bracket for membership in ``D``."""
    # newest generator first, each against its nearest predecessors
    pairs = []
    for j in range(len(D.generators)):
        for i in reversed(range(j)):
            b = lie_bracket(D.generators[i], D.generators[j])
            if not b.is_zero():
                pairs.append((i, j, b))
    if not pairs:
        return InvolutivityResult(True)
    if mode == "symbolic":
        for i, j, b in pairs:
            if not contains(D, b, mode="symbolic"):
                return InvolutivityResult(False, Witness(i, j, b))
        return InvolutivityResult(True)
    flags = _outside(D, [b for _, _, b in pairs], _as_plan(plan))
    for (i, j, b), out in zip(pairs, flags):
        if out:
            return InvolutivityResult(False, Witness(i, j, b))
    return InvolutivityResult(True)
