"""Necessary conditions for involutivity of D^1 and D^2 when the dynamics
contain an unknown function.

Every bracket that must lie in D^level is reduced against the generators
whose entries carry an admissible pivot (nonzero and free of unknown
functions).  What is left over has to vanish, or to be collinear with the
single remaining generator; the numerators of those components and 2x2
minors are the conditions.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import combinations

from .errors import ObstructionError
from .expr import FORMAL, ZERO, Expr, UnknownFunction, as_expr, substitute
from .flatness import distribution_chain
from .sysmodel import ControlSystem
from .vfields import SamplePlan, generic_matrix_rank, lie_bracket

LEVELS = (1, 2)


def normalize_condition(e):
    """Canonical polynomial whose vanishing is equivalent to ``e = 0`` at
    generic points: the numerator with its coordinate-only content, integer
    content and sign removed.  Returns ZERO for a vanishing ``e``."""
    e = as_expr(e)
    if e.is_zero():
        return ZERO
    p = e.num
    formal = [i for i, s in enumerate(e.syms) if s.kind == FORMAL]
    groups = {}
    for monom, c in p.items():
        key = tuple(monom[i] for i in formal)
        rest = tuple(0 if i in formal else m for i, m in enumerate(monom))
        groups.setdefault(key, {})[rest] = c
    R = p.ring
    g = reduce(lambda a, b: a.gcd(b), (R.from_dict(d) for d in groups.values()))
    p = p.exquo(g)
    c = int(p.content())
    if p.LC < 0:
        c = -c
    return Expr._shrink(p.quo_ground(c), R.one, e.syms)


@dataclass(frozen=True)
class Obstruction:
    condition: Expr
    residual: Expr
    source: str

    def to_dict(self):
        return {"condition": str(self.condition), "source": self.source}


@dataclass(frozen=True)
class ObstructionSet:
    level: int
    obstructions: tuple

    @property
    def conditions(self):
        return tuple(o.condition for o in self.obstructions)

    def __len__(self):
        return len(self.obstructions)

    def __iter__(self):
        return iter(self.obstructions)

    def to_dict(self):
        return {"level": self.level, "conditions": [o.to_dict() for o in self.obstructions]}


def _add(out, seen, cond, residual, source):
    cond = normalize_condition(cond)
    if cond.is_zero() or cond in seen:
        return
    seen.add(cond)
    out.append(Obstruction(cond, residual, source))


def _admissible(e):
    return not e.is_zero() and not e.formal_symbols()


def _pivot(row):
    """Column of the preferred pivot: constants first, then any entry free
    of unknown functions."""
    best = None
    for k, e in enumerate(row):
        if _admissible(e):
            if e.is_constant():
                return k
            if best is None:
                best = k
    return best


def _reduce(row, pivots):
    row = list(row)
    for col, prow in pivots:
        c = row[col]
        if not c.is_zero():
            factor = c / prow[col]
            row = [a - factor * b for a, b in zip(row, prow)]
    return row


def _is_coordinate(v):
    nz = [c for c in v.components if not c.is_zero()]
    return len(nz) == 1 and nz[0].is_constant()


def _label(v):
    return " + ".join(f"({c})*d/d{name}" for name, c in v.nonzero().items()) or "0"


def extract_obstructions(system, level, plan=None, brackets="coordinate"):
    """Conditions necessary for D^level of ``system`` to be involutive.

    Only brackets involving a generator that is new at ``level`` are used
    (the older pairs are level ``level - 1`` conditions).  With
    ``brackets="coordinate"`` one member of each pair must be a coordinate
    field, which is the derivation carried out by hand for the normalized
    templates; ``"all"`` uses every pair.  Each choice yields necessary
    conditions.  The result does not depend on ``plan``.
    """
    if level not in LEVELS:
        raise ObstructionError(f"obstruction extraction supports levels {LEVELS}, not {level}")
    if brackets not in ("coordinate", "all"):
        raise ValueError(f"unknown bracket selection {brackets!r}")
    if not system.functions:
        raise ObstructionError("the template declares no unknown function")
    D, start = distribution_chain(system, level)[level]
    gens = list(D.generators)
    chart = D.chart
    names = [s.name for s in chart]

    pivots, leftover = [], []
    for g in gens:
        row = _reduce(g.components, pivots)
        if all(c.is_zero() for c in row):
            continue
        col = _pivot(row)
        if col is None:
            leftover.append(row)
        else:
            pivots.append((col, row))
    pivot_cols = {col for col, _ in pivots}

    out, seen = [], set()
    for j in range(start, len(gens)):
        for i in range(len(gens)):
            if i == j or (i > j and i >= start):
                continue
            a, b = gens[i], gens[j]
            if brackets == "coordinate" and not (_is_coordinate(a) or _is_coordinate(b)):
                continue
            w = lie_bracket(a, b)
            if w.is_zero():
                continue
            res = _reduce(w.components, pivots)
            if all(c.is_zero() for c in res):
                continue
            src = f"[{_label(a)}, {_label(b)}]"
            if not leftover:
                for k, c in enumerate(res):
                    _add(out, seen, c, c, f"{src}: component {names[k]}")
            elif len(leftover) == 1:
                ell = leftover[0]
                cols = [k for k in range(len(chart)) if k not in pivot_cols]
                for p, q in combinations(cols, 2):
                    minor = res[p] * ell[q] - res[q] * ell[p]
                    _add(out, seen, minor, minor,
                         f"{src}: collinearity minor ({names[p]}, {names[q]})")
            else:
                raise ObstructionError(
                    f"membership reduction leaves {len(leftover)} generators without "
                    f"an admissible pivot")
    return ObstructionSet(level, tuple(out))


def specialize_ansatz(obs, binding):
    """Substitute an ansatz like ``{h: a + b*v2}`` into every condition;
    conditions that vanish identically are dropped."""
    out, seen = [], set()
    for o in obs:
        e = substitute(o.residual, binding)
        _add(out, seen, e, e, o.source)
    return ObstructionSet(obs.level, tuple(out))


def specialize_system(system, binding):
    """The template with unknown functions replaced per ``binding``."""
    dynamics = tuple(substitute(e, binding) for e in system.dynamics)
    exclusions = tuple(substitute(e, binding) for e in system.exclusions)
    exclusions = tuple(e for e in exclusions if not e.is_constant())
    return ControlSystem(system.states, system.inputs, dynamics, exclusions)


# ---------------------------------------------------------------------------
# reading conditions


def factor_symbols(cond):
    """Formal symbols whose product is ``cond``, or None when ``cond`` is not
    such a monomial."""
    if len(cond.num) != 1 or not cond.is_polynomial():
        return None
    (monom, c), = cond.num.items()
    if abs(int(c)) != 1:
        return None
    syms = [s for s, k in zip(cond.syms, monom) if k]
    if any(s.kind != FORMAL for s in syms):
        return None
    return syms


def alternatives(cond):
    """Bindings, one per way the monomial condition can vanish.

    ``F = 0`` for a function value and ``F`` independent of an argument for
    a first partial.  Returns None for conditions of any other shape."""
    syms = factor_symbols(cond)
    if syms is None:
        return None
    out = []
    for s in syms:
        F = s.function
        order = sum(s.index)
        if order == 0:
            out.append(({F: ZERO}, f"{F} = 0"))
        elif order == 1:
            k = s.index.index(1)
            reduced = UnknownFunction(F.name, F.args[:k] + F.args[k + 1:])
            out.append(({F: reduced.expr()},
                        f"{F.name} does not depend on {F.args[k]}"))
        else:
            return None
    return out


def regularity_rank(transform, binding, plan=None):
    """Generic Jacobian rank of the inverse input transform under ``binding``."""
    rows = [[substitute(e, binding) for e in row] for row in transform.jacobian()]
    return generic_matrix_rank(rows, plan or SamplePlan())


# ---------------------------------------------------------------------------
# the two-level derivation for a normalized template


@dataclass(frozen=True)
class ChainStep:
    name: str
    conditions: tuple
    note: str = ""

    def to_dict(self):
        return {"step": self.name, "conditions": [str(c) for c in self.conditions],
                "note": self.note}


@dataclass(frozen=True)
class ChainResult:
    steps: tuple
    branches: tuple
    contradiction: bool

    def to_dict(self):
        return {"steps": [s.to_dict() for s in self.steps],
                "branches": [dict(b) for b in self.branches],
                "contradiction": self.contradiction}


def _compose(first, second):
    out = {k: substitute(v, second) for k, v in first.items()}
    for k, v in second.items():
        out.setdefault(k, v)
    return out


def obstruction_chain(template, ansatz, transform=None, plan=None, brackets="coordinate"):
    """Level-1 conditions, the affine ansatz, the forced vanishing of its
    free term, the level-2 conditions and, per remaining alternative, the
    Jacobian rank of the inverse input transform.

    ``ansatz`` maps the unknown function to its affine form (e.g.
    ``{h: a + b*v2}``); ``transform`` is the inverse input transform of the
    template, used for the regularity check.
    """
    (h, form), = ansatz.items()
    steps = []
    level1 = extract_obstructions(template, 1, plan, brackets)
    steps.append(ChainStep("level-1", level1.conditions))
    affine = [c for c in level1.conditions if substitute(c, ansatz).is_zero()]
    if not affine:
        raise ObstructionError("no level-1 condition is solved by the ansatz")
    steps.append(ChainStep("ansatz", tuple(affine), f"{h} = {form}"))
    specialized = specialize_ansatz(level1, ansatz)
    steps.append(ChainStep("level-1 under ansatz", specialized.conditions))
    binding = dict(ansatz)
    for cond in specialized.conditions:
        alts = alternatives(cond)
        if not alts or len({str(a[0]) for a in alts}) != 1:
            raise ObstructionError(f"cannot read off a unique consequence of {cond}")
        binding = _compose(binding, alts[0][0])
        steps.append(ChainStep("forced", (cond,), alts[0][1]))
    reduced = specialize_system(template, {h: binding[h]})
    level2 = extract_obstructions(reduced, 2, plan, brackets)
    steps.append(ChainStep("level-2", level2.conditions))
    branches = []
    contradiction = True
    for cond in level2.conditions:
        alts = alternatives(cond)
        if alts is None:
            contradiction = False
            continue
        for alt, note in alts:
            final = _compose({h: binding[h]}, alt)
            row = {"condition": str(cond), "alternative": note,
                   h.name: str(final[h])}
            if transform is not None:
                rank = regularity_rank(transform, final, plan)
                row["jacobian_rank"] = rank
                if rank >= len(transform.new_inputs):
                    contradiction = False
            else:
                contradiction = False
            branches.append(tuple(sorted(row.items())))
    if not level2.conditions:
        contradiction = False
    return ChainResult(tuple(steps), tuple(branches), contradiction)

