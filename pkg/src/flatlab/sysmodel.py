"""Control systems x' = f(x, u), input jets, input transformations and
prolongations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChartError, NonInvertibleTransformError, TransformError
from .expr import (INPUT, JET, STATE, ZERO, Expr, Symbol, as_expr, differentiate,
                   jet, substitute)
from .vfields import Chart, SamplePlan, VectorField, generic_matrix_rank


def _as_symbols(items, kind):
    out = []
    for s in items:
        if isinstance(s, str):
            s = Symbol(s, kind)
        elif s.kind != kind:
            s = s.with_kind(kind)
        out.append(s)
    return tuple(out)


@dataclass(frozen=True)
class ControlSystem:
    """States, inputs and one dynamics expression per state.

    ``exclusions`` are expressions that must not vanish (singular loci);
    ``functions`` lists unknown functions allowed in the dynamics.
    """

    states: tuple
    inputs: tuple
    dynamics: tuple
    exclusions: tuple = ()
    functions: tuple = ()

    def __post_init__(self):
        states = _as_symbols(self.states, STATE)
        inputs = _as_symbols(self.inputs, INPUT)
        dynamics = tuple(as_expr(e) for e in self.dynamics)
        if not states:
            raise ChartError("a system needs at least one state")
        if not inputs:
            raise ChartError("a system needs at least one input")
        if len(dynamics) != len(states):
            raise ChartError(f"{len(dynamics)} dynamics expressions for {len(states)} states")
        chart = Chart(states + inputs)
        exclusions = tuple(as_expr(e) for e in self.exclusions)
        functions = list(self.functions)
        for e in dynamics + exclusions:
            for f in e.functions():
                if f not in functions:
                    functions.append(f)
        for f in functions:
            for a in f.args:
                if a not in chart:
                    raise ChartError(f"argument {a} of {f} is not a system coordinate")
        for e in dynamics + exclusions:
            for s in e.free_symbols:
                if s.kind != "formal-partial" and s not in chart:
                    raise ChartError(f"{s} in {e} is neither a state nor an input")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "dynamics", dynamics)
        object.__setattr__(self, "exclusions", exclusions)
        object.__setattr__(self, "functions", tuple(functions))

    @property
    def n(self):
        return len(self.states)

    @property
    def m(self):
        return len(self.inputs)

    @property
    def chart(self):
        return Chart(self.states + self.inputs)

    @property
    def drift(self):
        """f = f_i(x, u) d/dx_i on the state-and-input chart."""
        return VectorField(self.chart, self.dynamics + (ZERO,) * self.m)

    def rhs(self, s):
        return self.dynamics[self.states.index(s)]

    def input_index(self, which):
        if isinstance(which, int):
            if not 0 <= which < self.m:
                raise ChartError(f"input index {which} out of range")
            return which
        name = which if isinstance(which, str) else which.name
        for i, u in enumerate(self.inputs):
            if u.name == name:
                return i
        raise ChartError(f"{name} is not an input")

    def sample_plan(self, seed=None, samples=None):
        kw = {}
        if seed is not None:
            kw["seed"] = seed
        if samples is not None:
            kw["samples"] = samples
        return SamplePlan(exclusions=self.exclusions, **kw)

    def __str__(self):
        return "\n".join(f"{s}' = {e}" for s, e in zip(self.states, self.dynamics))


@dataclass
class JetContext:
    """Highest input-jet order allocated so far, per input name."""

    system: ControlSystem
    orders: dict = field(default_factory=dict)

    def symbol(self, u, k):
        self.orders[u.name] = max(self.orders.get(u.name, 0), k)
        return jet(u, k)

    def max_order(self):
        return max(self.orders.values(), default=0)


def _rate(s, sys, jets):
    """ds/dt along the dynamics, or None for a constant."""
    if s in sys.states and s.kind != JET:
        return sys.rhs(s)
    root = s.root
    if root in sys.inputs:
        k = s.jet_order + 1
        sym = jets.symbol(root, k) if jets is not None else jet(root, k)
        return Expr.symbol(sym)
    if root in sys.states:
        raise ChartError(f"jet {s} of a state is not a coordinate; use the dynamics")
    return None


def time_derivative(e, sys, jets=None):
    """Total time derivative along x' = f(x, u), input jets shifting by one."""
    e = as_expr(e)
    base = []
    for s in e.free_symbols:
        if s.kind == "formal-partial":
            base.extend(a for a in s.function.args if a not in base)
        elif s not in base:
            base.append(s)
    acc = ZERO
    for s in base:
        rate = _rate(s, sys, jets)
        if rate is None or rate.is_zero():
            continue
        d = differentiate(e, s)
        if not d.is_zero():
            acc = acc + d * rate
    return acc


def depends_on_inputs(e, sys):
    e = as_expr(e)
    return any(not differentiate(e, u).is_zero() for u in sys.inputs)


def relative_degree(sys, phi, cap=None):
    """Smallest k with d(phi^(k))/du_j not identically zero, or None."""
    phi = as_expr(phi)
    if cap is None:
        q = max((s.jet_order for s in phi.free_symbols if s.root in sys.inputs), default=0)
        cap = sys.n + q + 1
    e = phi
    for k in range(cap + 1):
        if depends_on_inputs(e, sys):
            return k
        if k < cap:
            e = time_derivative(e, sys)
    return None


@dataclass(frozen=True)
class InputTransform:
    """Input change u = inverse(x, new_inputs); ``forward`` optionally gives
    new_inputs = forward(x, u) for a round-trip check."""

    new_inputs: tuple
    inverse: tuple
    forward: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "new_inputs", _as_symbols(self.new_inputs, INPUT))
        object.__setattr__(self, "inverse", tuple(as_expr(e) for e in self.inverse))
        if self.forward is not None:
            object.__setattr__(self, "forward", tuple(as_expr(e) for e in self.forward))
        if len(self.inverse) != len(self.new_inputs):
            raise TransformError("inverse needs one expression per input")
        if self.forward is not None and len(self.forward) != len(self.new_inputs):
            raise TransformError("forward needs one expression per new input")

    def jacobian(self):
        return [[differentiate(h, v) for v in self.new_inputs] for h in self.inverse]

    def reversed(self, old_inputs):
        """The transform going back to ``old_inputs`` (needs ``forward``)."""
        if self.forward is None:
            raise TransformError("reversing a transform needs its forward map")
        return InputTransform(old_inputs, self.forward, self.inverse)


def apply_input_transform(sys, t, plan=None):
    """Substitute u = inverse(x, new inputs) into the dynamics."""
    if len(t.new_inputs) != sys.m:
        raise TransformError(f"transform has {len(t.new_inputs)} inputs, system has {sys.m}")
    clash = [v for v in t.new_inputs if v in sys.states]
    if clash:
        raise TransformError(f"new input {clash[0]} collides with a state")
    allowed = set(sys.states) | set(t.new_inputs)
    for h in t.inverse:
        for s in h.free_symbols:
            if s.kind != "formal-partial" and s not in allowed:
                raise TransformError(f"inverse uses {s}, which is neither a state nor a new input")
    binding = dict(zip(sys.inputs, t.inverse))
    exclusions = []
    for e in sys.exclusions:
        e = substitute(e, binding)
        for part in (e.numerator(), e.denominator()):
            if not part.is_constant() and part not in exclusions:
                exclusions.append(part)
    exclusions = tuple(exclusions)
    plan = (plan or SamplePlan()).with_exclusions(exclusions)
    rank = generic_matrix_rank(t.jacobian(), plan)
    if rank < sys.m:
        raise NonInvertibleTransformError(
            f"input transform is not invertible: Jacobian of the inverse has generic rank {rank}",
            rank=rank)
    if t.forward is not None:
        for v, g in zip(t.new_inputs, t.forward):
            back = substitute(g, binding)
            if back != Expr.symbol(v):
                raise TransformError(f"forward map does not invert the inverse for {v}: got {back}")
    dynamics = tuple(substitute(e, binding) for e in sys.dynamics)
    return ControlSystem(sys.states, t.new_inputs, dynamics, exclusions, sys.functions)


def _fresh(name, taken):
    if name not in taken:
        return name
    k = 1
    while f"{name}_{k}" in taken:
        k += 1
    return f"{name}_{k}"


def prolong(sys, input_index, k, names=None):
    """Add an integrator chain of length ``k`` in front of one input.

    The input u becomes a state followed by u_1 ... u_{k-1}; the new input
    u_k takes the place of u.  ``names`` may give the k new symbol names.
    """
    if k < 0:
        raise ValueError("prolongation order must be >= 0")
    i = sys.input_index(input_index)
    if k == 0:
        return sys
    u = sys.inputs[i]
    taken = {s.name for s in sys.states + sys.inputs}
    if names is None:
        names = []
        for j in range(1, k + 1):
            nm = _fresh(f"{u.name}_{j}", taken)
            taken.add(nm)
            names.append(nm)
    elif len(names) != k or len(set(names)) != k or taken & set(names):
        raise ChartError("prolongation needs k fresh, distinct names")
    chain = [u] + [Symbol(nm, STATE) for nm in names[:-1]]
    top = Symbol(names[-1], INPUT)
    states = sys.states + tuple(s.with_kind(STATE) for s in chain)
    dynamics = sys.dynamics + tuple(Expr.symbol(s) for s in chain[1:]) + (Expr.symbol(top),)
    inputs = sys.inputs[:i] + (top,) + sys.inputs[i + 1:]
    return ControlSystem(states, inputs, dynamics, sys.exclusions, sys.functions)


def brunovsky(rho1, rho2):
    """Two integrator chains x1_1' = x1_2, ..., x1_rho1' = u1 (and likewise for 2)."""
    if rho1 < 1 or rho2 < 1:
        raise ValueError("chain lengths must be >= 1")
    states, dynamics = [], []
    inputs = (Symbol("u1", INPUT), Symbol("u2", INPUT))
    for c, rho in ((1, rho1), (2, rho2)):
        chain = [Symbol(f"x{c}_{j}", STATE) for j in range(1, rho + 1)]
        states.extend(chain)
        dynamics.extend(Expr.symbol(s) for s in chain[1:])
        dynamics.append(Expr.symbol(inputs[c - 1]))
    return ControlSystem(tuple(states), inputs, tuple(dynamics))


@dataclass(frozen=True)
class Trajectory:
    """Uniform time grid with state and input-jet samples.

    ``inputs`` maps a jet name (``u1``, ``u1'``, ...) to its values on the grid.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: dict

    def __post_init__(self):
        t = np.asarray(self.times)
        if t.ndim != 1 or len(t) < 1:
            raise ValueError("time grid must be a non-empty vector")
        if len(t) > 2:
            dt = np.diff(t.astype(float))
            if np.max(np.abs(dt - dt[0])) > 1e-9 * max(1.0, abs(dt[0])):
                raise ValueError("time grid must be uniform")
        if not np.all(np.isfinite(np.asarray(self.states, dtype=float))):
            raise ValueError("trajectory contains non-finite states")

    def __len__(self):
        return len(self.times)
