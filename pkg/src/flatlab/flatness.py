"""Static feedback linearizability, flat-output certificates and the
prolongation procedure for (x, u)-flat outputs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, InputError, JetOrderOverflowError, TransformError
from .expr import (INPUT, PARAMETER, Expr, Symbol, as_expr, differentiate,
                   evaluate_array, jet, substitute)
from .linalg import symbolic_rank
from .numerics import integrate_rk4
from .sysmodel import (InputTransform, apply_input_transform, depends_on_inputs,
                       prolong, relative_degree, time_derivative)
from .vfields import (Distribution, VectorField, generic_matrix_rank,
                      generic_rank, is_involutive, lie_bracket)


def _require_two_inputs(sys):
    if sys.m != 2:
        raise InputError(f"flatness operations need a two-input system, got {sys.m} inputs")


# ---------------------------------------------------------------------------
# distribution chain


@dataclass(frozen=True)
class LevelInfo:
    index: int
    dimension: int
    involutive: bool
    generators: int
    witness: object = None

    def to_dict(self):
        return {"level": self.index, "dimension": self.dimension,
                "involutive": self.involutive, "generators": self.generators,
                "witness": self.witness.to_dict() if self.witness else None}


@dataclass(frozen=True)
class SflReport:
    n: int
    levels: tuple
    verdict: bool

    @property
    def dimensions(self):
        return tuple(lv.dimension for lv in self.levels)

    @property
    def levels_computed(self):
        return len(self.levels)

    def first_failure(self):
        return next((lv for lv in self.levels if not lv.involutive), None)

    def to_dict(self):
        return {"n": self.n, "verdict": self.verdict, "dimensions": list(self.dimensions),
                "levels_computed": self.levels_computed,
                "levels": [lv.to_dict() for lv in self.levels]}


def _same_direction(v, w):
    return v.components == w.components or v.components == (-w).components


def _extend(gens, new, f):
    """Brackets of the newest generators with the drift, minus zero and
    repeated fields.  Brackets with older generators already lie in the span."""
    out = []
    for g in new:
        b = lie_bracket(f, g)
        if b.is_zero() or any(_same_direction(b, h) for h in gens + out):
            continue
        out.append(b)
    return out


def distribution_chain(sys, levels):
    """Generator lists of D^0 ... D^levels, with the index where each level's
    new generators start."""
    f = sys.drift
    chart = sys.chart
    gens = [VectorField.coordinate(chart, u) for u in sys.inputs]
    chain = [(Distribution(chart, tuple(gens)), 0)]
    new = list(gens)
    for _ in range(levels):
        start = len(gens)
        new = _extend(gens, new, f)
        gens = gens + new
        chain.append((Distribution(chart, tuple(gens)), start))
    return chain


def _rank(D, plan, mode):
    if mode == "symbolic":
        return symbolic_rank(D.matrix()) if D.generators else 0
    return generic_rank(D, plan)


def check_sfl(sys, plan=None, mode="numeric"):
    """D^0 = span{d/du1, d/du2}, D^i = D^(i-1) + [f, D^(i-1)]; linearizable
    by static feedback iff every D^i is involutive and dim D^n = n + 2."""
    _require_two_inputs(sys)
    if plan is None:
        plan = sys.sample_plan()
    f = sys.drift
    chart = sys.chart
    full = sys.n + sys.m
    gens = [VectorField.coordinate(chart, u) for u in sys.inputs]
    new = list(gens)
    levels = []
    for i in range(sys.n + 1):
        if i:
            new = _extend(gens, new, f)
            gens = gens + new
        D = Distribution(chart, tuple(gens))
        dim = _rank(D, plan, mode)
        inv = is_involutive(D, plan, mode)
        levels.append(LevelInfo(i, dim, inv.involutive, len(gens), inv.witness))
        if dim == full:
            break
        if i and (not new or dim == levels[-2].dimension):
            # the chain is stationary from here on
            break
    verdict = all(lv.involutive for lv in levels) and levels[-1].dimension == full
    return SflReport(sys.n, tuple(levels), verdict)


# ---------------------------------------------------------------------------
# certificates


def output_symbols(names=("y1", "y2")):
    return tuple(Symbol(nm, PARAMETER) for nm in names)


def _orders(e, base):
    """Highest jet order of each base symbol occurring in ``e`` (-1 if absent)."""
    out = {b.name: -1 for b in base}
    for s in as_expr(e).free_symbols:
        r = s.root
        if r.name in out:
            out[r.name] = max(out[r.name], s.jet_order)
        elif s.kind not in ("formal-partial",):
            raise CertificateError(f"{s} is not a jet of the flat output")
    return out


@dataclass(frozen=True)
class FlatCertificate:
    """Flat output phi(x, u, ..., u^(q)) with parameterizations
    x = Fx(y-jets up to r-1) and u = Fu(y-jets up to r)."""

    phi: tuple
    q: int
    Fx: tuple
    Fu: tuple
    r1: int
    r2: int
    outputs: tuple = field(default_factory=output_symbols)

    def __post_init__(self):
        for name in ("phi", "Fx", "Fu"):
            object.__setattr__(self, name, tuple(as_expr(e) for e in getattr(self, name)))
        if len(self.phi) != 2 or len(self.Fu) != 2 or len(self.outputs) != 2:
            raise CertificateError("certificates are for two-input systems")
        if self.q < 0 or self.r1 < 1 or self.r2 < 1:
            raise CertificateError("need q >= 0 and r1, r2 >= 1")
        y1, y2 = self.outputs
        bounds = {y1.name: self.r1, y2.name: self.r2}
        for kind, exprs, slack in (("Fx", self.Fx, 1), ("Fu", self.Fu, 0)):
            for k, e in enumerate(exprs):
                for nm, order in _orders(e, self.outputs).items():
                    if order > bounds[nm] - slack:
                        raise CertificateError(
                            f"{kind}[{k + 1}] uses {nm} to order {order}, "
                            f"beyond {bounds[nm] - slack}")

    @property
    def r(self):
        return max(self.r1, self.r2)


def output_jets(sys, cert):
    """Symbolic y_j^(k) as functions of (x, input jets), k <= r_j."""
    for k, p in enumerate(cert.phi):
        for s in p.free_symbols:
            if s in sys.states:
                continue
            if s.root in sys.inputs:
                if s.jet_order > cert.q:
                    raise CertificateError(
                        f"phi[{k + 1}] uses {s}, beyond the declared order q = {cert.q}")
                continue
            raise CertificateError(f"phi[{k + 1}] uses {s}, which is not a system coordinate")
    out = {}
    for y, p, r in zip(cert.outputs, cert.phi, (cert.r1, cert.r2)):
        e = p
        for k in range(r + 1):
            out[jet(y, k)] = e
            if k < r:
                e = time_derivative(e, sys)
    limit = cert.q + cert.r
    for e in out.values():
        for s in e.free_symbols:
            if s.root in sys.inputs and s.jet_order > limit:
                raise JetOrderOverflowError(f"jet {s} exceeds q + max(r1, r2) = {limit}")
    return out


@dataclass(frozen=True)
class CertificateCheck:
    ok: bool
    residuals: dict
    defects: tuple = ()

    def to_dict(self):
        return {"ok": self.ok, "residuals": {k: str(v) for k, v in self.residuals.items()},
                "defects": list(self.defects)}


def _targets(sys, cert):
    return [(s.name, Fx, Expr.symbol(s)) for s, Fx in zip(sys.states, cert.Fx)] + \
           [(u.name, Fu, Expr.symbol(u)) for u, Fu in zip(sys.inputs, cert.Fu)]


def verify_certificate_symbolic(sys, cert):
    """Substitute the y-jets of phi into Fx, Fu; every residual must vanish."""
    _require_two_inputs(sys)
    if len(cert.Fx) != sys.n:
        raise CertificateError(f"Fx has {len(cert.Fx)} entries, system has {sys.n} states")
    jets = output_jets(sys, cert)
    residuals = {}
    for name, F, target in _targets(sys, cert):
        residuals[name] = substitute(F, jets) - target
    defects = []
    if cert.q == 0:
        rho = [relative_degree(sys, p) for p in cert.phi]
        if None not in rho and cert.r1 - rho[0] != cert.r2 - rho[1]:
            defects.append(f"r1 - rho1 = {cert.r1 - rho[0]} differs from "
                           f"r2 - rho2 = {cert.r2 - rho[1]}")
    ok = all(r.is_zero() for r in residuals.values()) and not defects
    return CertificateCheck(ok, residuals, tuple(defects))


@dataclass(frozen=True)
class NumericCheck:
    max_residual: float
    residuals: dict

    def passed(self, tol):
        return bool(self.max_residual < tol)

    def to_dict(self):
        return {"max_residual": self.max_residual, "residuals": dict(self.residuals)}


def verify_certificate_numeric(sys, cert, signals, x0, t_span=(0, 1), step=1e-3):
    """Integrate the system under polynomial inputs, rebuild x and u from the
    exact y-jets along the trajectory and report the largest relative
    deviation |F - value| / max(1, |value|)."""
    _require_two_inputs(sys)
    traj = integrate_rk4(sys, x0, signals, t_span, step, jet_order=cert.q + cert.r)
    arrays = {s: traj.states[:, i] for i, s in enumerate(sys.states)}
    for name, values in traj.inputs.items():
        arrays[name] = values
    jets = output_jets(sys, cert)
    yvals = {y: evaluate_array(e, arrays) for y, e in jets.items()}
    residuals = {}
    for name, F, target in _targets(sys, cert):
        got = evaluate_array(F, yvals)
        want = evaluate_array(target, arrays)
        residuals[name] = float(np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want))))
    return NumericCheck(max(residuals.values()), residuals)


# ---------------------------------------------------------------------------
# linearizing outputs


@dataclass(frozen=True)
class LinearizingCheck:
    ok: bool
    rho: tuple
    rank: int | None = None

    def to_dict(self):
        return {"ok": self.ok, "rho": list(self.rho), "decoupling_rank": self.rank}


def decoupling_matrix(sys, phi, rho):
    rows = []
    for p, r in zip(phi, rho):
        e = as_expr(p)
        for _ in range(r):
            e = time_derivative(e, sys)
        rows.append([differentiate(e, u) for u in sys.inputs])
    return rows


def linearizing_output_check(sys, phi, plan=None):
    """rho1 + rho2 = n and a generically invertible decoupling matrix."""
    _require_two_inputs(sys)
    phi = tuple(as_expr(p) for p in phi)
    for p in phi:
        if any(s.root in sys.inputs for s in p.free_symbols):
            raise InputError("linearizing outputs must depend on the state only")
    rho = tuple(relative_degree(sys, p) for p in phi)
    if None in rho or sum(rho) != sys.n:
        return LinearizingCheck(False, rho)
    rank = generic_matrix_rank(decoupling_matrix(sys, phi, rho),
                               plan or sys.sample_plan())
    return LinearizingCheck(rank == 2, rho, rank)


# ---------------------------------------------------------------------------
# prolongation procedure


def _mobius_inverse(g, u, v):
    """Solve v = g for u when g = (A u + B) / (C u + D) with A..D free of u."""
    num, den = g.numerator(), g.denominator()
    if num.degree(u) > 1 or den.degree(u) > 1:
        return None
    A, C = differentiate(num, u), differentiate(den, u)
    B, D = num - A * Expr.symbol(u), den - C * Expr.symbol(u)
    if (A * D - B * C).is_zero():
        return None
    V = Expr.symbol(v)
    return (B - D * V) / (C * V - A)


def _fresh_input(sys, name):
    taken = {s.name for s in sys.states + sys.inputs}
    k = 0
    cand = name
    while cand in taken:
        k += 1
        cand = f"{name}_{k}"
    return Symbol(cand, INPUT)


@dataclass(frozen=True)
class ProlongationResult:
    transform: InputTransform
    input_index: int
    system: object
    report: SflReport


def prolongation_procedure(sys, phi, rho1=None, plan=None, new_input="v1"):
    """Introduce v1 = phi1^(rho1)(x, u), keep the other input, prolong v1
    n-fold and test the result for static feedback linearizability."""
    _require_two_inputs(sys)
    phi1 = as_expr(phi[0])
    if rho1 is None:
        rho1 = relative_degree(sys, phi1)
        if rho1 is None:
            raise TransformError("phi1 has no finite relative degree")
    g = phi1
    for _ in range(rho1):
        g = time_derivative(g, sys)
    if not depends_on_inputs(g, sys):
        raise TransformError(f"phi1^({rho1}) does not depend on the input")
    v = _fresh_input(sys, new_input)
    for solve, keep in ((0, 1), (1, 0)):
        u, w = sys.inputs[solve], sys.inputs[keep]
        inv = _mobius_inverse(g, u, v)
        if inv is None:
            continue
        inverse = [None, None]
        inverse[solve] = inv
        inverse[keep] = Expr.symbol(w)
        new_inputs = [None, None]
        new_inputs[solve] = v
        new_inputs[keep] = w
        forward = [None, None]
        forward[solve] = g
        forward[keep] = Expr.symbol(w)
        t = InputTransform(tuple(new_inputs), tuple(inverse), tuple(forward))
        try:
            transformed = apply_input_transform(sys, t, plan)
        except TransformError:
            continue
        prolonged = prolong(transformed, solve, sys.n)
        report = check_sfl(prolonged, plan.with_exclusions(prolonged.exclusions)
                           if plan is not None else None)
        return ProlongationResult(t, solve, prolonged, report)
    raise TransformError(f"cannot build an invertible input transform from {g}")
