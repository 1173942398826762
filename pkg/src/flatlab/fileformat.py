"""Sectioned text formats for systems (.sys), flat-output certificates
(.cert) and input transforms (.tr).

    # comment
    [states]
    x1 x2 x3
    [inputs]
    u1 u2
    [dynamics]
    x1' = u1
    ...

Lines starting with whitespace continue the previous entry.  Writers emit a
canonical form, so read -> write is byte-stable.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import FormatError, InputError
from .expr import INPUT, STATE, Symbol, to_string
from .flatness import FlatCertificate, output_symbols
from .parsing import parse, parse_function
from .sysmodel import ControlSystem, InputTransform

SYSTEM_SECTIONS = ("states", "inputs", "functions", "dynamics", "exclusions", "ansatz",
                   "transform")
CERT_SECTIONS = ("outputs", "orders", "state_map", "input_map")
TRANSFORM_SECTIONS = ("new_inputs", "forward", "inverse")


def _sections(text, allowed, source):
    """Split into {section: [(line_no, entry)]}, joining continuation lines."""
    out = {}
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in allowed:
                raise FormatError(f"unknown section [{current}]", no, source)
            if current in out:
                raise FormatError(f"repeated section [{current}]", no, source)
            out[current] = []
            continue
        if current is None:
            raise FormatError("content before the first section", no, source)
        if raw[:1].isspace() and out[current]:
            prev_no, prev = out[current][-1]
            out[current][-1] = (prev_no, prev + " " + line.strip())
        else:
            out[current].append((no, line.strip()))
    return out


def _words(entries):
    return [(no, w) for no, line in entries for w in line.replace(",", " ").split()]


def _assignments(entries, source):
    out = []
    for no, line in entries:
        if "=" not in line:
            raise FormatError(f"expected 'name = expression', got {line!r}", no, source)
        lhs, rhs = line.split("=", 1)
        out.append((no, lhs.strip(), rhs.strip()))
    return out


def _parse(text, table, functions, no, source):
    try:
        return parse(text, table, functions)
    except InputError as exc:
        raise FormatError(str(exc), no, source) from None


def _declare(names, kind, taken, source):
    out = []
    for no, name in names:
        if name in taken:
            raise FormatError(f"duplicate symbol {name!r}", no, source)
        try:
            out.append(Symbol(name, kind))
        except ValueError as exc:
            raise FormatError(str(exc), no, source) from None
        taken.add(name)
    return out


@dataclass(frozen=True)
class SystemFile:
    """A system plus the optional template data used by the obstruction
    extractor: an ansatz for the unknown function and the inverse input
    transform whose regularity is at stake."""

    system: ControlSystem
    ansatz: dict | None = None
    transform: InputTransform | None = None
    declared: tuple = ()


def parse_system(text, source=None):
    sec = _sections(text, SYSTEM_SECTIONS, source)
    for name in ("states", "inputs", "dynamics"):
        if name not in sec:
            raise FormatError(f"missing section [{name}]", None, source)
    taken = set()
    states = _declare(_words(sec["states"]), STATE, taken, source)
    inputs = _declare(_words(sec["inputs"]), INPUT, taken, source)
    table = {s.name: s for s in states + inputs}
    functions = []
    for no, line in sec.get("functions", []):
        try:
            functions.append(parse_function(line, table))
        except InputError as exc:
            raise FormatError(str(exc), no, source) from None
    rhs = {}
    for no, lhs, text_ in _assignments(sec["dynamics"], source):
        name = lhs[:-1] if lhs.endswith("'") else None
        if name not in table or table[name].kind != STATE:
            raise FormatError(f"left side must be a state derivative like x1', got {lhs!r}",
                              no, source)
        if name in rhs:
            raise FormatError(f"second equation for {name}'", no, source)
        rhs[name] = _parse(text_, table, functions, no, source)
    missing = [s.name for s in states if s.name not in rhs]
    if missing:
        raise FormatError(f"no dynamics for {', '.join(missing)}", None, source)
    exclusions = [_parse(line, table, functions, no, source)
                  for no, line in sec.get("exclusions", [])]
    ansatz = None
    if "ansatz" in sec:
        ansatz = {}
        for no, lhs, text_ in _assignments(sec["ansatz"], source):
            f = next((g for g in functions if g.name == lhs), None)
            if f is None:
                raise FormatError(f"ansatz for undeclared function {lhs!r}", no, source)
            ansatz[f] = _parse(text_, table, functions, no, source)
    transform = None
    if "transform" in sec:
        transform = _read_template_transform(sec["transform"], table, functions, source)
    used = set()
    for e in list(rhs.values()) + exclusions:
        used.update(e.functions())
    system = ControlSystem(tuple(states), tuple(inputs),
                           tuple(rhs[s.name] for s in states), tuple(exclusions),
                           tuple(f for f in functions if f in used))
    return SystemFile(system, ansatz, transform, tuple(functions))


def _read_template_transform(entries, table, functions, source):
    new_inputs, inverse = None, []
    for no, lhs, text_ in _assignments(entries, source):
        if lhs == "new_inputs":
            new_inputs = []
            for w in text_.replace(",", " ").split():
                if w not in table:
                    raise FormatError(f"unknown new input {w!r}", no, source)
                new_inputs.append(table[w])
        else:
            inverse.append(_parse(text_, table, functions, no, source))
    if new_inputs is None:
        raise FormatError("[transform] needs a 'new_inputs = ...' line", None, source)
    return InputTransform(tuple(new_inputs), tuple(inverse))


def format_system(sf):
    if isinstance(sf, ControlSystem):
        sf = SystemFile(sf)
    sys = sf.system
    lines = ["[states]", " ".join(s.name for s in sys.states), "",
             "[inputs]", " ".join(u.name for u in sys.inputs), ""]
    functions = list(sf.declared) or list(sys.functions)
    for f in sys.functions:
        if f not in functions:
            functions.append(f)
    if functions:
        lines += ["[functions]"] + [str(f) for f in functions] + [""]
    lines.append("[dynamics]")
    lines += [f"{s.name}' = {to_string(e)}" for s, e in zip(sys.states, sys.dynamics)]
    lines.append("")
    if sys.exclusions:
        lines += ["[exclusions]"] + [to_string(e) for e in sys.exclusions] + [""]
    if sf.ansatz:
        lines.append("[ansatz]")
        lines += [f"{f.name} = {to_string(e)}" for f, e in sf.ansatz.items()]
        lines.append("")
    if sf.transform is not None:
        t = sf.transform
        lines += ["[transform]", "new_inputs = " + " ".join(v.name for v in t.new_inputs)]
        lines += [f"u{k} = {to_string(e)}" for k, e in enumerate(t.inverse, 1)]
        lines.append("")
    return "\n".join(lines[:-1]) + "\n"


# ---------------------------------------------------------------------------
# certificates


def parse_certificate(text, system, source=None):
    sec = _sections(text, CERT_SECTIONS, source)
    for name in CERT_SECTIONS:
        if name not in sec:
            raise FormatError(f"missing section [{name}]", None, source)
    table = {s.name: s for s in system.states + system.inputs}
    outs = _assignments(sec["outputs"], source)
    if len(outs) != 2:
        raise FormatError("[outputs] needs exactly two entries", None, source)
    ys = output_symbols(tuple(lhs for _, lhs, _ in outs))
    phi = tuple(_parse(text_, table, (), no, source) for no, _, text_ in outs)
    orders = {}
    for no, lhs, text_ in _assignments(sec["orders"], source):
        try:
            orders[lhs] = int(text_)
        except ValueError:
            raise FormatError(f"order {lhs} must be an integer", no, source) from None
    for key in ("q", "r1", "r2"):
        if key not in orders:
            raise FormatError(f"[orders] is missing {key}", None, source)
    ytable = {y.name: y for y in ys}

    def mapping(name, targets):
        got = {}
        for no, lhs, text_ in _assignments(sec[name], source):
            if lhs not in [t.name for t in targets]:
                raise FormatError(f"[{name}] entry for unknown {lhs!r}", no, source)
            got[lhs] = _parse(text_, ytable, (), no, source)
        missing = [t.name for t in targets if t.name not in got]
        if missing:
            raise FormatError(f"[{name}] lacks {', '.join(missing)}", None, source)
        return tuple(got[t.name] for t in targets)

    Fx = mapping("state_map", system.states)
    Fu = mapping("input_map", system.inputs)
    try:
        return FlatCertificate(phi, orders["q"], Fx, Fu, orders["r1"], orders["r2"], ys)
    except InputError as exc:
        raise FormatError(str(exc), None, source) from None


def format_certificate(cert, system):
    lines = ["[outputs]"]
    lines += [f"{y.name} = {to_string(p)}" for y, p in zip(cert.outputs, cert.phi)]
    lines += ["", "[orders]", f"q = {cert.q}", f"r1 = {cert.r1}", f"r2 = {cert.r2}", "",
              "[state_map]"]
    lines += [f"{s.name} = {to_string(e)}" for s, e in zip(system.states, cert.Fx)]
    lines += ["", "[input_map]"]
    lines += [f"{u.name} = {to_string(e)}" for u, e in zip(system.inputs, cert.Fu)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# input transforms


def parse_transform(text, system, source=None):
    sec = _sections(text, TRANSFORM_SECTIONS, source)
    for name in ("new_inputs", "inverse"):
        if name not in sec:
            raise FormatError(f"missing section [{name}]", None, source)
    taken = {s.name for s in system.states}
    new_inputs = _declare(_words(sec["new_inputs"]), INPUT, taken, source)
    if len(new_inputs) != system.m:
        raise FormatError(f"{len(new_inputs)} new inputs for {system.m} inputs", None, source)
    inv_table = {s.name: s for s in tuple(system.states) + tuple(new_inputs)}
    old_table = {s.name: s for s in system.states + system.inputs}

    def block(name, table, targets):
        got = {}
        for no, lhs, text_ in _assignments(sec[name], source):
            if lhs not in [t.name for t in targets]:
                raise FormatError(f"[{name}] entry for unknown {lhs!r}", no, source)
            got[lhs] = _parse(text_, table, system.functions, no, source)
        missing = [t.name for t in targets if t.name not in got]
        if missing:
            raise FormatError(f"[{name}] lacks {', '.join(missing)}", None, source)
        return tuple(got[t.name] for t in targets)

    inverse = block("inverse", inv_table, system.inputs)
    forward = block("forward", old_table, new_inputs) if "forward" in sec else None
    return InputTransform(tuple(new_inputs), inverse, forward)


def format_transform(t, system):
    lines = ["[new_inputs]", " ".join(v.name for v in t.new_inputs), ""]
    if t.forward is not None:
        lines.append("[forward]")
        lines += [f"{v.name} = {to_string(e)}" for v, e in zip(t.new_inputs, t.forward)]
        lines.append("")
    lines.append("[inverse]")
    lines += [f"{u.name} = {to_string(e)}" for u, e in zip(system.inputs, t.inverse)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# bundled fixtures


def fixture_names():
    root = resources.files("flatlab") / "fixtures"
    return sorted(p.name for p in root.iterdir() if p.name.split(".")[-1] in
                  ("sys", "cert", "tr"))


def fixture_text(name):
    path = resources.files("flatlab") / "fixtures" / name
    if not path.is_file():
        raise FormatError(f"no bundled fixture named {name!r}")
    return path.read_text()


def read_text(path_or_name):
    """Contents of a file, falling back to a bundled fixture of that name."""
    p = Path(path_or_name)
    if p.is_file():
        return p.read_text(), str(p)
    if p.name == str(path_or_name):
        try:
            return fixture_text(p.name), p.name
        except FormatError:
            pass
    raise FormatError(f"no such file or bundled fixture: {path_or_name}")


def load_system(path_or_name):
    text, src = read_text(path_or_name)
    return parse_system(text, src)


def load_certificate(path_or_name, system):
    text, src = read_text(path_or_name)
    return parse_certificate(text, system, src)


def load_transform(path_or_name, system):
    text, src = read_text(path_or_name)
    return parse_transform(text, system, src)
