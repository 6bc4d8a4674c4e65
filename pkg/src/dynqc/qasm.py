"""
Text format for dynamic circuits (OpenQASM-3 flavoured).

Grammar, one statement per line, `#` starts a comment:

    OPENQASM 3;
    pragma construction <name>;
    pragma params <json object>;
    pragma oracle;
    pragma rounds <json list>;       # oracle builds: end of each measuring round
    qreg q[<n>] dim=<d>;
    dim q[<i>] <d>;                  # per-wire override
    role q[<a>:<b>] <input|ancilla|output>;
    creg c[<m>] mod=<d>;
    mod c[<j>] <d>;                  # per-slot override
    pragma moment;                   # opens the next moment
    [if (<lin-expr> mod <d> == <v>|!= 0)] <statement>;

Statements are `measure q[i] -> c[j]`, `reset q[i]` or a gate
`[ctrl @|negctrl @]* name[(param)] q[..], q[..]` whose operands list the
controls (one per modifier) followed by the targets. Angles are written with
`repr` so parse(serialize(c)) reproduces them bit for bit.
"""
from __future__ import annotations

import json
import re

from .ir import (ANGLE_KINDS, ClassicalCondition, ClassicalRegister, DynamicCircuit, Gate, Instruction,
                 Kind, Measure, QuantumRegister, Reset, Role)


class ParseError(ValueError):
    pass


NAMES = {k.value: k for k in Kind}


def _fmt_param(kind: Kind, value) -> str:
    if value is None:
        return ""
    if kind in ANGLE_KINDS:
        return f"({float(value)!r})"
    return f"({int(value)})"


def _fmt_condition(cond: ClassicalCondition) -> str:
    parts = [f"c{s}" if c == 1 else f"{c}*c{s}" for s, c in cond.terms]
    if cond.constant or not parts:
        parts.append(str(cond.constant))
    rhs = "!= 0" if cond.value is None else f"== {cond.value}"
    return f"if ({' + '.join(parts)} mod {cond.modulus} {rhs}) "


def _fmt_instruction(i: Instruction) -> str:
    p = i.payload
    if isinstance(p, Measure):
        body = f"measure q[{p.wire}] -> c[{p.slot}];"
    elif isinstance(p, Reset):
        body = f"reset q[{p.wire}];"
    else:
        mods = "".join("ctrl @ " if pol else "negctrl @ " for _, pol in p.controls)
        ops = ", ".join(f"q[{w}]" for w in p.wires)
        body = f"{mods}{p.kind.value}{_fmt_param(p.kind, p.param)} {ops};"
    return (_fmt_condition(i.condition) if i.condition else "") + body


def _runs(values):
    """Group consecutive equal values into (start, stop, value)."""
    out = []
    for i, v in enumerate(values):
        if out and out[-1][2] == v:
            out[-1][1] = i
        else:
            out.append([i, i, v])
    return out


def serialize(circuit: DynamicCircuit) -> str:
    lines = ["OPENQASM 3;"]
    if circuit.construction:
        lines.append(f"pragma construction {circuit.construction};")
    if circuit.params:
        lines.append(f"pragma params {json.dumps(circuit.params, sort_keys=True)};")
    if circuit.oracle:
        lines.append("pragma oracle;")
    if circuit.rounds:
        lines.append(f"pragma rounds {json.dumps(circuit.rounds)};")
    dims = circuit.dims
    base = max(set(dims), key=dims.count) if dims else 2
    lines.append(f"qreg q[{len(dims)}] dim={base};")
    lines += [f"dim q[{w}] {d};" for w, d in enumerate(dims) if d != base]
    for a, b, role in _runs([r.role.value for r in circuit.qregs]):
        lines.append(f"role q[{a}:{b}] {role};")
    mods = [r.modulus for r in circuit.cregs]
    cbase = max(set(mods), key=mods.count) if mods else 2
    lines.append(f"creg c[{len(mods)}] mod={cbase};")
    lines += [f"mod c[{s}] {d};" for s, d in enumerate(mods) if d != cbase]
    for moment in circuit.moments:
        lines.append("pragma moment;")
        for i in sorted(moment, key=lambda x: min(x.wires)):
            lines.append(_fmt_instruction(i))
    return "\n".join(lines) + "\n"


_GATE = re.compile(r"^((?:(?:neg)?ctrl\s*@\s*)*)([a-z]+)(?:\(([^)]*)\))?\s+(.+)$")
_COND = re.compile(r"^if\s*\((.+?)\s+mod\s+(\d+)\s*(==\s*(-?\d+)|!=\s*0)\s*\)\s*(.+)$")
_QREF = re.compile(r"^q\[(\d+)\]$")


def _qref(tok: str, lineno: int) -> int:
    m = _QREF.match(tok.strip())
    if not m:
        raise ParseError(f"line {lineno}: bad qubit reference {tok!r}")
    return int(m.group(1))


def _parse_condition(expr: str, modulus: int, value, lineno: int) -> ClassicalCondition:
    terms: dict[int, int] = {}
    const = 0
    for part in expr.split("+"):
        part = part.strip()
        m = re.match(r"^(?:(-?\d+)\s*\*\s*)?c(\d+)$", part)
        if m:
            coeff = int(m.group(1)) if m.group(1) else 1
            terms[int(m.group(2))] = terms.get(int(m.group(2)), 0) + coeff
        elif re.match(r"^-?\d+$", part):
            const += int(part)
        else:
            raise ParseError(f"line {lineno}: bad condition term {part!r}")
    return ClassicalCondition(tuple(sorted(terms.items())), const, modulus, value)


def _parse_statement(text: str, lineno: int):
    if text.startswith("measure"):
        m = re.match(r"^measure\s+(q\[\d+\])\s*->\s*c\[(\d+)\]$", text)
        if not m:
            raise ParseError(f"line {lineno}: bad measure")
        return Measure(_qref(m.group(1), lineno), int(m.group(2)))
    if text.startswith("reset"):
        return Reset(_qref(text[5:], lineno))
    m = _GATE.match(text)
    if not m:
        raise ParseError(f"line {lineno}: cannot parse {text!r}")
    mods = re.findall(r"(neg)?ctrl", m.group(1))
    name = m.group(2)
    if name not in NAMES:
        raise ParseError(f"line {lineno}: unknown gate {name!r}")
    kind = NAMES[name]
    param = None
    if m.group(3) is not None:
        param = float(m.group(3)) if kind in ANGLE_KINDS else int(m.group(3))
    wires = [_qref(t, lineno) for t in m.group(4).split(",")]
    nc = len(mods)
    controls = tuple((w, 0 if neg else 1) for w, neg in zip(wires[:nc], mods))
    return Gate(kind, tuple(wires[nc:]), controls, param)


def parse(text: str) -> DynamicCircuit:
    circ = DynamicCircuit()
    dims: list[int] = []
    roles: list[str] = []
    mods: list[int] = []
    moments: list[list[Instruction]] = []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.endswith(";"):
            raise ParseError(f"line {lineno}: missing ';'")
        line = line[:-1].strip()
        if not seen_header:
            if line != "OPENQASM 3":
                raise ParseError("first statement must be 'OPENQASM 3;'")
            seen_header = True
            continue
        if line.startswith("pragma "):
            rest = line[7:].strip()
            if rest == "moment":
                moments.append([])
            elif rest == "oracle":
                circ.oracle = True
            elif rest.startswith("construction "):
                circ.construction = rest[13:].strip()
            elif rest.startswith("params "):
                circ.params = json.loads(rest[7:])
            elif rest.startswith("rounds "):
                circ.rounds = json.loads(rest[7:])
                if not isinstance(circ.rounds, list) or not all(isinstance(m, int) and m >= 0 for m in circ.rounds):
                    raise ParseError(f"line {lineno}: rounds must be moment indices")
            else:
                raise ParseError(f"line {lineno}: unknown pragma")
            continue
        m = re.match(r"^qreg\s+q\[(\d+)\]\s+dim=(\d+)$", line)
        if m:
            dims = [int(m.group(2))] * int(m.group(1))
            roles = ["input"] * len(dims)
            continue
        m = re.match(r"^dim\s+q\[(\d+)\]\s+(\d+)$", line)
        if m:
            dims[int(m.group(1))] = int(m.group(2))
            continue
        m = re.match(r"^role\s+q\[(\d+):(\d+)\]\s+(\w+)$", line)
        if m:
            for w in range(int(m.group(1)), int(m.group(2)) + 1):
                roles[w] = m.group(3)
            continue
        m = re.match(r"^creg\s+c\[(\d+)\]\s+mod=(\d+)$", line)
        if m:
            mods = [int(m.group(2))] * int(m.group(1))
            continue
        m = re.match(r"^mod\s+c\[(\d+)\]\s+(\d+)$", line)
        if m:
            mods[int(m.group(1))] = int(m.group(2))
            continue
        if not moments:
            raise ParseError(f"line {lineno}: statement before the first moment")
        cond = None
        m = _COND.match(line)
        if m:
            value = int(m.group(4)) if m.group(4) is not None else None
            cond = _parse_condition(m.group(1), int(m.group(2)), value, lineno)
            line = m.group(5).strip()
        moments[-1].append(Instruction(_parse_statement(line, lineno), cond))
    if not seen_header:
        raise ParseError("empty input")
    try:
        circ.qregs = [QuantumRegister(w, d, Role(r)) for w, (d, r) in enumerate(zip(dims, roles))]
    except ValueError as e:
        raise ParseError(str(e)) from None
    circ.cregs = [ClassicalRegister(s, d) for s, d in enumerate(mods)]
    circ.moments = moments
    circ._rebuild_index()
    return circ.freeze()


def moment_signature(circuit: DynamicCircuit):
    """Order-independent view of the moment list, for round-trip comparisons."""
    return [sorted(map(_fmt_instruction, m)) for m in circuit.moments]
