"""
Dynamic-circuit intermediate representation.

A circuit is a list of moments. Each moment holds instructions on pairwise
disjoint wires, so depth and measurement-layer counts are just moment counts.
Instructions are gates, measurements (wire -> classical slot) or resets, and
may carry an affine classical condition over earlier measurement slots.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class Role(str, Enum):
    INPUT = "input"
    ANCILLA = "ancilla"
    OUTPUT = "output"


class Kind(str, Enum):
    X = "x"
    H = "h"
    S = "s"
    SDG = "sdg"
    Z = "z"
    CNOT = "cx"
    SWAP = "swap"
    RY = "ry"
    RZ = "rz"
    PHASE = "p"          # diag(1, e^{i theta})
    MCX = "mcx"          # opaque multi-controlled X, costs declared below
    HD = "hd"
    CXD = "cxd"
    CXD_INV = "cxdinv"
    XPLUS = "xplus"
    ZD = "zd"
    ZD_POW = "zdpow"
    FANOUT = "fanout"    # oracle: targets[1:] += k * targets[0]
    PARITY = "parity"    # oracle: targets[-1] += sum(targets[:-1])


# number of target wires per kind (None = variable)
ARITY = {
    Kind.X: 1, Kind.H: 1, Kind.S: 1, Kind.SDG: 1, Kind.Z: 1,
    Kind.CNOT: 2, Kind.SWAP: 2, Kind.RY: 1, Kind.RZ: 1, Kind.PHASE: 1,
    Kind.MCX: 1, Kind.HD: 1, Kind.CXD: 2, Kind.CXD_INV: 2, Kind.XPLUS: 1,
    Kind.ZD: 1, Kind.ZD_POW: 1, Kind.FANOUT: None, Kind.PARITY: None,
}
ANGLE_KINDS = {Kind.RY, Kind.RZ, Kind.PHASE}
INT_PARAM_KINDS = {Kind.XPLUS, Kind.ZD_POW, Kind.FANOUT}
QUBIT_ONLY = {Kind.X, Kind.H, Kind.S, Kind.SDG, Kind.Z, Kind.CNOT, Kind.RY, Kind.RZ, Kind.PHASE, Kind.MCX}
ORACLE_KINDS = {Kind.FANOUT, Kind.PARITY}
# gates that can grow the sparse support (everything else permutes or phases labels)
SPREADING = {Kind.H, Kind.RY, Kind.HD}

# Declared cost of the opaque multi-controlled X. The depth constant is a
# configuration value, not something derived here.
TOFFOLI_MEASUREMENT_LAYERS = 6
TOFFOLI_DEPTH = 12
TOFFOLI_KAPPA = 1.0


class CircuitError(ValueError):
    """Raised when an instruction cannot be placed or a circuit is malformed."""


@dataclass(frozen=True)
class QuantumRegister:
    id: int
    dimension: int = 2
    role: Role = Role.INPUT


@dataclass(frozen=True)
class ClassicalRegister:
    """One outcome slot; written by exactly one measurement."""
    id: int
    modulus: int = 2


@dataclass(frozen=True)
class Gate:
    kind: Kind
    targets: tuple[int, ...]
    controls: tuple[tuple[int, int], ...] = ()   # (wire, polarity)
    param: float | int | None = None

    @property
    def wires(self) -> tuple[int, ...]:
        return tuple(w for w, _ in self.controls) + self.targets

    @property
    def oracle(self) -> bool:
        return self.kind in ORACLE_KINDS


@dataclass(frozen=True)
class Measure:
    wire: int
    slot: int

    @property
    def wires(self) -> tuple[int, ...]:
        return (self.wire,)


@dataclass(frozen=True)
class Reset:
    wire: int

    @property
    def wires(self) -> tuple[int, ...]:
        return (self.wire,)


@dataclass(frozen=True)
class ClassicalCondition:
    """(sum coeff*slot + constant) mod modulus, compared with `value` (or != 0)."""
    terms: tuple[tuple[int, int], ...]
    constant: int = 0
    modulus: int = 2
    value: int | None = 1      # None means "nonzero"

    def evaluate(self, transcript: dict[int, int]) -> bool:
        total = (sum(c * transcript[s] for s, c in self.terms) + self.constant) % self.modulus
        return total != 0 if self.value is None else total == self.value % self.modulus

    @property
    def slots(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.terms)


@dataclass(frozen=True)
class Instruction:
    payload: Gate | Measure | Reset
    condition: ClassicalCondition | None = None

    @property
    def wires(self) -> tuple[int, ...]:
        return self.payload.wires

    @property
    def is_measure(self) -> bool:
        return isinstance(self.payload, Measure)


def affine(terms: Iterable[tuple[int, int]], constant: int = 0, modulus: int = 2) -> tuple[tuple[tuple[int, int], ...], int]:
    """Collect duplicate slots and reduce coefficients mod `modulus`."""
    acc: dict[int, int] = {}
    for s, c in terms:
        acc[s] = (acc.get(s, 0) + c) % modulus
    return tuple(sorted((s, c) for s, c in acc.items() if c)), constant % modulus


def when(terms, value: int | None = 1, modulus: int = 2, constant: int = 0) -> ClassicalCondition:
    t, k = affine(terms, constant, modulus)
    return ClassicalCondition(t, k, modulus, value)


@dataclass
class DynamicCircuit:
    qregs: list[QuantumRegister] = field(default_factory=list)
    cregs: list[ClassicalRegister] = field(default_factory=list)
    moments: list[list[Instruction]] = field(default_factory=list)
    construction: str = ""
    params: dict = field(default_factory=dict)
    oracle: bool = False
    # oracle builds: for each round in which the protocol measures, the moment after it
    rounds: list[int] = field(default_factory=list)
    frozen: bool = False
    # bookkeeping for earliest-legal placement
    _wire_last: dict[int, int] = field(default_factory=dict, repr=False)
    _slot_written: dict[int, int] = field(default_factory=dict, repr=False)
    # aligned layer groups (measure rounds, Toffoli rounds) go strictly after this moment
    _layer_floor: int = field(default=-1, repr=False)
    # nothing may be placed before this moment (see barrier)
    _floor: int = field(default=0, repr=False)

    # -- registers ---------------------------------------------------------
    def add_wire(self, dimension: int = 2, role: Role | str = Role.INPUT) -> int:
        if dimension < 2:
            raise CircuitError(f"wire dimension must be >= 2, got {dimension}")
        self._check_mutable()
        w = len(self.qregs)
        self.qregs.append(QuantumRegister(w, dimension, Role(role)))
        return w

    def add_wires(self, count: int, dimension: int = 2, role: Role | str = Role.INPUT) -> list[int]:
        return [self.add_wire(dimension, role) for _ in range(count)]

    def add_slot(self, modulus: int = 2) -> int:
        self._check_mutable()
        s = len(self.cregs)
        self.cregs.append(ClassicalRegister(s, modulus))
        return s

    @property
    def num_wires(self) -> int:
        return len(self.qregs)

    @property
    def dims(self) -> list[int]:
        return [r.dimension for r in self.qregs]

    def wires_with_role(self, role: Role | str) -> list[int]:
        role = Role(role)
        return [r.id for r in self.qregs if r.role == role]

    def freeze(self) -> "DynamicCircuit":
        self.frozen = True
        return self

    def _check_mutable(self):
        if self.frozen:
            raise CircuitError("circuit is frozen")

    # -- placement ---------------------------------------------------------
    def earliest(self, instr: Instruction) -> int:
        """Earliest moment where `instr` may legally go (may equal len(moments))."""
        m = self._floor
        for w in instr.wires:
            if w < 0 or w >= len(self.qregs):
                raise CircuitError(f"unknown wire {w}")
            if w in self._wire_last:
                m = max(m, self._wire_last[w] + 1)
        if instr.condition is not None:
            for s in instr.condition.slots:
                if s not in self._slot_written:
                    raise CircuitError(f"condition reads unwritten slot c{s}")
                m = max(m, self._slot_written[s] + 1)
        return m

    def _check_instruction(self, instr: Instruction):
        p = instr.payload
        if isinstance(p, Gate):
            if p.oracle and not self.oracle:
                raise CircuitError(f"oracle gate {p.kind.value} in a protocol circuit")
            problem = gate_problem(p, self.dims)
            if problem:
                raise CircuitError(problem)
        elif isinstance(p, Measure):
            if p.slot < 0 or p.slot >= len(self.cregs):
                raise CircuitError(f"unknown slot c{p.slot}")
            if p.slot in self._slot_written:
                raise CircuitError(f"slot c{p.slot} written twice")
            if self.cregs[p.slot].modulus != self.qregs[p.wire].dimension:
                raise CircuitError("measurement slot modulus differs from wire dimension")

    def place(self, instr: Instruction, moment: int) -> int:
        self._check_mutable()
        if moment < self.earliest(instr):
            raise CircuitError(f"moment {moment} is before the earliest legal moment")
        self._check_instruction(instr)
        while len(self.moments) <= moment:
            self.moments.append([])
        busy = {w for i in self.moments[moment] for w in i.wires}
        if busy & set(instr.wires):
            raise CircuitError(f"moment collision at moment {moment}")
        self.moments[moment].append(instr)
        for w in instr.wires:
            self._wire_last[w] = max(self._wire_last.get(w, -1), moment)
        if isinstance(instr.payload, Measure):
            self._slot_written[instr.payload.slot] = moment
        return moment

    def append(self, instr: Instruction | Gate | Measure | Reset, placement: str = "earliest-legal") -> int:
        if not isinstance(instr, Instruction):
            instr = Instruction(instr)
        if placement == "new-moment":
            m = max(len(self.moments), self.earliest(instr))
        elif placement == "earliest-legal":
            m = self.earliest(instr)
        else:
            raise CircuitError(f"unknown placement {placement!r}")
        return self.place(instr, m)

    def append_aligned(self, instrs: Sequence[Instruction], layer: bool = False) -> int | None:
        """Place a group of wire-disjoint instructions in one common moment.

        With `layer=True` the group also lands after every earlier layer group,
        so consecutive rounds never share a moment.
        """
        if not instrs:
            return None
        seen: set[int] = set()
        for i in instrs:
            if seen & set(i.wires):
                raise CircuitError("aligned group shares a wire")
            seen.update(i.wires)
        m = max(self.earliest(i) for i in instrs)
        if layer:
            m = max(m, self._layer_floor + 1)
        for i in instrs:
            self.place(i, m)
        if layer:
            self._layer_floor = m
        return m

    def barrier(self) -> int:
        """Later instructions go after every moment placed so far."""
        self._floor = len(self.moments)
        self._layer_floor = max(self._layer_floor, self._floor - 1)
        return self._floor

    def _rebuild_index(self):
        self._wire_last.clear()
        self._slot_written.clear()
        for m, moment in enumerate(self.moments):
            for i in moment:
                for w in i.wires:
                    self._wire_last[w] = m
                if isinstance(i.payload, Measure):
                    self._slot_written.setdefault(i.payload.slot, m)

    # -- inspection --------------------------------------------------------
    def instructions(self) -> Iterable[tuple[int, Instruction]]:
        for m, moment in enumerate(self.moments):
            for i in sorted(moment, key=lambda x: min(x.wires)):
                yield m, i

    def copy(self) -> "DynamicCircuit":
        c = DynamicCircuit(list(self.qregs), list(self.cregs), [list(m) for m in self.moments],
                           self.construction, dict(self.params), self.oracle, list(self.rounds))
        c._wire_last = dict(self._wire_last)
        c._slot_written = dict(self._slot_written)
        c._layer_floor = self._layer_floor
        c._floor = self._floor
        return c


def gate_problem(g: Gate, dims: Sequence[int]) -> str | None:
    """Return a description of what is wrong with `g`, or None."""
    n = len(dims)
    wires = g.wires
    for w in wires:
        if w < 0 or w >= n:
            return f"unknown wire {w}"
    if len(set(wires)) != len(wires):
        return f"{g.kind.value}: control and target wires overlap"
    arity = ARITY[g.kind]
    if arity is not None and len(g.targets) != arity:
        return f"{g.kind.value}: expected {arity} targets, got {len(g.targets)}"
    if g.kind == Kind.FANOUT and len(g.targets) < 1:
        return "fanout needs a control"
    if g.kind == Kind.PARITY and len(g.targets) < 1:
        return "parity needs a target"
    for w, p in g.controls:
        if p not in (0, 1):
            return f"control polarity must be 0 or 1, got {p}"
    if g.kind in QUBIT_ONLY or g.kind == Kind.SWAP:
        if g.kind != Kind.SWAP and any(dims[w] != 2 for w in g.targets):
            return f"{g.kind.value} acts on qubits only"
    if g.kind == Kind.SWAP and dims[g.targets[0]] != dims[g.targets[1]]:
        return "swap between wires of different dimension"
    if g.kind in (Kind.CXD, Kind.CXD_INV, Kind.FANOUT, Kind.PARITY):
        if len({dims[w] for w in g.targets}) > 1:
            return f"{g.kind.value}: mixed wire dimensions"
    if g.kind == Kind.MCX and not g.controls:
        return "mcx needs at least one control"
    if g.kind in ANGLE_KINDS and not isinstance(g.param, (int, float)):
        return f"{g.kind.value} needs an angle"
    if g.kind in INT_PARAM_KINDS and not isinstance(g.param, int):
        return f"{g.kind.value} needs an integer parameter"
    return None


def validate(circuit: DynamicCircuit) -> list[str]:
    """Diagnostics for every broken invariant; empty list means well formed."""
    out: list[str] = []
    dims = circuit.dims
    written: dict[int, int] = {}
    # first pass: where is every slot written
    for m, moment in enumerate(circuit.moments):
        for i in moment:
            p = i.payload
            if isinstance(p, Measure):
                if p.slot in written:
                    out.append(f"moment {m}: measure q[{p.wire}] -> c[{p.slot}]: slot written twice")
                else:
                    written[p.slot] = m
    for m, moment in enumerate(circuit.moments):
        if not moment:
            out.append(f"moment {m}: empty moment")
        used: dict[int, Instruction] = {}
        for i in moment:
            label = describe(i)
            for w in i.wires:
                if w in used:
                    out.append(f"moment {m}: {label}: moment collision on wire {w}")
                used[w] = i
            p = i.payload
            if isinstance(p, Gate):
                problem = gate_problem(p, dims)
                if problem:
                    out.append(f"moment {m}: {label}: {problem}")
                if p.oracle and not circuit.oracle:
                    out.append(f"moment {m}: {label}: oracle gate in protocol circuit")
            else:
                if p.wire < 0 or p.wire >= len(dims):
                    out.append(f"moment {m}: {label}: unknown wire {p.wire}")
                    continue
            if isinstance(p, Measure):
                if p.slot < 0 or p.slot >= len(circuit.cregs):
                    out.append(f"moment {m}: {label}: unknown slot")
                elif circuit.cregs[p.slot].modulus != dims[p.wire]:
                    out.append(f"moment {m}: {label}: slot modulus differs from wire dimension")
            if i.condition is not None:
                for s in i.condition.slots:
                    if s not in written:
                        out.append(f"moment {m}: {label}: reads unwritten slot c{s}")
                    elif written[s] >= m:
                        out.append(f"moment {m}: {label}: premature read of c{s}")
    return out


def describe(i: Instruction) -> str:
    p = i.payload
    if isinstance(p, Measure):
        s = f"measure q[{p.wire}] -> c[{p.slot}]"
    elif isinstance(p, Reset):
        s = f"reset q[{p.wire}]"
    else:
        s = f"{p.kind.value} {list(p.wires)}"
    return ("if " if i.condition else "") + s


# -- small constructors used everywhere ---------------------------------------

def g(kind: Kind, *targets: int, controls=(), param=None, cond=None) -> Instruction:
    return Instruction(Gate(kind, tuple(targets), tuple(controls), param), cond)


def cnot(c: int, t: int, cond=None) -> Instruction:
    return Instruction(Gate(Kind.CNOT, (c, t)), cond)


def measure(w: int, s: int) -> Instruction:
    return Instruction(Measure(w, s))


def reset(w: int) -> Instruction:
    return Instruction(Reset(w))


def mcx(controls: Sequence[tuple[int, int]], target: int) -> Instruction:
    """Multi-controlled X; single-control cases become a plain controlled X."""
    controls = tuple(controls)
    if not controls:
        return g(Kind.X, target)
    if len(controls) == 1:
        w, p = controls[0]
        return cnot(w, target) if p == 1 else g(Kind.X, target, controls=controls)
    return g(Kind.MCX, target, controls=controls)
