"""
Constant-depth measurement-and-feedback gadgets.

Gadgets are emitted through a `Builder`, which groups measurements into
rounds. Inside a round every gadget emits its unitary part, registers its
measurements, and records its feedback as a pending Pauli frame: an X (shift)
and Z (phase) exponent per wire, each an affine function of outcome slots.
Closing the round puts all of its measurements in one moment, resets the
measured wires and flushes the frames as classically conditioned gates.

Clifford gates emitted while a frame is pending are conjugated through it, so
several gadgets can share one measurement layer when one consumes another's
output (a parity whose target is then copied, for instance).

In oracle mode every gadget becomes a single measurement-free oracle gate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .ir import CircuitError, DynamicCircuit, Gate, Instruction, Kind, Role, cnot, g, measure, reset, when


class PlanError(ValueError):
    """No block plan satisfies the ancilla budget."""


class FrameError(CircuitError):
    """A non-Clifford gate met a wire with a pending correction."""


# -- classical expressions --------------------------------------------------

class Affine:
    """sum coeff*slot + const (mod modulus)."""

    __slots__ = ("terms", "const", "mod")

    def __init__(self, mod: int, terms: dict[int, int] | None = None, const: int = 0):
        self.mod = mod
        self.terms = {s: c % mod for s, c in (terms or {}).items() if c % mod}
        self.const = const % mod

    @classmethod
    def slot(cls, s: int, mod: int) -> "Affine":
        return cls(mod, {s: 1})

    def __add__(self, other: "Affine | None") -> "Affine":
        if other is None:
            return self
        t = dict(self.terms)
        for s, c in other.terms.items():
            t[s] = t.get(s, 0) + c
        return Affine(self.mod, t, self.const + other.const)

    __radd__ = __add__

    def scaled(self, k: int) -> "Affine":
        return Affine(self.mod, {s: c * k for s, c in self.terms.items()}, self.const * k)

    def is_zero(self) -> bool:
        return not self.terms and not self.const


def zero(mod: int = 2) -> Affine:
    return Affine(mod)


# -- builder ---------------------------------------------------------------

@dataclass
class Builder:
    circuit: DynamicCircuit
    oracle: bool = False
    xf: dict[int, Affine] = field(default_factory=dict)
    zf: dict[int, Affine] = field(default_factory=dict)
    pending: list[Instruction] = field(default_factory=list)
    layers: int = 0
    ancillas: list[int] = field(default_factory=list)
    _oracle_in_round: bool = False

    @classmethod
    def new(cls, mode: str = "protocol", construction: str = "", **params) -> "Builder":
        if mode not in ("protocol", "oracle"):
            raise ValueError(f"unknown mode {mode!r}")
        circ = DynamicCircuit(construction=construction, params=params, oracle=mode == "oracle")
        return cls(circ, oracle=mode == "oracle")

    # wires
    def wire(self, role: Role = Role.ANCILLA, d: int = 2) -> int:
        w = self.circuit.add_wire(d, role)
        if Role(role) == Role.ANCILLA:
            self.ancillas.append(w)
        return w

    def wires(self, count: int, role: Role = Role.ANCILLA, d: int = 2) -> list[int]:
        return [self.wire(role, d) for _ in range(count)]

    def dim(self, w: int) -> int:
        return self.circuit.qregs[w].dimension

    # frames
    def add_x(self, w: int, e: Affine):
        if not e.is_zero():
            self.xf[w] = e + self.xf.get(w)

    def add_z(self, w: int, e: Affine):
        if not e.is_zero():
            self.zf[w] = e + self.zf.get(w)

    def _framed(self, w: int) -> bool:
        return w in self.xf or w in self.zf

    def _propagate(self, gate: Gate):
        framed = [w for w in gate.wires if self._framed(w)]
        if not framed:
            return
        k, t = gate.kind, gate.targets
        if any(self.dim(w) != 2 for w in framed):
            raise FrameError("qudit frames cannot be propagated; close the round first")
        for w, _ in gate.controls:
            if w in self.xf:
                raise FrameError(f"pending X on control wire {w}")
        if k in (Kind.X, Kind.Z) and not gate.controls:
            return
        if k == Kind.H and not gate.controls:
            w = t[0]
            xs, zs = self.xf.pop(w, None), self.zf.pop(w, None)
            if zs is not None:
                self.xf[w] = zs
            if xs is not None:
                self.zf[w] = xs
            return
        if k == Kind.CNOT and not gate.controls:
            c, w = t
            if c in self.xf:
                self.add_x(w, self.xf[c])
            if w in self.zf:
                self.add_z(c, self.zf[w])
            return
        if k == Kind.SWAP and not gate.controls:
            a, b = t
            for f in (self.xf, self.zf):
                va, vb = f.pop(a, None), f.pop(b, None)
                if va is not None:
                    f[b] = va
                if vb is not None:
                    f[a] = vb
            return
        if k in (Kind.Z, Kind.S, Kind.SDG, Kind.RZ, Kind.PHASE):
            if t[0] in self.xf:
                raise FrameError(f"pending X on wire {t[0]} under a diagonal gate")
            return
        if k in (Kind.X, Kind.MCX, Kind.CNOT):
            if t[-1] in self.zf or (k == Kind.CNOT and t[0] in self.xf):
                raise FrameError(f"pending frame under controlled {k.value}")
            return
        if any(w in t for w in framed):
            raise FrameError(f"pending frame on a target of {k.value}")

    def op(self, instr: Instruction) -> int:
        if not self.oracle and isinstance(instr.payload, Gate) and instr.condition is None:
            self._propagate(instr.payload)
        return self.circuit.append(instr)

    def oracle_op(self, instr: Instruction, measures: bool):
        """Place an oracle gate; `measures` says whether the protocol gadget it replaces
        spends this round's measurement layer."""
        self._oracle_in_round |= measures
        self.circuit.append(instr)

    def ops(self, instrs):
        for i in instrs:
            self.op(i)

    def measure(self, w: int) -> Affine:
        """Queue a measurement of `w` in the current round; returns the frame-corrected outcome."""
        d = self.dim(w)
        s = self.circuit.add_slot(d)
        self.pending.append(measure(w, s))
        e = Affine.slot(s, d) + self.xf.pop(w, None)
        self.zf.pop(w, None)
        return e

    def close(self) -> int:
        """Finish the round: aligned measurements, resets, frame flush. Returns layers added."""
        added = 0
        mark = self.oracle and (self.pending or self._oracle_in_round)
        if self.pending:
            self.circuit.append_aligned(self.pending, layer=True)
            for m in self.pending:
                self.circuit.append(reset(m.payload.wire))
            self.pending = []
            self.layers += 1
            added = 1
        for w in sorted(set(self.xf) | set(self.zf)):
            for e, kind in ((self.xf.get(w), Kind.X), (self.zf.get(w), Kind.Z)):
                if e is not None:
                    self._flush(w, e, kind)
        self.xf.clear()
        self.zf.clear()
        if mark:
            # the oracle gates of one round stand for a single shared measurement layer; a barrier
            # keeps each round in its own run of moments so the audit can charge it once
            self._oracle_in_round = False
            self.circuit.rounds.append(self.circuit.barrier())
        return added

    def _flush(self, w: int, e: Affine, kind: Kind):
        d = self.dim(w)
        terms = tuple(sorted(e.terms.items()))
        if d == 2:
            if not terms:
                if e.const:
                    self.circuit.append(g(kind, w))
                return
            self.circuit.append(g(kind, w, cond=when(terms, 1, 2, e.const)))
            return
        qkind = Kind.XPLUS if kind == Kind.X else Kind.ZD_POW
        if not terms:
            if e.const:
                self.circuit.append(g(qkind, w, param=e.const))
            return
        for v in range(1, d):
            self.circuit.append(g(qkind, w, param=v, cond=when(terms, v, d, e.const)))

    def toffoli_round(self, instrs: list[Instruction]):
        """Place a group of (multi-)controlled X gates side by side."""
        for i in instrs:
            if any(self._framed(w) for w in i.wires):
                raise FrameError("close the round before a Toffoli layer")
        if not instrs:
            return
        if any(i.payload.kind == Kind.MCX for i in instrs):
            self.circuit.append_aligned(instrs, layer=True)
            self.layers += 6
        else:
            for i in instrs:
                self.circuit.append(i)


# -- block plans -----------------------------------------------------------

@dataclass(frozen=True)
class BlockPlan:
    """Block size and count for the GHZ (k, m+1 blocks) or fan-out (p, m blocks) layouts."""
    size: int
    count: int
    ancilla: int


def _chunks(seq, size):
    return [list(seq[i:i + size]) for i in range(0, len(seq), size)]


def ghz_plan(n: int, c: int, k: int | None = None) -> BlockPlan:
    """n wires in m+1 blocks of k linked by m ancillas; smallest k with m <= n/c."""
    if n < 1 or c < 1:
        raise PlanError("need n >= 1 and c >= 1")
    if n == 1:
        return BlockPlan(1, 1, 0)
    if k is None:
        m_max = n // c
        if m_max == 0:
            return BlockPlan(n, 1, 0)
        k = -(-n // (m_max + 1))
    if k < 1:
        raise PlanError("block size must be positive")
    m = -(-n // k) - 1
    if m * c > n:
        raise PlanError(f"block size {k} needs {m} ancillas, more than n/c = {n / c:g}")
    return BlockPlan(k, m + 1, m)


def fanout_plan(n: int, c: int, p: int | None = None) -> BlockPlan:
    """n targets in m blocks of p, 2m-1 ancillas; m <= (n+c)/(2c)."""
    if n < 1 or c < 1:
        raise PlanError("need n >= 1 and c >= 1")
    if p is None:
        m_max = (n + c) // (2 * c)
        if m_max == 0:
            return BlockPlan(n, 0, 0)
        p = -(-n // m_max)
    if p < 1:
        raise PlanError("block size must be positive")
    m = -(-n // p)
    if (2 * m - 1) * c > n:
        raise PlanError(f"block size {p} needs {2 * m - 1} ancillas, more than n/c = {n / c:g}")
    return BlockPlan(p, m, 2 * m - 1)


def fanout_plan_qudit(n: int, c: int, p: int | None = None) -> BlockPlan:
    """Qudit layout: m blocks, 2m ancillas; m <= n/(2c)."""
    if n < 1 or c < 1:
        raise PlanError("need n >= 1 and c >= 1")
    if p is None:
        m_max = n // (2 * c)
        if m_max == 0:
            return BlockPlan(n, 0, 0)
        p = -(-n // m_max)
    m = -(-n // p)
    if 2 * m * c > n:
        raise PlanError(f"block size {p} needs {2 * m} ancillas, more than n/c = {n / c:g}")
    return BlockPlan(p, m, 2 * m)


# -- in-block helpers ----------------------------------------------------------

def _copy_tree(b: Builder, wires: list[int]):
    """Copy wires[0] onto the |0> wires[1:] by a doubling CNOT tree."""
    d = b.dim(wires[0])
    have, rest = [wires[0]], list(wires[1:])
    while rest:
        new = []
        for s in have:
            if not rest:
                break
            t = rest.pop(0)
            b.op(cnot(s, t) if d == 2 else g(Kind.CXD, s, t))
            new.append(t)
        have += new


def _add_into(b: Builder, src: int, targets: list[int], k: int = 1):
    """targets += k*src one CNOT at a time (depth len(targets), a constant per block)."""
    d = b.dim(src)
    for t in targets:
        if d == 2:
            b.op(cnot(src, t))
        else:
            b.op(g(Kind.CXD if k % d == 1 else Kind.CXD_INV, src, t))


# -- qubit gadgets -------------------------------------------------------------

def ghz(b: Builder, root: int, targets: list[int], c: int = 2, k: int | None = None) -> BlockPlan:
    """Extend root's value onto |0> targets: a|0>+b|1> -> a|0..0>+b|1..1>."""
    n = 1 + len(targets)
    plan = ghz_plan(n, c, k)
    if not targets:
        return plan
    d = b.dim(root)
    if b.oracle:
        b.oracle_op(g(Kind.FANOUT, root, *targets, param=1), plan.ancilla > 0)
        return plan
    if d != 2:
        return ghz_qudit(b, root, targets, c, k)
    blocks = _chunks([root] + list(targets), plan.size)
    for blk in blocks[1:]:
        b.op(g(Kind.H, blk[0]))
    for blk in blocks:
        _copy_tree(b, blk)
    prefix = zero(2)
    outcomes = []
    for j in range(1, len(blocks)):
        a = b.wire()
        b.op(cnot(blocks[j - 1][-1], a))
        b.op(cnot(blocks[j][0], a))
        outcomes.append(b.measure(a))
    for j, e in enumerate(outcomes, 1):
        prefix = prefix + e
        for w in blocks[j]:
            b.add_x(w, prefix)
    return plan


def recover(b: Builder, root: int, copies: list[int]):
    """Undo a GHZ extension: measure the copies in the Fourier basis, phase-fix the root."""
    if not copies:
        return
    d = b.dim(root)
    if b.oracle:
        b.oracle_op(g(Kind.FANOUT, root, *copies, param=d - 1), True)
        return
    total = zero(d)
    for w in copies:
        b.op(g(Kind.H if d == 2 else Kind.HD, w))
        total = total + b.measure(w)
    b.add_z(root, total.scaled(-1))


def fanout(b: Builder, control: int, targets: list[int], c: int = 2, p: int | None = None) -> BlockPlan:
    """targets ^= control for arbitrary target values, one measurement layer."""
    n = len(targets)
    if n == 0:
        return BlockPlan(0, 0, 0)
    d = b.dim(control)
    if d != 2:
        return fanout_qudit(b, control, targets, c, p)
    plan = fanout_plan(n, c, p)
    if b.oracle:
        b.oracle_op(g(Kind.FANOUT, control, *targets, param=1), plan.count > 0)
        return plan
    if plan.count == 0:
        _add_into(b, control, list(targets))
        return plan
    blocks = _chunks(list(targets), plan.size)
    m = len(blocks)
    hubs, links = [], []
    for j in range(m):
        hubs.append(b.wire())
        if j < m - 1:
            links.append(b.wire())
    for j, blk in enumerate(blocks):
        b.op(g(Kind.H, hubs[j]))
        _add_into(b, hubs[j], blk + ([links[j]] if j < m - 1 else []))
    # chain the hubs: hub_1 ^= control, hub_{j+1} ^= copy of hub_j
    b.op(cnot(control, hubs[0]))
    for j in range(m - 1):
        b.op(cnot(links[j], hubs[j + 1]))
    prefix = zero(2)
    for j, blk in enumerate(blocks):
        prefix = prefix + b.measure(hubs[j])
        for w in blk:
            b.add_x(w, prefix)
    phase = zero(2)
    for w in links:
        b.op(g(Kind.H, w))
        phase = phase + b.measure(w)
    b.add_z(control, phase)
    return plan


def parity(b: Builder, sources: list[int], target: int, c: int = 2, p: int | None = None) -> BlockPlan:
    """target ^= xor(sources): a fan-out conjugated by Hadamards."""
    if not sources:
        return BlockPlan(0, 0, 0)
    if b.oracle:
        plan = fanout_plan(len(sources), c, p)
        b.oracle_op(g(Kind.PARITY, *sources, target), plan.count > 0)
        return plan
    if b.dim(target) != 2:
        raise CircuitError("parity gadget is defined for qubits")
    for w in [target, *sources]:
        b.op(g(Kind.H, w))
    plan = fanout(b, target, list(sources), c, p)
    for w in [target, *sources]:
        b.op(g(Kind.H, w))
    return plan


# -- qudit gadgets -------------------------------------------------------------

def ghz_qudit(b: Builder, root: int, targets: list[int], c: int = 2, k: int | None = None) -> BlockPlan:
    """GHZ extension with subtraction-mod-d links and X_{+b} feedback."""
    n = 1 + len(targets)
    plan = ghz_plan(n, c, k)
    if not targets:
        return plan
    d = b.dim(root)
    if b.oracle:
        b.oracle_op(g(Kind.FANOUT, root, *targets, param=1), plan.ancilla > 0)
        return plan
    blocks = _chunks([root] + list(targets), plan.size)
    for blk in blocks[1:]:
        b.op(g(Kind.HD, blk[0]))
    for blk in blocks:
        _copy_tree(b, blk)
    outcomes = []
    for j in range(1, len(blocks)):
        a = b.wire(d=d)
        b.op(g(Kind.CXD, blocks[j - 1][-1], a))
        b.op(g(Kind.CXD_INV, blocks[j][0], a))
        outcomes.append(b.measure(a))
    prefix = zero(d)
    for j, e in enumerate(outcomes, 1):
        prefix = prefix + e
        for w in blocks[j]:
            b.add_x(w, prefix)
    return plan


def fanout_qudit(b: Builder, control: int, targets: list[int], c: int = 2, p: int | None = None) -> BlockPlan:
    """targets += control (mod d) with 2m ancillas: m hubs and m links."""
    n = len(targets)
    d = b.dim(control)
    plan = fanout_plan_qudit(n, c, p)
    if b.oracle:
        b.oracle_op(g(Kind.FANOUT, control, *targets, param=1), plan.count > 0)
        return plan
    if plan.count == 0:
        _add_into(b, control, list(targets))
        return plan
    blocks = _chunks(list(targets), plan.size)
    m = len(blocks)
    hubs, links = [], []
    for _ in range(m):
        links.append(b.wire(d=d))
        hubs.append(b.wire(d=d))
    for j, blk in enumerate(blocks):
        b.op(g(Kind.HD, hubs[j]))
        _add_into(b, hubs[j], blk)
    # link_1 = control - hub_1, link_j = hub_{j-1} - hub_j
    b.op(g(Kind.CXD, control, links[0]))
    for j in range(1, m):
        b.op(g(Kind.CXD, hubs[j - 1], links[j]))
    for j in range(m):
        b.op(g(Kind.CXD_INV, hubs[j], links[j]))
    prefix = zero(d)
    for j, blk in enumerate(blocks):
        prefix = prefix + b.measure(links[j])
        for w in blk:
            b.add_x(w, prefix)
    phase = zero(d)
    for w in hubs:
        b.op(g(Kind.HD, w))
        phase = phase + b.measure(w)
    b.add_z(control, phase.scaled(-1))
    return plan


# -- fused rotations -------------------------------------------------------------

def fused_rz_many(b: Builder, jobs, c: int = 1, kind: Kind = Kind.RZ):
    """For each (target, controls, angles): target gets kind(sum x_j angle_j).

    The target is fanned out onto fresh copies, each copy takes one controlled
    rotation, and a second fan-out clears the copies. Two measurement rounds
    shared by all jobs.
    """
    copies = []
    for t, ctrls, angles in jobs:
        cp = b.wires(len(ctrls))
        copies.append(cp)
        fanout(b, t, cp, c)
    b.close()
    for (t, ctrls, angles), cp in zip(jobs, copies):
        for x, w, th in zip(ctrls, cp, angles):
            b.op(g(kind, w, controls=((x, 1),), param=float(th)))
    for (t, _, _), cp in zip(jobs, copies):
        fanout(b, t, cp, c)
    b.close()


def fused_ry_many(b: Builder, jobs, c: int = 1):
    """Ry(sum x_j angle_j) on each job's target; Ry = S H Rz H Sdg."""
    for t, _, _ in jobs:
        b.op(g(Kind.SDG, t))
        b.op(g(Kind.H, t))
    fused_rz_many(b, jobs, c, Kind.RZ)
    for t, _, _ in jobs:
        b.op(g(Kind.H, t))
        b.op(g(Kind.S, t))


def fused_z_many(b: Builder, jobs, c: int = 1):
    """Phase gate diag(1, e^{i sum x_j angle_j}) on each job's target."""
    fused_rz_many(b, jobs, c, Kind.PHASE)


def cc_fused_ry_many(b: Builder, jobs, c: int = 1):
    """For each (target, inputs, angles, ctrl): Ry(ctrl * sum x_j angle_j) on target.

    Four rounds shared by all jobs: fan the target into the inputs, copy the
    control, apply controlled Rz(-angle/2) on the inputs and a controlled
    Rz(sum/2) on the target, drop the control copies, fan the target out again.
    """
    for t, _, _, _ in jobs:
        b.op(g(Kind.SDG, t))
        b.op(g(Kind.H, t))
    for t, inputs, _, _ in jobs:
        fanout(b, t, list(inputs), c)
    b.close()
    ccopies = []
    for t, inputs, _, ctrl in jobs:
        cp = b.wires(len(inputs))
        ccopies.append(cp)
        ghz(b, ctrl, cp, c)
    b.close()
    for (t, inputs, angles, ctrl), cp in zip(jobs, ccopies):
        for x, w, th in zip(inputs, cp, angles):
            b.op(g(Kind.RZ, x, controls=((w, 1),), param=-float(th) / 2))
        b.op(g(Kind.RZ, t, controls=((ctrl, 1),), param=float(sum(angles)) / 2))
    for (t, inputs, angles, ctrl), cp in zip(jobs, ccopies):
        recover(b, ctrl, cp)
    b.close()
    for t, inputs, _, _ in jobs:
        fanout(b, t, list(inputs), c)
    b.close()
    for t, _, _, _ in jobs:
        b.op(g(Kind.H, t))
        b.op(g(Kind.S, t))


# -- standalone builds ------------------------------------------------------------

@dataclass
class GadgetBuild:
    circuit: DynamicCircuit
    inputs: list[int]
    outputs: list[int]
    ancilla: list[int]
    declared: dict
    extra: dict = field(default_factory=dict)


def finish(b: Builder, inputs, outputs, **extra) -> GadgetBuild:
    if b.pending or b.xf or b.zf or b._oracle_in_round:
        b.close()
    declared = {"measurement_layers": b.layers, "ancilla": len(b.ancillas)}
    return GadgetBuild(b.circuit.freeze(), list(inputs), list(outputs), list(b.ancillas), declared, extra)


def build_ghz_extend(n: int, c: int = 2, mode: str = "protocol", k: int | None = None) -> GadgetBuild:
    """Wire 0 holds the input qubit; wires 1..n-1 start in |0>."""
    if n < 1 or c < 1:
        raise PlanError("need n >= 1 and c >= 1")
    b = Builder.new(mode, "ghz", n=n, c=c, k=k)
    data = [b.wire(Role.INPUT)] + b.wires(n - 1, Role.OUTPUT)
    plan = ghz(b, data[0], data[1:], c, k)
    b.close()
    return finish(b, data[:1], data, plan=plan)


def build_recover(n: int, mode: str = "protocol") -> GadgetBuild:
    """Wires 0..n-1 hold a|0..0>+b|1..1>; wire 0 keeps a|0>+b|1>."""
    if n < 1:
        raise PlanError("need n >= 1")
    b = Builder.new(mode, "recover", n=n)
    data = b.wires(n, Role.INPUT)
    recover(b, data[0], data[1:])
    b.close()
    return finish(b, data, data[:1])


def build_fanout(n: int, c: int = 2, mode: str = "protocol", p: int | None = None) -> GadgetBuild:
    """Wire 0 is the control, wires 1..n the targets."""
    if n < 1 or c < 1:
        raise PlanError("need n >= 1 and c >= 1")
    b = Builder.new(mode, "fanout", n=n, c=c, p=p)
    data = b.wires(n + 1, Role.INPUT)
    plan = fanout(b, data[0], data[1:], c, p)
    b.close()
    return finish(b, data, data, plan=plan)


def build_parity(n: int, c: int = 2, mode: str = "protocol", p: int | None = None) -> GadgetBuild:
    """Wires 0..n-1 are the sources, wire n the target."""
    if n < 1 or c < 1:
        raise PlanError("need n >= 1 and c >= 1")
    b = Builder.new(mode, "parity", n=n, c=c, p=p)
    data = b.wires(n + 1, Role.INPUT)
    plan = parity(b, data[:-1], data[-1], c, p)
    b.close()
    return finish(b, data, data, plan=plan)


def _check_d(d: int):
    if d < 2:
        raise PlanError("qudit dimension must be >= 2")


def build_ghz_extend_qudit(n: int, c: int = 2, d: int = 3, mode: str = "protocol", k: int | None = None,
                           generic: bool = False) -> GadgetBuild:
    _check_d(d)
    if d == 2 and not generic:
        return build_ghz_extend(n, c, mode, k)
    if n < 1 or c < 1:
        raise PlanError("need n >= 1 and c >= 1")
    b = Builder.new(mode, "ghz_qudit", n=n, c=c, d=d, k=k)
    data = [b.wire(Role.INPUT, d)] + b.wires(n - 1, Role.OUTPUT, d)
    plan = ghz_qudit(b, data[0], data[1:], c, k)
    b.close()
    return finish(b, data[:1], data, plan=plan)


def build_recover_qudit(n: int, d: int = 3, mode: str = "protocol", generic: bool = False) -> GadgetBuild:
    _check_d(d)
    if d == 2 and not generic:
        return build_recover(n, mode)
    if n < 1:
        raise PlanError("need n >= 1")
    b = Builder.new(mode, "recover_qudit", n=n, d=d)
    data = b.wires(n, Role.INPUT, d)
    recover(b, data[0], data[1:])
    b.close()
    return finish(b, data, data[:1])


def build_fanout_qudit(n: int, c: int = 2, d: int = 3, mode: str = "protocol", p: int | None = None,
                       generic: bool = False) -> GadgetBuild:
    _check_d(d)
    if d == 2 and not generic:
        return build_fanout(n, c, mode, p)
    if n < 1 or c < 1:
        raise PlanError("need n >= 1 and c >= 1")
    b = Builder.new(mode, "fanout_qudit", n=n, c=c, d=d, p=p)
    data = b.wires(n + 1, Role.INPUT, d)
    plan = fanout_qudit(b, data[0], data[1:], c, p)
    b.close()
    return finish(b, data, data, plan=plan)


def build_fused_ry(angles, c: int = 1, mode: str = "protocol") -> GadgetBuild:
    """Wire 0 is the shared target, wires 1..n the controls."""
    angles = [float(a) for a in angles]
    if not angles:
        raise PlanError("need at least one control")
    b = Builder.new(mode, "fused_ry", n=len(angles), c=c, angles=angles)
    data = b.wires(len(angles) + 1, Role.INPUT)
    fused_ry_many(b, [(data[0], data[1:], angles)], c)
    return finish(b, data, data)


def build_fused_z(angles, c: int = 1, mode: str = "protocol") -> GadgetBuild:
    angles = [float(a) for a in angles]
    if not angles:
        raise PlanError("need at least one control")
    b = Builder.new(mode, "fused_z", n=len(angles), c=c, angles=angles)
    data = b.wires(len(angles) + 1, Role.INPUT)
    fused_z_many(b, [(data[0], data[1:], angles)], c)
    return finish(b, data, data)


def build_cc_fused_ry(angles, c: int = 1, mode: str = "protocol") -> GadgetBuild:
    """Wire 0 target, wires 1..n inputs, wire n+1 the extra control."""
    angles = [float(a) for a in angles]
    if not angles:
        raise PlanError("need at least one input")
    b = Builder.new(mode, "cc_fused_ry", n=len(angles), c=c, angles=angles)
    data = b.wires(len(angles) + 2, Role.INPUT)
    cc_fused_ry_many(b, [(data[0], data[1:-1], angles, data[-1])], c)
    return finish(b, data, data)
