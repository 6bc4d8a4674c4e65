"""
Sparse feedback-aware simulator.

The state is a dict from packed mixed-radix labels to complex amplitudes.
Wire i contributes digit (label // stride[i]) % d[i]; for all-qubit circuits
this is just bit i of the label. Measurements are eager: the posterior is
renormalised and pruned right away, which keeps the support small when each
fan-out block is measured before the next one is opened.
"""
from __future__ import annotations

import cmath
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .ir import SPREADING, DynamicCircuit, Gate, Instruction, Kind, Measure, Reset

EPS_PRUNE = 1e-12
NORM_TOL = 1e-10
MAX_BRANCHES = 4096


class SimulationError(RuntimeError):
    pass


class BranchExplosion(SimulationError):
    pass


class SparseState:
    """Amplitude map over a fixed wire-dimension table."""

    __slots__ = ("dims", "amps", "strides", "qubits")

    def __init__(self, dims: Sequence[int], amps: dict[int, complex] | None = None):
        self.dims = list(dims)
        self.strides = []
        s = 1
        for d in self.dims:
            self.strides.append(s)
            s *= d
        self.qubits = all(d == 2 for d in self.dims)
        self.amps = dict(amps) if amps is not None else {0: 1.0 + 0j}

    # -- construction ------------------------------------------------------
    @classmethod
    def zero(cls, dims: Sequence[int]) -> "SparseState":
        return cls(dims)

    @classmethod
    def basis(cls, dims: Sequence[int], digits: dict[int, int]) -> "SparseState":
        st = cls(dims, {})
        st.amps = {st.pack(digits): 1.0 + 0j}
        return st

    @classmethod
    def embed(cls, dims: Sequence[int], vec, wires: Sequence[int]) -> "SparseState":
        """Place a dense vector on `wires` (first wire most significant); other wires 0."""
        st = cls(dims, {})
        vec = np.asarray(vec, dtype=complex).ravel()
        sub = [st.dims[w] for w in wires]
        if vec.size != math.prod(sub):
            raise SimulationError(f"vector length {vec.size} does not match wires {list(wires)}")
        for idx in np.flatnonzero(np.abs(vec) > EPS_PRUNE):
            digits = np.unravel_index(int(idx), sub) if sub else ()
            lbl = sum(int(dg) * st.strides[w] for dg, w in zip(digits, wires))
            st.amps[lbl] = complex(vec[idx])
        return st

    def copy(self) -> "SparseState":
        st = SparseState.__new__(SparseState)
        st.dims, st.strides, st.qubits = self.dims, self.strides, self.qubits
        st.amps = dict(self.amps)
        return st

    # -- labels ------------------------------------------------------------
    def pack(self, digits: dict[int, int]) -> int:
        return sum(v * self.strides[w] for w, v in digits.items())

    def digit(self, label: int, wire: int) -> int:
        if self.qubits:
            return (label >> wire) & 1
        return (label // self.strides[wire]) % self.dims[wire]

    def digits(self, label: int) -> list[int]:
        return [self.digit(label, w) for w in range(len(self.dims))]

    def label_string(self, label: int) -> str:
        return "".join(np.base_repr(v, 36).lower() for v in self.digits(label))

    def parse_label(self, text: str) -> int:
        if len(text) != len(self.dims):
            raise SimulationError(f"label {text!r} has {len(text)} digits, expected {len(self.dims)}")
        digits = {}
        for w, ch in enumerate(text):
            v = int(ch, 36)
            if v >= self.dims[w]:
                raise SimulationError(f"digit {ch} out of range on wire {w}")
            digits[w] = v
        return self.pack(digits)

    # -- views -------------------------------------------------------------
    @property
    def support(self) -> int:
        return len(self.amps)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amps.values()))

    def to_dense(self, wires: Sequence[int]) -> np.ndarray:
        """Dense vector over `wires`; every other wire must be in a fixed basis state."""
        sub = [self.dims[w] for w in wires]
        out = np.zeros(math.prod(sub), dtype=complex)
        rest = None
        others = [w for w in range(len(self.dims)) if w not in set(wires)]
        for lbl, a in self.amps.items():
            key = tuple(self.digit(lbl, w) for w in others)
            if rest is None:
                rest = key
            elif key != rest:
                raise SimulationError("wires outside the requested set are not in a product basis state")
            idx = np.ravel_multi_index([self.digit(lbl, w) for w in wires], sub) if sub else 0
            out[idx] += a
        return out

    def marginal(self, wire: int) -> np.ndarray:
        p = np.zeros(self.dims[wire])
        for lbl, a in self.amps.items():
            p[self.digit(lbl, wire)] += abs(a) ** 2
        return p


# -- gate actions ---------------------------------------------------------

def _controls_ok(st: SparseState, lbl: int, controls) -> bool:
    for w, pol in controls:
        if st.digit(lbl, w) != pol:
            return False
    return True


def _single_matrix(g: Gate, d: int) -> np.ndarray:
    k = g.kind
    if k == Kind.H:
        return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    if k == Kind.RY:
        c, s = math.cos(g.param / 2), math.sin(g.param / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if k == Kind.HD:
        w = cmath.exp(2j * math.pi / d)
        return np.array([[w ** (x * y) for x in range(d)] for y in range(d)], dtype=complex) / math.sqrt(d)
    raise SimulationError(f"no dense action for {k}")


def _diag_phase(g: Gate, d: int):
    """Phase as a function of the target digit, for diagonal single-wire gates."""
    k = g.kind
    if k == Kind.Z:
        return lambda v: -1.0 if v else 1.0
    if k == Kind.S:
        return lambda v: 1j if v else 1.0
    if k == Kind.SDG:
        return lambda v: -1j if v else 1.0
    if k == Kind.RZ:
        lo, hi = cmath.exp(-0.5j * g.param), cmath.exp(0.5j * g.param)
        return lambda v: hi if v else lo
    if k == Kind.PHASE:
        ph = cmath.exp(1j * g.param)
        return lambda v: ph if v else 1.0
    if k in (Kind.ZD, Kind.ZD_POW):
        p = 1 if k == Kind.ZD else g.param
        w = cmath.exp(2j * math.pi / d)
        return lambda v: w ** ((p * v) % d)
    return None


def _permute(st: SparseState, g: Gate, lbl: int) -> int:
    """New label under a basis-permuting gate (controls already checked)."""
    k, t = g.kind, g.targets
    dg = st.digit
    if k in (Kind.X, Kind.MCX):
        w = t[0]
        if st.qubits:
            return lbl ^ (1 << w)
        return lbl + (1 - 2 * dg(lbl, w)) * st.strides[w]
    if k == Kind.CNOT:
        c, w = t
        if st.qubits:
            return lbl ^ (1 << w) if (lbl >> c) & 1 else lbl
        return lbl + (1 - 2 * dg(lbl, w)) * st.strides[w] if dg(lbl, c) == 1 else lbl
    if k == Kind.SWAP:
        a, b = t
        va, vb = dg(lbl, a), dg(lbl, b)
        return lbl + (vb - va) * st.strides[a] + (va - vb) * st.strides[b]
    if k in (Kind.CXD, Kind.CXD_INV, Kind.XPLUS):
        if k == Kind.XPLUS:
            w, shift = t[0], g.param
        else:
            c, w = t
            shift = dg(lbl, c) * (1 if k == Kind.CXD else -1)
        d = st.dims[w]
        v = dg(lbl, w)
        return lbl + (((v + shift) % d) - v) * st.strides[w]
    if k == Kind.FANOUT:
        x0 = dg(lbl, t[0])
        for w in t[1:]:
            d = st.dims[w]
            v = dg(lbl, w)
            lbl += (((v + g.param * x0) % d) - v) * st.strides[w]
        return lbl
    if k == Kind.PARITY:
        w = t[-1]
        d = st.dims[w]
        total = sum(dg(lbl, s) for s in t[:-1])
        v = dg(lbl, w)
        return lbl + (((v + total) % d) - v) * st.strides[w]
    raise SimulationError(f"{k} is not a permutation gate")


PERMUTATIONS = {Kind.X, Kind.MCX, Kind.CNOT, Kind.SWAP, Kind.CXD, Kind.CXD_INV, Kind.XPLUS,
                Kind.FANOUT, Kind.PARITY}


_QUBIT_PERMS = {Kind.X, Kind.MCX, Kind.CNOT, Kind.FANOUT, Kind.PARITY}


def _qubit_permute(amps: dict, g: Gate) -> dict:
    """Bitmask version of _permute for all-qubit states."""
    cmask = cval = 0
    for w, pol in g.controls:
        cmask |= 1 << w
        cval |= pol << w
    k, t = g.kind, g.targets
    if k in (Kind.X, Kind.MCX):
        flip = 1 << t[0]
        return {(l ^ flip if l & cmask == cval else l): a for l, a in amps.items()}
    if k == Kind.CNOT:
        cmask |= 1 << t[0]
        cval |= 1 << t[0]
        flip = 1 << t[1]
        return {(l ^ flip if l & cmask == cval else l): a for l, a in amps.items()}
    if k == Kind.FANOUT:
        if g.param % 2 == 0:
            return dict(amps)
        cmask |= 1 << t[0]
        cval |= 1 << t[0]
        flip = sum(1 << w for w in t[1:])
        return {(l ^ flip if l & cmask == cval else l): a for l, a in amps.items()}
    src = sum(1 << w for w in t[:-1])
    flip = 1 << t[-1]
    return {(l ^ flip if l & cmask == cval and (l & src).bit_count() & 1 else l): a for l, a in amps.items()}


def _prune(amps: dict) -> dict:
    return {k: v for k, v in amps.items() if abs(v) > EPS_PRUNE}


def apply_gate(st: SparseState, g: Gate, strict: bool = False) -> SparseState:
    """Apply `g` in place and return the state."""
    if strict and g.oracle:
        raise SimulationError(f"oracle gate {g.kind.value} in protocol-strict mode")
    for w in g.wires:
        if w >= len(st.dims):
            raise SimulationError(f"unknown wire {w}")
    if g.kind in (Kind.CXD, Kind.CXD_INV, Kind.SWAP) and st.dims[g.targets[0]] != st.dims[g.targets[1]]:
        raise SimulationError(f"{g.kind.value}: dimension mismatch")
    if g.kind in (Kind.X, Kind.H, Kind.RY, Kind.RZ, Kind.S, Kind.SDG, Kind.Z, Kind.PHASE, Kind.CNOT, Kind.MCX):
        if any(st.dims[w] != 2 for w in g.targets):
            raise SimulationError(f"{g.kind.value}: dimension mismatch, qubit gate on a qudit")
    ctrl = g.controls
    amps = st.amps
    if st.qubits and g.kind in _QUBIT_PERMS:
        st.amps = _qubit_permute(amps, g)
        return st
    if g.kind in PERMUTATIONS:
        if ctrl:
            st.amps = {(_permute(st, g, l) if _controls_ok(st, l, ctrl) else l): a for l, a in amps.items()}
        else:
            st.amps = {_permute(st, g, l): a for l, a in amps.items()}
        return st
    w = g.targets[0]
    d = st.dims[w]
    phase = _diag_phase(g, d)
    if phase is not None:
        out = {}
        for l, a in amps.items():
            if ctrl and not _controls_ok(st, l, ctrl):
                out[l] = a
            else:
                out[l] = a * phase(st.digit(l, w))
        st.amps = _prune(out)
        return st
    mat = _single_matrix(g, d)
    stride = st.strides[w]
    out: dict[int, complex] = {}
    for l, a in amps.items():
        if ctrl and not _controls_ok(st, l, ctrl):
            out[l] = out.get(l, 0) + a
            continue
        v = st.digit(l, w)
        base = l - v * stride
        col = mat[:, v]
        for y in range(d):
            if col[y] != 0:
                key = base + y * stride
                out[key] = out.get(key, 0) + a * col[y]
    st.amps = _prune(out)
    return st


def measure(st: SparseState, wire: int, rng=None, outcome: int | None = None) -> tuple[int, float, SparseState]:
    """Measure `wire`. Either sample with `rng` or force `outcome`.

    Returns (outcome, probability, posterior)."""
    probs = st.marginal(wire)
    total = probs.sum()
    if total <= 0:
        raise SimulationError("all-zero marginal")
    probs = probs / total
    if outcome is None:
        r = (rng if rng is not None else np.random.default_rng()).random()
        outcome = int(np.searchsorted(np.cumsum(probs), r, side="right"))
        outcome = min(outcome, len(probs) - 1)
        while probs[outcome] == 0:  # guard against r landing on a zero-width bin edge
            outcome -= 1
    p = float(probs[outcome])
    if p == 0:
        raise SimulationError(f"outcome {outcome} has zero probability")
    scale = 1 / math.sqrt(p * total)
    st.amps = _prune({l: a * scale for l, a in st.amps.items() if st.digit(l, wire) == outcome})
    return outcome, p, st


def reset(st: SparseState, wire: int) -> SparseState:
    """Reset a wire that is already in a basis state (as after a measurement)."""
    stride = st.strides[wire]
    out: dict[int, complex] = {}
    for l, a in st.amps.items():
        key = l - st.digit(l, wire) * stride
        out[key] = out.get(key, 0) + a
    if len(out) != len(st.amps):
        raise SimulationError(f"reset of wire {wire} which is not in a basis state")
    st.amps = out
    return st


# -- scheduling ------------------------------------------------------------

def _flatten(circuit: DynamicCircuit) -> list[Instruction]:
    return [i for _, i in circuit.instructions()]


def schedule(circuit: DynamicCircuit, policy: str = "demand") -> list[Instruction]:
    """Serialized execution order.

    "moment": moments in order, ascending lowest wire inside a moment.
    "demand": a topological order of the same dependency graph that always
    runs the most urgent ready instruction: resets, then feedback, then
    measurements, then ordinary gates, and only then gates that open a new
    superposition on a wire. Measured branches thus get corrected (and can
    coalesce) before the state grows, which keeps both the support and the
    branch count small.
    """
    cache = circuit.__dict__.setdefault("_schedules", {}) if circuit.frozen else {}
    if policy not in cache:
        cache[policy] = _schedule(circuit, policy)
    return list(cache[policy])


def _driving_wires(gate: Gate) -> list[int]:
    w = [c for c, _ in gate.controls]
    if gate.kind in (Kind.CNOT, Kind.CXD, Kind.CXD_INV, Kind.FANOUT):
        w.append(gate.targets[0])
    elif gate.kind == Kind.PARITY:
        w.extend(gate.targets[:-1])
    elif gate.kind == Kind.SWAP:
        w.extend(gate.targets)
    return w


def _schedule(circuit: DynamicCircuit, policy: str) -> list[Instruction]:
    flat = _flatten(circuit)
    if policy == "moment":
        return flat
    if policy != "demand":
        raise ValueError(f"unknown schedule {policy!r}")
    preds: list[list[int]] = []
    succs: list[list[int]] = [[] for _ in flat]
    last_on_wire: dict[int, int] = {}
    writer: dict[int, int] = {}
    for idx, ins in enumerate(flat):
        p = {last_on_wire[w] for w in ins.wires if w in last_on_wire}
        if ins.condition is not None:
            p.update(writer[s] for s in ins.condition.slots if s in writer)
        preds.append(sorted(p))
        for q in p:
            succs[q].append(idx)
        for w in ins.wires:
            last_on_wire[w] = idx
        if isinstance(ins.payload, Measure):
            writer[ins.payload.slot] = idx
    missing = [len(p) for p in preds]
    spreading = [isinstance(i.payload, Gate) and i.payload.kind in SPREADING for i in flat]
    done = [False] * len(flat)
    # wires holding a superposition opened since their last measurement or reset
    opened: set[int] = set()
    # 0 resets, 1 feedback, 2 measurements, 3 other gates and closing spreading gates, 4 opening ones
    heaps: list[list[int]] = [[] for _ in range(5)]
    waiting: dict[int, list[int]] = {}      # wire -> ready opening gates on it

    def closes(idx: int) -> bool:
        return opened.issuperset(flat[idx].payload.targets)

    def push(idx: int):
        ins = flat[idx]
        p = ins.payload
        if isinstance(p, Reset):
            heapq.heappush(heaps[0], idx)
        elif ins.condition is not None:
            heapq.heappush(heaps[1], idx)
        elif isinstance(p, Measure):
            heapq.heappush(heaps[2], idx)
        elif spreading[idx] and not closes(idx):
            heapq.heappush(heaps[4], idx)
            for w in p.targets:
                waiting.setdefault(w, []).append(idx)
        else:
            heapq.heappush(heaps[3], idx)

    def pop() -> int | None:
        for r in range(4):
            h = heaps[r]
            while h:
                idx = heapq.heappop(h)
                if done[idx]:
                    continue
                if r == 3 and spreading[idx] and flat[idx].condition is None and not closes(idx):
                    push(idx)
                    continue
                return idx
        return None

    def pull(target: int) -> int:
        # earliest ready ancestor of target
        seen, stack, best = {target}, [target], None
        while stack:
            node = stack.pop()
            if missing[node] == 0:
                best = node if best is None else min(best, node)
                continue
            for q in preds[node]:
                if not done[q] and q not in seen:
                    seen.add(q)
                    stack.append(q)
        return best

    for i in range(len(flat)):
        if missing[i] == 0:
            push(i)
    order: list[int] = []
    # what an opening gate may be run for: feedback first, then any other real work
    wanted = [i for i, ins in enumerate(flat) if ins.condition is not None]
    wanted += [i for i in range(len(flat)) if not spreading[i]]
    cursor = 0
    while len(order) < len(flat):
        best = pop()
        if best is None:
            # only opening gates are ready: run one when the next pending real work needs it
            while cursor < len(wanted) and done[wanted[cursor]]:
                cursor += 1
            if cursor < len(wanted):
                best = pull(wanted[cursor])
            else:
                while done[heaps[4][0]]:
                    heapq.heappop(heaps[4])
                best = heapq.heappop(heaps[4])
        done[best] = True
        order.append(best)
        p = flat[best].payload
        if isinstance(p, (Measure, Reset)):
            opened.discard(p.wire)
        elif spreading[best]:
            for w in p.targets:
                if w in opened:
                    opened.discard(w)
                else:
                    opened.add(w)
                    for q in waiting.pop(w, []):
                        if not done[q]:
                            heapq.heappush(heaps[3], q)
        elif isinstance(p, Gate):
            # a wire that drives another is entangled now: a later H on it no longer undoes the first
            opened.difference_update(_driving_wires(p))
        for s in succs[best]:
            missing[s] -= 1
            if missing[s] == 0:
                push(s)
    return [flat[i] for i in order]


# -- execution -------------------------------------------------------------

@dataclass
class ShotResult:
    state: SparseState
    transcript: dict[int, int]
    trace: list[int] = field(default_factory=list)


@dataclass
class BranchResult:
    weight: float
    state: SparseState
    transcript: dict[int, int]
    multiplicity: int = 1
    trace: list[int] = field(default_factory=list)


def _initial(circuit: DynamicCircuit, initial: SparseState | None) -> SparseState:
    if initial is None:
        return SparseState.zero(circuit.dims)
    if list(initial.dims) != circuit.dims:
        raise SimulationError("initial state dimensions do not match the circuit")
    return initial.copy()


def _step(st: SparseState, ins: Instruction, transcript: dict[int, int], strict: bool, rng=None,
          outcome: int | None = None):
    """Execute one instruction; returns the measurement probability (1 otherwise)."""
    if ins.condition is not None and not ins.condition.evaluate(transcript):
        return 1.0
    p = ins.payload
    if isinstance(p, Gate):
        apply_gate(st, p, strict)
    elif isinstance(p, Measure):
        k, prob, _ = measure(st, p.wire, rng, outcome)
        transcript[p.slot] = k
        return prob
    else:
        reset(st, p.wire)
    return 1.0


def run_shot(circuit: DynamicCircuit, initial: SparseState | None = None, seed=0, strict: bool = False,
             policy: str = "demand", observer: Callable | None = None) -> ShotResult:
    """One sampled execution; identical (circuit, initial, seed) give identical results."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    st = _initial(circuit, initial)
    transcript: dict[int, int] = {}
    trace = []
    for ins in schedule(circuit, policy):
        _step(st, ins, transcript, strict, rng)
        trace.append(st.support)
        if observer is not None:
            observer(ins, st, transcript)
    return ShotResult(st, transcript, trace)


def canonical_key(st: SparseState, digits: int = 10):
    """Hashable form of a state up to global phase (rounded)."""
    if not st.amps:
        return ()
    labels = tuple(sorted(st.amps))
    vals = np.array([st.amps[l] for l in labels], dtype=complex)
    lead = vals[int(np.argmax(np.round(np.abs(vals), digits)))]   # first maximum = smallest label
    a = vals * (abs(lead) / lead)
    return (labels, (np.round(a.real, digits) + 0.0).tobytes(), (np.round(a.imag, digits) + 0.0).tobytes())


def run_all_branches(circuit: DynamicCircuit, initial: SparseState | None = None,
                     max_branches: int = MAX_BRANCHES, strict: bool = False, policy: str = "demand",
                     coalesce: bool = False, observer: Callable | None = None) -> list[BranchResult]:
    """Enumerate every measurement branch.

    Branches advance together over the execution order. With `coalesce=True`,
    branches whose states agree up to global phase and whose still-to-be-read
    outcome slots agree are merged: their futures are identical, so one
    representative stands for all of them (weights add, multiplicities add).
    """
    order = schedule(circuit, policy)
    # slots still read after position i
    live_after: list[tuple[int, ...]] = [()] * len(order)
    live: set[int] = set()
    for i in range(len(order) - 1, -1, -1):
        live_after[i] = tuple(sorted(live))
        if order[i].condition is not None:
            live.update(order[i].condition.slots)
    branches = [BranchResult(1.0, _initial(circuit, initial), {})]
    for i, ins in enumerate(order):
        nxt: list[BranchResult] = []
        p = ins.payload
        if isinstance(p, Measure):
            for b in branches:
                if ins.condition is not None and not ins.condition.evaluate(b.transcript):
                    b.trace.append(b.state.support)
                    nxt.append(b)
                    continue
                probs = b.state.marginal(p.wire)
                probs = probs / probs.sum()
                for k in np.flatnonzero(probs > EPS_PRUNE ** 2):
                    st = b.state.copy()
                    _, prob, _ = measure(st, p.wire, outcome=int(k))
                    tr = dict(b.transcript)
                    tr[p.slot] = int(k)
                    nxt.append(BranchResult(b.weight * prob, st, tr, b.multiplicity, b.trace + [st.support]))
        else:
            for b in branches:
                _step(b.state, ins, b.transcript, strict)
                b.trace.append(b.state.support)
                nxt.append(b)
        # an unconditioned gate acts injectively and identically on every branch, so it cannot make two
        # branches newly mergeable
        mergeable = ins.condition is not None or not isinstance(p, Gate)
        if coalesce and mergeable and len(nxt) > 1:
            merged: dict = {}
            keep = live_after[i]
            for b in nxt:
                key = (canonical_key(b.state), tuple(b.transcript.get(s) for s in keep))
                if key in merged:
                    m = merged[key]
                    m.weight += b.weight
                    m.multiplicity += b.multiplicity
                else:
                    merged[key] = b
            nxt = list(merged.values())
        if len(nxt) > max_branches:
            raise BranchExplosion(f"more than {max_branches} branches")
        if observer is not None:
            for b in nxt:
                observer(ins, b.state, b.transcript)
        branches = nxt
    return branches


# -- comparisons and I/O ---------------------------------------------------

def fidelity(a: SparseState, b: SparseState) -> float:
    """|<a|b>|: 1 means equal up to global phase."""
    if list(a.dims) != list(b.dims):
        raise SimulationError("dimension mismatch")
    small, big = (a.amps, b.amps) if len(a.amps) <= len(b.amps) else (b.amps, a.amps)
    inner = sum(v.conjugate() * big[k] for k, v in small.items() if k in big)
    return min(1.0, abs(inner))


def partial_trace_check(st: SparseState, wires: Iterable[int]) -> bool:
    """True iff every surviving label has digit 0 on all listed wires."""
    wires = list(wires)
    return all(st.digit(l, w) == 0 for l in st.amps for w in wires)


def dump_state(st: SparseState) -> str:
    return "".join(f"{st.label_string(l)} {float(a.real)!r} {float(a.imag)!r}\n" for l, a in sorted(st.amps.items()))


def load_state(text: str, dims: Sequence[int]) -> SparseState:
    st = SparseState(dims, {})
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise SimulationError(f"line {lineno}: expected 'label re im'")
        lbl = st.parse_label(parts[0])
        try:
            st.amps[lbl] = st.amps.get(lbl, 0) + complex(float(parts[1]), float(parts[2]))
        except ValueError:
            raise SimulationError(f"line {lineno}: bad amplitude") from None
    if abs(st.norm() - 1) > 1e-8:
        raise SimulationError(f"state norm {st.norm():.12g} is not 1")
    return st
