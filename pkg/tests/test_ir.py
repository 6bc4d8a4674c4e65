import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynqc.ir import (CircuitError, ClassicalCondition, DynamicCircuit, Gate, Instruction, Kind, Measure,
                      Role, cnot, g, mcx, measure, reset, validate, when)


def small_circuit():
    c = DynamicCircuit()
    c.add_wires(3)
    return c


def test_earliest_legal_packs_disjoint_gates():
    c = small_circuit()
    assert c.append(g(Kind.H, 0)) == 0
    assert c.append(g(Kind.H, 1)) == 0
    assert c.append(cnot(0, 1)) == 1
    assert c.append(g(Kind.X, 2)) == 0
    assert c.append(g(Kind.X, 2), "new-moment") == 2


def test_condition_must_follow_its_measurement():
    c = small_circuit()
    s = c.add_slot()
    c.append(measure(0, s))
    m = c.append(g(Kind.X, 1, cond=when([(s, 1)])))
    assert m == 1
    with pytest.raises(CircuitError, match="before the earliest"):
        c.place(g(Kind.X, 2, cond=when([(s, 1)])), 0)


def test_unwritten_slot_and_double_write():
    c = small_circuit()
    s = c.add_slot()
    with pytest.raises(CircuitError, match="unwritten"):
        c.append(g(Kind.X, 1, cond=when([(s, 1)])))
    c.append(measure(0, s))
    with pytest.raises(CircuitError, match="written twice"):
        c.append(measure(1, s))


def test_gate_checks():
    c = DynamicCircuit()
    q = c.add_wire(2)
    t = c.add_wire(3)
    with pytest.raises(CircuitError, match="qubits only"):
        c.append(g(Kind.H, t))
    with pytest.raises(CircuitError, match="overlap"):
        c.append(g(Kind.X, q, controls=((q, 1),)))
    with pytest.raises(CircuitError, match="oracle"):
        c.append(g(Kind.FANOUT, q, q + 1, param=1))
    with pytest.raises(CircuitError, match="dimension"):
        c.add_wire(1)
    s = c.add_slot(2)
    with pytest.raises(CircuitError, match="modulus"):
        c.append(measure(t, s))


def test_frozen_circuit_rejects_appends():
    c = small_circuit().freeze()
    with pytest.raises(CircuitError, match="frozen"):
        c.append(g(Kind.X, 0))


def test_aligned_group_shares_one_moment():
    c = small_circuit()
    c.append(g(Kind.H, 0))
    c.append(cnot(0, 1))
    s0, s1 = c.add_slot(), c.add_slot()
    m = c.append_aligned([measure(2, s0), measure(1, s1)], layer=True)
    assert m == 2
    assert {i.payload.wire for i in c.moments[2]} == {1, 2}
    # the next layer group cannot move back into or before moment 2
    m2 = c.append_aligned([g(Kind.X, 0)], layer=True)
    assert m2 == 3


def test_barrier_blocks_earlier_placement():
    c = small_circuit()
    c.append(g(Kind.H, 0))
    c.append(g(Kind.H, 0))
    c.barrier()
    assert c.append(g(Kind.X, 2)) == 2


def test_mcx_degenerates():
    assert mcx([], 3).payload.kind == Kind.X
    assert mcx([(1, 1)], 3).payload.kind == Kind.CNOT
    neg = mcx([(1, 0)], 3).payload
    assert neg.kind == Kind.X and neg.controls == ((1, 0),)
    assert mcx([(1, 0), (2, 1)], 3).payload.kind == Kind.MCX


def test_condition_evaluation():
    cond = ClassicalCondition(((0, 1), (1, 2)), 1, 3, 0)
    assert cond.evaluate({0: 1, 1: 2})       # 1 + 4 + 1 = 6 = 0 mod 3
    assert not cond.evaluate({0: 0, 1: 0})
    nz = ClassicalCondition(((0, 1),), 0, 2, None)
    assert nz.evaluate({0: 1}) and not nz.evaluate({0: 0})
    assert when([(4, 1), (4, 1)]).terms == ()      # duplicates cancel mod 2


def test_validate_reports_problems():
    c = small_circuit()
    c.add_slot()
    # hand-built bad moments, bypassing append
    c.moments = [
        [Instruction(Gate(Kind.X, (0,)), when([(0, 1)])), Instruction(Measure(0, 0))],
        [],
        [Instruction(Gate(Kind.CNOT, (1, 1)))],
    ]
    problems = "\n".join(validate(c))
    assert "premature read of c0" in problems
    assert "moment collision on wire 0" in problems
    assert "empty moment" in problems
    assert "overlap" in problems


def test_roles():
    c = DynamicCircuit()
    c.add_wire(2, Role.INPUT)
    c.add_wire(2, "ancilla")
    assert c.wires_with_role(Role.ANCILLA) == [1]
    cp = c.copy()
    cp.add_wire()
    assert c.num_wires == 2


# -- property: any sequence of appends gives a valid circuit ---------------------------

ops = st.lists(st.tuples(st.sampled_from(["h", "cx", "m", "fx", "r"]), st.integers(0, 3), st.integers(0, 3)),
               max_size=40)


@settings(max_examples=200, deadline=None)
@given(ops, st.booleans())
def test_appends_keep_invariants(seq, fresh):
    c = DynamicCircuit()
    c.add_wires(4)
    slots = []
    for op, a, b in seq:
        if op == "h":
            ins = g(Kind.H, a)
        elif op == "cx":
            if a == b:
                continue
            ins = cnot(a, b)
        elif op == "m":
            s = c.add_slot()
            slots.append(s)
            ins = measure(a, s)
        elif op == "fx":
            if not slots:
                continue
            ins = g(Kind.X, a, cond=when([(slots[b % len(slots)], 1)]))
        else:
            ins = reset(a)
        c.append(ins, "new-moment" if fresh else "earliest-legal")
    assert validate(c) == []
    for moment in c.moments:
        wires = [w for i in moment for w in i.wires]
        assert len(wires) == len(set(wires))
