import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynqc import gadgets, synth
from dynqc.audit import audit
from dynqc.ir import DynamicCircuit, Kind, Role, cnot, g, measure, reset, validate, when
from dynqc.qasm import ParseError, moment_signature, parse, serialize


def sample_builds():
    rng = np.random.default_rng(5)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    v /= np.linalg.norm(v)
    return [
        gadgets.build_ghz_extend(9, 4),
        gadgets.build_fanout(6, 3),
        gadgets.build_fanout_qudit(4, 2, 3),
        gadgets.build_parity(5, mode="oracle"),
        gadgets.build_cc_fused_ry([0.3, 1.1]),
        synth.build_qsp(v),
        synth.build_reversible([3, 0, 1, 2]),
    ]


def test_header_and_pragmas():
    b = gadgets.build_ghz_extend(9, 4)
    text = serialize(b.circuit)
    assert text.startswith("OPENQASM 3;\npragma construction ghz;")
    assert "if (c0 mod 2 == 1) x q[" in text
    assert "if (c0 + c1 mod 2 == 1) x q[" in text


def test_roundtrip_builders():
    for b in sample_builds():
        back = parse(serialize(b.circuit))
        assert moment_signature(back) == moment_signature(b.circuit)
        assert back.dims == b.circuit.dims
        assert [r.role for r in back.qregs] == [r.role for r in b.circuit.qregs]
        assert back.construction == b.circuit.construction
        assert back.oracle == b.circuit.oracle
        assert validate(back) == []
        assert audit(back).depth == audit(b.circuit).depth
        assert serialize(back) == serialize(b.circuit)


def test_qudit_condition_syntax():
    text = serialize(gadgets.build_fanout_qudit(4, 2, 3).circuit)
    assert "mod 3 == 2) xplus(2) q[" in text
    assert "creg c[" in text and "mod=3" in text


@pytest.mark.parametrize("bad, msg", [
    ("", "empty"),
    ("OPENQASM 2;", "first statement"),
    ("OPENQASM 3;\nqreg q[1] dim=2;\nh q[0];", "before the first moment"),
    ("OPENQASM 3;\nqreg q[1] dim=2;\npragma moment;\nfoo q[0];", "unknown gate"),
    ("OPENQASM 3;\nqreg q[1] dim=2;\npragma moment;\nh q[0]", "missing"),
    ("OPENQASM 3;\npragma wibble;", "unknown pragma"),
    ("OPENQASM 3;\npragma rounds [-1];", "moment indices"),
    ("OPENQASM 3;\nqreg q[1] dim=2;\nrole q[0:0] boss;", "boss"),
])
def test_parse_errors(bad, msg):
    with pytest.raises(ParseError, match=msg):
        parse(bad)


angles = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["ry", "rz", "p", "cx", "m", "fx", "neg"]), st.integers(0, 3),
                          st.integers(0, 3), angles), max_size=30))
def test_roundtrip_random_circuits(seq):
    c = DynamicCircuit(construction="random", params={"seed": 1})
    c.add_wires(2, role=Role.INPUT)
    c.add_wires(2, role=Role.ANCILLA)
    slots = []
    for op, a, b, th in seq:
        if op in ("ry", "rz", "p"):
            c.append(g(Kind(op), a, param=th))
        elif op == "cx" and a != b:
            c.append(cnot(a, b))
        elif op == "neg" and a != b:
            c.append(g(Kind.RY, b, controls=((a, 0),), param=th))
        elif op == "m":
            s = c.add_slot()
            slots.append(s)
            c.append(measure(a, s))
            c.append(reset(a))
        elif op == "fx" and slots:
            c.append(g(Kind.Z, a, cond=when([(s, 1) for s in slots[:b + 1]], 1, 2, b)))
    back = parse(serialize(c))
    assert moment_signature(back) == moment_signature(c)
    # angles survive bit for bit
    orig = [i.payload.param for _, i in c.instructions() if hasattr(i.payload, "param")]
    new = [i.payload.param for _, i in back.instructions() if hasattr(i.payload, "param")]
    assert orig == new
