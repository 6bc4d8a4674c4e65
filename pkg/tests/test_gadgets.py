import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynqc import gadgets as G
from dynqc.audit import audit
from dynqc.ir import Gate, Kind, Measure, validate
from dynqc.sim import SparseState, fidelity, partial_trace_check, run_all_branches, run_shot

from oracle import Dense, fanout_unitary_apply, parity_apply, random_state

RNG = np.random.default_rng(20240611)


def branches_vs(build, invec, outvec, in_wires, out_wires=None, coalesce=True):
    """Worst-branch fidelity against an expected output; also checks weights and ancilla reset."""
    c = build.circuit
    assert validate(c) == []
    init = SparseState.embed(c.dims, invec, in_wires)
    want = SparseState.embed(c.dims, outvec, out_wires if out_wires is not None else in_wires)
    res = run_all_branches(c, init, coalesce=coalesce)
    assert sum(b.weight for b in res) == pytest.approx(1.0, abs=1e-10)
    for b in res:
        assert partial_trace_check(b.state, build.ancilla)
    return min(fidelity(b.state, want) for b in res), res


def ghz_vector(amps, n, d=2):
    out = np.zeros(d ** n, dtype=complex)
    for j, a in enumerate(amps):
        out[sum(j * d ** i for i in range(n))] = a
    return out


def lead(amps, n, d=2):
    """amps on the first of n wires, rest |0>."""
    return np.kron(amps, np.eye(d ** (n - 1))[0])


def feedback(circuit):
    """target wire -> (kind, set of measured wires in its condition)."""
    owner = {ins.payload.slot: ins.payload.wire for _, ins in circuit.instructions()
             if isinstance(ins.payload, Measure)}
    out = {}
    for _, ins in circuit.instructions():
        if ins.condition is not None and isinstance(ins.payload, Gate):
            out[ins.payload.targets[0]] = (ins.payload.kind, frozenset(owner[s] for s, _ in ins.condition.terms))
    return out


# -- plans -------------------------------------------------------------------------

def test_ghz_plan_fan_out2_sizes():
    assert G.ghz_plan(9, 4) == G.BlockPlan(3, 3, 2)
    assert G.ghz_plan(9, 4, k=3) == G.BlockPlan(3, 3, 2)


def test_ghz_plan_c5_cannot_use_k3():
    # with c=5 only one ancilla is allowed for n=9, so three blocks of three are out
    assert G.ghz_plan(9, 5).ancilla <= 9 / 5
    with pytest.raises(G.PlanError):
        G.ghz_plan(9, 5, k=3)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 200), st.integers(1, 12))
def test_plans_respect_budgets(n, c):
    p = G.ghz_plan(n, c)
    assert p.ancilla <= n / c and p.ancilla == p.count - 1
    assert p.size >= -(-n * c // (n + c))
    f = G.fanout_plan(n, c)
    assert f.ancilla <= n / c
    assert f.ancilla == (2 * f.count - 1 if f.count else 0)
    q = G.fanout_plan_qudit(n, c)
    assert q.ancilla <= n / c and q.ancilla == 2 * q.count


def test_plan_errors():
    with pytest.raises(G.PlanError):
        G.fanout_plan(6, 2, p=1)
    with pytest.raises(G.PlanError):
        G.ghz_plan(0, 2)


# -- qubit gadgets ------------------------------------------------------------------

def test_fan_out2_shape():
    b = G.build_ghz_extend(9, 4)
    r = audit(b)
    assert (r.ancilla, r.measurement_layers) == (2, 1)
    a1, a2 = b.ancilla
    fb = feedback(b.circuit)
    first, second = {w for w in fb if fb[w][1] == {a1}}, {w for w in fb if fb[w][1] == {a1, a2}}
    assert len(first) == 3 and len(second) == 3
    assert all(fb[w][0] == Kind.X for w in fb)


def test_fan_out2_all_branches():
    b = G.build_ghz_extend(9, 4)
    plus = np.array([1, 1]) / np.sqrt(2)
    f, res = branches_vs(b, plus, ghz_vector(plus, 9), b.inputs, b.outputs, coalesce=False)
    assert len(res) == 4 and f > 1 - 1e-9
    s1, s2 = run_shot(b.circuit, SparseState.embed(b.circuit.dims, lead(plus, 9), b.outputs), seed=1), \
        run_shot(b.circuit, SparseState.embed(b.circuit.dims, lead(plus, 9), b.outputs), seed=2)
    assert fidelity(s1.state, s2.state) > 1 - 1e-9


def test_ghz_trivial_and_n6():
    b = G.build_ghz_extend(1)
    assert audit(b).depth == 0 and b.ancilla == []
    b = G.build_ghz_extend(6, 2)
    f, _ = branches_vs(b, lead([0.6, 0.8], 6), ghz_vector([0.6, 0.8], 6), b.outputs)
    assert f > 1 - 1e-9


def test_recover_n3_four_branches():
    v = random_state(RNG, 2)
    b = G.build_recover(3)
    assert b.ancilla == [] and audit(b).measurement_layers == 1
    f, res = branches_vs(b, ghz_vector(v, 3), lead(v, 3), b.inputs, coalesce=False)
    assert len(res) == 4 and f > 1 - 1e-9
    assert all(w == pytest.approx(0.25) for w in [r.weight for r in res])
    assert audit(G.build_recover(1)).depth == 0


@pytest.mark.parametrize("n,c", [(3, 2), (9, 4), (7, 3)])
def test_recover_after_ghz_is_identity(n, c):
    v = random_state(RNG, 2)
    g1 = G.build_ghz_extend(n, c)
    init = SparseState.embed(g1.circuit.dims, lead(v, n), g1.outputs)
    mid = run_shot(g1.circuit, init, seed=5).state
    r = G.build_recover(n)
    mid_vec = mid.to_dense(g1.outputs)
    f, _ = branches_vs(r, mid_vec, lead(v, n), r.inputs)
    assert f > 1 - 1e-9


def test_fan_out3_shape():
    b = G.build_fanout(6, 2, p=3)
    a1, a2, a3 = b.ancilla
    assert audit(b).measurement_layers == 1
    fb = feedback(b.circuit)
    ctrl = b.inputs[0]
    assert fb[ctrl] == (Kind.Z, {a2})
    xs = {w: s for w, (k, s) in fb.items() if k == Kind.X}
    assert sorted(xs.values(), key=len) == [{a1}] * 3 + [{a1, a3}] * 3


@pytest.mark.parametrize("n,c,p", [(1, 2, None), (4, 2, None), (6, 2, 3), (6, 3, None), (9, 2, None), (8, 1, 4)])
def test_fanout_matches_oracle(n, c, p):
    b = G.build_fanout(n, c, p=p)
    assert len(b.ancilla) <= n / c
    v = random_state(RNG, 2 ** (n + 1))
    f, _ = branches_vs(b, v, fanout_unitary_apply(v, n), b.inputs)
    assert f > 1 - 1e-9


def test_fanout_examples():
    b = G.build_fanout(3, 1)
    e = np.zeros(16)
    e[0b1000] = 1
    out = np.zeros(16)
    out[0b1111] = 1
    assert branches_vs(b, e, out, b.inputs)[0] > 1 - 1e-9
    b = G.build_fanout(4, 2)
    v = lead(np.array([1, 1]) / np.sqrt(2), 5)
    assert branches_vs(b, v, ghz_vector(np.array([1, 1]) / np.sqrt(2), 5), b.inputs)[0] > 1 - 1e-9


def test_parity_all_basis_inputs():
    b = G.build_parity(4)
    for x in range(32):
        e = np.eye(32)[x]
        assert branches_vs(b, e, parity_apply(e, 4), b.inputs)[0] > 1 - 1e-9
    b = G.build_parity(3)
    assert branches_vs(b, np.eye(16)[0b1010], np.eye(16)[0b1010], b.inputs)[0] > 1 - 1e-9
    # 1+1+0 is even, so the target keeps its value; odd parity flips it
    assert branches_vs(b, np.eye(16)[0b1101], np.eye(16)[0b1101], b.inputs)[0] > 1 - 1e-9
    assert branches_vs(b, np.eye(16)[0b1111], np.eye(16)[0b1110], b.inputs)[0] > 1 - 1e-9


@pytest.mark.parametrize("builder,args", [
    (G.build_ghz_extend, (9, 4)), (G.build_fanout, (6, 2)), (G.build_parity, (5, 2)),
    (G.build_fanout_qudit, (4, 2, 3)), (G.build_ghz_extend_qudit, (6, 2, 3))])
def test_protocol_matches_oracle_twin(builder, args):
    prot, orc = builder(*args), builder(*args, mode="oracle")
    assert audit(orc.circuit, expand=False).measurement_layers == 0
    dims = prot.circuit.dims
    d = dims[prot.inputs[0]]
    v = random_state(RNG, d ** len(prot.inputs))
    ref = run_shot(orc.circuit, SparseState.embed(orc.circuit.dims, v, orc.inputs)).state
    want = ref.to_dense(orc.outputs)
    f, _ = branches_vs(prot, v, want, prot.inputs, prot.outputs)
    assert f > 1 - 1e-9


# -- qudit gadgets --------------------------------------------------------------------

def test_qudit_fanout_basis_example():
    b = G.build_fanout_qudit(2, 1, 3)
    e = np.zeros(27)
    e[9] = 1          # |1>|00>
    out = np.zeros(27)
    out[9 + 3 + 1] = 1
    assert branches_vs(b, e, out, b.inputs)[0] > 1 - 1e-9
    assert len(b.ancilla) == 2 * G.fanout_plan_qudit(2, 1).count


def test_fan_out2_qudit_shape():
    b = G.build_ghz_extend_qudit(9, 4, 3)
    a1, a2 = b.ancilla
    owner = {ins.payload.slot: ins.payload.wire for _, ins in b.circuit.instructions()
             if isinstance(ins.payload, Measure)}
    conds = {}
    for _, ins in b.circuit.instructions():
        if ins.condition is not None:
            assert ins.payload.kind == Kind.XPLUS
            key = frozenset(owner[s] for s, _ in ins.condition.terms)
            conds.setdefault(key, set()).add(ins.payload.targets[0])
    assert set(conds) == {frozenset({a1}), frozenset({a1, a2})}
    assert all(len(v) == 3 for v in conds.values())


@pytest.mark.parametrize("n,c,d", [(4, 2, 3), (6, 3, 3), (3, 1, 5)])
def test_qudit_fanout_matches_oracle(n, c, d):
    b = G.build_fanout_qudit(n, c, d)
    v = random_state(RNG, d ** (n + 1))
    assert branches_vs(b, v, fanout_unitary_apply(v, n, d), b.inputs)[0] > 1 - 1e-9


def test_qudit_recover_nine_branches():
    d, n = 3, 3
    v = random_state(RNG, d)
    b = G.build_recover_qudit(n, d)
    f, res = branches_vs(b, ghz_vector(v, n, d), lead(v, n, d), b.inputs, coalesce=False)
    assert len(res) == 9 and f > 1 - 1e-9


def test_qudit_ghz_extend():
    d, n = 3, 6
    v = random_state(RNG, d)
    b = G.build_ghz_extend_qudit(n, 2, d)
    assert branches_vs(b, lead(v, n, d), ghz_vector(v, n, d), b.outputs)[0] > 1 - 1e-9


def test_qudit_rejects_d1():
    with pytest.raises(ValueError):
        G.build_fanout_qudit(3, 1, 1)


@pytest.mark.parametrize("name", ["fanout", "ghz", "recover"])
def test_generic_d2_matches_qubit_branch_for_branch(name):
    if name == "fanout":
        q, gen = G.build_fanout(4, 2), G.build_fanout_qudit(4, 2, 2, generic=True)
        v = random_state(RNG, 32)
    elif name == "ghz":
        q, gen = G.build_ghz_extend(6, 2), G.build_ghz_extend_qudit(6, 2, 2, generic=True)
        v = random_state(RNG, 2)
    else:
        q, gen = G.build_recover(4), G.build_recover_qudit(4, 2, generic=True)
        v = ghz_vector(random_state(RNG, 2), 4)
    assert G.build_fanout_qudit(4, 2, 2).circuit.construction == "fanout"
    outs = []
    for b in (q, gen):
        init = SparseState.embed(b.circuit.dims, v, b.inputs)
        res = run_all_branches(b.circuit, init)
        outs.append({np.round(np.abs(r.state.to_dense(b.outputs)), 9).tobytes() for r in res})
    # the generic build may use one more ancilla, hence more branches, but must reach the same data states
    qd, gd = outs
    assert qd == gd


# -- fused rotations ----------------------------------------------------------------

def direct(kind, n, angles, v, extra_ctrl=False):
    D = Dense([2] * (n + 1 + extra_ctrl), v)
    for j in range(n):
        ctrls = ((j + 1, 1),) + (((n + 1, 1),) if extra_ctrl else ())
        D.apply(Gate(kind, (0,), ctrls, angles[j]))
    return D.vec


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("kind", ["ry", "z"])
def test_fused_all_control_patterns(n, kind):
    angles = RNG.uniform(-np.pi, np.pi, n)
    b = (G.build_fused_ry if kind == "ry" else G.build_fused_z)(angles)
    assert audit(b).measurement_layers == 2
    gate = Kind.RY if kind == "ry" else Kind.PHASE
    t = random_state(RNG, 2)
    for x in itertools.product([0, 1], repeat=n):
        v = np.kron(t, np.eye(2 ** n)[int("".join(map(str, x)), 2)])
        assert branches_vs(b, v, direct(gate, n, angles, v), b.inputs)[0] > 1 - 1e-9
    v = random_state(RNG, 2 ** (n + 1))
    assert branches_vs(b, v, direct(gate, n, angles, v), b.inputs)[0] > 1 - 1e-9


def test_fused_ry_zero_controls_is_identity():
    b = G.build_fused_ry([0.7, 1.3, -0.4])
    t = random_state(RNG, 2)
    v = np.kron(t, np.eye(8)[0])
    assert branches_vs(b, v, v, b.inputs)[0] > 1 - 1e-9


@pytest.mark.parametrize("n", [1, 2, 3])
def test_cc_fused_ry_all_patterns(n):
    angles = RNG.uniform(-np.pi, np.pi, n)
    b = G.build_cc_fused_ry(angles)
    assert audit(b).measurement_layers == 4
    t = random_state(RNG, 2)
    for x in range(2 ** (n + 1)):
        v = np.kron(t, np.eye(2 ** (n + 1))[x])
        want = direct(Kind.RY, n, angles, v, extra_ctrl=True)
        assert branches_vs(b, v, want, b.inputs)[0] > 1 - 1e-9
        if x % 2 == 0:      # extra control off
            assert np.allclose(want, v)


def test_cc_fused_ry_n3_shape():
    b = G.build_cc_fused_ry([0.1, 0.2, 0.3])
    rz = [ins.payload for _, ins in b.circuit.instructions()
          if isinstance(ins.payload, Gate) and ins.payload.kind == Kind.RZ]
    # three shared controlled rotations plus the summed one on the target
    assert len([g for g in rz if g.controls]) == 4
    assert any(g.param == pytest.approx(0.3) for g in rz)


def test_declared_matches_audit():
    for b in [G.build_ghz_extend(9, 4), G.build_fanout(6, 2), G.build_parity(4), G.build_recover(5),
              G.build_fanout_qudit(4, 2, 3), G.build_fused_ry([1, 2]), G.build_cc_fused_ry([1, 2])]:
        r = audit(b)
        assert b.declared == {"measurement_layers": r.measurement_layers, "ancilla": r.ancilla}


def test_fanout_depth_constant_in_n():
    depths = {audit(G.build_fanout(n, 2, p=4)).depth for n in (8, 16, 32)}
    assert len(depths) == 1
    depths = {audit(G.build_ghz_extend(n, 2, k=3)).depth for n in (9, 18, 36)}
    assert len(depths) == 1
