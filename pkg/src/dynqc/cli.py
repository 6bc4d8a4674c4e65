"""
Command-line front end.

Every subcommand prints one JSON document (sorted keys, floats rounded to 12
digits) and exits 0 on success, 2 on bad input or a failed budget check under
--enforce-budgets, 1 on anything unexpected.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import gadgets, synth
from .audit import UnknownConstruction, audit, check_budgets
from .gadgets import PlanError
from .ir import CircuitError, Role, validate
from .qasm import ParseError, parse, serialize
from .sim import (MAX_BRANCHES, SimulationError, SparseState, dump_state, fidelity, load_state, run_all_branches,
                  run_shot)


class UsageError(ValueError):
    pass


USER_ERRORS = (UsageError, ValueError, PlanError, CircuitError, ParseError, SimulationError, OSError,
               UnknownConstruction)


# -- file formats -------------------------------------------------------------------

def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def parse_target(text: str):
    """Dense ('re im' or one complex per line) -> ndarray; sparse ('index re im') -> dict."""
    rows = list(_lines(text))
    if not rows:
        raise UsageError("empty target file")
    widths = {len(r) for _, r in rows}
    if len(widths) != 1:
        raise UsageError("target file mixes dense and sparse lines")
    try:
        if widths == {3}:
            out = {}
            for lineno, (i, re_, im) in rows:
                if int(i) in out:
                    raise UsageError(f"line {lineno}: duplicate index {i}")
                out[int(i)] = complex(float(re_), float(im))
            return out
        if widths == {2}:
            return np.array([complex(float(a), float(b)) for _, (a, b) in rows])
        if widths == {1}:
            return np.array([complex(r[0].replace("i", "j")) for _, r in rows])
    except ValueError as e:
        raise UsageError(f"malformed amplitude: {e}") from None
    raise UsageError("target lines must have 1, 2 or 3 fields")


def parse_unitary(text: str) -> np.ndarray:
    rows = []
    for lineno, r in _lines(text):
        if len(r) % 2:
            raise UsageError(f"line {lineno}: expected re/im pairs")
        vals = [float(v) for v in r]
        rows.append([complex(a, b) for a, b in zip(vals[::2], vals[1::2])])
    return np.array(rows)


def parse_permutation(text: str) -> list[int]:
    pairs = {}
    for lineno, r in _lines(text):
        if len(r) != 2:
            raise UsageError(f"line {lineno}: expected 'x f(x)'")
        x, y = int(r[0]), int(r[1])
        if x in pairs:
            raise UsageError(f"line {lineno}: duplicate input {x}")
        pairs[x] = y
    if sorted(pairs) != list(range(len(pairs))):
        raise UsageError("permutation inputs must be 0..N-1")
    return [pairs[x] for x in range(len(pairs))]


def _read(path: str) -> str:
    with open(path) as fh:
        return fh.read()


# -- helpers -------------------------------------------------------------------

def _round(obj):
    if isinstance(obj, float):
        return round(obj, 12) + 0.0
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round(obj.item())
    return obj


def _random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _digest(transcripts) -> str:
    body = json.dumps(sorted(json.dumps(sorted(t.items())) for t in transcripts))
    return hashlib.sha256(body.encode()).hexdigest()


def _execute(build, init: SparseState, expected: SparseState, args) -> dict:
    """Run shots or all branches; fidelity of each final state against `expected`."""
    strict = args.mode == "protocol"
    circ = build.circuit
    if args.branches == "all":
        res = run_all_branches(circ, init, max_branches=args.branch_cap, strict=strict, coalesce=True)
        fids = [fidelity(b.state, expected) for b in res]
        weights = [b.weight for b in res]
        return {"runs": {"kind": "branches", "count": int(sum(b.multiplicity for b in res)),
                         "distinct": len(res),
                         "total_weight": float(sum(weights))},
                "fidelity": {"min": float(min(fids)), "mean": float(np.dot(weights, fids) / sum(weights))},
                "transcript_digest": _digest([b.transcript for b in res])}
    seeds = np.random.SeedSequence(args.seed).spawn(args.shots)
    fids, trs = [], []
    for s in seeds:
        r = run_shot(circ, init, seed=np.random.default_rng(s), strict=strict)
        fids.append(fidelity(r.state, expected))
        trs.append(r.transcript)
    return {"runs": {"kind": "shots", "count": args.shots},
            "fidelity": {"min": float(min(fids)), "mean": float(np.mean(fids))},
            "transcript_digest": _digest(trs)}


def _finish(build, args, body: dict) -> tuple[dict, int]:
    problems = validate(build.circuit)
    if problems:
        raise CircuitError("; ".join(problems[:5]))
    rep = audit(build)
    verdict = check_budgets(rep)
    out = {"command": args.command, "mode": args.mode, "resources": rep.to_dict(), "budget": verdict.to_dict()}
    out.update(body)
    if getattr(args, "emit_circuit", None):
        with open(args.emit_circuit, "w") as fh:
            fh.write(serialize(build.circuit))
    code = 2 if getattr(args, "enforce_budgets", False) and not verdict.passed else 0
    return out, code


def _embed_out(build, vec):
    return SparseState.embed(build.circuit.dims, vec, build.outputs)


# -- subcommands ------------------------------------------------------------------

def cmd_prepare(args):
    if args.target and args.random_target is not None:
        raise UsageError("give either --target or --random-target")
    if args.target:
        target = parse_target(_read(args.target))
    elif args.random_target is not None:
        trng = np.random.default_rng(args.random_target)
        if args.s:
            idx = sorted(int(i) for i in trng.choice(2 ** args.n, args.s, replace=False))
            target = dict(zip(idx, _random_state(trng, args.s)))
        else:
            target = _random_state(trng, 2 ** args.n)
    else:
        raise UsageError("prepare needs --target or --random-target")
    if isinstance(target, dict):
        build = synth.build_sparse_qsp(target, args.n, args.mode, args.c)
        dense = np.zeros(2 ** args.n, dtype=complex)
        for i, a in target.items():
            dense[i] = a
    else:
        if len(target) != 2 ** args.n:
            raise UsageError(f"target has {len(target)} amplitudes, expected {2 ** args.n} for n = {args.n}")
        build = synth.build_qsp(target, args.variant, args.mode, args.c)
        dense = target
    init = SparseState.zero(build.circuit.dims)
    body = _execute(build, init, _embed_out(build, dense), args)
    return _finish(build, args, body)


def _input_state(args, dim):
    if args.input:
        vec = parse_target(_read(args.input))
        if isinstance(vec, dict) or len(vec) != dim:
            raise UsageError(f"input state must list {dim} dense amplitudes")
        return synth.check_normalized(vec)
    return _random_state(np.random.default_rng(args.seed), dim)


def _oracle_twin(build_fn, init_vec, wires, **kw):
    twin = build_fn(mode="oracle", **kw)
    st = SparseState.embed(twin.circuit.dims, init_vec, wires(twin))
    return run_shot(twin.circuit, st).state.to_dense(twin.outputs)


def cmd_fanout(args):
    n = args.n
    d = args.d
    if d == 2:
        fn = lambda mode: gadgets.build_fanout(n, args.c, mode, args.p)
    else:
        fn = lambda mode: gadgets.build_fanout_qudit(n, args.c, d, mode, args.p)
    build = fn(args.mode)
    vec = _input_state(args, d ** (n + 1))
    want = _oracle_twin(fn, vec, lambda b: b.inputs)
    init = SparseState.embed(build.circuit.dims, vec, build.inputs)
    return _finish(build, args, _execute(build, init, _embed_out(build, want), args))


def cmd_ghz(args):
    n, d = args.n, args.d
    if d == 2:
        build = gadgets.build_ghz_extend(n, args.c, args.mode, args.k)
    else:
        build = gadgets.build_ghz_extend_qudit(n, args.c, d, args.mode, args.k)
    amp = _input_state(args, d)
    want = np.zeros(d ** n, dtype=complex)
    for j in range(d):
        want[sum(j * d ** i for i in range(n))] = amp[j]
    init = SparseState.embed(build.circuit.dims, amp, build.inputs)
    return _finish(build, args, _execute(build, init, _embed_out(build, want), args))


def cmd_reversible(args):
    if args.table:
        f = parse_permutation(_read(args.table))
    elif args.random_perm is not None:
        f = [int(v) for v in np.random.default_rng(args.random_perm).permutation(2 ** args.n)]
    else:
        raise UsageError("reversible needs --table or --random-perm")
    build = synth.build_reversible(f, args.mode, args.c)
    N = len(f)
    vec = _input_state(args, N)
    want = np.zeros(N, dtype=complex)
    want[f] = vec
    init = SparseState.embed(build.circuit.dims, vec, build.inputs)
    body = _execute(build, init, _embed_out(build, want), args)
    basis_ok = []
    for x in range(N):
        st = SparseState.embed(build.circuit.dims, np.eye(N)[x], build.inputs)
        r = run_shot(build.circuit, st, seed=args.seed, strict=args.mode == "protocol")
        basis_ok.append(fidelity(r.state, _embed_out(build, np.eye(N)[f[x]])) > 1 - 1e-9)
    body["basis_inputs_correct"] = int(sum(basis_ok))
    body["table"] = f
    return _finish(build, args, body)


def cmd_unitary(args):
    if args.unitary:
        U = parse_unitary(_read(args.unitary))
    elif args.random_unitary is not None:
        r = np.random.default_rng(args.random_unitary)
        N = 2 ** args.n
        q, rr = np.linalg.qr(r.normal(size=(N, N)) + 1j * r.normal(size=(N, N)))
        U = q * (np.diag(rr) / np.abs(np.diag(rr)))
    else:
        raise UsageError("unitary needs --unitary or --random-unitary")
    build = synth.build_entangled_unitary(U, args.mode, args.c)
    N = U.shape[0]
    a = _input_state(args, N)
    want = sum(a[j] * np.kron(np.eye(N)[j], U[:, j]) for j in range(N))
    init = SparseState.embed(build.circuit.dims, a, build.inputs)
    return _finish(build, args, _execute(build, init, _embed_out(build, want), args))


def _audit_build(args):
    name, n, c = args.construction, args.n, args.c
    rng = np.random.default_rng(args.seed)
    N = 2 ** n
    if name == "ghz":
        return gadgets.build_ghz_extend(n, c, args.mode, args.k)
    if name == "ghz_qudit":
        return gadgets.build_ghz_extend_qudit(n, c, args.d, args.mode, args.k, generic=True)
    if name == "recover":
        return gadgets.build_recover(n, args.mode)
    if name == "recover_qudit":
        return gadgets.build_recover_qudit(n, args.d, args.mode, generic=True)
    if name == "fanout":
        return gadgets.build_fanout(n, c, args.mode, args.p)
    if name == "fanout_qudit":
        return gadgets.build_fanout_qudit(n, c, args.d, args.mode, args.p, generic=True)
    if name == "parity":
        return gadgets.build_parity(n, c, args.mode, args.p)
    if name in ("fused_ry", "fused_z", "cc_fused_ry"):
        fn = getattr(gadgets, "build_" + name)
        return fn(list(rng.uniform(0, 2 * np.pi, n)), 1, args.mode)
    if name == "onehot":
        return synth.build_onehot_prep(np.abs(_random_state(rng, N)), args.mode, c)
    if name == "tobinary":
        return synth.build_onehot_to_binary(n, args.mode, c)
    if name == "toonehot":
        return synth.build_binary_to_onehot(n, args.mode, c)
    if name == "qsp":
        return synth.build_qsp(_random_state(rng, N), "onehot-4n", args.mode, c)
    if name == "qsp2n":
        return synth.build_qsp(_random_state(rng, 4 ** n), "size-opt-2n", args.mode, c)
    if name == "sparse":
        s = args.s or 2
        if s > N:
            raise UsageError("s exceeds 2^n")
        idx = sorted(int(i) for i in rng.choice(N, s, replace=False))
        return synth.build_sparse_qsp(dict(zip(idx, _random_state(rng, s))), n, args.mode, c)
    if name == "cqsp1":
        return synth.build_controlled_qsp_1(_random_state(rng, N), args.mode, c)
    if name == "cqspn":
        return synth.build_controlled_qsp_n([_random_state(rng, N) for _ in range(N)], args.mode, c)
    if name == "unitary":
        q, r = np.linalg.qr(rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))
        return synth.build_entangled_unitary(q, args.mode, c)
    if name == "reversible":
        return synth.build_reversible([int(v) for v in rng.permutation(N)], args.mode, c)
    raise UnknownConstruction(f"unknown construction {name!r}")


def cmd_audit(args):
    build = _audit_build(args)
    return _finish(build, args, {"construction": build.circuit.construction})


def cmd_simulate(args):
    circ = parse(_read(args.circuit))
    problems = validate(circ)
    if problems:
        raise CircuitError("; ".join(problems[:5]))
    init = load_state(_read(args.state), circ.dims) if args.state else SparseState.zero(circ.dims)
    strict = not circ.oracle
    if args.branches == "all":
        res = run_all_branches(circ, init, max_branches=args.branch_cap, strict=strict, coalesce=True)
        body = {"runs": {"kind": "branches", "count": int(sum(b.multiplicity for b in res)), "distinct": len(res)},
                "weights": sorted(float(b.weight) for b in res),
                "transcript_digest": _digest([b.transcript for b in res])}
        final = res[0].state
    else:
        seeds = np.random.SeedSequence(args.seed).spawn(args.shots)
        runs = [run_shot(circ, init, seed=np.random.default_rng(s), strict=strict) for s in seeds]
        body = {"runs": {"kind": "shots", "count": args.shots},
                "transcript_digest": _digest([r.transcript for r in runs])}
        final = runs[0].state
    body["final_state_digest"] = hashlib.sha256(dump_state(final).encode()).hexdigest()
    if args.dump_state:
        with open(args.dump_state, "w") as fh:
            fh.write(dump_state(final))
    rep = audit(circ)
    body.update({"command": "simulate", "resources": rep.to_dict(),
                 "wires": {"total": circ.num_wires, "ancilla": len(circ.wires_with_role(Role.ANCILLA))}})
    return body, 0


# -- argument parsing ------------------------------------------------------------------

def _positive(v):
    i = int(v)
    if i < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return i


def _branches(v):
    if v != "all":
        raise argparse.ArgumentTypeError("only 'all' is supported")
    return v


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dynqc", description="Constant-depth dynamic-circuit builders.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, n=True):
        if n:
            p.add_argument("--n", type=_positive, required=True)
        p.add_argument("--c", type=_positive, default=2)
        p.add_argument("--mode", choices=["protocol", "oracle"], default="protocol")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--shots", type=_positive, default=100)
        p.add_argument("--branches", type=_branches, default=None)
        p.add_argument("--branch-cap", type=_positive, default=MAX_BRANCHES)
        p.add_argument("--emit-circuit", default=None)
        p.add_argument("--enforce-budgets", action="store_true")

    p = sub.add_parser("prepare", help="state preparation (dense or sparse target)")
    common(p)
    p.add_argument("--target")
    p.add_argument("--random-target", type=int, default=None)
    p.add_argument("--s", type=_positive, default=None, help="sparsity for --random-target")
    p.add_argument("--variant", choices=["onehot-4n", "size-opt-2n"], default="onehot-4n")
    p.set_defaults(fn=cmd_prepare)

    for name, fn, helptext in (("fanout", cmd_fanout, "fan-out gate"), ("ghz", cmd_ghz, "GHZ extension")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--d", type=int, default=2)
        p.add_argument("--p", type=_positive, default=None)
        p.add_argument("--k", type=_positive, default=None)
        p.add_argument("--input")
        p.set_defaults(fn=fn)

    p = sub.add_parser("reversible", help="reversible function from a permutation table")
    common(p, n=False)
    p.add_argument("--n", type=_positive, default=2)
    p.add_argument("--table")
    p.add_argument("--random-perm", type=int, default=None)
    p.add_argument("--input")
    p.set_defaults(fn=cmd_reversible)

    p = sub.add_parser("unitary", help="entangled unitary synthesis")
    common(p, n=False)
    p.add_argument("--n", type=_positive, default=1)
    p.add_argument("--unitary")
    p.add_argument("--random-unitary", type=int, default=None)
    p.add_argument("--input")
    p.set_defaults(fn=cmd_unitary)

    p = sub.add_parser("audit", help="resource report and budget check")
    common(p)
    p.add_argument("--construction", required=True)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--s", type=_positive, default=None)
    p.add_argument("--p", type=_positive, default=None)
    p.add_argument("--k", type=_positive, default=None)
    p.set_defaults(fn=cmd_audit)

    p = sub.add_parser("simulate", help="run a circuit file")
    p.add_argument("--circuit", required=True)
    p.add_argument("--state")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shots", type=_positive, default=1)
    p.add_argument("--branches", type=_branches, default=None)
    p.add_argument("--branch-cap", type=_positive, default=MAX_BRANCHES)
    p.add_argument("--dump-state")
    p.set_defaults(fn=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        if getattr(args, "d", 2) < 2:
            raise UsageError("--d must be at least 2")
        out, code = args.fn(args)
    except USER_ERRORS as e:
        print(json.dumps({"error": str(e), "kind": type(e).__name__}, sort_keys=True), file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - reported as an internal error
        print(json.dumps({"error": repr(e), "kind": "internal"}, sort_keys=True), file=sys.stderr)
        return 1
    print(json.dumps(_round(out), sort_keys=True, indent=2))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
