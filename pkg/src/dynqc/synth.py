"""
State-preparation and function synthesis built from the gadgets.

Every builder returns a `GadgetBuild` whose `outputs` list names the wires
holding the result, most significant qubit first. All randomness lives in the
caller; builders look only at the compile-time target, never at the runtime
input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gadgets import (Builder, GadgetBuild, cc_fused_ry_many, finish, fused_ry_many, fused_z_many, ghz, parity,
                      recover)
from .ir import Kind, Role, cnot, g, mcx

EPS_DEN = 1e-12
NORM_TOL = 1e-10
EPS_PHASE = 1e-12


# -- schedules ---------------------------------------------------------------

def _log2_exact(N: int) -> int:
    n = N.bit_length() - 1
    if N < 1 or 1 << n != N:
        raise ValueError(f"length {N} is not a power of two")
    return n


def check_normalized(vec, tol: float = NORM_TOL) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).ravel()
    if v.size == 0:
        raise ValueError("empty amplitude vector")
    if abs(np.vdot(v, v).real - 1.0) > tol:
        raise ValueError(f"amplitudes not normalized (norm^2 = {np.vdot(v, v).real:.12g})")
    return v


def angle_schedule(magnitudes) -> np.ndarray:
    """theta_1..theta_{N-1} with |a_{k-1}| = cos(theta_1)..cos(theta_{k-1}) sin(theta_k).

    Computed as atan2(|a_{k-1}|, remaining mass after it), which is the same
    angle as the arcsine form but keeps full precision near pi/2.
    """
    mags = np.asarray(magnitudes, dtype=float).ravel()
    if np.any(mags < 0):
        raise ValueError("magnitudes must be nonnegative")
    check_normalized(mags)
    sq = mags ** 2
    tail = np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]])   # tail[k] = sum_{j >= k}
    out = np.zeros(max(len(mags) - 1, 0))
    for k in range(1, len(mags)):
        if np.sqrt(tail[k - 1]) < EPS_DEN:
            continue
        out[k - 1] = np.arctan2(mags[k - 1], np.sqrt(tail[k]))
    return out


def reconstruct(thetas) -> np.ndarray:
    """Magnitudes implied by an angle schedule (inverse of angle_schedule)."""
    thetas = np.asarray(thetas, dtype=float)
    out = np.empty(len(thetas) + 1)
    run = 1.0
    for k, th in enumerate(thetas):
        out[k] = run * np.sin(th)
        run *= np.cos(th)
    out[-1] = run
    return out


def phase_schedule(amplitudes) -> np.ndarray:
    a = np.asarray(amplitudes, dtype=complex).ravel()
    ph = np.where(np.abs(a) < EPS_PHASE, 0.0, np.angle(a))
    return np.mod(ph, 2 * np.pi)


def check_unitary(U, tol: float = NORM_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError("unitary must be square")
    _log2_exact(U.shape[0])
    if np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) > tol:
        raise ValueError("matrix is not unitary")
    return U


def check_permutation(table) -> list[int]:
    f = [int(v) for v in table]
    _log2_exact(len(f))
    if sorted(f) != list(range(len(f))):
        raise ValueError("table is not a bijection")
    return f


# -- one-hot preparation ---------------------------------------------------------

def _prefix_round(b: Builder, z: list[int], anc: list[int], c: int, copies=None):
    """anc[k-1] ^= AND_{j<=k} NOT z[j-1]: copy, Toffoli layer, recover (8 layers)."""
    L = len(anc)
    if L == 0:
        return copies
    if copies is None:
        copies = [b.wires(L - j) for j in range(L)]   # z_j feeds a_j..a_L
    for j in range(L):
        ghz(b, z[j], copies[j], c)
    b.close()
    feeds = [[z[j]] + copies[j] for j in range(L)]
    b.toffoli_round([mcx([(feeds[j][k - j], 0) for j in range(k + 1)], anc[k]) for k in range(L)])
    for j in range(L):
        recover(b, z[j], copies[j])
    b.close()
    return copies


def _ry(w, angle, controls=()):
    return g(Kind.RY, w, controls=tuple(controls), param=float(angle))


def _onehot(b: Builder, T: list[int], thetas, c: int = 2, ctrl: list[int] | None = None):
    """sum_j |a_j| e_j on the |0> wires T; with `ctrl`, only where the control copies are 1."""
    N = len(T)
    extra = (lambda i: [(ctrl[i], 1)]) if ctrl else (lambda i: [])
    anc = b.wires(max(N - 2, 0))
    for k in range(1, N):
        b.op(_ry(T[k - 1], 2 * thetas[k - 1], extra(k - 1)))
    copies = _prefix_round(b, T, anc, c)
    for k in range(2, N):
        b.op(_ry(T[k - 1], -2 * thetas[k - 1], extra(k - 1)))
    for k in range(1, N - 1):
        b.op(_ry(T[k], 2 * thetas[k], [(anc[k - 1], 1)] + extra(k)))
    _prefix_round(b, T, anc, c, copies)
    tail = [(T[i], 0) for i in range(N - 1)] + (extra(0) if ctrl else [])
    b.toffoli_round([mcx(tail, T[-1])])


# -- encoding conversions ---------------------------------------------------------

@dataclass
class _BinJob:
    x: list[int]                  # one-hot slots
    labels: list[int]             # binary index of each slot
    y: list[int]                  # index bits, most significant first
    pool: list[list[int]] | None = None   # per slot: the wire and its live copies


def _bits(label: int, nbits: int) -> list[int]:
    return [(label >> (nbits - 1 - i)) & 1 for i in range(nbits)]


def _to_binary(b: Builder, jobs: list[_BinJob], c: int = 2):
    """y ^= index of the hot slot, then clear the slot: 9 layers, shared by all jobs."""
    held = []
    for job in jobs:
        nb = len(job.y)
        per = []
        for j, xj in enumerate(job.x):
            if job.pool is not None:
                per.append(job.pool[j])
                continue
            cp = b.wires(max(sum(_bits(job.labels[j], nb)) - 1, 0))
            ghz(b, xj, cp, c)
            per.append([xj] + cp)
        held.append(per)
    b.close()
    ycopies = []
    for job, per in zip(jobs, held):
        nb = len(job.y)
        used = [0] * len(job.x)
        for i in range(nb):
            src = []
            for j in range(len(job.x)):
                if _bits(job.labels[j], nb)[i]:
                    src.append(per[j][used[j]])
                    used[j] += 1
            parity(b, src, job.y[i], c)
        yc = []
        for i in range(nb):
            cp = b.wires(len(job.x) - 1)
            ghz(b, job.y[i], cp, c)
            yc.append([job.y[i]] + cp)
        ycopies.append(yc)
        for j in range(len(job.x)):
            recover(b, per[j][0], per[j][1:])
    b.close()
    gates = []
    for job, yc in zip(jobs, ycopies):
        nb = len(job.y)
        for j, xj in enumerate(job.x):
            bits = _bits(job.labels[j], nb)
            gates.append(mcx([(yc[i][j], bits[i]) for i in range(nb)], xj))
    b.toffoli_round(gates)
    for yc in ycopies:
        for cp in yc:
            recover(b, cp[0], cp[1:])
    b.close()


def _to_onehot(b: Builder, x: list[int], nbits: int, c: int = 2, keep_pool: bool = False):
    """Binary index in x[:nbits] -> one-hot over x; 9 layers.

    With keep_pool every slot is left with len(x) live copies (the slot wire
    first), ready for controlled use and for a later _to_binary.
    """
    N = len(x)
    y = b.wires(nbits)
    for i in range(nbits):
        b.op(g(Kind.SWAP, x[i], y[i]))
    yc = []
    for i in range(nbits):
        cp = b.wires(N - 1)
        ghz(b, y[i], cp, c)
        yc.append([y[i]] + cp)
    b.close()
    b.toffoli_round([mcx([(yc[i][j], _bits(j, nbits)[i]) for i in range(nbits)], x[j]) for j in range(N)])
    for cp in yc:
        recover(b, cp[0], cp[1:])
    pool = []
    for j in range(N):
        need = N if keep_pool else sum(_bits(j, nbits))
        cp = b.wires(max(need - 1, 0))
        ghz(b, x[j], cp, c)
        pool.append([x[j]] + cp)
    b.close()
    used = [0] * N
    for i in range(nbits):
        src = []
        for j in range(N):
            if _bits(j, nbits)[i]:
                src.append(pool[j][used[j]])
                used[j] += 1
        parity(b, src, y[i], c)
    if not keep_pool:
        for j in range(N):
            recover(b, pool[j][0], pool[j][1:])
    b.close()
    return pool if keep_pool else None


# -- builders ---------------------------------------------------------------------

def _target_vector(target) -> np.ndarray:
    v = check_normalized(target)
    _log2_exact(len(v))
    return v


def build_onehot_prep(magnitudes, mode: str = "protocol", c: int = 2) -> GadgetBuild:
    mags = np.abs(np.asarray(magnitudes, dtype=complex).ravel())
    n = _log2_exact(len(mags))
    if n == 0:
        raise ValueError("need n >= 1")
    thetas = angle_schedule(mags)
    b = Builder.new(mode, "onehot", n=n, c=c)
    T = b.wires(len(mags), Role.OUTPUT)
    _onehot(b, T, thetas, c)
    return finish(b, [], T, thetas=thetas)


def build_onehot_to_binary(n: int, mode: str = "protocol", c: int = 2) -> GadgetBuild:
    if n < 1:
        raise ValueError("need n >= 1")
    N = 1 << n
    b = Builder.new(mode, "tobinary", n=n, c=c)
    x = b.wires(N, Role.INPUT)
    y = b.wires(n)
    _to_binary(b, [_BinJob(x, list(range(N)), y)], c)
    for i in range(n):
        b.op(g(Kind.SWAP, y[i], x[i]))
    return finish(b, x, x[:n])


def build_binary_to_onehot(n: int, mode: str = "protocol", c: int = 2) -> GadgetBuild:
    if n < 1:
        raise ValueError("need n >= 1")
    N = 1 << n
    b = Builder.new(mode, "toonehot", n=n, c=c)
    x = b.wires(N, Role.INPUT)
    _to_onehot(b, x, n, c)
    return finish(b, x[:n], x)


def _qsp_into(b: Builder, T: list[int], vec: np.ndarray, c: int) -> list[int]:
    """Prepare vec on |0> wires T (length N); returns the n output wires."""
    n = _log2_exact(len(vec))
    _onehot(b, T, angle_schedule(np.abs(vec)), c)
    for j, ph in enumerate(phase_schedule(vec)):
        if ph:
            b.op(g(Kind.PHASE, T[j], param=float(ph)))
    y = b.wires(n)
    _to_binary(b, [_BinJob(T, list(range(len(T))), y)], c)
    for i in range(n):
        b.op(g(Kind.SWAP, y[i], T[i]))
    return T[:n]


def build_qsp(target, variant: str = "onehot-4n", mode: str = "protocol", c: int = 2) -> GadgetBuild:
    vec = _target_vector(target)
    n = _log2_exact(len(vec))
    if n == 0:
        raise ValueError("need n >= 1")
    if variant == "size-opt-2n":
        return _build_qsp_split(vec, mode, c)
    if variant != "onehot-4n":
        raise ValueError(f"unknown variant {variant!r}")
    b = Builder.new(mode, "qsp", n=n, c=c)
    T = b.wires(len(vec), Role.OUTPUT)
    out = _qsp_into(b, T, vec, c)
    return finish(b, [], out)


def build_sparse_qsp(entries, n: int, mode: str = "protocol", c: int = 2) -> GadgetBuild:
    """entries: mapping or pairs index -> amplitude, over n qubits."""
    items = list(entries.items()) if hasattr(entries, "items") else [tuple(e) for e in entries]
    idx = [int(i) for i, _ in items]
    if not idx:
        raise ValueError("need at least one term")
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate indices")
    if any(i < 0 or i >= 1 << n for i in idx):
        raise ValueError(f"index out of range for n = {n}")
    order = sorted(range(len(items)), key=lambda t: idx[t])
    labels = [idx[t] for t in order]
    amps = check_normalized([items[t][1] for t in order])
    s = len(labels)
    b = Builder.new(mode, "sparse", n=n, s=s, c=c)
    T = b.wires(s, Role.ANCILLA)
    _onehot(b, T, angle_schedule(np.abs(amps)), c)
    for j, ph in enumerate(phase_schedule(amps)):
        if ph:
            b.op(g(Kind.PHASE, T[j], param=float(ph)))
    y = b.wires(n, Role.OUTPUT)
    b.ancillas = [w for w in b.ancillas if w not in y]
    _to_binary(b, [_BinJob(T, labels, y)], c)
    return finish(b, [], y, labels=labels)


def build_controlled_qsp_1(target, mode: str = "protocol", c: int = 2) -> GadgetBuild:
    """Output wires: the control followed by the n target qubits."""
    vec = _target_vector(target)
    n = _log2_exact(len(vec))
    if n == 0:
        raise ValueError("need n >= 1")
    N = len(vec)
    b = Builder.new(mode, "cqsp1", n=n, c=c)
    ctl = b.wire(Role.INPUT)
    T = b.wires(N, Role.OUTPUT)
    cc = [ctl] + b.wires(N - 1)
    ghz(b, ctl, cc[1:], c)
    b.close()
    _onehot(b, T, angle_schedule(np.abs(vec)), c, ctrl=cc)
    for j, ph in enumerate(phase_schedule(vec)):
        if ph:
            b.op(g(Kind.PHASE, T[j], controls=((cc[j], 1),), param=float(ph)))
    recover(b, ctl, cc[1:])
    b.close()
    # control 0 left every slot empty: mark slot 0 so the binary index is 0
    b.op(g(Kind.X, ctl))
    b.op(cnot(ctl, T[0]))
    b.op(g(Kind.X, ctl))
    y = b.wires(n)
    _to_binary(b, [_BinJob(T, list(range(N)), y)], c)
    for i in range(n):
        b.op(g(Kind.SWAP, y[i], T[i]))
    return finish(b, [ctl], [ctl] + T[:n])


def _cqsp_into(b: Builder, C: list[int], T: list[int], vecs: list[np.ndarray], c: int):
    """sum a_j |j> (on C[:n]) |0> -> sum a_j |j> |psi_j> (on T[:n]); 50 layers."""
    N = len(C)
    n = _log2_exact(N)
    thetas = [angle_schedule(np.abs(v)) for v in vecs]
    phases = [phase_schedule(v) for v in vecs]
    pool = _to_onehot(b, C, n, c, keep_pool=True)
    # step 1: each Ry angle is selected by the hot control slot
    fused_ry_many(b, [(T[k - 1], [pool[j][k - 1] for j in range(N)],
                       [2 * thetas[j][k - 1] for j in range(N)]) for k in range(1, N)])
    anc = b.wires(max(N - 2, 0))
    copies = _prefix_round(b, T, anc, c)
    fused_ry_many(b, [(T[k - 1], [pool[j][k - 1] for j in range(N)],
                       [-2 * thetas[j][k - 1] for j in range(N)]) for k in range(2, N)])
    cc_fused_ry_many(b, [(T[k], [pool[j][k] for j in range(N)],
                          [2 * thetas[j][k] for j in range(N)], anc[k - 1]) for k in range(1, N - 1)])
    _prefix_round(b, T, anc, c, copies)
    b.toffoli_round([mcx([(T[i], 0) for i in range(N - 1)], T[-1])])
    fused_z_many(b, [(T[k], [pool[j][k] for j in range(N)], [phases[j][k] for j in range(N)])
                     for k in range(N)])
    yc, yt = b.wires(n), b.wires(n)
    _to_binary(b, [_BinJob(C, list(range(N)), yc, pool), _BinJob(T, list(range(N)), yt)], c)
    for i in range(n):
        b.op(g(Kind.SWAP, yc[i], C[i]))
        b.op(g(Kind.SWAP, yt[i], T[i]))


def build_controlled_qsp_n(targets, mode: str = "protocol", c: int = 2,
                           construction: str = "cqspn") -> GadgetBuild:
    """Output wires: the n control qubits followed by the n target qubits."""
    vecs = [_target_vector(v) for v in targets]
    N = len(vecs)
    n = _log2_exact(N)
    if n == 0:
        raise ValueError("need n >= 1")
    if any(len(v) != N for v in vecs):
        raise ValueError(f"every target needs {N} amplitudes")
    b = Builder.new(mode, construction, n=n, c=c)
    C = b.wires(n, Role.INPUT) + b.wires(N - n)
    T = b.wires(n, Role.OUTPUT) + b.wires(N - n)
    _cqsp_into(b, C, T, vecs, c)
    return finish(b, C[:n], C[:n] + T[:n])


def build_entangled_unitary(U, mode: str = "protocol", c: int = 2) -> GadgetBuild:
    U = check_unitary(U)
    return build_controlled_qsp_n([U[:, j] for j in range(U.shape[0])], mode, c, construction="unitary")


def _split_rows(vec: np.ndarray, half: int):
    """vec over (half + rest) qubits -> row norms and normalized rows."""
    M = vec.reshape(1 << half, -1)
    alpha = np.linalg.norm(M, axis=1)
    rows = []
    for j, a in enumerate(alpha):
        if a < EPS_DEN:
            r = np.zeros(M.shape[1], dtype=complex)
            r[0] = 1.0
        else:
            r = M[j] / a
        rows.append(r)
    return alpha, rows


def _build_qsp_split(vec: np.ndarray, mode: str, c: int) -> GadgetBuild:
    w = _log2_exact(len(vec))
    n = -(-w // 2)
    if 2 * n != w:
        vec = np.kron(vec, [1.0, 0.0])   # pad with one trailing |0>
    alpha, rows = _split_rows(vec, n)
    N = 1 << n
    b = Builder.new(mode, "qsp2n", n=n, width=w, c=c)
    R1 = b.wires(n, Role.OUTPUT) + b.wires(N - n)
    R2 = b.wires(n, Role.OUTPUT) + b.wires(N - n)
    out1 = _qsp_into(b, R1, alpha.astype(complex), c)
    _cqsp_into(b, out1 + R1[n:], R2, rows, c)
    out = out1 + R2[:n]
    return finish(b, [], out[:w], padded=2 * n != w)


def matchings(f: list[int]) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Two sets of disjoint transpositions whose product (first then second) moves slot x to f(x).

    Each cycle (a_0 .. a_{L-1}) with a_{i+1} = f(a_i) is the product of the
    reflections i -> -i and i -> 1-i on cycle positions.
    """
    seen = [False] * len(f)
    first, second = [], []
    for start in range(len(f)):
        if seen[start]:
            continue
        cyc = [start]
        seen[start] = True
        while f[cyc[-1]] != start:
            cyc.append(f[cyc[-1]])
            seen[cyc[-1]] = True
        L = len(cyc)
        for i in range(L):
            j = (-i) % L
            if i < j:
                first.append((cyc[i], cyc[j]))
            j = (1 - i) % L
            if i < j:
                second.append((cyc[i], cyc[j]))
    return first, second


def build_reversible(table, mode: str = "protocol", c: int = 2) -> GadgetBuild:
    f = check_permutation(table)
    N = len(f)
    n = _log2_exact(N)
    if n == 0:
        raise ValueError("need n >= 1")
    b = Builder.new(mode, "reversible", n=n, c=c, table=f)
    x = b.wires(N, Role.INPUT)
    _to_onehot(b, x, n, c)
    first, second = matchings(f)
    # barriers keep the swap layers apart from everything else, so the one-hot
    # register can be inspected between them
    marks = [b.circuit.barrier()]
    for layer in (first, second):
        for step in ((0, 1), (1, 0), (0, 1)):
            b.circuit.append_aligned([cnot(x[p[step[0]]], x[p[step[1]]]) for p in layer], layer=True)
        marks.append(b.circuit.barrier())
    y = b.wires(n)
    _to_binary(b, [_BinJob(x, list(range(N)), y)], c)
    for i in range(n):
        b.op(g(Kind.SWAP, y[i], x[i]))
    return finish(b, x[:n], x[:n], matchings=(first, second), perm_moments=marks, onehot=x)
