"""
Dense reference simulator, written independently of the package simulator.

The state is an ndarray with one axis per wire (wire 0 is the most
significant digit of the flattened vector). Gate matrices are built here from
their textbook definitions. Meant for at most a dozen wires.
"""
from __future__ import annotations

import itertools

import numpy as np

from dynqc.ir import Gate, Kind


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def phase(theta):
    return np.diag([1, np.exp(1j * theta)])


def fourier(d):
    w = np.exp(2j * np.pi / d)
    return np.array([[w ** (j * k) for k in range(d)] for j in range(d)]) / np.sqrt(d)


def clock(d, power=1):
    w = np.exp(2j * np.pi / d)
    return np.diag([w ** (power * j) for j in range(d)])


H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
S = np.diag([1, 1j])


def single_matrix(kind: Kind, param, d: int) -> np.ndarray | None:
    table = {
        Kind.H: lambda: H, Kind.X: lambda: X, Kind.Z: lambda: Z, Kind.S: lambda: S,
        Kind.SDG: lambda: S.conj(), Kind.RY: lambda: ry(param), Kind.RZ: lambda: rz(param),
        Kind.PHASE: lambda: phase(param), Kind.MCX: lambda: X, Kind.HD: lambda: fourier(d),
        Kind.ZD: lambda: clock(d), Kind.ZD_POW: lambda: clock(d, param),
        Kind.XPLUS: lambda: np.roll(np.eye(d), param, axis=0),
    }
    return table[kind]() if kind in table else None


class Dense:
    def __init__(self, dims, vec=None):
        self.dims = list(dims)
        if vec is None:
            vec = np.zeros(int(np.prod(self.dims)), dtype=complex)
            vec[0] = 1
        self.psi = np.asarray(vec, dtype=complex).reshape(self.dims).copy()

    @property
    def vec(self) -> np.ndarray:
        return self.psi.reshape(-1)

    def _apply_single(self, U, target, controls):
        idx = [slice(None)] * len(self.dims)
        for w, p in controls:
            idx[w] = p
        idx = tuple(idx)
        sub = self.psi[idx]
        ax = target - sum(1 for w, _ in controls if w < target)
        new = np.moveaxis(np.tensordot(U, sub, axes=([1], [ax])), 0, ax)
        self.psi[idx] = new

    def _apply_map(self, fn, controls):
        out = np.zeros_like(self.psi)
        for digits in itertools.product(*[range(d) for d in self.dims]):
            a = self.psi[digits]
            if a == 0:
                continue
            if all(digits[w] == p for w, p in controls):
                out[tuple(fn(list(digits)))] += a
            else:
                out[digits] += a
        self.psi = out

    def apply(self, g: Gate):
        k, t, d = g.kind, g.targets, self.dims[g.targets[0]]
        U = single_matrix(k, g.param, d)
        if U is not None:
            self._apply_single(U, t[0], g.controls)
            return
        dims = self.dims

        def fn(x):
            if k == Kind.CNOT:
                x[t[1]] ^= x[t[0]]
            elif k == Kind.SWAP:
                x[t[0]], x[t[1]] = x[t[1]], x[t[0]]
            elif k == Kind.CXD:
                x[t[1]] = (x[t[1]] + x[t[0]]) % dims[t[1]]
            elif k == Kind.CXD_INV:
                x[t[1]] = (x[t[1]] - x[t[0]]) % dims[t[1]]
            elif k == Kind.FANOUT:
                for w in t[1:]:
                    x[w] = (x[w] + g.param * x[t[0]]) % dims[w]
            elif k == Kind.PARITY:
                x[t[-1]] = (x[t[-1]] + sum(x[w] for w in t[:-1])) % dims[t[-1]]
            else:
                raise ValueError(k)
            return x
        self._apply_map(fn, g.controls)

    def run(self, gates):
        for gt in gates:
            self.apply(gt)
        return self


# -- reference constructions ---------------------------------------------------------

def fanout_unitary_apply(vec, n, d=2, k=1):
    """Control is wire 0, targets 1..n: x_i += k*x_0."""
    st = Dense([d] * (n + 1), vec)
    st.apply(Gate(Kind.FANOUT, tuple(range(n + 1)), (), k))
    return st.vec


def parity_apply(vec, n):
    st = Dense([2] * (n + 1), vec)
    st.apply(Gate(Kind.PARITY, tuple(range(n + 1))))
    return st.vec


def onehot_vector(amps) -> np.ndarray:
    """sum a_j e_j over N qubits, e_j = |1> on wire j only."""
    N = len(amps)
    out = np.zeros(1 << N, dtype=complex)
    for j, a in enumerate(amps):
        out[1 << (N - 1 - j)] = a
    return out


def binary_padded(vec, N) -> np.ndarray:
    """sum a_j |j>|0..0> over N qubits (index in the leading n wires)."""
    n = int(np.log2(len(vec)))
    out = np.zeros(1 << N, dtype=complex)
    for j, a in enumerate(vec):
        out[j << (N - n)] = a
    return out


def random_state(rng, dim) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_unitary(rng, N) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def overlap(a, b) -> float:
    return float(abs(np.vdot(a, b)))
