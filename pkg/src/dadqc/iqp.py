"""IQP target distributions via the fast Walsh-Hadamard transform.

An IQP circuit ``W^n exp(-i phi) W^n`` acting on |0^n> has amplitudes

    a_s = 2^-n sum_x exp(-i phi(x)) (-1)^(s.x),
    phi(x) = sum_i (v_i + theta_i / 2) z_i(x) + sum_ij w_ij z_i(x) z_j(x),

so P(s) = |a_s|^2 = 4^-n |Z(s)|^2 where Z(s) is the inner sum, a
complex-parameter Ising partition function with an s-dependent field sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .ising import IsingParams, diagonal_energy

IQP_LIMIT = 24
PARTITION_LIMIT = 20
CZ_LIMIT = 10


def fwht(a) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along axis 0 (length 2^n).

    Returns a new array; trailing axes are transformed independently.
    """
    a = np.array(a, dtype=np.result_type(np.asarray(a).dtype, float), copy=True)
    N = a.shape[0]
    if N & (N - 1):
        raise ValueError(f"length {N} is not a power of two")
    tail = a.shape[1:]
    h = 1
    while h < N:
        v = a.reshape(N // (2 * h), 2, h, *tail)
        lo = v[:, 0].copy()
        v[:, 0] += v[:, 1]
        v[:, 1] = lo - v[:, 1]
        h *= 2
    return a


@lru_cache(maxsize=16)
def hadamard_matrix(n: int) -> np.ndarray:
    """Dense normalised W^{(x)n} as complex128 (cached, read-only)."""
    H = np.ones((1, 1))
    for _ in range(n):
        H = np.block([[H, H], [H, -H]])
    H = (H / math.sqrt(1 << n)).astype(complex)
    H.setflags(write=False)
    return H


def hadamard_all(psi: np.ndarray, dense_limit: int = 8) -> np.ndarray:
    """Apply the normalised W^{(x)n} along axis 0."""
    N = psi.shape[0]
    n = N.bit_length() - 1
    if n <= dense_limit:
        return hadamard_matrix(n) @ psi
    return fwht(psi) / math.sqrt(N)


@dataclass(frozen=True)
class IQPCircuit:
    """Diagonal phase ``sum v_i Z_i + sum w_ij Z_i Z_j`` on ``graph``, with
    optional measurement angles ``theta`` that shift v_i by theta_i / 2."""

    graph: object
    v: np.ndarray
    w: np.ndarray
    theta: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(-1)
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if v.size != self.graph.n or w.size != len(self.graph.edges):
            raise ValueError("angle arrays do not match the graph")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        if self.theta is not None:
            th = np.asarray(self.theta, dtype=float).reshape(-1)
            if th.size != self.graph.n:
                raise ValueError("theta length does not match the graph")
            object.__setattr__(self, "theta", th)

    @property
    def n(self) -> int:
        return self.graph.n

    def effective_v(self) -> np.ndarray:
        if self.theta is None:
            return self.v
        return self.v + self.theta / 2

    def phases(self) -> np.ndarray:
        """phi(x) for every basis index x."""
        return diagonal_energy(self.n, self.graph.edges, self.effective_v(), self.w)


def _check_size(n, limit, what):
    if n > limit:
        raise ValueError(f"{what} refused for n={n} > {limit}")


def iqp_amplitudes(circuit: IQPCircuit) -> np.ndarray:
    _check_size(circuit.n, IQP_LIMIT, "IQP distribution")
    return fwht(np.exp(-1j * circuit.phases())) / (1 << circuit.n)


def iqp_distribution(circuit: IQPCircuit) -> np.ndarray:
    a = iqp_amplitudes(circuit)
    p = a.real**2 + a.imag**2
    return p


def _parity(x):
    x = np.asarray(x, dtype=np.int64)
    p = np.zeros_like(x)
    while np.any(x):
        p ^= x & 1
        x = x >> 1
    return p


def partition_function(circuit: IQPCircuit, s) -> complex:
    """Z(s) = sum_x exp(-i phi(x)) (-1)^(s.x), summed directly over x.

    ``s`` is a basis index or a bit sequence with qubit 0 first.
    """
    n = circuit.n
    _check_size(n, PARTITION_LIMIT, "partition function")
    if not isinstance(s, (int, np.integer)):
        s = int(sum(int(b) << i for i, b in enumerate(s)))
    x = np.arange(1 << n, dtype=np.int64)
    sign = 1 - 2 * _parity(x & s)
    return complex(np.sum(np.exp(-1j * circuit.phases()) * sign))


def equivalent_iqp_for_dadqc(params: IsingParams, beta: float, theta=None) -> IQPCircuit:
    """IQP circuit with H_Z = beta H_I, the TV target of the analog device."""
    return IQPCircuit(params.graph, beta * params.h, beta * params.J, theta)


def graph_state_circuit(graph, theta=None, v=None) -> IQPCircuit:
    """w = pi/4 on every edge, the graph-state entangler."""
    if v is None:
        v = np.zeros(graph.n)
    return IQPCircuit(graph, v, np.full(len(graph.edges), math.pi / 4), theta)


@dataclass(frozen=True)
class CZReport:
    edge_identity: float
    graph_identity: float
    shifted_distribution: float

    @property
    def max_deviation(self) -> float:
        return max(self.edge_identity, self.graph_identity, self.shifted_distribution)


def _diag(n, fields=(), couplings=(), edges=()):
    return diagonal_energy(n, list(edges), np.asarray(fields, float) if len(fields) else np.zeros(n),
                           np.asarray(couplings, float))


def _cz_diagonal(n, edges):
    index = np.arange(1 << n, dtype=np.int64)
    out = np.ones(1 << n, dtype=complex)
    for u, v in edges:
        both = ((index >> u) & 1) & ((index >> v) & 1)
        out *= 1 - 2 * both
    return out


def cz_decomposition_check(graph) -> CZReport:
    """Check that pi/4 ZZ phases are CZ gates up to Z rotations and a global phase.

    * single edge: CZ = e^{-i pi/4} e^{i pi/4 Z_i} e^{i pi/4 Z_j} e^{-i pi/4 Z_i Z_j}
      as dense 4x4 matrices;
    * whole graph: prod e^{-i pi/4 Z_i Z_j} = e^{i pi/4 |E|} prod_i e^{-i pi/4 deg(i) Z_i} prod CZ_ij;
    * the IQP distribution with w = pi/4 equals that of the CZ-entangled circuit
      after shifting v_i -> v_i - (pi/4) deg(i).

    All operators involved are diagonal, so the graph identity compares full
    diagonals (off-diagonal entries vanish identically on both sides).
    """
    n = graph.n
    _check_size(n, CZ_LIMIT, "CZ check")
    edges = list(graph.edges)

    Z = np.diag([1.0, -1.0]).astype(complex)
    I2 = np.eye(2, dtype=complex)
    ZI, IZ = np.kron(I2, Z), np.kron(Z, I2)
    ZZ = ZI @ IZ
    q = math.pi / 4
    rhs = np.exp(-1j * q) * expm(1j * q * ZI) @ expm(1j * q * IZ) @ expm(-1j * q * ZZ)
    cz = np.diag([1, 1, 1, -1]).astype(complex)
    edge_dev = float(np.max(np.abs(rhs - cz)))

    lhs = np.exp(-1j * q * _diag(n, couplings=np.ones(len(edges)), edges=edges))
    deg = np.zeros(n)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    rot = np.exp(-1j * q * _diag(n, fields=deg))
    rhs_g = np.exp(1j * q * len(edges)) * rot * _cz_diagonal(n, edges)
    graph_dev = float(np.max(np.abs(lhs - rhs_g))) if edges else float(np.max(np.abs(lhs - 1)))

    # target: CZ entangler with Z angles v; realised by pi/4 ZZ phases with v - (pi/4) deg
    rng = np.random.default_rng(0)
    v = rng.uniform(0, 2 * math.pi, n)
    p_zz = iqp_distribution(graph_state_circuit(graph, v=v - q * deg))
    psi = np.exp(-1j * _diag(n, fields=v)) * _cz_diagonal(n, edges)
    amp = fwht(psi) / (1 << n)
    p_cz = np.abs(amp) ** 2
    dist_dev = float(np.max(np.abs(p_zz - p_cz)))
    return CZReport(edge_dev, graph_dev, dist_dev)
