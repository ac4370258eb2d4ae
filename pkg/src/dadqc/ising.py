"""Ising Hamiltonian data, norm bounds and the pi/8 angle grid.

Conventions shared by the whole package: qubit i is bit i of a basis index
(little-endian) and its spin is ``z_i = +1`` for bit 0 and ``-1`` for bit 1.
The diagonal energy of basis state z is ``E(z) = sum h_i z_i + sum J_ij z_i z_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import InteractionGraph

GRID_STEP = math.pi / 8
EXACT_HI_LIMIT = 24
EXACT_K_LIMIT = 12


@dataclass(frozen=True)
class IsingParams:
    """Fields ``h`` (one per vertex) and couplings ``J`` (one per graph edge,
    in the graph's edge order)."""

    graph: InteractionGraph
    h: np.ndarray
    J: np.ndarray
    h_max: float = math.pi
    J_max: float = math.pi

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).reshape(-1)
        J = np.asarray(self.J, dtype=float).reshape(-1)
        if h.size != self.graph.n:
            raise ValueError(f"need {self.graph.n} fields, got {h.size}")
        if J.size != len(self.graph.edges):
            raise ValueError(f"need {len(self.graph.edges)} couplings, got {J.size}")
        if np.any(np.abs(h) > self.h_max) or np.any(np.abs(J) > self.J_max):
            raise ValueError("coefficient exceeds its declared cap")
        h.setflags(write=False)
        J.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "J", J)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def edges(self):
        return self.graph.edges

    @classmethod
    def zero(cls, graph) -> IsingParams:
        return cls(graph, np.zeros(graph.n), np.zeros(len(graph.edges)))

    def scaled(self, factor: float) -> IsingParams:
        cap = max(abs(factor), 1.0)
        return IsingParams(self.graph, factor * self.h, factor * self.J,
                           self.h_max * cap, self.J_max * cap)


@dataclass(frozen=True)
class NormBounds:
    HI_bound: float
    K_bound: float
    HI_exact: float | None = None
    K_exact: float | None = None


@dataclass(frozen=True)
class AngleAssignment:
    """Angles ``beta h_i`` and ``beta J_ij`` snapped to multiples of pi/8 mod pi."""

    scaled_h: np.ndarray
    scaled_J: np.ndarray
    k_h: np.ndarray
    k_J: np.ndarray
    max_residual: float = field(default=0.0)


def spins(n: int, i: int, index=None) -> np.ndarray:
    """z_i over all 2^n basis states (or over ``index``)."""
    if index is None:
        index = np.arange(1 << n, dtype=np.int64)
    return 1 - 2 * ((index >> i) & 1)


def diagonal_energy(n: int, edges, h, J) -> np.ndarray:
    """Table of E(z) for all 2^n basis states."""
    E = np.zeros(1, dtype=float)
    # fields: doubling build, bit i adds the i-th (more significant) block
    for i in range(n):
        E = np.concatenate([E + h[i], E - h[i]])
    if len(edges):
        index = np.arange(1 << n, dtype=np.int64)
        for (u, v), c in zip(edges, J):
            if c != 0:
                E += c * (1 - 2 * (((index >> u) ^ (index >> v)) & 1))
    return E


def energy_table(params: IsingParams) -> np.ndarray:
    return diagonal_energy(params.n, params.edges, params.h, params.J)


def norm_bounds(params: IsingParams) -> NormBounds:
    sh = float(np.abs(params.h).sum())
    sj = float(np.abs(params.J).sum())
    return NormBounds(sh + sj, 2 * sh + 4 * sj)


def exact_HI_norm(params: IsingParams) -> float:
    """||H_I|| = max |E(z)|, since H_I is diagonal."""
    if params.n > EXACT_HI_LIMIT:
        raise ValueError(f"exact norm refused for n={params.n} > {EXACT_HI_LIMIT}")
    return float(np.max(np.abs(energy_table(params))))


def commutator_matrix(params: IsingParams) -> np.ndarray:
    """Dense real matrix of [H_X, H_I]; entries E(w) - E(z) between neighbours."""
    n = params.n
    E = energy_table(params)
    dim = 1 << n
    C = np.zeros((dim, dim))
    rows = np.arange(dim)
    for i in range(n):
        cols = rows ^ (1 << i)
        C[rows, cols] = E[cols] - E[rows]
    return C


def exact_commutator_norm(params: IsingParams) -> float:
    """K = ||[H_X, H_I]|| from the dense 2^n x 2^n matrix."""
    if params.n > EXACT_K_LIMIT:
        raise ValueError(f"dense commutator refused for n={params.n} > {EXACT_K_LIMIT}")
    C = commutator_matrix(params)
    # C is real antisymmetric: ||C||^2 is the top eigenvalue of C^T C
    lam = np.linalg.eigvalsh(C.T @ C)
    return float(math.sqrt(max(lam[-1], 0.0)))


def with_exact_norms(params: IsingParams) -> NormBounds:
    nb = norm_bounds(params)
    hi = exact_HI_norm(params) if params.n <= EXACT_HI_LIMIT else None
    k = exact_commutator_norm(params) if params.n <= EXACT_K_LIMIT else None
    return NormBounds(nb.HI_bound, nb.K_bound, hi, k)


def snap_angles(angles) -> tuple[np.ndarray, np.ndarray, float]:
    """Snap angles to the nearest k pi/8 modulo pi; ties go to the smaller k.

    Returns snapped angles in [0, pi), the grid indices k in 0..7 and the
    largest absolute rounding residual.
    """
    a = np.mod(np.asarray(angles, dtype=float), math.pi)
    r = a / GRID_STEP
    k = np.ceil(r - 0.5).astype(int)
    resid = np.abs(a - k * GRID_STEP)
    k = k % 8
    max_res = float(resid.max()) if resid.size else 0.0
    return k * GRID_STEP, k, max_res


def snap_to_grid(params: IsingParams, beta: float) -> AngleAssignment:
    if not beta > 0:
        raise ValueError("beta must be positive")
    sh, kh, rh = snap_angles(beta * params.h)
    sj, kj, rj = snap_angles(beta * params.J)
    return AngleAssignment(sh, sj, kh, kj, max(rh, rj))


def from_angles(graph, scaled_h, scaled_J, beta: float) -> IsingParams:
    """Physical coefficients realising the given angles at late action ``beta``."""
    h = np.asarray(scaled_h, dtype=float) / beta
    J = np.asarray(scaled_J, dtype=float) / beta
    cap = max(math.pi, float(np.abs(h).max(initial=0.0)), float(np.abs(J).max(initial=0.0)))
    return IsingParams(graph, h, J, cap, cap)


def graph_state_calibration(graph, beta: float) -> IsingParams:
    """h = 0 and beta J = pi/4 on every edge of ``graph``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return from_angles(graph, np.zeros(graph.n), np.full(len(graph.edges), math.pi / 4), beta)


def perturbation_bound(dh, dJ) -> float:
    """Sum of |dh_i| + |dJ_ij|, an upper bound on ||dH|| and on the unitary error."""
    return float(np.abs(np.asarray(dh, dtype=float)).sum() + np.abs(np.asarray(dJ, dtype=float)).sum())
