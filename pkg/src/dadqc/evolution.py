"""Statevector simulation of the digital-analog-digital pipeline.

States are complex arrays whose axis 0 has length 2^n; any trailing axes are
carried along, so a batch of columns (e.g. the identity) evolves into a dense
propagator. Bit i of the index is qubit i.

The analog block ``T exp(-i int (A H_X + B H_I) dt)`` is integrated by
symmetric (Strang) splitting: each step applies half the driver action, the
full Ising phase, then the other half. Every coefficient is an exact
sub-integral of the schedule, and consecutive half-steps of the driver are
merged. The driver is diagonal in the Hadamard frame, where
``exp(-i a H_X) = W exp(-i a sum Z_i) W``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceError
from .ising import IsingParams, diagonal_energy, energy_table
from .iqp import hadamard_all
from .schedule import SigmoidSchedule, integrals

MAX_STEPS = 1 << 22
FULL_DISTRIBUTION_LIMIT = 24


@dataclass(frozen=True)
class EvolutionConfig:
    steps: int = 4096
    tolerance: float = 1e-8
    adaptive: bool = False
    mesh: str = "uniform"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.mesh not in ("uniform", "window"):
            raise ValueError(f"unknown mesh {self.mesh!r}")


def num_qubits(state) -> int:
    N = np.shape(state)[0]
    n = N.bit_length() - 1
    if N != 1 << n:
        raise ValueError(f"state length {N} is not a power of two")
    return n


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    return psi


def _bcast(diag, psi):
    return diag.reshape(diag.shape + (1,) * (psi.ndim - 1))


def _total_spin(n: int) -> np.ndarray:
    # sum_i z_i(x) = n - 2 popcount(x)
    pop = np.zeros(1, dtype=float)
    for _ in range(n):
        pop = np.concatenate([pop, pop + 1])
    return n - 2 * pop


def apply_global_x_rotation(state, angle: float) -> np.ndarray:
    """Apply exp(-i angle X) to every qubit."""
    psi = np.array(state, dtype=complex, copy=True)
    n = num_qubits(psi)
    c, s = math.cos(angle), math.sin(angle)
    tail = psi.shape[1:]
    for i in range(n):
        v = psi.reshape(1 << (n - 1 - i), 2, 1 << i, *tail)
        a0 = v[:, 0].copy()
        v[:, 0] = c * a0 - 1j * s * v[:, 1]
        v[:, 1] = c * v[:, 1] - 1j * s * a0
    return psi


def apply_hadamard_all(state) -> np.ndarray:
    return hadamard_all(np.asarray(state, dtype=complex))


def apply_diagonal_phase(state, params: IsingParams, scale: float, energies=None) -> np.ndarray:
    """Multiply amplitude z by exp(-i scale E(z))."""
    psi = np.asarray(state, dtype=complex)
    if num_qubits(psi) != params.n:
        raise ValueError(f"state has {num_qubits(psi)} qubits, params have {params.n}")
    E = energy_table(params) if energies is None else energies
    return psi * _bcast(np.exp(-1j * scale * E), psi)


def apply_measurement_layer(state, theta) -> np.ndarray:
    """U_R = (x)_i W R_Z(theta_i), with R_Z(t) = exp(-i t Z / 2)."""
    psi = np.asarray(state, dtype=complex)
    n = num_qubits(psi)
    theta = np.asarray(theta, dtype=float)
    if theta.size != n:
        raise ValueError("theta length does not match the state")
    phase = diagonal_energy(n, (), theta / 2, ())
    return hadamard_all(psi * _bcast(np.exp(-1j * phase), psi))


def time_grid(schedule: SigmoidSchedule, t0: float, t1: float, steps: int, mesh: str = "uniform") -> np.ndarray:
    """Step boundaries on [t0, t1].

    ``"window"`` is the smooth map whose node density is half uniform and half
    proportional to sech^2((t - t_switch) / (2 mu)), so steps resolve the
    sigmoid transition however narrow it is.
    """
    if mesh == "uniform":
        return np.linspace(t0, t1, steps + 1)
    width = 2.0 * schedule.mu
    g0 = math.tanh((t0 - schedule.t_switch) / width)
    g1 = math.tanh((t1 - schedule.t_switch) / width)
    if g1 - g0 < 1e-12:
        return np.linspace(t0, t1, steps + 1)
    tau = np.linspace(0.0, 1.0, steps + 1)

    def G(t):
        return 0.5 * (t - t0) / (t1 - t0) + 0.5 * (np.tanh((t - schedule.t_switch) / width) - g0) / (g1 - g0)

    lo = np.full_like(tau, t0)
    hi = np.full_like(tau, t1)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = G(mid) < tau
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    t = 0.5 * (lo + hi)
    t[0], t[-1] = t0, t1
    return t


def _step_actions(schedule: SigmoidSchedule, grid: np.ndarray):
    t0, t1 = grid[:-1], grid[1:]
    mid = 0.5 * (t0 + t1)
    a_first = schedule.int_A(t0, mid)
    a_second = schedule.int_A(mid, t1)
    b = schedule.int_B(t0, t1)
    # merged driver actions: X(a''_k) X(a'_{k+1}) = X(a''_k + a'_{k+1})
    a_merged = a_first.copy()
    a_merged[1:] += a_second[:-1]
    return a_merged, float(a_second[-1]), b


@njit(cache=True)
def _rotate_x(psi, angle):
    N, K = psi.shape
    c = math.cos(angle)
    ms = -1j * math.sin(angle)
    step = 1
    while step < N:
        for base in range(0, N, 2 * step):
            for j in range(base, base + step):
                for col in range(K):
                    a0 = psi[j, col]
                    a1 = psi[j + step, col]
                    psi[j, col] = c * a0 + ms * a1
                    psi[j + step, col] = ms * a0 + c * a1
        step *= 2


@njit(cache=True)
def _strang_kernel(psi, a_merged, a_last, b, E):
    N, K = psi.shape
    for k in range(b.size):
        _rotate_x(psi, a_merged[k])
        bk = b[k]
        for z in range(N):
            ph = complex(math.cos(bk * E[z]), -math.sin(bk * E[z]))
            for col in range(K):
                psi[z, col] *= ph
    _rotate_x(psi, a_last)


def _strang_numpy(psi, a_merged, a_last, b, E):
    n = num_qubits(psi)
    M = _bcast(_total_spin(n), psi)
    E = _bcast(E, psi)
    phi = hadamard_all(psi)
    for ak, bk in zip(a_merged.tolist(), b.tolist()):
        phi = phi * np.exp(-1j * ak * M)
        out = hadamard_all(phi)
        out *= np.exp(-1j * bk * E)
        phi = hadamard_all(out)
    phi = phi * np.exp(-1j * a_last * M)
    return hadamard_all(phi)


def strang_propagate(psi, schedule: SigmoidSchedule, energies: np.ndarray, grid: np.ndarray,
                     backend: str = "compiled") -> np.ndarray:
    """Strang-split evolution of ``psi`` across the step boundaries ``grid``.

    ``backend="compiled"`` runs the per-qubit rotation loop under numba;
    ``"hadamard"`` is a pure numpy route through the Hadamard frame.
    """
    psi = np.asarray(psi, dtype=complex)
    num_qubits(psi)
    a_merged, a_last, b = _step_actions(schedule, grid)
    E = np.ascontiguousarray(energies, dtype=float)
    if backend == "hadamard":
        return _strang_numpy(psi, a_merged, a_last, b, E)
    if backend != "compiled":
        raise ValueError(f"unknown backend {backend!r}")
    return apply_rotation_phase_sequence(psi, a_merged, a_last, b, E)


def apply_rotation_phase_sequence(psi, rotations, final_rotation: float, phases, energies) -> np.ndarray:
    """Apply ``X(final) prod_k [D(phases[k]) X(rotations[k])]`` (k = 0 acts first).

    X(a) is exp(-i a X) on every qubit and D(b) multiplies amplitude z by
    exp(-i b E(z)).
    """
    psi = np.asarray(psi, dtype=complex)
    rotations = np.ascontiguousarray(rotations, dtype=float)
    phases = np.ascontiguousarray(phases, dtype=float)
    if rotations.shape != phases.shape:
        raise ValueError("rotations and phases must have equal length")
    work = np.array(psi.reshape(psi.shape[0], -1), dtype=complex, order="C", copy=True)
    _strang_kernel(work, rotations, float(final_rotation), phases, np.ascontiguousarray(energies, dtype=float))
    return work.reshape(psi.shape)


def _flat_norm(a) -> float:
    return float(np.linalg.norm(np.ravel(a)))


def refine(run, steps: int, tolerance: float, max_steps: int = MAX_STEPS, norm=_flat_norm):
    """Double ``steps`` until successive ``run(steps)`` results differ by < tolerance.

    Returns ``(result, steps)``. The default difference is the 2-norm of the
    flattened arrays, which bounds the operator 2-norm for batched columns.
    """
    prev = run(steps)
    while steps < max_steps:
        steps *= 2
        cur = run(steps)
        if norm(cur - prev) < tolerance:
            return cur, steps
        prev = cur
    raise ConvergenceError(f"no convergence below {tolerance} at {steps} steps", last=prev)


def evolve_analog(state, schedule: SigmoidSchedule, params: IsingParams,
                  config: EvolutionConfig = EvolutionConfig(), *, return_steps: bool = False):
    """Apply the analog block U_A(T) to ``state``."""
    psi = np.asarray(state, dtype=complex)
    if num_qubits(psi) != params.n:
        raise ValueError("state and params disagree on qubit count")
    E = energy_table(params)

    def run(steps):
        grid = time_grid(schedule, 0.0, schedule.T, steps, config.mesh)
        return strang_propagate(psi, schedule, E, grid)

    if config.adaptive:
        out, steps = refine(run, config.steps, config.tolerance)
    else:
        out, steps = run(config.steps), config.steps
    return (out, steps) if return_steps else out


def prepare_left_layer(state, schedule: SigmoidSchedule) -> np.ndarray:
    """U_L = S^dagger W^n with S = exp(-i alpha(T) H_X)."""
    alpha_T = integrals(schedule).alpha_T
    return apply_global_x_rotation(apply_hadamard_all(state), -alpha_T)


def dadqc_state(params: IsingParams, schedule: SigmoidSchedule, theta=None,
                config: EvolutionConfig = EvolutionConfig(), state=None, *, return_steps: bool = False):
    """Final state U_R U_A(T) U_L |0^n> (or applied to ``state``).

    ``theta`` defaults to zeros, giving U_R = W^n.
    """
    n = params.n
    if theta is None:
        theta = np.zeros(n)
    psi = zero_state(n) if state is None else np.asarray(state, dtype=complex)
    psi = prepare_left_layer(psi, schedule)
    psi, steps = evolve_analog(psi, schedule, params, config, return_steps=True)
    psi = apply_measurement_layer(psi, theta)
    return (psi, steps) if return_steps else psi


def dadqc_run(params: IsingParams, schedule: SigmoidSchedule, theta=None,
              config: EvolutionConfig = EvolutionConfig()) -> np.ndarray:
    """Output distribution of the device on |0^n>."""
    if params.n > FULL_DISTRIBUTION_LIMIT:
        raise ValueError(f"full distribution refused for n={params.n}")
    psi = dadqc_state(params, schedule, theta, config)
    return psi.real**2 + psi.imag**2


def dadqc_unitary(params: IsingParams, schedule: SigmoidSchedule, theta=None,
                  config: EvolutionConfig = EvolutionConfig()) -> np.ndarray:
    """Dense U'_tot = U_R U_A(T) U_L, evolved column by column in one batch."""
    eye = np.eye(1 << params.n, dtype=complex)
    return dadqc_state(params, schedule, theta, config, state=eye)


def sample_bitstrings(dist, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` basis indices i.i.d. from ``dist`` by inverse CDF.

    Uses the counter-based Philox generator, so a seed fixes the sequence.
    """
    p = np.asarray(dist, dtype=float)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u = np.random.Generator(np.random.Philox(seed)).random(count)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, p.size - 1)


def format_bitstring(index: int, n: int) -> str:
    """Bits of ``index`` with qubit 0 first (most significant qubit last)."""
    return "".join("1" if (int(index) >> i) & 1 else "0" for i in range(n))


def random_angles(n: int, rng: np.random.Generator) -> np.ndarray:
    """Measurement angles i.i.d. uniform on [0, 2 pi)."""
    return rng.uniform(0.0, 2.0 * math.pi, n)
