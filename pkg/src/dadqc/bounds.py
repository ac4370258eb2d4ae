"""Dense small-n checks of the analytic error bounds.

Every check returns a :class:`BoundReport` holding the measured left-hand
side, the analytic right-hand side and their difference. Sub-bounds that make
up a chain are attached as ``parts``.

Interaction-picture objects: with G_X(a) = exp(-i a H_X) and alpha(t) the
accumulated driver action,

    H~_I(t) = G_X(-alpha(t)) H_I G_X(alpha(t)),
    U~(t)   = T exp(-i int_0^t B H~_I dt),   U_A(T) = G_X(alpha(T)) U~(T).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .evolution import (
    EvolutionConfig,
    MAX_STEPS,
    apply_global_x_rotation,
    apply_measurement_layer,
    apply_rotation_phase_sequence,
    dadqc_run,
    dadqc_state,
    dadqc_unitary,
    evolve_analog,
    refine,
    time_grid,
    zero_state,
)
from .iqp import equivalent_iqp_for_dadqc, hadamard_all, iqp_distribution
from .ising import IsingParams, energy_table, with_exact_norms
from .schedule import SigmoidSchedule, delta_alpha_bound, eta_bound, integrals

DENSE_LIMIT = 10
PROPAGATOR_LIMIT = 8
OPERATOR_CHAIN_LIMIT = 6
SLACK_TOLERANCE = 1e-8
DRIFT_SAMPLES = 9
# early and drift bounds can be tight to ~1e-5, so the propagator is refined
# well below the reporting tolerance
PROPAGATOR_CONFIG = EvolutionConfig(steps=256, tolerance=1e-9, mesh="window")


@dataclass(frozen=True)
class BoundReport:
    check: str
    lhs: float
    rhs: float
    context: dict = field(default_factory=dict)
    parts: tuple = ()

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def holds(self, tol: float = SLACK_TOLERANCE) -> bool:
        return self.slack >= -tol and all(p.holds(tol) for p in self.parts)

    def worst_slack(self) -> float:
        return min([self.slack] + [p.worst_slack() for p in self.parts])

    def rows(self) -> list[dict]:
        """Flattened JSON-ready rows {check, lhs, rhs, slack, instance}."""
        out = [{"check": self.check, "lhs": self.lhs, "rhs": self.rhs,
                "slack": self.slack, "instance": self.context}]
        for p in self.parts:
            out.extend(p.rows())
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["slack"] = self.slack
        d["parts"] = [p.to_dict() for p in self.parts]
        return d


def _dense_guard(n: int, limit: int, what: str):
    if n > limit:
        raise ValueError(f"{what} refused for n={n} > {limit}")


# -- dense operators ---------------------------------------------------------

def driver_matrix(n: int) -> np.ndarray:
    """H_X = sum_i X_i as a dense real matrix."""
    _dense_guard(n, DENSE_LIMIT, "dense H_X")
    dim = 1 << n
    H = np.zeros((dim, dim))
    rows = np.arange(dim)
    for i in range(n):
        H[rows, rows ^ (1 << i)] = 1.0
    return H


def x_rotation_matrix(n: int, angle: float) -> np.ndarray:
    """G_X(angle) = exp(-i angle H_X) = (x)_j exp(-i angle X_j)."""
    _dense_guard(n, DENSE_LIMIT, "dense G_X")
    return apply_global_x_rotation(np.eye(1 << n, dtype=complex), angle)


def ising_matrix(params: IsingParams) -> np.ndarray:
    _dense_guard(params.n, DENSE_LIMIT, "dense H_I")
    return np.diag(energy_table(params)).astype(complex)


def is_unitary(U: np.ndarray, tol: float = 1e-10) -> bool:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))) < tol


def spectral_norm(op, method: str = "svd", rtol: float = 1e-10, max_iter: int = 20000) -> float:
    """Largest singular value.

    ``method="power"`` iterates on M^dagger M from a fixed start vector until
    the Rayleigh quotient settles to ``rtol``; if it has not after
    ``max_iter`` iterations the full decomposition is used instead.
    """
    M = np.asarray(op)
    if M.ndim != 2:
        raise ValueError("operator must be a 2-d array")
    if M.size == 0:
        return 0.0
    if method == "svd":
        return float(np.linalg.norm(M, 2))
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    A = M.conj().T @ M
    v = np.random.default_rng(0).standard_normal(A.shape[0]).astype(A.dtype)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        new = float(np.real(np.vdot(v, w)))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(new - lam) <= rtol * abs(new):
            return math.sqrt(max(new, 0.0))
        lam = new
    return float(np.linalg.norm(M, 2))


def tv_distance(P, Q) -> float:
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise ValueError(f"distribution sizes differ: {P.shape} vs {Q.shape}")
    return 0.5 * float(np.abs(P - Q).sum())


# -- interaction picture -----------------------------------------------------

def interaction_hamiltonian(params: IsingParams, schedule: SigmoidSchedule, t: float) -> np.ndarray:
    """Dense H~_I(t) = G_X(-alpha(t)) H_I G_X(alpha(t))."""
    n = params.n
    _dense_guard(n, DENSE_LIMIT, "interaction Hamiltonian")
    G = x_rotation_matrix(n, float(schedule.alpha(t)))
    return G.conj().T @ ising_matrix(params) @ G


def _rotated_exponential(params: IsingParams, angle: float, action: float) -> np.ndarray:
    """exp(-i action G_X(-angle) H_I G_X(angle)) as a dense matrix."""
    n = params.n
    E = energy_table(params)
    eye = np.eye(1 << n, dtype=complex)
    return apply_rotation_phase_sequence(eye, np.array([angle]), -angle, np.array([action]), E)


def tilde_propagator(params: IsingParams, schedule: SigmoidSchedule, t0: float, t1: float,
                     config: EvolutionConfig = PROPAGATOR_CONFIG,
                     *, return_steps: bool = False):
    """Time-ordered U~ from t0 to t1 by midpoint exponentials.

    Step k contributes exp(-i b_k H~_I(m_k)) with b_k the exact integral of B
    over the step and m_k its midpoint. Because H~_I(m) is H_I conjugated by
    G_X(alpha(m)), each factor is G_X(-a_k) D(b_k) G_X(a_k) with D diagonal,
    and adjacent rotations merge into G_X(a_{k+1} - a_k). Steps double until
    the operator 2-norm change drops below ``config.tolerance``.
    """
    n = params.n
    _dense_guard(n, PROPAGATOR_LIMIT, "dense propagator")
    if not 0 <= t0 <= t1 <= schedule.T:
        raise ValueError("need 0 <= t0 <= t1 <= T")
    E = energy_table(params)
    eye = np.eye(1 << n, dtype=complex)
    if t1 == t0 or schedule.B0 == 0 or not np.any(E):
        return (eye, 0) if return_steps else eye

    def run(steps):
        grid = time_grid(schedule, t0, t1, steps, config.mesh)
        mid = 0.5 * (grid[:-1] + grid[1:])
        a = schedule.alpha(mid)
        b = schedule.int_B(grid[:-1], grid[1:])
        rot = np.empty_like(a)
        rot[0] = a[0]
        rot[1:] = np.diff(a)
        return apply_rotation_phase_sequence(eye, rot, -a[-1], b, E)

    if schedule.A0 == 0:
        # H~_I is constant: the product is exact for any step count
        U, steps = run(1), 1
    else:
        U, steps = refine(run, config.steps, config.tolerance, MAX_STEPS, norm=spectral_norm)
    return (U, steps) if return_steps else U


def tilde_U(params: IsingParams, schedule: SigmoidSchedule,
            config: EvolutionConfig = PROPAGATOR_CONFIG) -> np.ndarray:
    """U~(T) over the whole analog block."""
    return tilde_propagator(params, schedule, 0.0, schedule.T, config)


def _context(params: IsingParams, schedule: SigmoidSchedule, **extra) -> dict:
    ctx = {
        "n": params.n,
        "m": len(params.edges),
        "graph": params.graph.hash,
        "A0": schedule.A0, "B0": schedule.B0, "T": schedule.T,
        "delta": schedule.delta, "mu": schedule.mu,
    }
    ctx.update(extra)
    return ctx


def _norms(params: IsingParams) -> tuple[float, float, str]:
    nb = with_exact_norms(params)
    if nb.K_exact is not None:
        return nb.HI_exact, nb.K_exact, "exact"
    return nb.HI_exact if nb.HI_exact is not None else nb.HI_bound, nb.K_bound, "bound"


def duhamel_check(params: IsingParams, schedule: SigmoidSchedule,
                  config: EvolutionConfig = PROPAGATOR_CONFIG,
                  drift_samples: int = DRIFT_SAMPLES) -> BoundReport:
    """||U~(T) - exp(-i beta H~_I(T))|| <= eta ||H_I|| + K beta dalpha.

    Parts: the early piece ||U~_1 - I|| <= eta ||H_I|| with U~_1 = U~(T - delta);
    the late piece ||U~_2 - exp(-i beta H~_I(T))|| <= K beta dalpha with U~_2
    the propagator over [T - delta, T]; the drift bound
    ||H~_I(T) - H~_I(t)|| <= K dalpha at sampled t in the late interval; and
    the main inequality again with the closed-form upper bounds on eta and
    dalpha in place of their exact values.
    """
    n = params.n
    _dense_guard(n, PROPAGATOR_LIMIT, "Duhamel check")
    ints = integrals(schedule)
    hi, K, norm_kind = _norms(params)
    ts = schedule.t_switch
    U1, s1 = tilde_propagator(params, schedule, 0.0, ts, config, return_steps=True)
    U2, s2 = tilde_propagator(params, schedule, ts, schedule.T, config, return_steps=True)
    U = U2 @ U1
    target = _rotated_exponential(params, ints.alpha_T, ints.beta)
    ctx = _context(params, schedule, norms=norm_kind, HI=hi, K=K, eta=ints.eta, beta=ints.beta,
                   delta_alpha=ints.delta_alpha, steps_early=s1, steps_late=s2)

    lhs = spectral_norm(U - target)
    early = BoundReport("duhamel_early", spectral_norm(U1 - np.eye(1 << n)), ints.eta * hi, ctx)
    late = BoundReport("duhamel_late", spectral_norm(U2 - target), K * ints.beta * ints.delta_alpha, ctx)

    HT = interaction_hamiltonian(params, schedule, schedule.T)
    worst = None
    for t in np.linspace(ts, schedule.T, drift_samples):
        d = spectral_norm(HT - interaction_hamiltonian(params, schedule, float(t)))
        if worst is None or d > worst[0]:
            worst = (d, float(t))
    drift = BoundReport("interaction_drift", worst[0], K * ints.delta_alpha, dict(ctx, t=worst[1]))

    loose_rhs = eta_bound(schedule) * hi + K * ints.beta * delta_alpha_bound(schedule)
    loose = BoundReport("duhamel_closed_form_bounds", lhs, loose_rhs, ctx)
    rhs = ints.eta * hi + K * ints.beta * ints.delta_alpha
    return BoundReport("duhamel", lhs, rhs, ctx, (early, late, drift, loose))


def interaction_picture_check(params: IsingParams, schedule: SigmoidSchedule,
                              config: EvolutionConfig = EvolutionConfig(steps=256, tolerance=1e-8,
                                                                       adaptive=True, mesh="window"),
                              tolerance: float = 1e-6) -> BoundReport:
    """||G_X(alpha(T)) U~(T) - U_A(T)|| against ``tolerance``; U_A from the
    Strang integrator applied to the identity."""
    n = params.n
    _dense_guard(n, OPERATOR_CHAIN_LIMIT, "interaction-picture check")
    Ut = tilde_U(params, schedule, config)
    S = x_rotation_matrix(n, integrals(schedule).alpha_T)
    UA = evolve_analog(np.eye(1 << n, dtype=complex), schedule, params, config)
    return BoundReport("interaction_picture", spectral_norm(S @ Ut - UA), tolerance,
                       _context(params, schedule))


def _iqp_state(params: IsingParams, beta: float, theta) -> np.ndarray:
    """U'_IQP |0> = U_R exp(-i beta H_I) W |0>."""
    psi = hadamard_all(zero_state(params.n))
    psi = psi * np.exp(-1j * beta * energy_table(params))
    return apply_measurement_layer(psi, theta)


def _iqp_unitary(params: IsingParams, beta: float, theta) -> np.ndarray:
    eye = np.eye(1 << params.n, dtype=complex)
    M = hadamard_all(eye)
    M = M * np.exp(-1j * beta * energy_table(params))[:, None]
    return apply_measurement_layer(M, theta)


def lemma1_check(params: IsingParams, schedule: SigmoidSchedule, theta=None,
                 config: EvolutionConfig = EvolutionConfig(steps=1024, tolerance=1e-8,
                                                          adaptive=True, mesh="window"),
                 operator_chain: bool | None = None) -> BoundReport:
    """TV(device, IQP target) <= eta ||H_I|| + K beta dalpha.

    Parts: the state-level data-processing step TV <= || |psi_dev> - |psi_IQP> ||,
    and (for n <= 6, or when asked) the operator chain
    ||psi_dev - psi_IQP|| <= ||U'_tot - U'_IQP|| <= rhs.
    """
    n = params.n
    _dense_guard(n, DENSE_LIMIT, "Lemma check")
    if theta is None:
        theta = np.zeros(n)
    theta = np.asarray(theta, dtype=float)
    ints = integrals(schedule)
    hi, K, norm_kind = _norms(params)
    rhs = ints.eta * hi + K * ints.beta * ints.delta_alpha
    ctx = _context(params, schedule, norms=norm_kind, HI=hi, K=K, beta=ints.beta)

    psi_dev, steps = dadqc_state(params, schedule, theta, config, return_steps=True)
    ctx["steps"] = steps
    P_dev = psi_dev.real**2 + psi_dev.imag**2
    P_iqp = iqp_distribution(equivalent_iqp_for_dadqc(params, ints.beta, theta))
    tv = tv_distance(P_dev, P_iqp)
    state_gap = float(np.linalg.norm(psi_dev - _iqp_state(params, ints.beta, theta)))
    parts = [BoundReport("data_processing_state", tv, state_gap, ctx),
             BoundReport("lemma1_state", state_gap, rhs, ctx)]
    if operator_chain is None:
        operator_chain = n <= OPERATOR_CHAIN_LIMIT
    if operator_chain:
        if config.adaptive:
            # the state run already located the converged step count; the
            # operator refinement restarts one doubling below it
            config = replace(config, steps=max(1, steps // 2))
        U_dev = dadqc_unitary(params, schedule, theta, config)
        op_gap = spectral_norm(U_dev - _iqp_unitary(params, ints.beta, theta))
        parts.append(BoundReport("data_processing_operator", state_gap, op_gap, ctx))
        parts.append(BoundReport("lemma1_operator", op_gap, rhs, ctx))
    return BoundReport("lemma1", tv, rhs, ctx, tuple(parts))


def perturbation_check(params: IsingParams, dh, dJ, beta: float = 1.0) -> BoundReport:
    """||exp(-i(H' + dH')) - exp(-i H')|| <= ||dH'|| for H' = beta H_I.

    ``dh`` and ``dJ`` perturb the scaled angles beta h and beta J. Parts carry
    the ledger ||dH'|| <= sum |d| <= (n + m) max |d|.
    """
    n = params.n
    _dense_guard(n, PROPAGATOR_LIMIT, "perturbation check")
    dh = np.asarray(dh, dtype=float).reshape(-1)
    dJ = np.asarray(dJ, dtype=float).reshape(-1)
    if dh.size != n or dJ.size != len(params.edges):
        raise ValueError("perturbation sizes do not match the graph")
    H = beta * energy_table(params)
    dE = IsingParams(params.graph, dh, dJ, math.inf, math.inf)
    dH = energy_table(dE)
    U0 = np.diag(np.exp(-1j * H))
    U1 = np.diag(np.exp(-1j * (H + dH)))
    lhs = spectral_norm(U1 - U0)
    exact = spectral_norm(np.diag(dH).astype(complex))
    ledger = float(np.abs(dh).sum() + np.abs(dJ).sum())
    delta_par = float(max(np.abs(dh).max(initial=0.0), np.abs(dJ).max(initial=0.0)))
    uniform = (n + len(params.edges)) * delta_par
    ctx = {"n": n, "m": len(params.edges), "graph": params.graph.hash, "beta": beta,
           "delta_par": delta_par}
    parts = (BoundReport("perturbation_ledger", exact, ledger, ctx),
             BoundReport("perturbation_uniform", ledger, uniform, ctx))
    return BoundReport("perturbation", lhs, exact, ctx, parts)


def tv_for_run(params: IsingParams, schedule: SigmoidSchedule, theta, config: EvolutionConfig) -> float:
    """TV between the simulated device and its IQP target."""
    beta = integrals(schedule).beta
    P_dev = dadqc_run(params, schedule, theta, config)
    P_iqp = iqp_distribution(equivalent_iqp_for_dadqc(params, beta, theta))
    return tv_distance(P_dev, P_iqp)


__all__ = [
    "BoundReport", "driver_matrix", "x_rotation_matrix", "ising_matrix",
    "is_unitary", "spectral_norm", "tv_distance", "interaction_hamiltonian", "tilde_propagator",
    "tilde_U", "duhamel_check", "interaction_picture_check", "lemma1_check", "perturbation_check",
    "tv_for_run",
]
