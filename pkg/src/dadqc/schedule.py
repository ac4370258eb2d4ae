"""Sigmoid annealing schedules and their exact integrals.

The unnormalised sigmoid ``s~(t) = (1 + tanh((t - (T - delta)) / mu)) / 2`` is
shifted and rescaled to ``s(t) = (s~(t) - s~(0)) / kappa`` so that s(0) = 0 and
s(T) = 1. The driver is ``A(t) = A0 (1 - s(t))`` and the problem term is
``B(t) = B0 s(t)``. Units have hbar = 1.

All integrals are closed forms. They are written with ``softplus(v) =
ln(1 + e^v)`` and ``expit`` so that nothing overflows for tiny ``mu``: the
antiderivative of s~ is ``(mu / 2) (softplus(2u) - ln 2)`` with
``u = (t - (T - delta)) / mu``, and that of ``1 - s~`` is
``(mu / 2) (ln 2 - softplus(-2u))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .errors import ConvergenceError

LN2 = math.log(2.0)


def softplus(v):
    return np.logaddexp(0.0, v)


def log_cosh(u):
    """ln cosh u without overflow."""
    a = np.abs(u)
    return a + np.log1p(np.exp(-2.0 * a)) - LN2


def late_window_action(y):
    """f(y) = y tanh y - ln cosh y, increasing from 0 to ln 2 on y >= 0."""
    y = np.asarray(y, dtype=float)
    a = np.abs(y)
    # y tanh y - |y| = -2|y| expit(-2|y|)
    return -2.0 * a * expit(-2.0 * a) - np.log1p(np.exp(-2.0 * a)) + LN2


@dataclass(frozen=True)
class SigmoidSchedule:
    A0: float
    B0: float
    T: float
    delta: float
    mu: float

    def __post_init__(self):
        if self.A0 < 0 or self.B0 < 0:
            raise ValueError("A0 and B0 must be nonnegative")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if not 0 < self.delta < self.T:
            raise ValueError(f"delta must lie in (0, T), got delta={self.delta}, T={self.T}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")

    def with_mu(self, mu: float) -> SigmoidSchedule:
        return replace(self, mu=float(mu))

    @property
    def t_switch(self) -> float:
        return self.T - self.delta

    @property
    def x(self) -> float:
        return (self.T - self.delta) / self.mu

    @property
    def y(self) -> float:
        return self.delta / self.mu

    @property
    def kappa(self) -> float:
        return 0.5 * (math.tanh(self.x) + math.tanh(self.y))

    @property
    def s0(self) -> float:
        # s~(0) = (1 - tanh x) / 2
        return float(expit(-2.0 * self.x))

    @property
    def tail(self) -> float:
        # 1 - s~(T) = (1 - tanh y) / 2
        return float(expit(-2.0 * self.y))

    def _u(self, t):
        return (np.asarray(t, dtype=float) - self.t_switch) / self.mu

    def s_tilde(self, t):
        return expit(2.0 * self._u(t))

    def s(self, t):
        """Normalised progress s(t) in [0, 1]."""
        u = self._u(t)
        return (expit(2.0 * u) - self.s0) / self.kappa

    def one_minus_s(self, t):
        u = self._u(t)
        return (expit(-2.0 * u) - self.tail) / self.kappa

    def evaluate(self, t):
        """Return ``(A(t), B(t))``; ``t`` must lie in [0, T]."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0) or np.any(t_arr > self.T):
            raise ValueError(f"t outside [0, {self.T}]")
        A = self.A0 * self.one_minus_s(t_arr)
        B = self.B0 * self.s(t_arr)
        if np.ndim(t) == 0:
            return float(A), float(B)
        return A, B

    def int_B(self, a, b):
        """Exact integral of B over [a, b] (vectorised)."""
        ua, ub = self._u(a), self._u(b)
        ds = 0.5 * self.mu * (softplus(2.0 * ub) - softplus(2.0 * ua))
        return self.B0 / self.kappa * (ds - self.s0 * (np.asarray(b) - np.asarray(a)))

    def int_A(self, a, b):
        """Exact integral of A over [a, b] (vectorised)."""
        ua, ub = self._u(a), self._u(b)
        ds = 0.5 * self.mu * (softplus(-2.0 * ua) - softplus(-2.0 * ub))
        return self.A0 / self.kappa * (ds - self.tail * (np.asarray(b) - np.asarray(a)))

    def alpha(self, t):
        """Accumulated driver action alpha(t) = int_0^t A."""
        return self.int_A(0.0, t)


@dataclass(frozen=True)
class ScheduleIntegrals:
    eta: float
    beta: float
    delta_alpha: float
    kappa: float
    alpha_T: float


def integrals(schedule: SigmoidSchedule) -> ScheduleIntegrals:
    """Early B action eta, late B action beta, late A action, kappa and alpha(T)."""
    sc = schedule
    x, y, mu, kappa = sc.x, sc.y, sc.mu, sc.kappa
    # x - ln cosh x = ln 2 - log1p(exp(-2x)) for x >= 0
    early = 0.5 * mu * (LN2 - math.log1p(math.exp(-2.0 * x)))
    late = 0.5 * sc.delta + 0.5 * mu * float(log_cosh(y))
    eta = sc.B0 / kappa * (early - sc.s0 * (sc.T - sc.delta))
    beta = sc.B0 / kappa * (late - sc.s0 * sc.delta)
    delta_alpha = sc.A0 * mu / (2.0 * kappa) * float(late_window_action(y))
    if sc.B0 > 0:
        alpha_T = sc.A0 * sc.T - sc.A0 / sc.B0 * (eta + beta)
    else:
        alpha_T = float(sc.int_A(0.0, sc.T))
    return ScheduleIntegrals(eta, beta, delta_alpha, kappa, alpha_T)


def eta_bound(schedule: SigmoidSchedule) -> float:
    return LN2 / 2 * schedule.B0 * schedule.mu / schedule.kappa


def delta_alpha_bound(schedule: SigmoidSchedule) -> float:
    return LN2 / 2 * schedule.A0 * schedule.mu / schedule.kappa


def kappa_lower_bound(schedule: SigmoidSchedule) -> float:
    m = min(schedule.T - schedule.delta, schedule.delta)
    return 1.0 - 2.0 * math.exp(-2.0 * m / schedule.mu)


def solve_mu(
    target_eps: float,
    hi_norm: float,
    k_norm: float,
    schedule: SigmoidSchedule,
    *,
    scaled: bool = False,
    rtol: float = 1e-12,
    max_iter: int = 100,
) -> float:
    """Transition width giving ``eta ||H_I|| <= eps/4`` and ``K beta dalpha <= eps/4``.

    Iterates ``mu = eps kappa / (2 ln2 (B0 ||H_I|| + K beta A0))`` starting
    from kappa = 1, beta = B0 delta, since kappa and beta depend on mu. The
    ``mu`` of ``schedule`` is ignored.

    With ``scaled=True`` the norms are those of the angle Hamiltonian
    ``beta H_I`` (fixed angles such as beta J = pi/4), so the physical norms
    are ``hi_norm / beta`` and ``k_norm / beta`` at each iterate.

    Returns ``math.inf`` when both norms vanish: a zero Hamiltonian puts no
    constraint on mu.
    """
    if target_eps <= 0:
        raise ValueError("target_eps must be positive")
    if hi_norm < 0 or k_norm < 0:
        raise ValueError("norms must be nonnegative")
    if hi_norm == 0 and (k_norm == 0 or schedule.A0 == 0):
        return math.inf
    kappa, beta = 1.0, schedule.B0 * schedule.delta
    mu = None
    for _ in range(max_iter):
        if scaled:
            if beta <= 0:
                raise ValueError("scaled mode needs B0 > 0")
            denom = schedule.B0 * hi_norm / beta + k_norm * schedule.A0
        else:
            denom = schedule.B0 * hi_norm + k_norm * beta * schedule.A0
        if denom <= 0:
            return math.inf
        new = target_eps * kappa / (2.0 * LN2 * denom)
        if mu is not None and abs(new - mu) <= rtol * abs(mu):
            return new
        mu = new
        ints = integrals(schedule.with_mu(mu))
        kappa, beta = ints.kappa, ints.beta
    raise ConvergenceError(f"solve_mu did not converge in {max_iter} iterations", last=mu)


def budget_terms(hi_norm: float, k_norm: float, ints: ScheduleIntegrals) -> tuple[float, float]:
    """The two pieces ``eta ||H_I||`` and ``K beta dalpha`` of the TV budget."""
    return ints.eta * hi_norm, k_norm * ints.beta * ints.delta_alpha
