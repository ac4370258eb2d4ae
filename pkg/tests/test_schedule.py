import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dadqc.errors import ConvergenceError
from dadqc.schedule import (
    SigmoidSchedule,
    budget_terms,
    delta_alpha_bound,
    eta_bound,
    integrals,
    kappa_lower_bound,
    late_window_action,
    log_cosh,
    solve_mu,
)
from oracles import relerr, schedule_integrals_quad, schedule_value_mp

LN2 = math.log(2)
REF = SigmoidSchedule(1.0, 1.0, 10.0, 2.0, 0.5)


def fuzz_schedules():
    return st.builds(
        lambda T, fd, fm, a, b: SigmoidSchedule(a, b, T, fd * T, fm * T),
        st.floats(1, 100), st.floats(0.05, 0.95), st.floats(1e-4, 0.5),
        st.floats(0.1, 3), st.floats(0.1, 3))


@pytest.mark.parametrize("kw", [dict(T=0), dict(delta=0), dict(delta=10), dict(mu=0), dict(A0=-1)])
def test_invalid_schedule(kw):
    args = dict(A0=1.0, B0=1.0, T=10.0, delta=2.0, mu=0.5) | kw
    with pytest.raises(ValueError):
        SigmoidSchedule(**args)


def test_evaluate_endpoints():
    assert REF.evaluate(0.0) == (1.0, 0.0)
    A, B = REF.evaluate(REF.T)
    assert A == pytest.approx(0.0, abs=1e-15) and B == pytest.approx(1.0, abs=1e-15)


def test_evaluate_at_switch_matches_mpmath():
    A, B = REF.evaluate(8.0)
    Aref, Bref = schedule_value_mp(1.0, 1.0, 10.0, 2.0, 0.5, 8.0)
    assert A == pytest.approx(Aref, rel=1e-13)
    assert B == pytest.approx(Bref, rel=1e-13)
    assert A == pytest.approx(1 - (0.5 - REF.s0) / REF.kappa, rel=1e-14)


@pytest.mark.parametrize("t", [-1e-9, 10.0 + 1e-9])
def test_evaluate_domain(t):
    with pytest.raises(ValueError):
        REF.evaluate(t)


def test_evaluate_vectorised():
    t = np.linspace(0, 10, 7)
    A, B = REF.evaluate(t)
    assert A.shape == (7,) and np.allclose(A + B, 1.0)


def test_step_limit():
    ints = integrals(SigmoidSchedule(1.0, 1.0, 10.0, 2.0, 1e-6))
    assert ints.eta == pytest.approx(0.0, abs=1e-4)
    assert ints.delta_alpha == pytest.approx(0.0, abs=1e-4)
    assert ints.beta == pytest.approx(2.0, abs=1e-4)
    assert ints.kappa == pytest.approx(1.0, abs=1e-4)


def test_reference_instance_against_quadrature():
    ints = integrals(REF)
    assert ints.kappa == pytest.approx(0.5 * (math.tanh(16) + math.tanh(4)), rel=1e-15)
    ref = schedule_integrals_quad(1.0, 1.0, 10.0, 2.0, 0.5)
    got = (ints.eta, ints.beta, ints.delta_alpha, ints.kappa, ints.alpha_T)
    for g, r in zip(got, ref):
        assert relerr(g, r) < 1e-10
    assert ints.eta <= LN2 / 2 * REF.mu / ints.kappa
    assert ints.delta_alpha <= LN2 / 2 * REF.mu / ints.kappa


@given(fuzz_schedules())
def test_integrals_against_quadrature(sc):
    ints = integrals(sc)
    ref = schedule_integrals_quad(sc.A0, sc.B0, sc.T, sc.delta, sc.mu)
    got = (ints.eta, ints.beta, ints.delta_alpha, ints.kappa, ints.alpha_T)
    for g, r in zip(got, ref):
        assert relerr(g, r) < 1e-10


@given(fuzz_schedules())
def test_integral_invariants(sc):
    ints = integrals(sc)
    assert ints.eta >= 0 and ints.beta >= 0 and ints.delta_alpha >= 0
    assert 0 < ints.kappa <= 1
    assert ints.eta <= eta_bound(sc) * (1 + 1e-14)
    assert ints.delta_alpha <= delta_alpha_bound(sc) * (1 + 1e-14)
    assert ints.kappa >= kappa_lower_bound(sc) - 1e-15
    total = float(sc.int_B(0.0, sc.T))
    assert ints.eta + ints.beta == pytest.approx(total, rel=1e-12)
    assert ints.alpha_T == pytest.approx(float(sc.alpha(sc.T)), rel=1e-10, abs=1e-12)


@given(fuzz_schedules())
def test_monotone(sc):
    s = sc.s(np.linspace(0, sc.T, 1000))
    assert np.all(np.diff(s) >= 0)
    assert s[0] == 0.0 and s[-1] == pytest.approx(1.0, abs=1e-15)


def test_zero_b0_alpha():
    sc = SigmoidSchedule(2.0, 0.0, 10.0, 2.0, 0.5)
    ints = integrals(sc)
    ref = schedule_integrals_quad(2.0, 0.0, 10.0, 2.0, 0.5)
    assert ints.eta == 0 and ints.beta == 0
    assert relerr(ints.alpha_T, ref[4]) < 1e-10


def test_kappa_lower_bound_examples():
    assert kappa_lower_bound(REF) == pytest.approx(1 - 2 * math.exp(-8), rel=1e-15)
    sym = SigmoidSchedule(1.0, 1.0, 10.0, 5.0, 0.7)
    assert kappa_lower_bound(sym) == pytest.approx(1 - 2 * math.exp(-2 * 5 / 0.7))
    wide = SigmoidSchedule(1.0, 1.0, 10.0, 2.0, 10.0)
    assert kappa_lower_bound(wide) < 0
    assert 0 < wide.kappa <= 1


def test_late_window_action_range():
    y = np.linspace(0, 50, 100_001)
    f = late_window_action(y)
    assert np.all(f >= 0) and np.all(f <= LN2)
    assert np.all(np.diff(f) >= -1e-15)
    assert f[-1] == pytest.approx(LN2, abs=1e-15)
    direct = y[:2000] * np.tanh(y[:2000]) - np.log(np.cosh(y[:2000]))
    assert np.allclose(f[:2000], direct, atol=1e-14)


def test_log_cosh_no_overflow():
    u = np.array([0.0, 1.0, -3.0, 800.0, -1e5])
    out = log_cosh(u)
    assert np.all(np.isfinite(out))
    assert out[1] == pytest.approx(math.log(math.cosh(1.0)), rel=1e-15)
    assert out[3] == pytest.approx(800 - LN2, rel=1e-15)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
@pytest.mark.parametrize("hi, k", [(3.0, 10.0), (12.5, 40.0), (0.5, 0.0)])
def test_solve_mu_budget(eps, hi, k):
    mu = solve_mu(eps, hi, k, REF)
    ints = integrals(REF.with_mu(mu))
    eta_term, k_term = budget_terms(hi, k, ints)
    assert eta_term <= eps / 4 * (1 + 1e-9)
    assert k_term <= eps / 4 * (1 + 1e-9)
    # the fixed point is consistent with its defining equation
    assert mu == pytest.approx(eps * ints.kappa / (2 * LN2 * (hi + k * ints.beta)), rel=1e-10)


def test_solve_mu_scaling():
    mu1 = solve_mu(0.1, 5.0, 20.0, REF)
    mu2 = solve_mu(0.1, 10.0, 40.0, REF)
    assert mu2 == pytest.approx(mu1 / 2, rel=0.01)


def test_solve_mu_scaled_mode():
    # norms of beta*H: physical norms are hi/beta, k/beta at the converged beta
    mu = solve_mu(0.1, 2.0, 6.0, REF, scaled=True)
    ints = integrals(REF.with_mu(mu))
    hi, k = 2.0 / ints.beta, 6.0 / ints.beta
    e, kt = budget_terms(hi, k, ints)
    assert e <= 0.025 * (1 + 1e-9) and kt <= 0.025 * (1 + 1e-9)


def test_solve_mu_unconstrained_and_errors():
    assert solve_mu(0.1, 0.0, 0.0, REF) == math.inf
    with pytest.raises(ValueError):
        solve_mu(0.0, 1.0, 1.0, REF)
    with pytest.raises(ValueError):
        solve_mu(0.1, -1.0, 1.0, REF)
    with pytest.raises(ConvergenceError):
        solve_mu(0.1, 1.0, 1.0, REF, max_iter=1)
