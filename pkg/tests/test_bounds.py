import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm
from scipy.optimize import brentq

from dadqc.bounds import (
    BoundReport,
    driver_matrix,
    duhamel_check,
    interaction_hamiltonian,
    interaction_picture_check,
    is_unitary,
    ising_matrix,
    lemma1_check,
    perturbation_check,
    spectral_norm,
    tilde_U,
    tv_distance,
    x_rotation_matrix,
)
from dadqc.graphs import InteractionGraph, build_complete, find_d_factor
from dadqc.ising import IsingParams, graph_state_calibration, with_exact_norms
from dadqc.schedule import SigmoidSchedule, integrals, solve_mu
from conftest import grid_params, random_params
from oracles import X, Y, Z, dense_driver, dense_ising, dense_propagator, pauli_string_matrix

SCHED = SigmoidSchedule(1.0, 1.0, 4.0, 1.0, 0.4)
ONE = InteractionGraph(1, (), 0, None)


def test_dense_operators_match_oracle():
    p = random_params(4, 3, 0)
    assert np.allclose(driver_matrix(4), dense_driver(4))
    assert np.allclose(ising_matrix(p), dense_ising(4, p.edges, p.h, p.J))
    assert np.allclose(x_rotation_matrix(4, 0.3), expm(-0.3j * dense_driver(4)), atol=1e-13)
    with pytest.raises(ValueError):
        driver_matrix(11)


@pytest.mark.parametrize("op, expected", [(np.eye(4), 1.0), (np.kron(np.eye(2), Y), 1.0),
                                          (np.diag([3.0, -5.0]), 5.0), (np.zeros((3, 3)), 0.0)])
@pytest.mark.parametrize("method", ["svd", "power"])
def test_spectral_norm_examples(op, expected, method):
    assert spectral_norm(op, method) == pytest.approx(expected, rel=1e-10, abs=1e-15)


def test_spectral_norm_power_fallback_and_errors():
    M = np.random.default_rng(0).normal(size=(16, 16))
    assert spectral_norm(M, "power", max_iter=2) == pytest.approx(np.linalg.norm(M, 2), rel=1e-12)
    assert spectral_norm(M, "power") == pytest.approx(np.linalg.norm(M, 2), rel=1e-9)
    with pytest.raises(ValueError):
        spectral_norm(M, "qr")
    with pytest.raises(ValueError):
        spectral_norm(np.ones(3))


def test_tv_examples():
    assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0
    assert tv_distance([1, 0, 0], [0, 0, 1]) == 1
    assert tv_distance([0.5, 0.5], [1, 0]) == 0.5
    with pytest.raises(ValueError):
        tv_distance([1, 0], [1, 0, 0])


@given(st.integers(0, 10**6))
def test_tv_is_metric(seed):
    rng = np.random.default_rng(seed)
    P, Q, R = (x / x.sum() for x in rng.random((3, 8)))
    assert tv_distance(P, Q) == pytest.approx(tv_distance(Q, P))
    assert tv_distance(P, R) <= tv_distance(P, Q) + tv_distance(Q, R) + 1e-15
    assert tv_distance(P, P) == 0
    assert 0 <= tv_distance(P, Q) <= 1


def test_interaction_hamiltonian_single_qubit():
    p = IsingParams(ONE, [1.0], [])
    assert np.allclose(interaction_hamiltonian(p, SCHED, 0.0), Z)
    t = brentq(lambda t: float(SCHED.alpha(t)) - math.pi / 4, 0.0, SCHED.T)
    assert np.allclose(interaction_hamiltonian(p, SCHED, t), Y, atol=1e-10)


def test_interaction_hamiltonian_spectrum():
    p = random_params(4, 3, 1)
    H = interaction_hamiltonian(p, SCHED, 2.7)
    assert np.allclose(H, H.conj().T)
    assert np.allclose(np.linalg.eigvalsh(H), np.sort(np.diag(ising_matrix(p)).real), atol=1e-12)


def test_tilde_U_special_cases():
    p = random_params(4, 3, 2)
    assert np.allclose(tilde_U(p, SigmoidSchedule(1.0, 0.0, 4.0, 1.0, 0.4)), np.eye(16))
    sc = SigmoidSchedule(0.0, 1.0, 4.0, 1.0, 0.4)
    ref = expm(-1j * float(sc.int_B(0, sc.T)) * ising_matrix(p))
    assert np.max(np.abs(tilde_U(p, sc) - ref)) < 1e-13


@pytest.mark.parametrize("n, d, seed", [(2, 1, 0), (3, 2, 1)])
def test_interaction_picture_against_dense_ode(n, d, seed):
    p = random_params(n, d, seed)
    U = dense_propagator(n, p.edges, p.h, p.J, SCHED.evaluate, SCHED.T)
    S = x_rotation_matrix(n, integrals(SCHED).alpha_T)
    Ut = tilde_U(p, SCHED)
    assert is_unitary(Ut)
    assert spectral_norm(S @ Ut - U) < 1e-6


@pytest.mark.parametrize("n, d, seed", [(4, 3, 0), (6, 3, 1)])
def test_interaction_picture_check(n, d, seed):
    rep = interaction_picture_check(random_params(n, d, seed), SCHED.with_mu(0.1))
    assert rep.holds() and rep.lhs < 1e-6


def test_duhamel_zero_params():
    rep = duhamel_check(IsingParams.zero(random_params(4, 3, 0).graph), SCHED)
    assert rep.lhs < 1e-15 and rep.rhs == 0 and rep.holds()


def test_duhamel_sharp_window():
    sc = SigmoidSchedule(1.0, 1.0, 4.0, 1.0, 1e-5)
    rep = duhamel_check(random_params(4, 3, 3), sc)
    assert rep.lhs < 1e-3 and rep.holds()
    loose = next(p for p in rep.parts if p.check == "duhamel_closed_form_bounds")
    assert loose.rhs >= rep.rhs


@pytest.mark.parametrize("seed", range(3))
def test_duhamel_generic(seed):
    sc = SigmoidSchedule(1.0, 1.0, 4.0, 1.0, 0.05 * 4.0)
    rep = duhamel_check(random_params(6, 3, seed), sc)
    assert rep.holds(), rep.rows()
    assert rep.slack >= 0
    assert {p.check for p in rep.parts} == {"duhamel_early", "duhamel_late", "interaction_drift",
                                            "duhamel_closed_form_bounds"}
    assert rep.context["norms"] == "exact"


def test_lemma1_zero_params():
    rep = lemma1_check(IsingParams.zero(random_params(4, 3, 0).graph), SCHED)
    assert rep.lhs < 1e-12 and rep.holds()


def test_lemma1_graph_state_budget():
    g = find_d_factor(build_complete(4), 3)
    base = SigmoidSchedule(1.0, 1.0, 10.0, 2.0, 1.0)
    # angle-Hamiltonian norms: beta H_I has J = pi/4
    angle = IsingParams(g, np.zeros(4), np.full(6, math.pi / 4))
    nb = with_exact_norms(angle)
    mu = solve_mu(0.2, nb.HI_exact, nb.K_exact, base, scaled=True)
    sc = base.with_mu(mu)
    p = graph_state_calibration(g, integrals(sc).beta)
    rep = lemma1_check(p, sc, np.random.default_rng(0).uniform(0, 6, 4))
    assert rep.holds() and rep.lhs <= 0.1 and rep.rhs <= 0.1 + 1e-9
    assert {p.check for p in rep.parts} == {"data_processing_state", "lemma1_state",
                                            "data_processing_operator", "lemma1_operator"}


def test_lemma1_scaling_in_mu():
    p = grid_params(4, 3, 5, 2.0)
    r1 = lemma1_check(p, SCHED.with_mu(0.1))
    r2 = lemma1_check(p, SCHED.with_mu(0.01))
    assert r1.holds() and r2.holds()
    assert r1.rhs / r2.rhs == pytest.approx(10, rel=0.1)


def test_perturbation_examples():
    p = IsingParams(ONE, [0.4], [])
    zero = perturbation_check(p, [0.0], [])
    assert zero.lhs == 0 and zero.holds()
    rep = perturbation_check(p, [0.1], [])
    assert rep.lhs == pytest.approx(2 * math.sin(0.05), rel=1e-12)
    assert rep.rhs == pytest.approx(0.1) and rep.holds()


def test_perturbation_cycle_uniform():
    # interaction graphs are regular, so the 4-cycle stands in for a path
    g = InteractionGraph(4, ((0, 1), (1, 2), (2, 3), (0, 3)), 2, None)
    p = IsingParams(g, [0.3, -0.2, 0.5, 0.1], [0.4, -0.6, 0.2, 0.7])
    rng = np.random.default_rng(1)
    dh = 0.02 * rng.choice([-1, 1], 4)
    dJ = 0.02 * rng.choice([-1, 1], len(p.edges))
    rep = perturbation_check(p, dh, dJ, beta=1.5)
    assert rep.holds()
    uniform = next(r for r in rep.parts if r.check == "perturbation_uniform")
    assert uniform.rhs == pytest.approx((4 + len(p.edges)) * 0.02)
    with pytest.raises(ValueError):
        perturbation_check(p, dh[:3], dJ)


def test_bound_report_rows():
    inner = BoundReport("inner", 1.0, 0.5)
    rep = BoundReport("outer", 0.1, 0.2, {"n": 2}, (inner,))
    assert not rep.holds() and rep.worst_slack() == -0.5
    rows = rep.rows()
    assert [r["check"] for r in rows] == ["outer", "inner"]
    assert set(rows[0]) == {"check", "lhs", "rhs", "slack", "instance"}
    assert rep.to_dict()["parts"][0]["slack"] == -0.5
