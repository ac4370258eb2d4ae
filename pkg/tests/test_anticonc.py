import json
import math
from pathlib import Path

import numpy as np
import pytest

from dadqc.anticonc import (
    EnsembleConfig,
    SweepRow,
    calibrated_schedule,
    collect,
    first_moment,
    fit_slope,
    holm_pass,
    instance_circuit,
    mean_se,
    paired_equality_tests,
    paley_zygmund_fraction,
    probe_strings,
    product_state_m2,
    pz_report,
    run_supremacy_instance,
    sample_instance,
    second_moment,
    second_moment_sweep,
)
from dadqc.graphs import build_circulant, build_complete
from dadqc.iqp import iqp_distribution
from dadqc.schedule import SigmoidSchedule, integrals
from oracles import all_perfect_d_factors_bruteforce, exact_mean_m2

# exact ensemble averages, frozen from the independent oracle in oracles.exact_mean_m2
M2_K6_D3 = 803 / 448
M2_K4_D3 = 41 / 16
# K8: the 19355 labeled cubic graphs fall into 6 isomorphism classes with
# multiplicities (35, 2520, 10080, 3360, 840, 2520) and per-graph averages
# (1681, 721, 497, 545, 529, 465) / 256, the first class being K4 + K4
M2_K8_D3 = 42175 / 20224
BASE = SigmoidSchedule(1.0, 1.0, 10.0, 2.0, 1.0)


def test_frozen_oracles():
    assert exact_mean_m2(6, all_perfect_d_factors_bruteforce(6, 3)) == pytest.approx(M2_K6_D3, rel=1e-13)
    assert exact_mean_m2(4, all_perfect_d_factors_bruteforce(4, 3)) == pytest.approx(M2_K4_D3, rel=1e-13)


def test_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(build_complete(6), 3, 0)
    with pytest.raises(ValueError):
        EnsembleConfig(build_complete(6), 6, 10)
    with pytest.raises(ValueError, match="simulable"):
        EnsembleConfig(build_complete(6), 2, 10, supremacy=True)
    with pytest.raises(ValueError):
        EnsembleConfig(build_complete(4), 3, 10, fixed_v=(0.0, 0.0))
    with pytest.raises(ValueError):
        EnsembleConfig(build_complete(4), 3, 10, target_s=16)


def test_probe_strings_distinct():
    for n in (2, 3, 6):
        for t in (0, 1, (1 << n) - 1):
            s = probe_strings(n, t)
            assert s[0] == t and len(set(s)) == len(s) and len(s) >= 2


def test_sample_instance():
    cfg = EnsembleConfig(build_complete(4), 3, 10, seed=3)
    g0, t0 = sample_instance(cfg, 0)
    g1, t1 = sample_instance(cfg, 1)
    assert g0.edges == g1.edges == build_complete(4).edges
    assert not np.allclose(t0, t1)
    g0b, t0b = sample_instance(cfg, 0)
    assert g0b.edges == g0.edges and np.array_equal(t0, t0b)
    assert np.all((0 <= t0) & (t0 < 2 * math.pi))


def test_theta_deciles_uniform():
    cfg = EnsembleConfig(build_complete(4), 3, 25_000, seed=11)
    theta = np.concatenate([sample_instance(cfg, k)[1] for k in range(cfg.instances)])
    counts = np.histogram(theta, bins=10, range=(0, 2 * math.pi))[0]
    expected = theta.size / 10
    assert np.all(np.abs(counts - expected) <= 5 * math.sqrt(expected * 0.9))


def test_instance_distribution_normalised():
    cfg = EnsembleConfig(build_complete(6), 3, 5, seed=0)
    for k in range(5):
        assert iqp_distribution(instance_circuit(cfg, *sample_instance(cfg, k))).sum() == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("n", [4, 6])
def test_first_moment(n):
    rep = first_moment(EnsembleConfig(build_complete(n), 3, 4000, seed=21))
    assert rep.passed, rep.details
    assert abs(rep.mean_p - 2.0**-n) <= 4 * rep.mean_p_se


def test_second_moment_matches_exact():
    rep = second_moment(EnsembleConfig(build_complete(6), 3, 4000, seed=5))
    assert abs(rep.m2_mean - M2_K6_D3) <= 4 * rep.m2_se
    assert rep.passed, rep.details
    rep4 = second_moment(EnsembleConfig(build_complete(4), 3, 4000, seed=5))
    assert abs(rep4.m2_mean - M2_K4_D3) <= 4 * rep4.m2_se


def test_frozen_k8_class_decomposition():
    counts = np.array([35, 2520, 10080, 3360, 840, 2520])
    vals = np.array([1681, 721, 497, 545, 529, 465]) / 256
    assert counts.sum() == 19355
    assert counts @ vals / counts.sum() == pytest.approx(M2_K8_D3, rel=1e-15)
    # the K4 + K4 class factorises into two K4 averages
    assert vals[0] == pytest.approx(M2_K4_D3**2)


def test_second_moment_k8_matches_exact():
    rep = second_moment(EnsembleConfig(build_complete(8), 3, 3000, seed=8))
    assert abs(rep.m2_mean - M2_K8_D3) <= 4 * rep.m2_se


def test_second_moment_baseline_consistent():
    base = json.loads((Path(__file__).parent / "baselines" / "second_moment_d3.json").read_text())
    rows = {r["n"]: r for r in base["rows"]}
    for n, exact in ((6, M2_K6_D3), (8, M2_K8_D3)):
        assert abs(rows[n]["m2_mean"] - exact) <= 4 * rows[n]["m2_se"]
    assert base["c_hat"] == max(r["m2_mean"] for r in base["rows"])


def test_product_state_mode():
    cfg = EnsembleConfig(build_complete(5), 0, 3000, seed=1)
    rep = second_moment(cfg)
    assert rep.checks["product_closed_form"]
    assert abs(rep.m2_mean - 1.5**5) <= 4 * rep.m2_se
    assert product_state_m2([0.0, 0.0]) == pytest.approx(4.0)
    assert product_state_m2([math.pi / 4]) == pytest.approx(1.0)


def test_collect_cached_and_readonly():
    cfg = EnsembleConfig(build_complete(4), 3, 50, seed=2)
    a, b = collect(cfg), collect(cfg)
    assert a is b and not a.p.flags.writeable
    assert a.m2.shape == (50,) and a.p.shape == (50, len(a.strings))


def test_pz_point_masses():
    n = 4
    full = pz_report(np.full(100, 2.0**-n), n, 3)
    assert full.pz_fraction == 1.0 and full.passed
    empty = pz_report(np.zeros(100), n, 3)
    assert empty.pz_fraction == 0.0 and empty.passed


def test_pz_run_and_monotone():
    rep = paley_zygmund_fraction(EnsembleConfig(build_complete(6), 3, 4000, seed=8))
    assert rep.passed
    fr = [v["fraction"] for _, v in sorted(rep.details["fractions"].items())]
    assert fr == sorted(fr, reverse=True)
    assert rep.details["floor"] == pytest.approx(0.25 / rep.details["c_hat"])


def test_statistics_helpers():
    m, se = mean_se([1.0, 2.0, 3.0])
    assert m == 2.0 and se == pytest.approx(1 / math.sqrt(3))
    assert mean_se([5.0])[1] == math.inf
    assert holm_pass([0.5, 0.02, 0.9, 0.1])
    assert not holm_pass([0.5, 0.01, 0.9, 0.1])
    assert holm_pass([])
    same = np.tile(np.linspace(0.1, 1, 50)[:, None], (1, 3))
    assert paired_equality_tests(same)["passed"]
    shifted = same + np.array([0.0, 0.0, 0.05])
    assert not paired_equality_tests(shifted)["passed"]


def test_fit_slope():
    rows = [SweepRow(n, 2.0 + 0.1 * n, 0.01, 100) for n in (6, 8, 10, 12)]
    fit = fit_slope(rows)
    assert fit.slope == pytest.approx(0.1) and fit.intercept == pytest.approx(2.0)
    assert not fit.contains_zero
    flat = fit_slope([SweepRow(n, 2.0, 0.1, 100) for n in (6, 8)])
    assert flat.contains_zero
    with pytest.raises(ValueError):
        fit_slope(rows[:1])


def test_sweep_small():
    rows, fit = second_moment_sweep([4, 6], 3, 300, 0, build_complete)
    assert [r.n for r in rows] == [4, 6] and math.isfinite(fit.slope)


def test_circulant_host_ensemble():
    rep = first_moment(EnsembleConfig(build_circulant(8, [1, 2]), 3, 2000, seed=4))
    assert abs(rep.mean_p - 2.0**-8) <= 4 * rep.mean_p_se


@pytest.mark.parametrize("index", range(3))
def test_supremacy_instance(index):
    cfg = EnsembleConfig(build_complete(6), 3, 3, seed=13, supremacy=True)
    rec = run_supremacy_instance(cfg, index, BASE, 0.2)
    assert rec.passed and rec.tv <= rec.budget + 1e-8
    assert rec.budget <= 0.1 + 1e-9
    assert rec.eta_term <= 0.05 * (1 + 1e-9) and rec.k_term <= 0.05 * (1 + 1e-9)
    assert rec.offset_deviation < 1e-10


def test_calibrated_schedule_beta_angle():
    cfg = EnsembleConfig(build_complete(6), 3, 1, seed=0)
    g, _ = sample_instance(cfg, 0)
    sc = calibrated_schedule(g, BASE, 0.1)
    assert sc.mu < BASE.mu and integrals(sc).beta > 0


def test_supremacy_refuses_low_degree():
    cfg = EnsembleConfig(build_complete(6), 2, 2)
    with pytest.raises(ValueError):
        run_supremacy_instance(cfg, 0, BASE, 0.2)
