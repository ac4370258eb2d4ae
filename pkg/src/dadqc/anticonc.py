"""Monte Carlo moments of graph-state IQP output probabilities.

An instance is a uniformly drawn d-factor G of the host together with
measurement angles theta ~ Unif[0, 2 pi)^n. Its output distribution is that of
the IQP circuit with w = pi/4 on the edges of G and single-qubit angles
v + theta / 2, where v is a fixed per-vertex vector (zero by default).

Moments are computed from exact per-instance distributions, so the only noise
is ensemble noise; every estimate carries a standard error and every
statistical assertion is a k * SE band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.stats import norm

from .bounds import tv_distance
from .evolution import EvolutionConfig, dadqc_state, random_angles
from .graphs import HardwareGraph, InteractionGraph, sample_d_factor
from .iqp import IQPCircuit, equivalent_iqp_for_dadqc, iqp_distribution
from .ising import IsingParams, exact_commutator_norm, exact_HI_norm, from_angles
from .schedule import SigmoidSchedule, budget_terms, integrals, solve_mu

SE_BAND = 4.0
FAMILY_ALPHA = 0.05
PZ_THRESHOLDS = (0.25, 0.5, 0.75)
MOMENT_LIMIT = 16
FIRST_MOMENT_LIMIT = 20
SUPREMACY_LIMIT = 10
MIN_SUPREMACY_DEGREE = 3


@dataclass(frozen=True)
class EnsembleConfig:
    host: HardwareGraph
    d: int
    instances: int
    seed: int = 0
    fixed_v: tuple | None = None
    target_s: int = 0
    supremacy: bool = False

    def __post_init__(self):
        if self.instances < 1:
            raise ValueError("instances must be >= 1")
        if not 0 <= self.d <= self.host.D:
            raise ValueError(f"d={self.d} outside [0, {self.host.D}]")
        if self.supremacy and self.d < MIN_SUPREMACY_DEGREE:
            raise ValueError(
                f"d={self.d} refused in supremacy mode: graph states of degree below "
                f"{MIN_SUPREMACY_DEGREE} have bounded treewidth and are classically simulable")
        if not 0 <= self.target_s < (1 << self.n):
            raise ValueError("target_s out of range")
        if self.fixed_v is not None:
            v = tuple(float(x) for x in self.fixed_v)
            if len(v) != self.n:
                raise ValueError("fixed_v length does not match n")
            object.__setattr__(self, "fixed_v", v)

    @property
    def n(self) -> int:
        return self.host.n

    def v(self) -> np.ndarray:
        return np.zeros(self.n) if self.fixed_v is None else np.array(self.fixed_v)


def probe_strings(n: int, target: int = 0) -> tuple[int, ...]:
    """Four distinct output strings: the target, its complement, the
    alternating pattern relative to it and the target with qubit 0 flipped."""
    full = (1 << n) - 1
    alt = sum(1 << i for i in range(0, n, 2))
    out = []
    for s in (target, target ^ full, target ^ alt, target ^ 1):
        if s not in out:
            out.append(s)
    return tuple(out)


def sample_instance(config: EnsembleConfig, index: int) -> tuple[InteractionGraph, np.ndarray]:
    """Draw (G, theta) for ``index``; the pair depends only on (seed, index)."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, index]))
    graph_seed = int(rng.integers(0, 2**63))
    graph = sample_d_factor(config.host, config.d, graph_seed)
    theta = random_angles(config.n, rng)
    return graph, theta


def instance_circuit(config: EnsembleConfig, graph: InteractionGraph, theta) -> IQPCircuit:
    return IQPCircuit(graph, config.v(), np.full(graph.m, math.pi / 4), theta)


@dataclass(frozen=True)
class EnsembleSamples:
    """Per-instance raw values in index order."""

    n: int
    strings: tuple[int, ...]
    p: np.ndarray          # (instances, len(strings)) output probabilities
    m2: np.ndarray         # (instances,) normalised collision sums 2^n sum p^2
    graph_hashes: tuple[str, ...]


@lru_cache(maxsize=8)
def collect(config: EnsembleConfig) -> EnsembleSamples:
    n = config.n
    if n > FIRST_MOMENT_LIMIT:
        raise ValueError(f"ensemble moments refused for n={n} > {FIRST_MOMENT_LIMIT}")
    strings = probe_strings(n, config.target_s)
    p = np.empty((config.instances, len(strings)))
    m2 = np.empty(config.instances)
    hashes = []
    for k in range(config.instances):
        graph, theta = sample_instance(config, k)
        dist = iqp_distribution(instance_circuit(config, graph, theta))
        p[k] = dist[list(strings)]
        m2[k] = (1 << n) * float(np.dot(dist, dist))
        hashes.append(graph.hash)
    p.setflags(write=False)
    m2.setflags(write=False)
    return EnsembleSamples(n, strings, p, m2, tuple(hashes))


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), math.inf
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def holm_pass(pvalues, alpha: float = FAMILY_ALPHA) -> bool:
    """True when Holm's step-down procedure rejects no hypothesis.

    Holm rejects nothing exactly when its first step fails, i.e. when the
    smallest p-value exceeds alpha / m.
    """
    pvalues = list(pvalues)
    return not pvalues or min(pvalues) > alpha / len(pvalues)


def paired_equality_tests(values: np.ndarray, alpha: float = FAMILY_ALPHA) -> dict:
    """Two-sided z-tests of equal means for every pair of columns.

    Columns come from the same instances, so each test uses the per-instance
    differences. The family of pairwise tests is held at level ``alpha`` by
    Holm's procedure.
    """
    pvals = {}
    scale = float(np.max(np.abs(values), initial=0.0))
    for a, b in combinations(range(values.shape[1]), 2):
        diff = values[:, a] - values[:, b]
        mean, se = mean_se(diff)
        if np.max(np.abs(diff), initial=0.0) <= 1e-12 * scale:
            # identical up to rounding on every instance (e.g. the complement
            # symmetry of odd-degree graph states); a z-score on the rounding
            # noise would be meaningless
            pv = 1.0
        elif se == 0:
            pv = 0.0
        else:
            pv = float(2 * norm.sf(abs(mean) / se))
        pvals[f"{a}-{b}"] = pv
    return {"pvalues": pvals, "passed": holm_pass(list(pvals.values()), alpha)}


@dataclass(frozen=True)
class MomentReport:
    n: int
    d: int
    instances: int
    mean_p: float | None = None
    mean_p_se: float | None = None
    m2_mean: float | None = None
    m2_se: float | None = None
    pz_fraction: float | None = None
    pz_se: float | None = None
    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def first_moment(config: EnsembleConfig) -> MomentReport:
    """E[p(s)] against 2^-n, plus s-independence across the probe strings."""
    data = collect(config)
    n = config.n
    mean, se = mean_se(data.p[:, 0])
    target = 2.0**-n
    per_string = [mean_se(data.p[:, j]) for j in range(len(data.strings))]
    eq = paired_equality_tests(data.p)
    checks = {
        "mean_within_band": abs(mean - target) <= SE_BAND * se,
        "string_independence": eq["passed"],
    }
    details = {
        "expected": target,
        "z": (mean - target) / se if se > 0 else 0.0,
        "strings": list(data.strings),
        "per_string": [{"mean": m, "se": s} for m, s in per_string],
        "pairwise_pvalues": eq["pvalues"],
    }
    return MomentReport(n, config.d, config.instances, mean_p=mean, mean_p_se=se,
                        checks=checks, details=details)


def product_state_m2(v_eff) -> float:
    """2^n sum_s p(s)^2 for an edgeless circuit: prod_i 2 (cos^4 v_i + sin^4 v_i)."""
    c2 = np.cos(np.asarray(v_eff, dtype=float)) ** 2
    return float(np.prod(2.0 * (c2**2 + (1 - c2) ** 2)))


def second_moment(config: EnsembleConfig) -> MomentReport:
    """E[m2], E[p(s)^2] 4^n for the probe strings and their agreement."""
    n = config.n
    if n > MOMENT_LIMIT:
        raise ValueError(f"second moment refused for n={n} > {MOMENT_LIMIT}")
    data = collect(config)
    m2, m2_se = mean_se(data.m2)
    scaled = data.p**2 * 4.0**n
    per_string = [mean_se(scaled[:, j]) for j in range(len(data.strings))]
    eq = paired_equality_tests(scaled)
    # E[m2] = 4^n E[p(s)^2] for any fixed s; compare per instance
    diff_mean, diff_se = mean_se(data.m2 - scaled[:, 0])
    checks = {
        "string_independence": eq["passed"],
        "m2_matches_p2": abs(diff_mean) <= SE_BAND * diff_se if diff_se > 0 else diff_mean == 0,
    }
    details = {
        "p2_scaled": [{"mean": m, "se": s} for m, s in per_string],
        "pairwise_pvalues": eq["pvalues"],
        "m2_minus_p2": {"mean": diff_mean, "se": diff_se},
    }
    if config.d == 0:
        # product states: per-instance closed form
        worst = 0.0
        for k in range(config.instances):
            _, theta = sample_instance(config, k)
            worst = max(worst, abs(product_state_m2(config.v() + theta / 2) - data.m2[k]))
        checks["product_closed_form"] = worst < 1e-10
        details["product_closed_form_max_error"] = worst
        details["product_expected_mean"] = 1.5**n if config.fixed_v is None else None
    return MomentReport(n, config.d, config.instances, m2_mean=m2, m2_se=m2_se,
                        checks=checks, details=details)


def pz_fractions(p_values, n: int, thresholds=PZ_THRESHOLDS) -> dict:
    """Fraction of values with p >= a 2^-n for each threshold a, with SE."""
    p = np.asarray(p_values, dtype=float)
    out = {}
    for a in thresholds:
        f = float(np.mean(p >= a * 2.0**-n))
        out[a] = (f, math.sqrt(f * (1 - f) / p.size))
    return out


def paley_zygmund_fraction(config: EnsembleConfig, thresholds=PZ_THRESHOLDS) -> MomentReport:
    """Pr[p(s) >= a 2^-n] against the Paley-Zygmund floor from measured moments.

    With tau = 1/2 the inequality reads Pr[p >= E[p] / 2] >= E[p]^2 / (4 E[p^2]);
    the floor uses the measured E[p] and E[p^2] of the same run, and the
    threshold uses the exact mean 2^-n.
    """
    n = config.n
    if n > MOMENT_LIMIT:
        raise ValueError(f"Paley-Zygmund check refused for n={n} > {MOMENT_LIMIT}")
    data = collect(config)
    return pz_report(data.p[:, 0], n, config.d, thresholds)


def pz_report(p_values, n: int, d: int, thresholds=PZ_THRESHOLDS) -> MomentReport:
    p = np.asarray(p_values, dtype=float)
    fr = pz_fractions(p, n, tuple(sorted(set(thresholds) | {0.5})))
    f, se = fr[0.5]
    ep = float(p.mean())
    ep2 = float(np.mean(p**2))
    ratio = ep2 / ep**2 if ep > 0 else math.inf
    floor = 0.25 / ratio
    values = [fr[a][0] for a in sorted(fr)]
    checks = {
        "above_floor": f >= floor - SE_BAND * se,
        "monotone_in_threshold": all(x >= y for x, y in zip(values, values[1:])),
    }
    details = {
        "fractions": {str(a): {"fraction": v, "se": s} for a, (v, s) in sorted(fr.items())},
        "c_hat": ratio,
        "floor": floor,
    }
    return MomentReport(n, d, p.size, mean_p=ep, pz_fraction=f, pz_se=se,
                        checks=checks, details=details)


@dataclass(frozen=True)
class SweepRow:
    n: int
    m2_mean: float
    m2_se: float
    instances: int


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    slope_se: float
    intercept: float
    k: float = 2.0

    @property
    def ci(self) -> tuple[float, float]:
        return self.slope - self.k * self.slope_se, self.slope + self.k * self.slope_se

    @property
    def contains_zero(self) -> bool:
        lo, hi = self.ci
        return lo <= 0.0 <= hi


def fit_slope(rows, k: float = 2.0) -> SlopeFit:
    """Weighted least-squares line through (n, E[m2]) with weights 1/SE^2."""
    x = np.array([r.n for r in rows], dtype=float)
    y = np.array([r.m2_mean for r in rows])
    se = np.array([r.m2_se for r in rows])
    if len(rows) < 2:
        raise ValueError("need at least two rows to fit a slope")
    X = np.column_stack([x, np.ones_like(x)])
    W = 1.0 / se**2
    cov = np.linalg.inv(X.T @ (X * W[:, None]))
    coef = cov @ (X.T @ (W * y))
    return SlopeFit(float(coef[0]), float(math.sqrt(cov[0, 0])), float(coef[1]), k)


def second_moment_sweep(ns, d: int, instances: int, seed: int, host_factory) -> tuple[list[SweepRow], SlopeFit]:
    """E[m2] across system sizes; ``host_factory(n)`` builds the host for each n."""
    rows = []
    for n in ns:
        rep = second_moment(EnsembleConfig(host_factory(n), d, instances, seed))
        rows.append(SweepRow(n, rep.m2_mean, rep.m2_se, instances))
    return rows, fit_slope(rows)


# -- end-to-end device pipeline ---------------------------------------------

@dataclass(frozen=True)
class SupremacyRecord:
    index: int
    graph_hash: str
    mu: float
    beta: float
    tv: float
    budget: float
    eta_term: float
    k_term: float
    eps: float
    steps: int
    offset_deviation: float

    @property
    def passed(self) -> bool:
        return self.tv <= self.eps / 2


def calibrated_schedule(graph: InteractionGraph, base: SigmoidSchedule, eps: float, v=None) -> SigmoidSchedule:
    """``base`` with mu chosen so that both budget terms are <= eps / 4.

    Norms are evaluated exactly on the angle Hamiltonian (beta J = pi/4 and
    beta h = v), which does not depend on beta.
    """
    v = np.zeros(graph.n) if v is None else np.asarray(v, dtype=float)
    angles = IsingParams(graph, v, np.full(graph.m, math.pi / 4), math.inf, math.inf)
    hz, kz = exact_HI_norm(angles), exact_commutator_norm(angles)
    mu = solve_mu(eps, hz, kz, base, scaled=True)
    if math.isinf(mu):
        return base
    return base.with_mu(mu)


def run_supremacy_instance(config: EnsembleConfig, index: int, base: SigmoidSchedule, eps: float,
                           evolution: EvolutionConfig = EvolutionConfig(steps=1024, tolerance=1e-8,
                                                                        adaptive=True, mesh="window"),
                           offset: float = 0.3) -> SupremacyRecord:
    """One draw of the graph-state pipeline: TV between the simulated device
    and its IQP target, next to the analytic budget."""
    n = config.n
    if n > SUPREMACY_LIMIT:
        raise ValueError(f"supremacy pipeline refused for n={n} > {SUPREMACY_LIMIT}")
    if config.d < MIN_SUPREMACY_DEGREE:
        raise ValueError(f"d={config.d} < {MIN_SUPREMACY_DEGREE}: classically simulable regime")
    graph, theta = sample_instance(config, index)
    v = config.v()
    schedule = calibrated_schedule(graph, base, eps, v)
    ints = integrals(schedule)
    params = from_angles(graph, v, np.full(graph.m, math.pi / 4), ints.beta)
    eta_term, k_term = budget_terms(exact_HI_norm(params), exact_commutator_norm(params), ints)

    psi, steps = dadqc_state(params, schedule, theta, evolution, return_steps=True)
    P_dev = psi.real**2 + psi.imag**2
    target = equivalent_iqp_for_dadqc(params, ints.beta, theta)
    P_iqp = iqp_distribution(target)
    tv = tv_distance(P_dev, P_iqp)

    # a constant Z-field offset c on every qubit, compensated by theta -> theta - 2c
    shifted = equivalent_iqp_for_dadqc(
        from_angles(graph, v + offset, np.full(graph.m, math.pi / 4), ints.beta), ints.beta, theta - 2 * offset)
    offset_dev = float(np.max(np.abs(iqp_distribution(shifted) - P_iqp)))
    return SupremacyRecord(index, graph.hash, schedule.mu, ints.beta, tv, eta_term + k_term,
                           eta_term, k_term, eps, steps, offset_dev)


def supremacy_run(config: EnsembleConfig, base: SigmoidSchedule, eps: float,
                  evolution: EvolutionConfig | None = None) -> list[SupremacyRecord]:
    kw = {} if evolution is None else {"evolution": evolution}
    return [run_supremacy_instance(config, k, base, eps, **kw) for k in range(config.instances)]
