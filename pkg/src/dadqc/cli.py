"""Command-line driver: ``dadqc {schedule,verify,anticonc,sample,graph}``.

Exit codes: 0 success, 1 a bound or statistical check failed, 2 usage or I/O
error, 3 numerical non-convergence. Every output file starts with a JSON
provenance header (config hash, seed, package version), and identical
(config, seed, version) runs write byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from . import __version__
from .anticonc import (
    EnsembleConfig,
    collect,
    first_moment,
    fit_slope,
    paley_zygmund_fraction,
    run_supremacy_instance,
    second_moment,
    SweepRow,
)
from .bounds import (
    BoundReport,
    duhamel_check,
    interaction_picture_check,
    lemma1_check,
    perturbation_check,
)
from .config import ConfigError, ExperimentConfig, load_config
from .errors import ConvergenceError, FormatError, NoFactorError, RetryExhaustedError
from .evolution import dadqc_run, random_angles, sample_bitstrings
from .formats import (
    bitstring_index,
    format_distribution,
    format_graph,
    format_samples,
    provenance_line,
    read_instance,
)
from .graphs import HardwareGraph, InteractionGraph, build_circulant, build_complete, sample_d_factor
from .iqp import cz_decomposition_check
from .ising import (
    EXACT_K_LIMIT,
    IsingParams,
    exact_commutator_norm,
    exact_HI_norm,
    from_angles,
    norm_bounds,
)
from .schedule import (
    SigmoidSchedule,
    budget_terms,
    delta_alpha_bound,
    eta_bound,
    integrals,
    kappa_lower_bound,
    solve_mu,
)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
CZ_TOLERANCE = 1e-12


class UsageError(Exception):
    pass


# -- instance construction ---------------------------------------------------

def build_host(cfg: ExperimentConfig, n: int | None = None) -> HardwareGraph:
    n = cfg.host.n if n is None else n
    if cfg.host.kind == "complete":
        return build_complete(n)
    if cfg.host.kind == "circulant":
        return build_circulant(n, cfg.host.offsets)
    inst = read_instance(cfg.resolve(cfg.host.path))
    return HardwareGraph.from_edges(inst.n, inst.edges, name=Path(cfg.host.path).name)


def _rng(cfg: ExperimentConfig, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, tag]))


def _interaction_graph(cfg: ExperimentConfig) -> InteractionGraph:
    host = build_host(cfg)
    if cfg.d is None or cfg.d == host.D:
        return InteractionGraph(host.n, host.edges, host.D, host, method="host")
    return sample_d_factor(host, cfg.d, cfg.seed)


def _angle_params(cfg: ExperimentConfig, graph: InteractionGraph):
    """Angle-Hamiltonian coefficients (beta h, beta J) for the angle modes."""
    if cfg.ising == "zero":
        return np.zeros(graph.n), np.zeros(graph.m)
    if cfg.ising == "graph_state":
        return np.zeros(graph.n), np.full(graph.m, math.pi / 4)
    rng = _rng(cfg, 1)
    kh = rng.integers(0, 8, graph.n)
    kj = rng.integers(0, 8, graph.m)
    return kh * math.pi / 8, kj * math.pi / 8


def _norms(params: IsingParams) -> tuple[float, float]:
    if params.n <= EXACT_K_LIMIT:
        return exact_HI_norm(params), exact_commutator_norm(params)
    nb = norm_bounds(params)
    return nb.HI_bound, nb.K_bound


def _schedule(cfg: ExperimentConfig, params: IsingParams | None, scaled: bool) -> SigmoidSchedule:
    s = cfg.schedule
    base = SigmoidSchedule(s.A0, s.B0, s.T, s.delta, s.mu if s.mu is not None else 1.0)
    if s.mu is not None:
        return base
    if params is None:
        raise UsageError("mu: auto needs an Ising instance")
    hi, k = _norms(params)
    mu = solve_mu(s.eps, hi, k, base, scaled=scaled)
    return base if math.isinf(mu) else base.with_mu(mu)


def build_instance(cfg: ExperimentConfig) -> tuple[IsingParams, SigmoidSchedule]:
    """Physical Ising parameters and schedule described by the config."""
    if cfg.ising == "file":
        params = read_instance(cfg.resolve(cfg.ising_path)).params()
        return params, _schedule(cfg, params, scaled=False)
    graph = _interaction_graph(cfg)
    sh, sj = _angle_params(cfg, graph)
    angles = IsingParams(graph, sh, sj, math.inf, math.inf)
    schedule = _schedule(cfg, angles, scaled=True)
    beta = integrals(schedule).beta
    if not beta > 0:
        raise UsageError("schedule has zero late action beta (B0 = 0?)")
    return from_angles(graph, sh, sj, beta), schedule


def provenance(cfg: ExperimentConfig, command: str) -> dict:
    return {"command": command, "config_hash": cfg.digest, "seed": cfg.seed, "version": __version__}


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


# -- subcommands -------------------------------------------------------------

def _quadrature(f, a, b, sc: SigmoidSchedule) -> float:
    # geometric breakpoints around the transition so the exponential tails are resolved
    offsets = [0.0] + [sc.mu * 2.0**k for k in range(-2, 60) if sc.mu * 2.0**k < 2 * sc.T]
    cand = {sc.t_switch + o for o in offsets} | {sc.t_switch - o for o in offsets}
    pts = sorted(p for p in cand if a < p < b)
    val, _ = quad(f, a, b, points=pts or None, limit=500, epsabs=0.0, epsrel=1e-12)
    return val


def cmd_schedule(cfg: ExperimentConfig, out: Path) -> int:
    params = None
    scaled = False
    if cfg.schedule.mu is None:
        if cfg.ising == "file":
            params = read_instance(cfg.resolve(cfg.ising_path)).params()
        else:
            graph = _interaction_graph(cfg)
            sh, sj = _angle_params(cfg, graph)
            params, scaled = IsingParams(graph, sh, sj, math.inf, math.inf), True
    sc = _schedule(cfg, params, scaled)
    ints = integrals(sc)
    A = lambda t: sc.A0 * float(sc.one_minus_s(t))  # noqa: E731
    B = lambda t: sc.B0 * float(sc.s(t))  # noqa: E731
    rows = [
        ("eta", ints.eta, _quadrature(B, 0.0, sc.t_switch, sc)),
        ("beta", ints.beta, _quadrature(B, sc.t_switch, sc.T, sc)),
        ("delta_alpha", ints.delta_alpha, _quadrature(A, sc.t_switch, sc.T, sc)),
        ("alpha_T", ints.alpha_T, _quadrature(A, 0.0, sc.T, sc)),
    ]
    print(f"{'quantity':<12} {'closed form':>22} {'quadrature':>22} {'rel diff':>10}")
    table = {}
    for name, closed, num in rows:
        rel = abs(closed - num) / max(abs(num), 1e-300)
        print(f"{name:<12} {closed:>22.15g} {num:>22.15g} {rel:>10.2e}")
        table[name] = {"closed_form": closed, "quadrature": num, "rel_diff": rel}
    result = {
        "provenance": provenance(cfg, "schedule"),
        "schedule": asdict(sc),
        "kappa": ints.kappa,
        "kappa_lower_bound": kappa_lower_bound(sc),
        "eta_bound": eta_bound(sc),
        "delta_alpha_bound": delta_alpha_bound(sc),
        "integrals": table,
    }
    code = EXIT_OK
    if params is not None:
        hi, k = _norms(params)
        if scaled:
            hi, k = hi / ints.beta, k / ints.beta
        eta_term, k_term = budget_terms(hi, k, ints)
        eps = cfg.schedule.eps
        ok = eta_term <= eps / 4 * (1 + 1e-9) and k_term <= eps / 4 * (1 + 1e-9)
        result["budget"] = {"eps": eps, "eta_term": eta_term, "k_term": k_term,
                            "quarter_eps": eps / 4, "within": ok}
        print(f"solved mu = {sc.mu:.12g}; eta*||H_I|| = {eta_term:.6g}, K*beta*dalpha = {k_term:.6g}"
              f" (each <= eps/4 = {eps / 4:.6g}: {'yes' if ok else 'NO'})")
        code = EXIT_OK if ok else EXIT_VIOLATION
    _write(out / "schedule.json", _dumps(result) + "\n")
    return code


def cmd_verify(cfg: ExperimentConfig, out: Path) -> int:
    params, sc = build_instance(cfg)
    n = params.n
    # an explicit evolution section overrides the adaptive defaults of the checks
    evo = {"config": cfg.evolution} if cfg.line("evolution") is not None else {}
    reports: list[BoundReport] = []
    if "duhamel" in cfg.checks and n <= 8:
        reports.append(duhamel_check(params, sc))
    if "lemma1" in cfg.checks and n <= 10:
        theta = random_angles(n, _rng(cfg, 2)) if cfg.sample_theta == "random" else np.zeros(n)
        reports.append(lemma1_check(params, sc, theta, **evo))
    if "perturbation" in cfg.checks and n <= 8:
        rng = _rng(cfg, 3)
        dh = cfg.perturbation * rng.choice([-1.0, 1.0], n)
        dJ = cfg.perturbation * rng.choice([-1.0, 1.0], len(params.edges))
        reports.append(perturbation_check(params, dh, dJ, integrals(sc).beta))
    if "cz" in cfg.checks and n <= 10:
        rep = cz_decomposition_check(params.graph)
        reports.append(BoundReport("cz", rep.max_deviation, CZ_TOLERANCE,
                                   {"n": n, "graph": params.graph.hash}))
    if "interaction_picture" in cfg.checks and n <= 6:
        reports.append(interaction_picture_check(params, sc, **evo))
    lines = [_dumps({"provenance": provenance(cfg, "verify")})]
    failed = False
    for rep in reports:
        for row in rep.rows():
            lines.append(_dumps(row))
            status = "ok" if row["slack"] >= -1e-8 else "VIOLATED"
            print(f"{row['check']:<28} lhs={row['lhs']:.6e} rhs={row['rhs']:.6e} {status}")
        failed |= not rep.holds()
    _write(out / "verify.jsonl", "\n".join(lines) + "\n")
    return EXIT_VIOLATION if failed else EXIT_OK


def _ensemble(cfg: ExperimentConfig, host: HardwareGraph, supremacy: bool) -> EnsembleConfig:
    if cfg.d is None:
        raise UsageError("d is required for anticoncentration runs")
    target = 0 if cfg.ensemble.target_s is None else bitstring_index(cfg.ensemble.target_s)
    return EnsembleConfig(host, cfg.d, cfg.ensemble.instances, cfg.seed, cfg.ensemble.fixed_v,
                          target, supremacy)


def _supremacy_worker(args):
    ens, index, base, eps, evo = args
    return run_supremacy_instance(ens, index, base, eps, evo)


def cmd_anticonc(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    prov = provenance(cfg, "anticonc")
    if cfg.ensemble.supremacy:
        if cfg.d is not None and cfg.d < 3:
            raise UsageError(
                f"d={cfg.d} refused in supremacy mode: degree < 3 graph states have bounded "
                "treewidth and are classically simulable")
        ens = _ensemble(cfg, build_host(cfg), True)
        s = cfg.schedule
        base = SigmoidSchedule(s.A0, s.B0, s.T, s.delta, 1.0)
        evo = replace(cfg.evolution, adaptive=True, mesh="window") if not cfg.evolution.adaptive else cfg.evolution
        jobs = [(ens, k, base, cfg.ensemble.eps, evo) for k in range(ens.instances)]
        if threads > 1:
            with ProcessPoolExecutor(threads) as pool:
                records = list(pool.map(_supremacy_worker, jobs))
        else:
            records = [_supremacy_worker(j) for j in jobs]
        lines = [_dumps({"provenance": prov})]
        for r in records:
            lines.append(_dumps(dict(asdict(r), passed=r.passed)))
        passed = sum(r.passed for r in records)
        summary = {"provenance": prov, "eps": cfg.ensemble.eps, "instances": len(records),
                   "passed": passed, "pass_rate": passed / len(records),
                   "max_tv": max(r.tv for r in records), "max_budget": max(r.budget for r in records)}
        _write(out / "supremacy_records.jsonl", "\n".join(lines) + "\n")
        _write(out / "supremacy_summary.json", _dumps(summary) + "\n")
        print(f"TV <= eps/2 on {passed}/{len(records)} instances (max TV {summary['max_tv']:.4g})")
        return EXIT_OK if passed == len(records) else EXIT_VIOLATION

    ns = cfg.ensemble.ns or (cfg.host.n,)
    if cfg.host.kind == "file" and len(ns) > 1:
        raise UsageError("an n sweep needs a complete or circulant host")
    lines = [_dumps({"provenance": prov})]
    csv = [provenance_line(prov), "n,m2_mean,m2_se,instances\n"]
    per_n = []
    rows = []
    ok = True
    for n in ns:
        ens = _ensemble(cfg, build_host(cfg, n), False)
        data = collect(ens)
        for k in range(ens.instances):
            lines.append(_dumps({"n": n, "index": k, "graph_hash": data.graph_hashes[k],
                                 "moments": {"p": data.p[k].tolist(), "strings": list(data.strings),
                                             "m2": float(data.m2[k])}}))
        fm = first_moment(ens)
        entry = {"n": n, "first_moment": asdict(fm)}
        if n <= 16:
            sm = second_moment(ens)
            pz = paley_zygmund_fraction(ens)
            entry.update(second_moment=asdict(sm), paley_zygmund=asdict(pz))
            rows.append(SweepRow(n, sm.m2_mean, sm.m2_se, ens.instances))
            csv.append(f"{n},{sm.m2_mean!r},{sm.m2_se!r},{ens.instances}\n")
            ok &= sm.passed and pz.passed
        ok &= fm.passed
        per_n.append(entry)
        print(f"n={n}: E[p]*2^n = {fm.mean_p * 2**n:.4f} +- {fm.mean_p_se * 2**n:.4f}"
              + (f", E[m2] = {rows[-1].m2_mean:.4f} +- {rows[-1].m2_se:.4f}" if rows and rows[-1].n == n else ""))
    summary = {"provenance": prov, "results": per_n}
    if len(rows) >= 2:
        fit = fit_slope(rows)
        summary["m2_slope"] = {"slope": fit.slope, "se": fit.slope_se, "ci": list(fit.ci),
                               "contains_zero": fit.contains_zero}
        summary["c_hat"] = max(r.m2_mean for r in rows)
        print(f"E[m2] slope {fit.slope:.4g} +- {fit.slope_se:.2g}; CI contains 0: {fit.contains_zero}")
        ok &= fit.contains_zero
    _write(out / "anticonc_records.jsonl", "\n".join(lines) + "\n")
    _write(out / "anticonc_summary.json", _dumps(summary) + "\n")
    _write(out / "anticonc_m2.csv", "".join(csv))
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_sample(cfg: ExperimentConfig, out: Path) -> int:
    params, sc = build_instance(cfg)
    n = params.n
    theta = random_angles(n, _rng(cfg, 2)) if cfg.sample_theta == "random" else np.zeros(n)
    dist = dadqc_run(params, sc, theta, cfg.evolution)
    idx = sample_bitstrings(dist, cfg.sample_count, cfg.seed)
    prov = dict(provenance(cfg, "sample"), n=n, mu=sc.mu, graph=params.graph.hash)
    _write(out / "samples.txt", format_samples(idx, n, prov))
    _write(out / "distribution.csv", format_distribution(dist, prov))
    print(f"wrote {cfg.sample_count} samples for n={n} to {out / 'samples.txt'}")
    return EXIT_OK


def cmd_graph(cfg: ExperimentConfig, out: Path) -> int:
    host = build_host(cfg)
    if cfg.d is None:
        raise UsageError("d is required")
    g = sample_d_factor(host, cfg.d, cfg.seed)
    header = dict(provenance(cfg, "graph"), d=g.d, host=host.name, swap_steps=g.swap_steps,
                  method=g.method)
    _write(out / "graph.txt", format_graph(g.n, g.edges, header))
    print(f"{host.name}: sampled {g.d}-factor with {g.m} edges ({g.method})")
    return EXIT_OK


COMMANDS = {
    "schedule": cmd_schedule,
    "verify": cmd_verify,
    "anticonc": cmd_anticonc,
    "sample": cmd_sample,
    "graph": cmd_graph,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dadqc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0] if fn.__doc__ else None)
        sp.add_argument("--config", required=True, help="YAML experiment file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out-dir", default=None, help="override output.dir")
        sp.add_argument("--threads", type=int, default=1, help="worker processes for instance loops")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise UsageError("--seed must be nonnegative")
            cfg = replace(cfg, seed=args.seed)
        out = Path(args.out_dir) if args.out_dir else cfg.resolve(cfg.out_dir)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        fn = COMMANDS[args.command]
        if args.command == "anticonc":
            return fn(cfg, out, args.threads)
        return fn(cfg, out)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, FormatError, UsageError, NoFactorError, RetryExhaustedError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
