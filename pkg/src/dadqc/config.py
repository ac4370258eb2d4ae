"""Experiment configuration files (YAML).

Every key is checked against a fixed schema; unknown keys and invalid values
raise :class:`ConfigError` carrying the line number of the offending entry.

Example::

    seed: 7
    host: {kind: complete, n: 6}
    d: 3
    ising: {mode: grid}
    schedule: {A0: 1.0, B0: 1.0, T: 10.0, delta: 2.0, mu: auto, eps: 0.1}
    evolution: {steps: 1024, tolerance: 1.0e-8, adaptive: true, mesh: window}
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .evolution import EvolutionConfig


class ConfigError(ValueError):
    def __init__(self, message, line=None, source=None):
        where = f"{source or '<config>'}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")
        self.line = line


HOST_KINDS = ("complete", "circulant", "file")
ISING_MODES = ("zero", "grid", "graph_state", "file")
THETA_MODES = ("zero", "random")

SCHEMA = {
    "seed": None,
    "d": None,
    "host": {"kind", "n", "offsets", "path"},
    "ising": {"mode", "path"},
    "schedule": {"A0", "B0", "T", "delta", "mu", "eps"},
    "evolution": {"steps", "tolerance", "adaptive", "mesh"},
    "ensemble": {"instances", "ns", "fixed_v", "target_s", "supremacy", "eps"},
    "sample": {"count", "theta"},
    "verify": {"perturbation", "checks"},
    "output": {"dir"},
}
VERIFY_CHECKS = ("duhamel", "lemma1", "perturbation", "cz", "interaction_picture")


@dataclass(frozen=True)
class HostSpec:
    kind: str = "complete"
    n: int | None = None
    offsets: tuple = ()
    path: str | None = None


@dataclass(frozen=True)
class ScheduleSpec:
    A0: float = 1.0
    B0: float = 1.0
    T: float = 10.0
    delta: float = 2.0
    mu: float | None = None      # None means "auto"
    eps: float | None = None


@dataclass(frozen=True)
class EnsembleSpec:
    instances: int = 1000
    ns: tuple = ()
    fixed_v: tuple | None = None
    target_s: str | None = None
    supremacy: bool = False
    eps: float = 0.2


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    d: int | None = None
    host: HostSpec = field(default_factory=HostSpec)
    ising: str = "grid"
    ising_path: str | None = None
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    sample_count: int = 1000
    sample_theta: str = "random"
    perturbation: float = 0.01
    checks: tuple = VERIFY_CHECKS
    out_dir: str = "out"
    source: str | None = None
    digest: str = ""
    base_dir: str = "."
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def line(self, *path) -> int | None:
        return self.lines.get(path)

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path


def _line_index(node, prefix=(), out=None) -> dict:
    if out is None:
        out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = prefix + (k.value,)
            out[key] = k.start_mark.line + 1
            _line_index(v, key, out)
    return out


class _Reader:
    def __init__(self, data, lines, source):
        self.data, self.lines, self.source = data, lines, source

    def err(self, msg, *path):
        line = None
        for k in range(len(path), 0, -1):
            line = self.lines.get(tuple(path[:k]))
            if line is not None:
                break
        raise ConfigError(msg, line, self.source)

    def get(self, *path, default=None):
        cur = self.data
        for p in path:
            if not isinstance(cur, dict) or p not in cur:
                return default
            cur = cur[p]
        return cur

    def number(self, *path, default=None, positive=False, nonneg=False, integer=False):
        v = self.get(*path, default=default)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.err(f"{'.'.join(path)} must be a number, got {v!r}", *path)
        if integer and (isinstance(v, float) and not v.is_integer()):
            self.err(f"{'.'.join(path)} must be an integer", *path)
        if not math.isfinite(v):
            self.err(f"{'.'.join(path)} must be finite", *path)
        if positive and not v > 0:
            self.err(f"{'.'.join(path)} must be positive, got {v}", *path)
        if nonneg and v < 0:
            self.err(f"{'.'.join(path)} must be nonnegative, got {v}", *path)
        return int(v) if integer else float(v)

    def choice(self, *path, options, default):
        v = self.get(*path, default=default)
        if v not in options:
            self.err(f"{'.'.join(path)} must be one of {list(options)}, got {v!r}", *path)
        return v

    def boolean(self, *path, default):
        v = self.get(*path, default=default)
        if not isinstance(v, bool):
            self.err(f"{'.'.join(path)} must be true or false", *path)
        return v


def _check_keys(data, lines, source):
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", 1, source)
    for key, val in data.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key '{key}'", lines.get((key,)), source)
        allowed = SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(val, dict):
            raise ConfigError(f"section '{key}' must be a mapping", lines.get((key,)), source)
        for sub in val:
            if sub not in allowed:
                raise ConfigError(f"unknown key '{key}.{sub}'", lines.get((key, sub)), source)


def parse_config(text: str, source: str | None = None, base_dir: str = ".") -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    data = data or {}
    lines = _line_index(node) if node is not None else {}
    _check_keys(data, lines, source)
    r = _Reader(data, lines, source)

    seed = r.number("seed", default=0, integer=True, nonneg=True)
    if seed >= 2**64:
        r.err("seed must fit in 64 bits", "seed")
    d = r.number("d", integer=True, nonneg=True)

    kind = r.choice("host", "kind", options=HOST_KINDS, default="complete")
    hn = r.number("host", "n", integer=True)
    offsets = r.get("host", "offsets", default=[])
    if not isinstance(offsets, list) or not all(isinstance(o, int) and not isinstance(o, bool) for o in offsets):
        r.err("host.offsets must be a list of integers", "host", "offsets")
    hpath = r.get("host", "path")
    if kind == "file" and not isinstance(hpath, str):
        r.err("host.path is required for kind 'file'", "host")
    if kind != "file" and hn is None and not r.get("ensemble", "ns"):
        r.err("host.n is required", "host")
    if kind == "circulant" and not offsets:
        r.err("host.offsets is required for kind 'circulant'", "host")
    host = HostSpec(kind, hn, tuple(offsets), hpath)

    ising = r.choice("ising", "mode", options=ISING_MODES, default="grid")
    ipath = r.get("ising", "path")
    if ising == "file" and not isinstance(ipath, str):
        r.err("ising.path is required for mode 'file'", "ising")

    mu_raw = r.get("schedule", "mu", default="auto")
    mu = None if mu_raw == "auto" else r.number("schedule", "mu", positive=True)
    sched = ScheduleSpec(
        A0=r.number("schedule", "A0", default=1.0, nonneg=True),
        B0=r.number("schedule", "B0", default=1.0, nonneg=True),
        T=r.number("schedule", "T", default=10.0, positive=True),
        delta=r.number("schedule", "delta", default=2.0, positive=True),
        mu=mu,
        eps=r.number("schedule", "eps", positive=True),
    )
    if not sched.delta < sched.T:
        r.err(f"schedule.delta must be smaller than schedule.T ({sched.delta} >= {sched.T})",
              "schedule", "delta")
    if mu is None and sched.eps is None and "schedule" in data:
        r.err("mu: auto needs schedule.eps", "schedule", "mu")

    try:
        evo = EvolutionConfig(
            steps=r.number("evolution", "steps", default=4096, integer=True, positive=True),
            tolerance=r.number("evolution", "tolerance", default=1e-8, positive=True),
            adaptive=r.boolean("evolution", "adaptive", default=False),
            mesh=r.choice("evolution", "mesh", options=("uniform", "window"), default="uniform"),
        )
    except ValueError as exc:
        r.err(str(exc), "evolution")

    ns = r.get("ensemble", "ns", default=[])
    if not isinstance(ns, list) or not all(isinstance(x, int) and x >= 2 for x in ns):
        r.err("ensemble.ns must be a list of integers >= 2", "ensemble", "ns")
    fixed_v = r.get("ensemble", "fixed_v")
    if fixed_v is not None and (not isinstance(fixed_v, list)
                                or not all(isinstance(x, (int, float)) for x in fixed_v)):
        r.err("ensemble.fixed_v must be a list of numbers", "ensemble", "fixed_v")
    target = r.get("ensemble", "target_s")
    if target is not None and (not isinstance(target, str) or set(target) - {"0", "1"}):
        r.err("ensemble.target_s must be a bitstring", "ensemble", "target_s")
    ens = EnsembleSpec(
        instances=r.number("ensemble", "instances", default=1000, integer=True, positive=True),
        ns=tuple(ns),
        fixed_v=None if fixed_v is None else tuple(float(x) for x in fixed_v),
        target_s=target,
        supremacy=r.boolean("ensemble", "supremacy", default=False),
        eps=r.number("ensemble", "eps", default=0.2, positive=True),
    )

    checks = r.get("verify", "checks", default=list(VERIFY_CHECKS))
    if not isinstance(checks, list) or set(checks) - set(VERIFY_CHECKS):
        r.err(f"verify.checks must be a subset of {list(VERIFY_CHECKS)}", "verify", "checks")

    out_dir = r.get("output", "dir", default="out")
    if not isinstance(out_dir, str):
        r.err("output.dir must be a string", "output", "dir")

    return ExperimentConfig(
        seed=seed, d=d, host=host, ising=ising, ising_path=ipath, schedule=sched, evolution=evo,
        ensemble=ens,
        sample_count=r.number("sample", "count", default=1000, integer=True, positive=True),
        sample_theta=r.choice("sample", "theta", options=THETA_MODES, default="random"),
        perturbation=r.number("verify", "perturbation", default=0.01, nonneg=True),
        checks=tuple(checks), out_dir=out_dir, source=source,
        digest=hashlib.sha256(text.encode()).hexdigest()[:16], base_dir=base_dir, lines=lines,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path), str(path.parent))
