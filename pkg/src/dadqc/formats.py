"""Plain-text exchange formats.

Graph file::

    # {"seed": 7, ...}        optional one-line JSON provenance header
    n m
    u v                       m lines, 0-based, u < v

An Ising instance appends ``h i value`` and ``J u v value`` lines; a circuit
description further appends ``theta i value`` lines and one ``beta value``
line. Blank lines and further ``#`` comment lines are ignored. Distributions
are CSV ``index,probability``; sample files hold one bitstring per line with
qubit 0 first (the most significant qubit last).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .evolution import format_bitstring
from .graphs import InteractionGraph, _canonical_edges, degrees
from .ising import IsingParams


def provenance_line(header: dict) -> str:
    return "# " + json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n"


def _num(x) -> str:
    return repr(float(x))


@dataclass
class ParsedInstance:
    n: int
    edges: tuple
    header: dict = field(default_factory=dict)
    h: dict = field(default_factory=dict)
    J: dict = field(default_factory=dict)
    theta: dict = field(default_factory=dict)
    beta: float | None = None

    def degree(self) -> int:
        deg = degrees(self.n, self.edges)
        if self.n and np.any(deg != deg[0]):
            raise FormatError("graph is not regular")
        return int(deg[0]) if self.n else 0

    def graph(self, host=None) -> InteractionGraph:
        return InteractionGraph(self.n, self.edges, self.degree(), host)

    def params(self, host=None) -> IsingParams:
        g = self.graph(host)
        h = np.array([self.h.get(i, 0.0) for i in range(self.n)])
        J = np.array([self.J.get(e, 0.0) for e in g.edges])
        cap = max(np.pi, float(np.abs(h).max(initial=0.0)), float(np.abs(J).max(initial=0.0)))
        return IsingParams(g, h, J, cap, cap)

    def theta_array(self) -> np.ndarray:
        return np.array([self.theta.get(i, 0.0) for i in range(self.n)])


def parse_instance(text: str, source=None) -> ParsedInstance:
    header: dict = {}
    n = m = None
    edges = []
    inst = ParsedInstance(0, ())
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if n is None and not header and body.startswith("{"):
                try:
                    header = json.loads(body)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"bad provenance header: {exc.msg}", lineno, source) from None
            continue
        tok = line.split()
        try:
            if n is None:
                if len(tok) != 2:
                    raise FormatError("expected 'n m'", lineno, source)
                n, m = int(tok[0]), int(tok[1])
                if n < 0 or m < 0:
                    raise FormatError("negative size", lineno, source)
            elif tok[0] == "h" and len(tok) == 3:
                i = int(tok[1])
                _vertex(i, n, lineno, source)
                inst.h[i] = float(tok[2])
            elif tok[0] == "J" and len(tok) == 4:
                u, v = sorted((int(tok[1]), int(tok[2])))
                inst.J[(u, v)] = float(tok[3])
            elif tok[0] == "theta" and len(tok) == 3:
                i = int(tok[1])
                _vertex(i, n, lineno, source)
                inst.theta[i] = float(tok[2])
            elif tok[0] == "beta" and len(tok) == 2:
                inst.beta = float(tok[1])
            elif len(tok) == 2:
                u, v = int(tok[0]), int(tok[1])
                if not u < v:
                    raise FormatError(f"edge '{line}' must have u < v", lineno, source)
                _vertex(v, n, lineno, source)
                if u < 0:
                    raise FormatError(f"negative vertex in '{line}'", lineno, source)
                edges.append((u, v))
            else:
                raise FormatError(f"unrecognised line '{line}'", lineno, source)
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"cannot parse '{line}'", lineno, source) from None
    if n is None:
        raise FormatError("missing 'n m' line", None, source)
    if len(edges) != m:
        raise FormatError(f"header announces {m} edges, found {len(edges)}", None, source)
    try:
        edges = _canonical_edges(edges)
    except ValueError as exc:
        raise FormatError(str(exc), None, source) from None
    missing = set(inst.J) - set(edges)
    if missing:
        raise FormatError(f"couplings on non-edges {sorted(missing)}", None, source)
    inst.n, inst.edges, inst.header = n, edges, header
    return inst


def _vertex(i, n, lineno, source):
    if not 0 <= i < n:
        raise FormatError(f"vertex {i} out of range for n={n}", lineno, source)


def read_instance(path) -> ParsedInstance:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror}") from None
    return parse_instance(text, str(path))


def format_graph(n: int, edges, header: dict | None = None) -> str:
    out = [provenance_line(header)] if header else []
    out.append(f"{n} {len(edges)}\n")
    out.extend(f"{u} {v}\n" for u, v in edges)
    return "".join(out)


def format_instance(params: IsingParams, header: dict | None = None, theta=None, beta=None) -> str:
    out = [format_graph(params.n, params.edges, header)]
    out.extend(f"h {i} {_num(x)}\n" for i, x in enumerate(params.h))
    out.extend(f"J {u} {v} {_num(x)}\n" for (u, v), x in zip(params.edges, params.J))
    if theta is not None:
        out.extend(f"theta {i} {_num(x)}\n" for i, x in enumerate(theta))
    if beta is not None:
        out.append(f"beta {_num(beta)}\n")
    return "".join(out)


def format_distribution(dist, header: dict | None = None) -> str:
    out = [provenance_line(header)] if header else []
    out.append("index,probability\n")
    out.extend(f"{i},{_num(p)}\n" for i, p in enumerate(np.asarray(dist, dtype=float)))
    return "".join(out)


def parse_distribution(text: str) -> np.ndarray:
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0].strip() != "index,probability":
        raise FormatError("missing 'index,probability' header")
    vals = []
    for k, ln in enumerate(rows[1:]):
        i, p = ln.split(",")
        if int(i) != k:
            raise FormatError(f"index {i} out of order")
        vals.append(float(p))
    return np.array(vals)


def format_samples(indices, n: int, header: dict | None = None) -> str:
    out = [provenance_line(header)] if header else []
    out.extend(format_bitstring(int(i), n) + "\n" for i in indices)
    return "".join(out)


def parse_samples(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def bitstring_index(bits: str) -> int:
    """Inverse of ``format_bitstring``: character i is qubit i."""
    return sum(1 << i for i, c in enumerate(bits) if c == "1")
