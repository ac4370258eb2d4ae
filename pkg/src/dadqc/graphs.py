"""Hardware graphs and uniformly sampled d-factors of them.

A hardware graph is a fixed simple D-regular graph on vertices 0..n-1. An
interaction graph is a d-factor of it: a spanning subgraph using only host
edges in which every vertex has degree exactly d. Edges are always stored as
sorted ``(u, v)`` tuples with ``u < v``, in lexicographic order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx
import numpy as np

from .errors import NoFactorError, RetryExhaustedError

Edge = tuple[int, int]

ENUMERATION_LIMIT_N = 10


def _canonical_edges(edges) -> tuple[Edge, ...]:
    out = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        e = (u, v) if u < v else (v, u)
        if e in out:
            raise ValueError(f"duplicate edge {e}")
        out.add(e)
    return tuple(sorted(out))


def degrees(n: int, edges) -> np.ndarray:
    deg = np.zeros(n, dtype=int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    return deg


def edge_hash(edges) -> str:
    """Short stable fingerprint of an edge list."""
    text = ";".join(f"{u},{v}" for u, v in edges)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class HardwareGraph:
    n: int
    edges: tuple[Edge, ...]
    D: int
    name: str = "custom"

    def __post_init__(self):
        edges = _canonical_edges(self.edges)
        object.__setattr__(self, "edges", edges)
        for u, v in edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge {(u, v)} out of range for n={self.n}")
        deg = degrees(self.n, edges)
        if self.n and not np.all(deg == self.D):
            raise ValueError(f"graph is not {self.D}-regular (degrees {sorted(set(deg.tolist()))})")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def is_complete(self) -> bool:
        return self.m == self.n * (self.n - 1) // 2

    @classmethod
    def from_edges(cls, n: int, edges, name: str = "custom") -> HardwareGraph:
        edges = _canonical_edges(edges)
        deg = degrees(n, edges)
        D = int(deg[0]) if n else 0
        return cls(n, edges, D, name)


@dataclass(frozen=True)
class InteractionGraph:
    """A d-factor of ``host``.

    ``seed``, ``swap_steps`` and ``method`` record how the sample was produced;
    they do not take part in equality.
    """

    n: int
    edges: tuple[Edge, ...]
    d: int
    host: HardwareGraph | None = field(default=None, compare=False, repr=False)
    seed: int | None = field(default=None, compare=False)
    swap_steps: int = field(default=0, compare=False)
    method: str = field(default="given", compare=False)

    def __post_init__(self):
        edges = _canonical_edges(self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n and not np.all(degrees(self.n, edges) == self.d):
            raise ValueError(f"graph is not {self.d}-regular")
        if self.host is not None:
            if self.host.n != self.n:
                raise ValueError("vertex count differs from host")
            if not set(edges) <= set(self.host.edges):
                raise ValueError("factor uses edges absent from the host")
            if not 0 <= self.d <= self.host.D:
                raise ValueError(f"degree {self.d} outside [0, {self.host.D}]")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def hash(self) -> str:
        return edge_hash(self.edges)

    def degree(self) -> np.ndarray:
        return degrees(self.n, self.edges)


def build_complete(n: int) -> HardwareGraph:
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got {n}")
    return HardwareGraph(n, tuple(combinations(range(n), 2)), n - 1, f"K{n}")


def build_circulant(n: int, offsets) -> HardwareGraph:
    """Circulant graph: vertex i is joined to i +- o (mod n) for each offset o."""
    offsets = [int(o) for o in offsets]
    if not offsets:
        raise ValueError("offsets must be nonempty")
    if len(set(offsets)) != len(offsets):
        raise ValueError(f"duplicate offsets {offsets}")
    if any(o < 1 or 2 * o > n for o in offsets):
        raise ValueError(f"offsets must lie in 1..{n // 2}, got {offsets}")
    edges = set()
    for i in range(n):
        for o in offsets:
            j = (i + o) % n
            edges.add((min(i, j), max(i, j)))
    D = 2 * len(offsets) - (1 if n % 2 == 0 and n // 2 in offsets else 0)
    name = f"C{n}(" + ",".join(map(str, sorted(offsets))) + ")"
    return HardwareGraph(n, tuple(sorted(edges)), D, name)


def _check_degree(host: HardwareGraph, d: int):
    if not 0 <= d <= host.D:
        raise ValueError(f"d={d} must satisfy 0 <= d <= D={host.D}")


def _factor_edges_by_matching(host: HardwareGraph, d: int) -> tuple[Edge, ...] | None:
    # Tutte's gadget: a d-factor of H exists iff the gadget has a perfect matching.
    adj = {v: [] for v in range(host.n)}
    for u, v in host.edges:
        adj[u].append(v)
        adj[v].append(u)
    g = nx.Graph()
    for u, v in host.edges:
        g.add_edge(("x", u, v), ("x", v, u))
    for v in range(host.n):
        for k in range(host.D - d):
            for u in sorted(adj[v]):
                g.add_edge(("c", v, k), ("x", v, u))
    matching = nx.max_weight_matching(g, maxcardinality=True)
    if 2 * len(matching) != g.number_of_nodes():
        return None
    chosen = set()
    for a, b in matching:
        if a[0] == "x" and b[0] == "x":
            u, v = a[1], b[1]
            chosen.add((min(u, v), max(u, v)))
    return tuple(sorted(chosen))


def find_d_factor(host: HardwareGraph, d: int) -> InteractionGraph | None:
    """Return some d-factor of ``host``, or None when none exists.

    The answer is exact. Whichever of d and D-d is larger is solved through the
    matching gadget (it has fewer core vertices) and complemented if needed.
    """
    _check_degree(host, d)
    if (host.n * d) % 2:
        return None
    if d == host.D:
        return InteractionGraph(host.n, host.edges, d, host, method="matching")
    if d == 0:
        return InteractionGraph(host.n, (), 0, host, method="matching")
    target = d if d >= host.D - d else host.D - d
    edges = _factor_edges_by_matching(host, target)
    if edges is None:
        return None
    if target != d:
        edges = tuple(e for e in host.edges if e not in set(edges))
    return InteractionGraph(host.n, edges, d, host, method="matching")


def enumerate_d_factors(host: HardwareGraph, d: int, limit: int | None = None) -> list[InteractionGraph]:
    """All d-factors of a small host by backtracking over lexicographic edges.

    ``limit`` stops the search after that many factors have been found.
    """
    if host.n > ENUMERATION_LIMIT_N:
        raise ValueError(f"enumeration refused for n={host.n} > {ENUMERATION_LIMIT_N}")
    _check_degree(host, d)
    out: list[InteractionGraph] = []
    if (host.n * d) % 2:
        return out
    edges = host.edges
    rem = [d] * host.n
    avail = list(degrees(host.n, edges))
    chosen: list[Edge] = []

    def rec(i):
        if limit is not None and len(out) >= limit:
            return
        if i == len(edges):
            if not any(rem):
                out.append(InteractionGraph(host.n, tuple(chosen), d, host, method="enumerated"))
            return
        u, v = edges[i]
        avail[u] -= 1
        avail[v] -= 1
        if rem[u] and rem[v]:
            rem[u] -= 1
            rem[v] -= 1
            chosen.append((u, v))
            if rem[u] <= avail[u] and rem[v] <= avail[v]:
                rec(i + 1)
            chosen.pop()
            rem[u] += 1
            rem[v] += 1
        if rem[u] <= avail[u] and rem[v] <= avail[v]:
            rec(i + 1)
        avail[u] += 1
        avail[v] += 1

    rec(0)
    return out


def _pairing_model(n: int, d: int, rng: np.random.Generator, max_tries: int) -> tuple[Edge, ...]:
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        u = pairs.min(axis=1)
        v = pairs.max(axis=1)
        if np.any(u == v):
            continue
        keys = u * n + v
        if np.unique(keys).size != keys.size:
            continue
        return tuple(sorted(zip(u.tolist(), v.tolist())))
    raise RetryExhaustedError(f"pairing model rejected {max_tries} configurations (n={n}, d={d})")


def edge_swap_chain(edges, host_edges, steps: int, rng: np.random.Generator) -> tuple[Edge, ...]:
    """Run ``steps`` proposals of the degree-preserving double edge swap.

    {a,b},{c,d} -> {a,c},{b,d} (or {a,d},{b,c}) is accepted only when both new
    edges are host edges absent from the current factor. The proposal is
    symmetric, so the uniform distribution on the reachable factors is stationary.
    """
    cur = list(edges)
    present = set(cur)
    host_set = set(host_edges)
    m = len(cur)
    if m < 2:
        return tuple(sorted(cur))
    picks = rng.integers(0, m, size=(steps, 2))
    flips = rng.integers(0, 2, size=steps)
    for (i, j), flip in zip(picks.tolist(), flips.tolist()):
        if i == j:
            continue
        a, b = cur[i]
        c, dd = cur[j]
        if flip:
            c, dd = dd, c
        if len({a, b, c, dd}) < 4:
            continue
        e1 = (a, c) if a < c else (c, a)
        e2 = (b, dd) if b < dd else (dd, b)
        if e1 in present or e2 in present or e1 not in host_set or e2 not in host_set:
            continue
        present.discard(cur[i])
        present.discard(cur[j])
        cur[i], cur[j] = e1, e2
        present.add(e1)
        present.add(e2)
    return tuple(sorted(cur))


def sample_d_factor(
    host: HardwareGraph,
    d: int,
    seed: int,
    swap_steps: int | None = None,
    *,
    method: str = "auto",
    max_tries: int = 1_000_000,
) -> InteractionGraph:
    """Draw a d-factor of ``host``.

    Complete hosts use the pairing model with full rejection, which is exactly
    uniform over labelled d-regular graphs. Other hosts (or ``method="swap"``)
    run the edge-swap chain from ``find_d_factor``'s output for ``swap_steps``
    proposals, defaulting to 100 per factor edge.
    """
    _check_degree(host, d)
    if method not in ("auto", "pairing", "swap"):
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng(seed)
    if method == "auto":
        method = "pairing" if host.is_complete else "swap"
    if (host.n * d) % 2:
        raise NoFactorError(f"{host.name} has no {d}-factor (n*d odd)")
    if method == "pairing":
        if not host.is_complete:
            raise ValueError("pairing model needs a complete host")
        edges = _pairing_model(host.n, d, rng, max_tries)
        return InteractionGraph(host.n, edges, d, host, seed=seed, method="pairing")
    start = find_d_factor(host, d)
    if start is None:
        raise NoFactorError(f"{host.name} has no {d}-factor")
    if swap_steps is None:
        swap_steps = 100 * start.m
    edges = edge_swap_chain(start.edges, host.edges, swap_steps, rng)
    return InteractionGraph(host.n, edges, d, host, seed=seed, swap_steps=swap_steps, method="swap")
