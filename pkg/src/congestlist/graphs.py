"""Graph representation, degeneracy orientations, generators, and the
brute-force clique oracle.

Graphs are immutable: nodes are 0..n-1, edges are normalized (u, v) pairs
with u < v, and the optional orientation maps each edge to the endpoint it
points *away from* (its tail). Partitions and edge removals downstream are
expressed as label maps over the edge set, never by mutating a Graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Iterator, Mapping

import numpy as np

Edge = tuple[int, int]
# A listed clique: strictly increasing tuple of p node IDs.
CliqueInstance = tuple[int, ...]


def norm_edge(u: int, v: int) -> Edge:
    if u == v:
        raise ValueError(f"self-loop at node {u}")
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[Edge]
    # edge -> tail node. None means the default orientation (away from the
    # smaller endpoint).
    orientation: Mapping[Edge, int] | None = None

    def __post_init__(self):
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range for n={self.n}")
        if self.orientation is not None:
            for e, t in self.orientation.items():
                if t not in e:
                    raise ValueError(f"tail {t} is not an endpoint of {e}")

    @property
    def m(self) -> int:
        return len(self.edges)

    def tail(self, e: Edge) -> int:
        if self.orientation is None:
            return e[0]
        return self.orientation.get(e, e[0])

    def head(self, e: Edge) -> int:
        t = self.tail(e)
        return e[1] if t == e[0] else e[0]

    @cached_property
    def adj_masks(self) -> list[int]:
        """Adjacency as one int bitmask per node."""
        masks = [0] * self.n
        for u, v in self.edges:
            masks[u] |= 1 << v
            masks[v] |= 1 << u
        return masks

    @cached_property
    def sorted_edges(self) -> tuple[Edge, ...]:
        return tuple(sorted(self.edges))

    def neighbors(self, u: int) -> Iterator[int]:
        return iter_bits(self.adj_masks[u])

    def degree(self, u: int) -> int:
        return self.adj_masks[u].bit_count()

    def has_edge(self, u: int, v: int) -> bool:
        return u != v and bool(self.adj_masks[u] >> v & 1)

    def out_edges(self, u: int) -> list[Edge]:
        return [e for e in self.incident_edges(u) if self.tail(e) == u]

    def out_degree(self, u: int) -> int:
        return len(self.out_edges(u))

    def incident_edges(self, u: int) -> list[Edge]:
        return [norm_edge(u, v) for v in self.neighbors(u)]

    def max_out_degree(self) -> int:
        counts = [0] * self.n
        for e in self.edges:
            counts[self.tail(e)] += 1
        return max(counts, default=0)

    def with_orientation(self, orientation: Mapping[Edge, int]) -> "Graph":
        return Graph(self.n, self.edges, dict(orientation))


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class OrientationCertificate:
    max_out_degree: int
    peel_order: tuple[int, ...]


def degeneracy_orient(g: Graph) -> tuple[Graph, OrientationCertificate]:
    """Orient every edge away from its earlier-peeled endpoint.

    Peeling repeatedly removes a (smallest-ID) node of minimum remaining
    degree; the certificate's max_out_degree is the degeneracy of g, and
    every node's out-degree under the returned orientation is at most it.
    """
    degs = [g.degree(u) for u in range(g.n)]
    alive = g.adj_masks[:]
    removed = [False] * g.n
    # bucket queue over degrees
    buckets: list[set[int]] = [set() for _ in range(g.n)] or [set()]
    for u in range(g.n):
        buckets[degs[u]].add(u)
    order: list[int] = []
    degeneracy = 0
    cur = 0
    for _ in range(g.n):
        while cur < len(buckets) and not buckets[cur]:
            cur += 1
        u = min(buckets[cur])
        buckets[cur].remove(u)
        degeneracy = max(degeneracy, degs[u])
        order.append(u)
        removed[u] = True
        for v in iter_bits(alive[u]):
            if not removed[v]:
                buckets[degs[v]].remove(v)
                degs[v] -= 1
                buckets[degs[v]].add(v)
                alive[v] &= ~(1 << u)
        cur = max(0, cur - 1)
    rank = {u: i for i, u in enumerate(order)}
    orientation = {e: (e[0] if rank[e[0]] < rank[e[1]] else e[1]) for e in g.edges}
    cert = OrientationCertificate(degeneracy if g.edges else 0, tuple(order))
    return g.with_orientation(orientation), cert


def enumerate_cliques(adj: list[int], p: int, n: int | None = None) -> set[CliqueInstance]:
    """All p-cliques of the graph given as adjacency bitmasks."""
    n = len(adj) if n is None else n
    out: set[CliqueInstance] = set()

    def rec(prefix: list[int], cand: int, depth: int):
        if depth == p:
            out.add(tuple(prefix))
            return
        # Prune: not enough candidates left to finish.
        if cand.bit_count() < p - depth:
            return
        for v in iter_bits(cand):
            prefix.append(v)
            # only higher-numbered nodes keep the output sorted and unique
            rec(prefix, cand & adj[v] & ~((1 << (v + 1)) - 1), depth + 1)
            prefix.pop()

    rec([], (1 << n) - 1, 0)
    return out


def brute_force_list_kp(g: Graph, p: int) -> set[CliqueInstance]:
    """All p-cliques of g, by recursive neighborhood intersection.

    This is the oracle every listing algorithm is checked against.
    """
    if p < 3:
        raise ValueError(f"p must be >= 3, got {p}")
    return enumerate_cliques(g.adj_masks, p, g.n)


def cliques_with_node(adj: list[int], n: int, p: int, v: int) -> set[CliqueInstance]:
    """p-cliques containing v in the graph given by adjacency masks."""
    out: set[CliqueInstance] = set()

    def rec(prefix: list[int], cand: int, depth: int):
        if depth == p:
            out.add(tuple(sorted(prefix)))
            return
        if cand.bit_count() < p - depth:
            return
        for w in iter_bits(cand):
            prefix.append(w)
            rec(prefix, cand & adj[w] & ~((1 << (w + 1)) - 1), depth + 1)
            prefix.pop()

    rec([v], adj[v], 1)
    return out


def is_clique(g: Graph, nodes: CliqueInstance) -> bool:
    return all(g.has_edge(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:])


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def empty(n: int) -> Graph:
    return Graph(n, frozenset())


def complete(n: int) -> Graph:
    return Graph(n, frozenset((u, v) for u in range(n) for v in range(u + 1, n)))


def gnp(n: int, q: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, q), deterministic per seed."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(iu.shape[0]) < q
    edges = frozenset(zip(iu[keep].tolist(), iv[keep].tolist()))
    return Graph(n, edges)

def planted(n: int, p: int, count: int, q_background: float, seed: int) -> Graph:
    """G(n, q_background) with `count` vertex-disjoint K_p planted on top."""
    if count * p > n:
        raise ValueError(f"cannot plant {count} disjoint K_{p} in {n} nodes")
    rng = np.random.default_rng(seed)
    base = gnp(n, q_background, seed + 1)
    nodes = rng.permutation(n)[: count * p]
    edges = set(base.edges)
    for i in range(count):
        group = sorted(int(x) for x in nodes[i * p:(i + 1) * p])
        edges.update((a, b) for j, a in enumerate(group) for b in group[j + 1:])
    return Graph(n, frozenset(edges))


def planted_cliques(n: int, p: int, count: int, seed: int) -> list[CliqueInstance]:
    """The clique node sets planted() embeds for the same (n, p, count, seed)."""
    rng = np.random.default_rng(seed)
    nodes = rng.permutation(n)[: count * p]
    return [tuple(sorted(int(x) for x in nodes[i * p:(i + 1) * p])) for i in range(count)]


def parse_gen_spec(spec: str) -> Graph:
    """Parse generator specs like gnp:100:0.25:7, complete:8, empty:32,
    planted:40:5:3:0.05:2."""
    parts = spec.split(":")
    kind, args = parts[0], parts[1:]
    try:
        if kind == "gnp":
            n, q, seed = int(args[0]), float(args[1]), int(args[2])
            return gnp(n, q, seed)
        if kind == "planted":
            n, p, count, q, seed = (int(args[0]), int(args[1]), int(args[2]),
                                    float(args[3]), int(args[4]))
            return planted(n, p, count, q, seed)
        if kind == "complete":
            return complete(int(args[0]))
        if kind == "empty":
            return empty(int(args[0]))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad generator spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# subgraphs
# ---------------------------------------------------------------------------

def edge_subgraph(g: Graph, keep: Callable[[Edge], bool]) -> Graph:
    """Same node set, edges filtered by predicate, orientation restricted."""
    edges = frozenset(e for e in g.edges if keep(e))
    orientation = None
    if g.orientation is not None:
        orientation = {e: t for e, t in g.orientation.items() if e in edges}
    return Graph(g.n, edges, orientation)


def subgraph_from_edges(n: int, edges: Iterable[Edge],
                        orientation: Mapping[Edge, int] | None = None) -> Graph:
    return Graph(n, frozenset(edges), dict(orientation) if orientation else None)


# ---------------------------------------------------------------------------
# edge-list I/O: header "n m", one "u v [tail]" line per edge
# ---------------------------------------------------------------------------

def write_edge_list(g: Graph, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.sorted_edges:
            if g.orientation is None:
                fh.write(f"{u} {v}\n")
            else:
                fh.write(f"{u} {v} {g.tail((u, v))}\n")


def read_edge_list(path: str) -> Graph:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected header 'n m'")
        n, m = int(header[0]), int(header[1])
        edges = set()
        orientation: dict[Edge, int] = {}
        oriented = False
        for line in fh:
            fields = line.split()
            if not fields:
                continue
            u, v = int(fields[0]), int(fields[1])
            e = norm_edge(u, v)
            edges.add(e)
            if len(fields) >= 3:
                orientation[e] = int(fields[2])
                oriented = True
    if len(edges) != m:
        raise ValueError(f"{path}: header claims {m} edges, found {len(edges)}")
    return Graph(n, frozenset(edges), orientation if oriented else None)
