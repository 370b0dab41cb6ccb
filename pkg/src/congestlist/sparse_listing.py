"""Sparsity-aware K_p listing over a complete communication graph.

The same machinery drives two callers: the standalone congested-clique mode
(num_parts = ceil(n^(1/p)), every node simulates itself) and the in-cluster
listing core (num_parts = ceil(k^(1/p)), each of the k cluster nodes
simulates a range of graph nodes).

Nodes are split into num_parts random parts. New IDs in [1..k] map to
p-tuples of parts through the base-num_parts digits of new_id - 1; because
ceil() makes num_parts^p overshoot k, a node stands in for every tuple index
congruent to its own modulo k, so all num_parts^p tuples stay covered. An
edge travels to exactly the nodes whose tuple contains both endpoint parts
(in two distinct digit positions), and each receiver lists the cliques it
sees. Sparse inputs are padded with tagged fake edges that ride along for
load purposes but are never listed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .engine import Accounting, BudgetViolation, RoundEngine
from .graphs import CliqueInstance, Edge, Graph, enumerate_cliques


@dataclass(frozen=True)
class NodePartition:
    num_parts: int
    assignment: tuple[int, ...]
    seed: int

    def part_of(self, node: int) -> int:
        return self.assignment[node]

    def part_sizes(self) -> list[int]:
        sizes = [0] * self.num_parts
        for part in self.assignment:
            sizes[part] += 1
        return sizes


def random_partition(n: int, num_parts: int, seed: int) -> NodePartition:
    """Independently uniform part per node, derived from the seed."""
    if num_parts < 1:
        raise ValueError("num_parts must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x9A77)))
    parts = rng.integers(0, num_parts, size=n)
    return NodePartition(num_parts, tuple(int(x) for x in parts), seed)


def tuple_assign(new_id: int, num_parts: int, p: int) -> tuple[int, ...]:
    """Little-endian base-num_parts digits of new_id - 1, padded to p."""
    if new_id < 1:
        raise ValueError("new IDs start at 1")
    x = new_id - 1
    digits = []
    for _ in range(p):
        digits.append(x % num_parts)
        x //= num_parts
    return tuple(digits)


def covered_tuple_indices(new_id: int, k: int, num_parts: int, p: int) -> list[int]:
    """All tuple indices node new_id stands in for (wrap-around coverage)."""
    total = num_parts ** p
    if total >= k:
        return list(range(new_id - 1, total, k))
    return [(new_id - 1) % total]


@dataclass(frozen=True)
class FanoutTable:
    """Precomputed pair-of-parts -> receiving new IDs map for (b, p, k)."""
    num_parts: int
    p: int
    k: int
    by_pair: dict[tuple[int, int], tuple[int, ...]]
    pairs_by_node: dict[int, tuple[tuple[int, int], ...]]


def build_fanout_table(num_parts: int, p: int, k: int) -> FanoutTable:
    total = num_parts ** p
    by_pair: dict[tuple[int, int], set[int]] = {}
    pairs_by_node: dict[int, set[tuple[int, int]]] = {w: set() for w in range(1, k + 1)}
    for t in range(total):
        digits = tuple_assign(t + 1, num_parts, p)
        pairs = {
            (min(digits[i], digits[j]), max(digits[i], digits[j]))
            for i in range(p) for j in range(i + 1, p)
        }
        if total >= k:
            owners = [t % k + 1]
        else:
            owners = list(range(t + 1, k + 1, total))
        for pair in pairs:
            by_pair.setdefault(pair, set()).update(owners)
        for w in owners:
            pairs_by_node[w] |= pairs
    return FanoutTable(
        num_parts, p, k,
        {pair: tuple(sorted(ids)) for pair, ids in by_pair.items()},
        {w: tuple(sorted(pairs)) for w, pairs in pairs_by_node.items()},
    )


def delivery_fanout(edge: Edge, partition: NodePartition, num_parts: int, p: int,
                    k: int | None = None,
                    table: FanoutTable | None = None) -> set[int]:
    """New IDs that must receive this edge: every node standing in for a
    tuple that contains both endpoint parts in distinct digit positions."""
    if num_parts != partition.num_parts:
        raise ValueError("num_parts disagrees with the partition")
    k = len(partition.assignment) if k is None else k
    if table is None:
        table = build_fanout_table(num_parts, p, k)
    a = partition.part_of(edge[0])
    b = partition.part_of(edge[1])
    return set(table.by_pair.get((min(a, b), max(a, b)), ()))


# ---------------------------------------------------------------------------
# random-partition concentration check
# ---------------------------------------------------------------------------

@dataclass
class BalanceReport:
    applicable: bool
    reason: str
    counts: dict[tuple[int, ...], int]
    bounds: dict[tuple[int, ...], float]
    violations: list[tuple[tuple[int, ...], int, float]]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def events(self) -> int:
        return len(self.counts)


def check_partition_balance(g: Graph, part: NodePartition) -> BalanceReport:
    """Count edges inside every part and every union of two parts and compare
    with the 6 q^2 m concentration bound (q = sampling probability of the
    set: 1/num_parts for single parts, 2/num_parts for unions)."""
    n, m = g.n, g.m
    b = part.num_parts
    log_n = math.log2(max(2, n))
    q = 1.0 / b
    max_deg = max((g.degree(v) for v in range(n)), default=0)
    applicable = True
    reason = ""
    if m == 0 or q * q * m < 400.0 * log_n ** 2:
        applicable = False
        reason = f"q^2 m = {q * q * m:.1f} < 400 log^2 n = {400 * log_n ** 2:.1f}"
    elif max_deg > m * q / (20.0 * log_n):
        applicable = False
        reason = (f"max degree {max_deg} > mq/(20 log n) = "
                  f"{m * q / (20 * log_n):.1f}")

    cross = np.zeros((b, b), dtype=np.int64)
    for u, v in g.edges:
        pu, pv = part.part_of(u), part.part_of(v)
        cross[min(pu, pv), max(pu, pv)] += 1

    counts: dict[tuple[int, ...], int] = {}
    bounds: dict[tuple[int, ...], float] = {}
    for a in range(b):
        counts[(a,)] = int(cross[a, a])
        bounds[(a,)] = 6.0 * q * q * m
    for a in range(b):
        for c in range(a + 1, b):
            counts[(a, c)] = int(cross[a, a] + cross[c, c] + cross[a, c])
            bounds[(a, c)] = 6.0 * (2.0 * q) ** 2 * m
    violations = [(key, counts[key], bounds[key]) for key in counts
                  if counts[key] > bounds[key]]
    return BalanceReport(applicable, reason, counts, bounds, violations)


# ---------------------------------------------------------------------------
# fake-edge padding
# ---------------------------------------------------------------------------

def fake_edge_target(n: int, m: int, p: int, factor: float) -> int:
    """Edges required so that m / n^(1/p) reaches factor * n * log2 n."""
    if n < 2:
        return 0
    return math.ceil(factor * n * math.log2(n) * n ** (1.0 / p))


def sample_fake_edges(g: Graph, count: int, seed: int) -> list[Edge]:
    """Uniformly random absent pairs; capped at the complete graph."""
    if count <= 0:
        return []
    absent = [(u, v) for u in range(g.n) for v in range(u + 1, g.n)
              if not g.has_edge(u, v)]
    if count >= len(absent):
        return absent
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xFA4E)))
    picks = rng.choice(len(absent), size=count, replace=False)
    return [absent[i] for i in sorted(picks)]


# ---------------------------------------------------------------------------
# the congested-clique listing algorithm
# ---------------------------------------------------------------------------

def cc_list_kp(g: Graph, p: int, seed: int,
               cfg: SimConfig | None = None) -> tuple[set[CliqueInstance], Accounting]:
    """List all K_p of g in the congested-clique model.

    Every node owns its outgoing edges, pads the graph with tagged fake
    edges when too sparse, and ships each edge to the nodes whose part
    tuples contain the edge's endpoint parts. The union of the per-node
    outputs equals the brute-force listing; duplicates across nodes are
    allowed and removed here.
    """
    if p < 3:
        raise ValueError(f"p must be >= 3, got {p}")
    cfg = cfg or SimConfig()
    engine = RoundEngine(g, cfg, clique_mode=True, seed=seed)
    acc = engine.accounting
    n = g.n
    if n == 0:
        return set(), acc

    num_parts = max(1, math.ceil(n ** (1.0 / p)))
    partition = random_partition(n, num_parts, seed)
    table = build_fanout_table(num_parts, p, n)

    target = fake_edge_target(n, g.m, p, cfg.fake_density_factor)
    fake_edges = sample_fake_edges(g, target - g.m, seed)
    acc.notes["m_real"] = g.m
    acc.notes["m_padded"] = g.m + len(fake_edges)

    # Phase 1: every node announces its own part to everyone (one round).
    if n > 1:
        engine.phase_transfer_counts(
            "partition-broadcast",
            {(u, v): 1 for u in range(n) for v in range(n) if u != v},
            validate=False)
    else:
        engine.charge("partition-broadcast", 0)

    # Phase 2: edge delivery. The owner of each edge's tail queues one
    # message per receiving node; every ordered pair drains its queue at the
    # bandwidth cap, so the phase costs the max queue length.
    pair_groups_real: dict[tuple[int, int], list[Edge]] = {}
    send_matrix = np.zeros((n, n), dtype=np.int64)

    def pair_key(e: Edge) -> tuple[int, int]:
        a, b = partition.part_of(e[0]), partition.part_of(e[1])
        return (min(a, b), max(a, b))

    tails_by_pair: dict[tuple[int, int], list[int]] = {}
    for e in g.sorted_edges:
        pk = pair_key(e)
        pair_groups_real.setdefault(pk, []).append(e)
        tails_by_pair.setdefault(pk, []).append(g.tail(e))
    for e in fake_edges:
        tails_by_pair.setdefault(pair_key(e), []).append(e[0])

    for pk, tails in sorted(tails_by_pair.items()):
        receivers = np.array([w - 1 for w in table.by_pair.get(pk, ())], dtype=np.int64)
        if receivers.size == 0:
            continue
        tail_counts = np.bincount(np.array(tails, dtype=np.int64), minlength=n)
        send_matrix[:, receivers] += tail_counts[:, None]
    np.fill_diagonal(send_matrix, 0)  # an owner keeps its own tuples' edges

    sent_per_node = send_matrix.sum(axis=1)
    recv_per_node = send_matrix.sum(axis=0)
    for u in range(n):
        if sent_per_node[u]:
            acc.sent[u] += int(sent_per_node[u])
        if recv_per_node[u]:
            acc.received[u] += int(recv_per_node[u])
    acc.count_messages("edge-delivery", int(send_matrix.sum()))
    rounds = int(math.ceil(send_matrix.max() / engine.cap)) if send_matrix.size else 0
    engine.charge("edge-delivery", rounds)

    m_padded = g.m + len(fake_edges)
    budget = cfg.receive_budget_factor * p * p * m_padded / (num_parts * num_parts)
    worst = int(recv_per_node.max()) if n else 0
    acc.notes["edge_delivery"] = {
        "max_receive": worst,
        "receive_budget": budget,
        "measured_load_const": (worst * num_parts * num_parts / (p * p * m_padded)
                                if m_padded else 0.0),
    }
    if worst > budget:
        node = int(recv_per_node.argmax())
        acc.record_violation(node, "edge-delivery", budget, worst, "receive-budget")
        raise BudgetViolation(node, "edge-delivery", budget, worst, "receive-budget")

    # Phase 3: local listing over received real edges (fake edges are
    # tagged and never used).
    cliques: set[CliqueInstance] = set()
    for w in range(1, n + 1):
        masks = [0] * n
        for pk in table.pairs_by_node.get(w, ()):
            for u, v in pair_groups_real.get(pk, ()):
                masks[u] |= 1 << v
                masks[v] |= 1 << u
        cliques |= enumerate_cliques(masks, p, n)
    engine.charge("local-listing", 0)
    return cliques, acc

