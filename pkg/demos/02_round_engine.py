"""The round-synchronous engine: per-node step functions, one O(log n)-bit
message per edge per direction per round, accounting per phase.

The protocol below floods every node's outgoing edges to all neighbors, one
edge per neighbor per round, which is exactly how the terminal broadcast of
the CONGEST pipeline works.
"""

import json

from congestlist import RoundEngine, degeneracy_orient, gnp

g, _ = degeneracy_orient(gnp(16, 0.5, seed=3))


def flood(node, state, inbox, rnd, rng):
    out = state["out"]
    if rnd > len(out):
        return state, [], True
    u, v = out[rnd - 1]
    sends = [(dst, (u, v)) for dst in state["neighbors"]]
    return state, sends, rnd == len(out)


init = {
    u: {"out": sorted(g.out_edges(u)), "neighbors": sorted(g.neighbors(u))}
    for u in range(g.n)
}
engine = RoundEngine(g, seed=0)
run = engine.run_protocol(flood, init_states=init, phase="flood")

print(f"rounds: {run.rounds} (= max out-degree {g.max_out_degree()})")
print(f"node 0 heard {len(run.inbox_log[0])} edge announcements")
print("transcript:")
print(json.dumps(engine.accounting.to_json()["rounds_by_phase"], indent=2))

# Sending two messages over one edge in one round is a bandwidth violation
# and aborts the run:
from congestlist import BudgetViolation, complete  # noqa: E402

eng2 = RoundEngine(complete(3))
try:
    eng2.run_protocol(lambda u, s, i, r, rng:
                      (s, [(1, (1,)), (1, (2,))] if u == 0 else [], True))
except BudgetViolation as exc:
    print(f"caught as expected: {exc}")
