"""Graphs, orientations, and the brute-force clique oracle.

Every listing algorithm in this package is judged against
brute_force_list_kp, so this is the place to start.
"""

from congestlist import brute_force_list_kp, complete, degeneracy_orient, gnp
from congestlist.graphs import planted, planted_cliques

# An Erdos-Renyi graph, deterministic per seed.
g = gnp(40, 0.3, seed=7)
print(f"G(40, 0.3, seed=7): {g.m} edges")

# Degeneracy peeling orients every edge away from its earlier-peeled
# endpoint; the certificate bounds every node's out-degree.
og, cert = degeneracy_orient(g)
print(f"degeneracy (max out-degree): {cert.max_out_degree}")
print(f"actual max out-degree:       {og.max_out_degree()}")

# The oracle lists every p-clique.
for p in (3, 4):
    print(f"K_{p} instances: {len(brute_force_list_kp(g, p))}")

# Planted instances are guaranteed to appear in the output.
h = planted(40, 5, 3, 0.05, seed=2)
found = brute_force_list_kp(h, 5)
for clique in planted_cliques(40, 5, 3, seed=2):
    print(f"planted {clique} listed: {clique in found}")

print(f"complete(6) has {len(brute_force_list_kp(complete(6), 4))} K_4s (C(6,4) = 15)")
