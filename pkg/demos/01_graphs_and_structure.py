"""
Graphs, structure matrices and joint connectivity
=================================================

A leader (node 0) and four followers. No single graph below reaches
every follower, but each consecutive triple does when taken together.
"""

import numpy as np

from leadfollow.graphtop import gershgorin_discs, is_connected, jointly_connected, min_real_eig, union
from leadfollow.scenario import demo_graphs

graphs = demo_graphs()
for k, g in enumerate(graphs):
    print(f"graph {k}: edges {sorted(g.edges)}, leader links {sorted(g.leader_links)}, "
          f"connected={is_connected(g)}")

# %%
# H = L + D for one graph. The follower Laplacian L has zero row sums,
# D holds the leader-link weights.
print(graphs[0].h)

# %%
# Joint connectivity of the two triples, and the least real part of the
# eigenvalues of the summed structure matrix. Positive means every
# follower hears the leader at least indirectly.
for first in (0, 3):
    triple = graphs[first : first + 3]
    h_sum = union(triple).h
    print(f"graphs {first}-{first + 2}: jointly connected={jointly_connected(triple)}, "
          f"min Re eig = {min_real_eig(h_sum):.4f}")

# %%
# Every eigenvalue lies in the union of Gershgorin discs; for structure
# matrices the discs touch the origin at most, never cross it.
h_avg = union(graphs[:3], [1 / 3] * 3).h
for d in gershgorin_discs(h_avg):
    print(f"disc centre {d.center.real:.3f}, radius {d.radius:.3f}")
print("eigenvalues:", np.round(np.linalg.eigvals(h_avg), 4))
