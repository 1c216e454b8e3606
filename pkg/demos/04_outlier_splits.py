"""
Outliers and sphere splits
==========================

When one point sits far from the rest, the cheap anchor-based diameter
flags the set and the node splits by distance from the mean instead of by
a hyperplane.
"""

import numpy as np

from apdtree import (Dataset, NodeKind, SplitRule, TreeConfig, avg_diameter_sq,
                     avg_diameter_sq_pair, diameter_stats, has_outliers, split_node)
from apdtree.oracles import oracle_exact_outlier, oracle_max_diameter_sq

X = np.zeros((100, 2))
X[99, 0] = 100.0
data = Dataset(X)
s = data.all()

stats = diameter_stats(s)
print("avg diameter^2:", stats.avg_diameter_sq)
print("anchor diameter^2:", stats.heuristic_diameter_sq, "exact:", oracle_max_diameter_sq(s))
print("heuristic says outliers (c=10):", has_outliers(stats, 10.0))
print("exact test agrees:", oracle_exact_outlier(s, 10.0))

node, s1, s2 = split_node(s, TreeConfig(SplitRule.apd(1), 1, outlier_c=10.0), node_id=1)
assert node.kind is NodeKind.SPHERE
print("center:", node.center, "radius^2:", node.radius_sq)
print("far point in outer half:", 99 in s2.indices)
print("spread ratio after split: %.4f" % (avg_diameter_sq_pair(s1, s2) / avg_diameter_sq(s)))

# the outer half keeps the outlier, so a lone far point barely shrinks the spread
g = np.random.default_rng(0)
for c in (4.0, 10.0):
    Y = g.normal(size=(60, 3))
    Y[0] = [40.0, 0.0, 0.0]
    t = Dataset(Y).all()
    node, t1, t2 = split_node(t, TreeConfig(SplitRule.rp(), 1, outlier_c=1e-300), 1)
    r = avg_diameter_sq_pair(t1, t2) / avg_diameter_sq(t)
    print("c=%g exact=%s ratio=%.3f (1/2 + 2/c = %.2f)" % (c, oracle_exact_outlier(t, c), r, 0.5 + 2 / c))
