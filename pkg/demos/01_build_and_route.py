"""
Building a tree and routing points
==================================

Generate a small synthetic dataset, build a depth-4 tree with one power
iteration per split, then send training and fresh points down to leaves.
"""

import numpy as np

from apdtree import SplitRule, TreeConfig, assign_leaf, build_tree
from apdtree.datasets import SyntheticSpec, gen_synthetic

# each point is N(peak, 1) in every coordinate, one peak per point
data = gen_synthetic(SyntheticSpec(n=2000, dim=64, seed=1))
print(data)

cfg = TreeConfig(SplitRule.apd(1), max_depth=4, master_seed=3)
tree = build_tree(data, cfg)
print("nodes:", tree.node_count, "leaves:", len(tree.leaves()))
print("leaf sizes:", [leaf.size for leaf in tree.leaves()])

# the root normal is a unit vector; the threshold is the median projection
root = tree.root
print("root kind:", root.kind.name, "threshold: %.4f" % root.threshold)

# training points come back to the leaf that holds them
leaf = tree.leaves()[5]
i = int(leaf.indices[0])
assert assign_leaf(tree, data.points[i], index=i) == leaf.node_id

# a new point is routed by the stored predicates alone
x = np.full(data.dim, 0.9)
print("fresh point lands in leaf", assign_leaf(tree, x))

# build time per level, cumulative, in milliseconds
print("level_ms:", ["%.2f" % ms for ms in tree.level_ms])
