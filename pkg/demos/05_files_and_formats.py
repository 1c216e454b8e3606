"""
Saving, loading and the command line
====================================

Datasets and trees have small binary formats. The same operations are
available as ``apdtree gen | build | eval | bench``.
"""

import os
import tempfile

import numpy as np

from apdtree import SplitRule, TreeConfig, build_tree, load_tree, save_tree, tree_to_bytes
from apdtree.cli import main
from apdtree.datasets import idx_image_bytes, load_any, load_dataset

tmp = tempfile.mkdtemp()
ds_path = os.path.join(tmp, "syn.ds")

# equivalent to: apdtree gen --n 500 --dim 32 --seed 7 --out syn.ds
main(["gen", "--n", "500", "--dim", "32", "--seed", "7", "--out", ds_path])
data = load_dataset(ds_path)

tree = build_tree(data, TreeConfig(SplitRule.pca(), 5, master_seed=1))
tree_path = os.path.join(tmp, "pca.tree")
save_tree(tree, tree_path)
assert tree_to_bytes(load_tree(tree_path)) == tree_to_bytes(tree)
print("tree file:", os.path.getsize(tree_path), "bytes")

# IDX image files (the MNIST layout) load as one flattened row per image
imgs = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4)
idx_path = os.path.join(tmp, "tiny.idx3")
with open(idx_path, "wb") as fh:
    fh.write(idx_image_bytes(imgs))
print("idx:", load_any(idx_path, scale=True))

# whitespace text with leading id columns dropped
txt_path = os.path.join(tmp, "rows.dat")
with open(txt_path, "w") as fh:
    fh.write("a 1 0.5 0.25\nb 2 0.75 1.0\n")
print("text:", load_any(txt_path, skip_columns=[0, 1]).points.tolist())

# a timing sweep on the dataset written above
main(["bench", "--data", ds_path, "--depth", "3", "--reps", "2", "--t-max", "2"])
