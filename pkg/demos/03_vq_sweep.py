"""
Vector quantization error by depth
==================================

A small version of the rule comparison: mean VQ error over several seeded
runs for RP, APD with 1 and 3 iterations, and PCA. The CSV written here
has the same columns as ``apdtree eval``.
"""

from apdtree import SplitRule
from apdtree.datasets import SyntheticSpec, gen_synthetic
from apdtree.evaluation import run_experiment

data = gen_synthetic(SyntheticSpec(n=2000, dim=256, seed=2012))
rules = [SplitRule.rp(), SplitRule.apd(1), SplitRule.apd(3), SplitRule.pca()]
report = run_experiment(data, rules, depths=range(1, 7), runs=5, seed=7)

print("%-6s" % "depth" + "".join("%12s" % r.label for r in rules))
for depth in range(1, 7):
    cells = [report.get(r.kind.value, r.iterations, depth).vq_mean for r in rules]
    print("%-6d" % depth + "".join("%12.2f" % v for v in cells))

with open("vq_sweep.csv", "w", newline="\n") as fh:
    fh.write(report.to_csv())
print("wrote vq_sweep.csv")
