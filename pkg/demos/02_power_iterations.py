"""
How many power iterations are enough?
=====================================

The split direction after t iterations is C^t s / |C^t s| for a random start
s. Its variance V(S, p) climbs towards the top eigenvalue quickly, which is
why one or two iterations already split almost as well as PCA.
"""

import numpy as np

from apdtree import RngStream, apd_direction, directional_variance, pca_direction
from apdtree.datasets import SyntheticSpec, gen_synthetic
from apdtree.evaluation import covariance_spectrum, local_cov_dim

data = gen_synthetic(SyntheticSpec(n=1000, dim=200, seed=2))
s = data.all()

spec = covariance_spectrum(s, eps=0.5)
lam1 = spec.top / len(s)
print("local covariance dimension at eps=0.5:", spec.local_dim)
print("local covariance dimension at eps=0.1:", local_cov_dim(spec, 0.1))

# median over 100 random starts, relative to the top eigenvalue
for t in range(5):
    v = [directional_variance(s, apd_direction(s, t, RngStream(r, 1)).vector) for r in range(100)]
    print("t=%d  median V/lambda1 = %.3f" % (t, np.median(v) / lam1))

p = pca_direction(s, 1e-10, RngStream(0, 1)).vector
print("pca   V/lambda1 = %.6f" % (directional_variance(s, p) / lam1))
