"""Spatial partition trees with random-projection, approximate principal
direction (a few power iterations) and PCA splitting rules."""

from .geometry import (
    Dataset,
    DiameterStats,
    PointSubset,
    avg_diameter_sq,
    avg_diameter_sq_pair,
    diameter_stats,
    directional_variance,
    heuristic_diameter_sq,
    subset_mean,
)
from .rules import (
    Direction,
    RngStream,
    RuleKind,
    SplitRule,
    apd_direction,
    pca_direction,
    random_unit_vector,
)
from .tree import (
    NodeKind,
    PartitionTree,
    TreeConfig,
    TreeNode,
    assign_leaf,
    build_tree,
    has_outliers,
    load_tree,
    save_tree,
    split_node,
    tree_from_bytes,
    tree_to_bytes,
)
from .evaluation import (
    EvalReport,
    SpectrumSummary,
    covariance_spectrum,
    diameter_reduction_profile,
    k_statistic,
    local_cov_dim,
    run_experiment,
    vq_error,
)
from .datasets import (
    SyntheticSpec,
    gen_synthetic,
    load_dataset,
    load_delimited,
    load_idx_images,
    save_dataset,
)

__version__ = "0.1.0"
