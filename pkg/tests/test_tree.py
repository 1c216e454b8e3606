import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apdtree import (
    Dataset,
    NodeKind,
    SplitRule,
    TreeConfig,
    assign_leaf,
    avg_diameter_sq,
    avg_diameter_sq_pair,
    build_tree,
    diameter_stats,
    has_outliers,
    load_tree,
    save_tree,
    split_node,
    tree_from_bytes,
    tree_to_bytes,
)
from apdtree.datasets import SyntheticSpec, gen_synthetic
from apdtree.tree import median_split

from conftest import random_dataset, spike_dataset, two_point

RULES = [SplitRule.rp(), SplitRule.apd(1), SplitRule.apd(3), SplitRule.pca()]


def check_structure(tree, data):
    seen = []
    for node in tree.nodes.values():
        assert np.all(np.diff(node.indices) > 0)
        if node.is_leaf:
            seen.append(node.indices)
            continue
        left, right = node.left, node.right
        assert abs(left.size - right.size) <= 1
        assert left.size == (node.size + 1) // 2
        assert np.intersect1d(left.indices, right.indices).size == 0
        assert np.array_equal(np.union1d(left.indices, right.indices), node.indices)
        assert node.depth < tree.config.max_depth
    assert np.array_equal(np.sort(np.concatenate(seen)), np.arange(data.n))
    for leaf in tree.leaves():
        for i in leaf.indices:
            assert assign_leaf(tree, data.points[i], index=int(i)) == leaf.node_id


class TestHasOutliers:
    def test_spike(self):
        st_ = diameter_stats(spike_dataset().all())
        assert st_.avg_diameter_sq == pytest.approx(198.0)
        assert st_.heuristic_diameter_sq == 10000.0
        assert has_outliers(st_, 10.0)

    def test_identical_points(self):
        assert not has_outliers(diameter_stats(Dataset(np.ones((4, 2))).all()), 0.5)

    def test_two_points(self):
        st_ = diameter_stats(two_point().all())
        assert has_outliers(st_, 1.0)
        assert not has_outliers(st_, 3.0)


def test_median_split_ties_by_index():
    keys = np.array([1.0, 0.0, 1.0, 1.0, 2.0])
    idx = np.array([10, 11, 12, 13, 14])
    left, right, thr, tie = median_split(keys, idx)
    assert left.tolist() == [10, 11, 12]
    assert right.tolist() == [13, 14]
    assert (thr, tie) == (1.0, 12)


class TestSplitNode:
    def test_four_projections(self):
        # points along e1 with projections {3, 1, 2, 4}; any direction here is
        # +-e1 so the order by projection is fixed up to reflection
        X = np.array([[3.0, 0.0], [1.0, 0.0], [2.0, 0.0], [4.0, 0.0]])
        ds = Dataset(X)
        cfg = TreeConfig(SplitRule.apd(1), 2, master_seed=0)
        node, s1, s2 = split_node(ds.all(), cfg, 1)
        assert node.kind is NodeKind.HYPERPLANE
        proj = X @ node.normal
        low = set(np.argsort(proj)[:2].tolist())
        assert set(s1.indices.tolist()) == low
        assert sorted(np.abs(proj[s1.indices]).tolist()) in ([1.0, 2.0], [3.0, 4.0])
        assert np.all(proj[s1.indices] <= node.threshold)
        assert np.all(proj[s2.indices] > node.threshold)

    def test_outlier_path(self):
        ds = spike_dataset()
        node, s1, s2 = split_node(ds.all(), TreeConfig(SplitRule.rp(), 3, outlier_c=10.0), 1)
        assert node.kind is NodeKind.SPHERE
        np.testing.assert_allclose(node.center, [1.0, 0.0])
        assert 99 in s2.indices
        assert len(s1) == len(s2) == 50
        assert node.radius_sq == pytest.approx(1.0)

    def test_sphere_split_single_outlier_ratio(self):
        # 29 points at 0 and one at 1: the outlier stays with 14 zeros, so the
        # two-part average diameter only drops to 28/29 of the original
        X = np.zeros((30, 1))
        X[29] = 1.0
        ds = Dataset(X)
        node, s1, s2 = split_node(ds.all(), TreeConfig(SplitRule.rp(), 1, outlier_c=10.0), 1)
        assert node.kind is NodeKind.SPHERE and 29 in s2.indices
        ratio = avg_diameter_sq_pair(s1, s2) / avg_diameter_sq(ds.all())
        assert ratio == pytest.approx(28 / 29, rel=1e-12)

    @pytest.mark.parametrize("rule", RULES)
    def test_split_never_increases_spread(self, rng, rule):
        for c in (1e-300, 10.0):
            for _ in range(20):
                ds = random_dataset(rng, int(rng.integers(2, 60)), 4)
                node, s1, s2 = split_node(ds.all(), TreeConfig(rule, 1, outlier_c=c), 1)
                assert avg_diameter_sq_pair(s1, s2) <= avg_diameter_sq(ds.all()) * (1 + 1e-12)

    def test_refuses_singleton(self):
        with pytest.raises(ValueError):
            split_node(Dataset([[1.0]]).all(), TreeConfig(SplitRule.rp(), 1), 1)

    def test_identical_points_give_leaf(self):
        node, s1, s2 = split_node(Dataset(np.ones((6, 3))).all(), TreeConfig(SplitRule.apd(2), 3), 1)
        assert node.is_leaf and node.degenerate and s1 is None and s2 is None

    @pytest.mark.parametrize("rule", RULES)
    def test_balance(self, rng, rule):
        for n in (2, 3, 7, 64, 101):
            ds = random_dataset(rng, n, 5)
            _, s1, s2 = split_node(ds.all(), TreeConfig(rule, 1), 1)
            assert abs(len(s1) - len(s2)) <= 1
            assert len(s1) == (n + 1) // 2


class TestBuildTree:
    def test_depth_zero(self, rng):
        ds = random_dataset(rng, 20, 3)
        tree = build_tree(ds, TreeConfig(SplitRule.apd(1), 0))
        assert tree.node_count == 1 and tree.root.is_leaf and tree.root.size == 20

    @pytest.mark.parametrize("rule", RULES)
    def test_sixteen_singletons(self, rng, rule):
        ds = random_dataset(rng, 16, 4)
        tree = build_tree(ds, TreeConfig(rule, 4))
        leaves = tree.leaves()
        assert len(leaves) == 16 and all(leaf.size == 1 for leaf in leaves)
        check_structure(tree, ds)

    def test_synthetic_ten_thousand(self):
        ds = gen_synthetic(SyntheticSpec(10_000, 8, seed=3))
        tree = build_tree(ds, TreeConfig(SplitRule.apd(1), 4, master_seed=1))
        assert [leaf.size for leaf in tree.leaves()] == [625] * 16
        assert tree.depth == 4

    def test_min_leaf_size_stops(self, rng):
        ds = random_dataset(rng, 40, 3)
        tree = build_tree(ds, TreeConfig(SplitRule.rp(), 10, min_leaf_size=5))
        assert all(leaf.size >= 5 for leaf in tree.leaves())
        assert all(node.size >= 10 for node in tree.internal_nodes())

    def test_rp_equals_apd_zero(self, rng):
        ds = random_dataset(rng, 50, 6)
        a = build_tree(ds, TreeConfig(SplitRule.rp(), 4, master_seed=8))
        b = build_tree(ds, TreeConfig(SplitRule.apd(0), 4, master_seed=8))
        assert [n.normal.tolist() for n in a.internal_nodes()] == \
               [n.normal.tolist() for n in b.internal_nodes()]
        assert [l.indices.tolist() for l in a.leaves()] == [l.indices.tolist() for l in b.leaves()]

    def test_worker_count_does_not_matter(self, rng):
        ds = random_dataset(rng, 300, 10)
        for rule in RULES:
            cfg = TreeConfig(rule, 5, master_seed=13)
            ref = tree_to_bytes(build_tree(ds, cfg, workers=1))
            assert tree_to_bytes(build_tree(ds, cfg, workers=4)) == ref

    def test_threads_env(self, rng, monkeypatch):
        ds = random_dataset(rng, 64, 3)
        cfg = TreeConfig(SplitRule.apd(1), 3)
        ref = tree_to_bytes(build_tree(ds, cfg))
        monkeypatch.setenv("APDTREE_THREADS", "3")
        assert tree_to_bytes(build_tree(ds, cfg)) == ref

    def test_duplicates(self, rng):
        X = rng.integers(0, 2, size=(200, 3)).astype(float)
        ds = Dataset(X)
        for rule in RULES:
            tree = build_tree(ds, TreeConfig(rule, 6, master_seed=2))
            check_structure(tree, ds)

    def test_level_times_cumulative(self, rng):
        tree = build_tree(random_dataset(rng, 64, 3), TreeConfig(SplitRule.apd(1), 3))
        assert len(tree.level_ms) == 4
        assert all(b >= a for a, b in zip(tree.level_ms, tree.level_ms[1:]))


class TestAssignLeaf:
    def test_depth_zero(self, rng):
        ds = random_dataset(rng, 10, 2)
        tree = build_tree(ds, TreeConfig(SplitRule.rp(), 0))
        assert assign_leaf(tree, [100.0, -3.0]) == 1

    def test_boundary_goes_left(self, rng):
        ds = random_dataset(rng, 11, 3)
        tree = build_tree(ds, TreeConfig(SplitRule.apd(1), 1))
        # the median training point sits exactly on the hyperplane
        pivot = tree.root.tie_index
        assert assign_leaf(tree, ds.points[pivot]) == 2
        assert assign_leaf(tree, ds.points[pivot], index=pivot) == 2

    def test_dimension_check(self, rng):
        tree = build_tree(random_dataset(rng, 8, 3), TreeConfig(SplitRule.rp(), 2))
        with pytest.raises(ValueError):
            assign_leaf(tree, [1.0, 2.0])

    def test_new_points_reach_a_leaf(self, rng):
        ds = random_dataset(rng, 128, 4)
        tree = build_tree(ds, TreeConfig(SplitRule.apd(2), 4))
        leaf_ids = {leaf.node_id for leaf in tree.leaves()}
        for x in rng.normal(size=(50, 4)):
            assert assign_leaf(tree, x) in leaf_ids


class TestSerialization:
    @pytest.mark.parametrize("rule", RULES)
    def test_round_trip(self, rng, rule, tmp_path):
        ds = random_dataset(rng, 150, 5)
        X = ds.points.copy()
        X[0] = 50.0  # force sphere splits near the root
        ds = Dataset(X)
        tree = build_tree(ds, TreeConfig(rule, 5, min_leaf_size=2, outlier_c=4.0, master_seed=2**63 + 5))
        raw = tree_to_bytes(tree)
        back = tree_from_bytes(raw)
        assert tree_to_bytes(back) == raw
        assert back.config == tree.config
        for node_id, node in tree.nodes.items():
            other = back.nodes[node_id]
            assert other.kind is node.kind
            assert np.array_equal(other.indices, node.indices)
            for name in ("normal", "start", "center"):
                a, b = getattr(node, name), getattr(other, name)
                assert (a is None and b is None) or np.array_equal(a, b)
        path = tmp_path / "t.tree"
        save_tree(tree, path)
        assert tree_to_bytes(load_tree(path)) == raw
        for i in range(ds.n):
            assert assign_leaf(back, ds.points[i], i) == assign_leaf(tree, ds.points[i], i)

    def test_has_sphere_nodes(self, rng):
        X = rng.normal(size=(100, 3))
        X[0] = 80.0
        tree = build_tree(Dataset(X), TreeConfig(SplitRule.apd(1), 3, outlier_c=10.0))
        assert tree.root.kind is NodeKind.SPHERE

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            tree_from_bytes(b"not a tree at all")

    def test_rejects_truncation(self, rng):
        raw = tree_to_bytes(build_tree(random_dataset(rng, 20, 2), TreeConfig(SplitRule.rp(), 2)))
        with pytest.raises(ValueError):
            tree_from_bytes(raw[:-3])
        with pytest.raises(ValueError):
            tree_from_bytes(raw + b"\x00")

    def test_rejects_inconsistent_records(self, rng):
        tree = build_tree(random_dataset(rng, 8, 2), TreeConfig(SplitRule.rp(), 1))
        raw = bytearray(tree_to_bytes(tree))
        head = 8 + 4 + 41 + 24
        bad_rule = bytearray(raw)
        bad_rule[12] = 9
        with pytest.raises(ValueError):
            tree_from_bytes(bytes(bad_rule))
        # renumber the left child so the root has no child 2
        bad_id = bytearray(raw)
        first_leaf = head + 10 + 16 + 2 * 2 * 8
        assert bad_id[first_leaf] == 2
        bad_id[first_leaf] = 4
        with pytest.raises(ValueError):
            tree_from_bytes(bytes(bad_id))


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 60),
    st.integers(1, 4),
    st.integers(0, 5),
    st.sampled_from(RULES),
    st.booleans(),
    st.integers(0, 2**32),
)
def test_structural_invariants(n, dim, depth, rule, duplicates, seed):
    g = np.random.default_rng(seed)
    X = g.integers(0, 3, size=(n, dim)).astype(float) if duplicates else g.normal(size=(n, dim))
    ds = Dataset(X)
    cfg = TreeConfig(rule, depth, master_seed=seed)
    tree = build_tree(ds, cfg)
    check_structure(tree, ds)
    raw = tree_to_bytes(tree)
    assert tree_to_bytes(tree_from_bytes(raw)) == raw
    assert tree_to_bytes(build_tree(ds, cfg, workers=3)) == raw
