import json

import numpy as np
import pytest

from divsample.errors import DataError, UsageError
from divsample.hierarchy import Node, build_tree, nearest_partition, tree_export, tree_from_json
from divsample.subsample import fps, make_sampler

LINE = np.array([[0.0], [1.0], [9.0], [10.0]])


def fps_from_first(x, n, seed):
    return fps(x, n, seed=seed, first=0)


def check_invariants(tree, n_total, n):
    indices = tree.sample_indices()
    assert sorted(indices) == list(range(n_total))
    assert tree.max_children() <= n
    assert tree.depth() <= n_total


class TestNearestPartition:
    def test_empty_pool(self):
        assert nearest_partition([0, 1], [], LINE) == [[], []]

    def test_inspection(self):
        x = np.array([[0.0], [10.0], [1.0], [9.0]])
        assert nearest_partition([0, 1], [2, 3], x) == [[2], [3]]

    def test_tie_goes_to_first_rep(self):
        x = np.array([[0.0], [2.0], [1.0]])
        assert nearest_partition([1, 0], [2], x) == [[2], []]

    def test_overlap(self):
        with pytest.raises(UsageError):
            nearest_partition([0, 1], [1, 2], LINE)

    def test_no_reps(self):
        with pytest.raises(UsageError):
            nearest_partition([], [1], LINE)


class TestBuildTree:
    def test_small_set_is_flat(self):
        tree = build_tree(LINE[:3], 4)
        assert tree.index is None
        assert [c.index for c in tree.children] == [0, 1, 2]
        assert all(not c.children for c in tree.children)

    def test_hand_trace(self):
        tree = build_tree(LINE, 2, sampler=fps_from_first)
        assert [c.index for c in tree.children] == [0, 3]
        assert [[g.index for g in c.children] for c in tree.children] == [[1], [2]]
        assert all(not g.children for c in tree.children for g in c.children)

    def test_twenty_five_candidates_four_per_level(self):
        x = np.random.default_rng(0).standard_normal((25, 5))
        tree = build_tree(x, 4, seed=1)
        check_invariants(tree, 25, 4)
        assert len(tree.sample_indices()) == 25

    @pytest.mark.parametrize("method", ["fps", "kmeans", "uniformization", "random"])
    def test_invariants_all_samplers(self, method):
        rng = np.random.default_rng(7)
        for trial in range(10):
            n_total = int(rng.integers(1, 60))
            n = int(rng.integers(2, 7))
            x = rng.standard_normal((n_total, int(rng.integers(1, 4))))
            kw = {"k": 3} if method == "uniformization" else {}
            check_invariants(build_tree(x, n, make_sampler(method, **kw), seed=trial), n_total, n)

    def test_duplicate_rows(self):
        x = np.zeros((12, 2))
        check_invariants(build_tree(x, 3, seed=0), 12, 3)

    def test_deterministic(self):
        x = np.random.default_rng(3).standard_normal((40, 2))
        assert build_tree(x, 3, seed=9) == build_tree(x, 3, seed=9)

    def test_n_too_small(self):
        with pytest.raises(UsageError):
            build_tree(LINE, 1)

    def test_bad_sampler(self):
        def greedy(x, n, seed):
            return fps(x, min(len(x), n + 1), seed=seed)

        with pytest.raises(DataError):
            build_tree(LINE, 2, sampler=greedy)


class TestExport:
    def test_single_leaf(self):
        tree = build_tree(np.zeros((1, 2)), 2)
        assert json.loads(tree_export(tree)) == {"index": None, "children": [{"index": 0, "children": []}]}
        dot = tree_export(tree, "dot")
        assert dot.count("[label=") == 1 and "->" not in dot

    def test_round_trip(self):
        x = np.random.default_rng(1).standard_normal((30, 2))
        tree = build_tree(x, 3, seed=2)
        assert tree_from_json(tree_export(tree)) == tree

    def test_dot_counts(self):
        x = np.random.default_rng(2).standard_normal((30, 2))
        tree = build_tree(x, 4, seed=0)
        dot = tree_export(tree, "dot")
        assert dot.startswith("digraph exploration_tree {")
        assert dot.count("[label=") == 30
        assert dot.count("->") == 30 - len(tree.children)
        with_root = tree_export(tree, "dot", include_root=True)
        assert with_root.count("[label=") == 31 and with_root.count("->") == 30

    def test_unknown_format(self):
        with pytest.raises(UsageError):
            tree_export(Node(None), "xml")

    def test_malformed_json(self):
        with pytest.raises(DataError):
            tree_from_json('{"children": []}')
