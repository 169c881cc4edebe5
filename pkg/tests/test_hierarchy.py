import math

import numpy as np
import pytest

from cosgamma.errors import DomainError, SizeError
from cosgamma.hierarchy import (
    HierarchyConfig,
    LabeledSimilarities,
    expected_level_counts,
    leaf_levels,
    level_histogram,
    simulate,
)


def _lca_level_oracle(j, degree):
    # walk both leaves up until they share a parent
    a, b, level = 0, j, 0
    while a != b:
        a //= degree
        b //= degree
        level += 1
    return level


def test_config_validation():
    with pytest.raises(DomainError):
        HierarchyConfig(depth=0, eta=0.9)
    with pytest.raises(DomainError):
        HierarchyConfig(depth=2, eta=0.9, dim=1)
    with pytest.raises(DomainError):
        HierarchyConfig(depth=2, eta=0.9, query="middle")
    assert HierarchyConfig(depth=3, eta=0.5, degree=3).n_leaves == 27


def test_single_leaf():
    ls = simulate(HierarchyConfig(depth=1, eta=0.3, degree=1))
    np.testing.assert_allclose(ls.sims, [1.0], atol=1e-12)
    np.testing.assert_array_equal(ls.levels, [0])


def test_cap():
    with pytest.raises(SizeError):
        simulate(HierarchyConfig(depth=22, eta=0.95))
    with pytest.raises(SizeError):
        simulate(HierarchyConfig(depth=5, eta=0.95, sample_cap=16))


@pytest.mark.parametrize("degree,depth", [(2, 13), (3, 8), (5, 3)])
def test_shape_range_and_self_pair(degree, depth):
    ls = simulate(HierarchyConfig(depth=depth, eta=0.9, degree=degree, dim=32, seed=3))
    assert len(ls) == degree**depth
    assert np.all(np.abs(ls.sims) <= 1.0)
    assert np.sum(np.abs(ls.sims - 1.0) <= 1e-12) == 1
    assert ls.sims[0] == pytest.approx(1.0, abs=1e-12)


def test_deterministic():
    cfg = HierarchyConfig(depth=14, eta=0.95, dim=16, seed=7)
    a, b = simulate(cfg), simulate(cfg)
    assert a.sims.tobytes() == b.sims.tobytes()
    c = simulate(HierarchyConfig(depth=14, eta=0.95, dim=16, seed=8))
    assert not np.array_equal(a.sims, c.sims)


@pytest.mark.parametrize("degree,depth", [(2, 6), (3, 4), (4, 3), (1, 4)])
def test_leaf_levels_match_tree_oracle(degree, depth):
    n = degree**depth
    expected = [_lca_level_oracle(j, degree) for j in range(n)]
    np.testing.assert_array_equal(leaf_levels(n, degree), expected)


def test_level_counts_binary():
    depth = 12
    ls = simulate(HierarchyConfig(depth=depth, eta=0.9, dim=8))
    counts = np.bincount(ls.levels, minlength=depth + 1)
    np.testing.assert_array_equal(counts, expected_level_counts(depth, 2))
    # each level above 1 holds twice as many leaves as the one below it
    assert all(counts[l + 1] == 2 * counts[l] for l in range(1, depth))
    assert np.all((ls.levels >= 0) & (ls.levels <= depth))


def test_level_means_nonincreasing():
    # leaves of one level share ancestors, so the noise of a level mean is
    # measured across independent replications rather than within one run
    depth, reps = 10, 40
    table = np.empty((reps, depth))
    for r in range(reps):
        ls = simulate(HierarchyConfig(depth=depth, eta=0.95, dim=64, seed=100 + r)).drop_first()
        table[r] = [ls.sims[ls.levels == l].mean() for l in range(1, depth + 1)]
    means = table.mean(axis=0)
    ses = table.std(axis=0, ddof=1) / math.sqrt(reps)
    for l in range(depth - 1):
        assert means[l] >= means[l + 1] - 3 * math.hypot(ses[l], ses[l + 1]), l
    assert means[0] > means[-1]


def test_eta_zero_independent():
    ls = simulate(HierarchyConfig(depth=14, eta=0.0, dim=64, seed=5)).drop_first()
    n = len(ls)
    assert abs(ls.sims.mean()) <= 4 * ls.sims.std() / math.sqrt(n)


def test_root_query():
    cfg = HierarchyConfig(depth=10, eta=0.95, dim=32, query="root")
    ls = simulate(cfg)
    assert len(ls) == 1024
    assert np.all(np.abs(ls.sims) <= 1)
    # same leaves as first-leaf mode: only the reference vector changes
    np.testing.assert_array_equal(ls.levels, simulate(HierarchyConfig(depth=10, eta=0.95, dim=32)).levels)


def test_subtree_streams_independent_of_cap():
    # the cap only guards size; it must not change the draws
    a = simulate(HierarchyConfig(depth=13, eta=0.9, dim=8))
    b = simulate(HierarchyConfig(depth=13, eta=0.9, dim=8, sample_cap=2**13))
    np.testing.assert_array_equal(a.sims, b.sims)


def test_level_histogram():
    ls = simulate(HierarchyConfig(depth=10, eta=0.9, dim=16))
    levels, counts, edges = level_histogram(ls, 50)
    assert counts.sum() == len(ls)
    np.testing.assert_array_equal(levels, np.arange(11))
    np.testing.assert_array_equal(counts.sum(axis=1), expected_level_counts(10, 2))
    assert edges[0] == -1 and edges[-1] == 1
    one = LabeledSimilarities(np.array([-1.0, -0.25, 0.25, 1.0]), np.full(4, 3))
    lv, c, _ = level_histogram(one, 4)
    assert lv.tolist() == [3]
    assert c.tolist() == [[1, 1, 1, 1]]
    with pytest.raises(DomainError):
        level_histogram(one, 0)


def test_labeled_similarities_length_check():
    with pytest.raises(ValueError):
        LabeledSimilarities(np.zeros(3), np.zeros(2))
