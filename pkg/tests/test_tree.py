import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bartcea.tree import (
    ABSENT,
    LEAF,
    RegressionTree,
    SplitCandidates,
    TreeEnsemble,
    change,
    grow,
    leaf_index,
    predict_ensemble,
    propose_move,
    prune,
    traverse,
)

# x <= 0.3 -> 0.2; else x <= 0.6 -> (x <= 0.5 -> 0.9 | 0.4); else 0.6
STEP_TREE = (0, 0.3, 0.2, (0, 0.6, (0, 0.5, 0.9, 0.4), 0.6))


@pytest.fixture
def step_tree():
    return RegressionTree.from_nested(STEP_TREE)


@pytest.mark.parametrize("x, expected", [(0.2, 0.2), (0.55, 0.4), (0.7, 0.6), (0.4, 0.9)])
def test_traverse_examples(step_tree, x, expected):
    assert traverse(step_tree, [x]) == expected


@pytest.mark.parametrize(
    "lo, hi, value",
    [(-5.0, 0.3, 0.2), (np.nextafter(0.3, 1), 0.5, 0.9),
     (np.nextafter(0.5, 1), 0.6, 0.4), (np.nextafter(0.6, 1), 7.0, 0.6)],
)
def test_step_function_plateaus(step_tree, lo, hi, value):
    xs = np.concatenate([np.linspace(lo, hi, 201), [lo, hi]])
    out = predict_ensemble(TreeEnsemble([step_tree]), xs[:, None])
    assert np.all(out == value)


def test_single_leaf_constant():
    t = RegressionTree.leaf(1.25)
    assert traverse(t, [3.0, -1.0]) == 1.25
    assert t.leaves() == [0]
    assert t.depth() == 0


def test_ensemble_sums():
    t = RegressionTree.from_nested(STEP_TREE)
    assert predict_ensemble(TreeEnsemble([t, t.copy()]), np.array([[0.2]]))[0] == 0.4
    m = 8
    ens = TreeEnsemble([RegressionTree.leaf(1.0 / m) for _ in range(m)])
    out = predict_ensemble(ens, np.random.default_rng(0).normal(size=(5, 1)))
    np.testing.assert_allclose(out, 1.0, rtol=0, atol=1e-15)
    assert predict_ensemble(ens, np.empty((0, 1))).shape == (0,)


def test_ensemble_linearity():
    rng = np.random.default_rng(1)
    a = TreeEnsemble([RegressionTree.from_nested((0, 0.0, 1.0, (1, 0.5, -2.0, 3.0)))])
    b = TreeEnsemble([RegressionTree.from_nested(STEP_TREE), RegressionTree.leaf(0.5)])
    X = rng.normal(size=(50, 2))
    np.testing.assert_allclose(predict_ensemble(a + b, X),
                               predict_ensemble(a, X) + predict_ensemble(b, X), atol=1e-14)


def test_partition_and_boundary(step_tree):
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 2, size=(1000, 1))
    leaves = leaf_index(step_tree, X)
    assert set(leaves) <= set(step_tree.leaves())
    for cut in (0.3, 0.5, 0.6):
        below = leaf_index(step_tree, np.array([[cut]]))[0]
        above = leaf_index(step_tree, np.array([[np.nextafter(cut, 2)]]))[0]
        assert below != above


def test_validate_rejects_broken_tree(step_tree):
    bad = step_tree.copy()
    bad.split_var[2 * 2 + 1] = ABSENT
    with pytest.raises(ValueError):
        bad.validate()
    bad = step_tree.copy()
    bad.split_value[0] = np.inf
    with pytest.raises(ValueError):
        bad.validate()


def test_from_nested_respects_depth_limit():
    with pytest.raises(ValueError):
        RegressionTree.from_nested((0, 0.0, (0, -1.0, 1.0, 2.0), 3.0), max_depth=1)


def test_split_candidates():
    X = np.column_stack([[3.0, 1.0, 2.0, 2.0, 5.0], [0, 1, 1, 0, 1], [4.0] * 5])
    cand = SplitCandidates.from_matrix(X)
    np.testing.assert_array_equal(cand.column(0), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(cand.column(1), [0.5])
    assert cand.column(2).size == 0


def test_grow_prune_roundtrip(step_tree):
    grown = grow(step_tree, 1, 0, 0.1)
    assert grown.topology() != step_tree.topology()
    assert prune(grown, 1).topology() == step_tree.topology()
    changed = change(step_tree, 0, 0, 0.25)
    assert changed.split_value[0] == 0.25
    assert step_tree.split_value[0] == 0.3


def test_pure_moves_reject_invalid_nodes(step_tree):
    with pytest.raises(ValueError):
        grow(step_tree, 0, 0, 0.1)
    with pytest.raises(ValueError):
        prune(step_tree, 0)
    with pytest.raises(ValueError):
        change(step_tree, 1, 0, 0.1)


def test_single_leaf_always_grows():
    X = np.random.default_rng(3).normal(size=(30, 2))
    rng = np.random.default_rng(4)
    t = RegressionTree.leaf(0.0)
    for _ in range(200):
        p = propose_move(t, X, rng)
        assert p.kind == "grow"
        assert p.feasible


def test_proposed_split_values_are_observed():
    rng = np.random.default_rng(5)
    X = np.column_stack([rng.integers(0, 20, 80).astype(float), rng.normal(size=80),
                         rng.integers(0, 2, 80).astype(float)])
    observed = [set(X[:, j]) | ({0.5} if j == 2 else set()) for j in range(3)]
    t = RegressionTree.from_nested((1, 0.0, 0.0, 0.0))
    seen = 0
    for _ in range(1000):
        p = propose_move(t, X, rng)
        if p.kind in ("grow", "change") and p.feasible:
            assert p.value in observed[p.variable]
            if p.variable == 2:
                assert p.value == 0.5
            seen += 1
        if p.feasible:
            p.proposed.validate()
            counts = np.bincount(leaf_index(p.proposed, X), minlength=p.proposed.split_var.size)
            # the sampler rejects moves that leave a leaf empty
            if np.all(counts[p.proposed.leaves()] > 0):
                t = p.proposed
    assert seen > 300


def test_move_mix_frequencies():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(200, 1))
    t = RegressionTree.from_nested((0, 0.0, 0.0, (0, 0.5, 0.0, 0.0)))
    kinds = [propose_move(t, X, rng).kind for _ in range(4000)]
    freq = {k: kinds.count(k) / len(kinds) for k in ("grow", "prune", "change")}
    assert abs(freq["grow"] - 0.3) < 0.03
    assert abs(freq["prune"] - 0.3) < 0.03
    assert abs(freq["change"] - 0.4) < 0.03


def test_grow_then_prune_reverse_probabilities_match():
    # the reverse of a GROW is the PRUNE of the new node, with the same probabilities swapped
    rng = np.random.default_rng(7)
    X = rng.normal(size=(100, 2))
    t = RegressionTree.from_nested((0, 0.0, 0.0, 0.0))
    for _ in range(200):
        g = propose_move(t, X, rng)
        if g.kind != "grow" or not g.feasible:
            continue
        for _ in range(200):
            p = propose_move(g.proposed, X, rng)
            if p.kind == "prune" and p.node == g.node:
                assert p.proposed.topology() == t.topology()
                assert p.log_forward == pytest.approx(g.log_reverse, abs=1e-12)
                assert p.log_reverse == pytest.approx(g.log_forward, abs=1e-12)
                assert p.log_prior_ratio == pytest.approx(-g.log_prior_ratio, abs=1e-12)
                break
        break


@st.composite
def random_trees(draw):
    depth = draw(st.integers(0, 4))

    def build(d):
        if d == 0 or draw(st.booleans()):
            return draw(st.floats(-10, 10, allow_nan=False))
        return (draw(st.integers(0, 2)), draw(st.floats(-2, 2, allow_nan=False)),
                build(d - 1), build(d - 1))

    return RegressionTree.from_nested(build(depth), max_depth=4)


@settings(max_examples=60, deadline=None)
@given(random_trees(), st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3))
def test_every_row_reaches_one_leaf(tree, row):
    leaf = leaf_index(tree, np.array([row]))[0]
    assert tree.split_var[leaf] == LEAF
    assert traverse(tree, row) == tree.leaf_value[leaf]


@settings(max_examples=40, deadline=None)
@given(random_trees(), random_trees())
def test_ensemble_equals_sum_of_members(a, b):
    X = np.random.default_rng(0).uniform(-3, 3, size=(40, 3))
    total = predict_ensemble(TreeEnsemble([a, b]), X)
    members = np.array([traverse(a, x) + traverse(b, x) for x in X])
    np.testing.assert_array_equal(total, members)
