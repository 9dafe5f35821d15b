import copy
import itertools
import math

import pytest

from hctree.core import BudgetError, KTuple, SplitPair, default_points
from hctree.online import (
    ConstantLearner,
    HalvingLearner,
    LLeaf,
    LNode,
    TreeConsistentLearner,
    adversary_game,
    agnostic_regret_run,
    build_littlestone_tree,
    halving_adversary_run,
    ladder_label_constraint,
    rank_order_check,
    same_orientation,
    transcript_csv,
    verify_shattered,
)
from hctree.tree_ops import double_factorial_odd, enumerate_binary_trees, orientation_of, satisfies


def _depth_formula(n_prime, k):
    return (n_prime // k) * round(math.log(n_prime, k))


# -- construction -------------------------------------------------------------


def test_base_case_single_block():
    L = build_littlestone_tree(3, 3)
    assert L.n_prime == 3 and L.depth == 1
    root = L.root
    assert isinstance(root, LNode)
    assert root.tuple_pts == (0, 1, 2)
    assert root.down_label != root.up_label
    assert isinstance(root.down, LLeaf) and isinstance(root.up, LLeaf)
    assert verify_shattered(L)  # depth-1 trees are trivially shattered


@pytest.mark.parametrize("n,k,depth", [(8, 2, 12), (9, 3, 6), (16, 4, 8)])
def test_depth_formula(n, k, depth):
    L = build_littlestone_tree(n, k)
    assert L.depth == depth == _depth_formula(L.n_prime, k)


def test_n_prime_is_largest_power():
    assert build_littlestone_tree(10, 3).n_prime == 9
    assert build_littlestone_tree(26, 3).n_prime == 9
    assert build_littlestone_tree(5, 2, depth_budget=16).n_prime == 4


def test_depth_budget():
    with pytest.raises(BudgetError):
        build_littlestone_tree(27, 3)  # depth 27 > 16


def test_debug_mode_asserts_block_sizes():
    for n, k in ((8, 2), (9, 3), (16, 4)):
        L = build_littlestone_tree(n, k, debug=True)
        assert verify_shattered(L)


def test_complete_and_uniform_depth():
    L = build_littlestone_tree(9, 3)

    def depths(node, d):
        if isinstance(node, LLeaf):
            yield d
        else:
            yield from depths(node.down, d + 1)
            yield from depths(node.up, d + 1)

    assert set(depths(L.root, 0)) == {6}


# -- verification ----------------------------------------------------------------


@pytest.mark.parametrize("n,k", [(8, 2), (9, 3), (16, 4)])
def test_built_trees_verify(n, k):
    L = build_littlestone_tree(n, k)
    assert verify_shattered(L)
    assert rank_order_check(L)


def _first_node(L):
    node = L.root
    assert isinstance(node, LNode)
    return node


def _swap_label_prefix(label):
    lab = list(label)
    lab[0], lab[1] = lab[1], lab[0]
    return tuple(lab)


def test_verify_detects_corrupted_edge_label():
    L = build_littlestone_tree(9, 3)
    bad = copy.deepcopy(L)
    node = _first_node(bad)
    node.down_label = _swap_label_prefix(node.down_label)
    assert not verify_shattered(bad)


def test_verify_detects_corruption_deeper():
    L = build_littlestone_tree(16, 4)
    bad = copy.deepcopy(L)
    node = _first_node(bad).down
    node.up_label = _swap_label_prefix(node.up_label)
    assert not verify_shattered(bad)


def test_rank_order_detects_swapped_ranks():
    L = build_littlestone_tree(8, 2)
    bad = copy.deepcopy(L)

    def leftmost_leaf(node):
        while isinstance(node, LNode):
            parent, node = node, node.down
        return parent

    parent = leftmost_leaf(bad.root)
    order = list(parent.down.order)
    order[0], order[1] = order[1], order[0]
    parent.down = LLeaf(order=tuple(order))
    assert not rank_order_check(bad)


def test_rank_order_detects_corrupted_label():
    L = build_littlestone_tree(9, 3)
    bad = copy.deepcopy(L)
    node = _first_node(bad)
    node.up_label = _swap_label_prefix(node.up_label)
    assert not rank_order_check(bad)


def test_verify_budget():
    L = build_littlestone_tree(8, 2)
    with pytest.raises(BudgetError):
        verify_shattered(L, path_budget=16)


def test_ladder_label_constraint():
    c = ladder_label_constraint((4, 1, 7))
    assert isinstance(c, KTuple)
    assert same_orientation(c, SplitPair(1, 7, 4))
    assert ladder_label_constraint((0, 1)) is None


# -- learners and the game -----------------------------------------------------


def test_constant_learner_fixed_prediction():
    lrn = ConstantLearner()
    assert lrn.predict((2, 0, 5)) == SplitPair(0, 2, 5)


def test_halving_empty_sequence_full_space():
    lrn = HalvingLearner(5)
    assert lrn.version_space_size == double_factorial_odd(5) == 105


def test_halving_filtering_matches_enumeration():
    lrn = HalvingLearner(4)
    ground = next(enumerate_binary_trees(4))
    labels = [orientation_of(ground, a, b, c)
              for a, b, c in itertools.combinations(range(4), 3)]
    for lab in labels:
        lrn.update(lab)
    survivors = [t for t, ok in zip(lrn.trees, lrn.alive) if ok]
    expect = [t for t in enumerate_binary_trees(4)
              if all(satisfies(t, lab) for lab in labels)]
    assert {t.topology_key() for t in survivors} == {t.topology_key() for t in expect}


def test_halving_raises_on_unrealizable():
    lrn = HalvingLearner(4)
    lrn.update(SplitPair(0, 1, 2))
    with pytest.raises(ValueError):
        lrn.update(SplitPair(0, 2, 1))


def test_adversary_forces_depth_mistakes_constant():
    L = build_littlestone_tree(9, 3)
    mistakes, rows = adversary_game(L, ConstantLearner())
    assert mistakes == L.depth == 6
    assert all(r.mistake for r in rows)


def test_adversary_forces_depth_mistakes_tree_consistent():
    L = build_littlestone_tree(9, 3)
    mistakes, _ = adversary_game(L, TreeConsistentLearner(9))
    assert mistakes == 6


def test_adversary_forces_depth_mistakes_halving():
    L = build_littlestone_tree(5, 3)  # n' = 3: depth 1, fits the 105-tree space
    mistakes, _ = adversary_game(L, HalvingLearner(5))
    assert mistakes == L.depth == 1


def test_adversary_game_realizable_for_every_learner():
    # the revealed labels along any played path admit a tree
    from hctree.core import OrientedSet
    from hctree.builder import build_binary, reduce_ktuple

    L = build_littlestone_tree(9, 3)
    _, rows = adversary_game(L, ConstantLearner())
    flat = []
    for r in rows:
        flat.extend(reduce_ktuple(r.label) if isinstance(r.label, KTuple) else [r.label])
    assert build_binary(OrientedSet(default_points(9), tuple(flat))).ok


def test_transcript_csv_shape():
    L = build_littlestone_tree(5, 3)
    _, rows = adversary_game(L, ConstantLearner())
    text = transcript_csv(rows, default_points(5))
    lines = text.strip().splitlines()
    assert lines[0] == "round,tuple,prediction,label,mistake"
    assert len(lines) == 1 + len(rows)
    assert lines[1].startswith("1,")


def test_halving_adversary_mistake_bound_quick():
    bound = math.floor(math.log(105) / math.log(1.5))
    assert bound == 11
    for seed in range(10):
        assert halving_adversary_run(5, seed=seed) <= bound


def test_agnostic_regret_reports_measurement():
    out = agnostic_regret_run(5, rounds=60, flip_rate=0.2, seed=3)
    assert set(out) == {"mistakes", "opt", "regret"}
    assert out["opt"] <= out["mistakes"]
    assert out["regret"] == out["mistakes"] - out["opt"]
    assert out["opt"] >= 0
