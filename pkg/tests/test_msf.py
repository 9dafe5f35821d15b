import random

import pytest

from hctree.core import KTuple, OrientedSet, default_points, parse_constraints, tree_from_nested, write_newick
from hctree.builder import build_binary
from hctree.dimension import triplet_orientations
from hctree.msf import (
    MsfDebug,
    NaiveMsfBackend,
    PhaseLog,
    build_coupled_graph,
    build_ktuple_via_msf,
    build_via_msf,
    cut_inter_component_edges,
)
from hctree.tree_ops import orientation_of, random_binary_tree, satisfies


def _oset(text):
    return parse_constraints(text)


def _random_consistent(rng, n, m):
    t = random_binary_tree(n, rng)
    cons = []
    for _ in range(m):
        a, b, c = sorted(rng.sample(range(n), 3))
        cons.append(orientation_of(t, a, b, c))
    return OrientedSet(default_points(n), tuple(cons))


def _mutate(rng, oset, rate=0.3):
    cons = []
    for c in oset.constraints:
        if rng.random() < rate:
            cons.append(rng.choice([o for o in triplet_orientations(c.points) if o != c]))
        else:
            cons.append(c)
    return OrientedSet(oset.points, tuple(cons))


# -- coupled graph ------------------------------------------------------------


def test_coupled_graph_single_constraint():
    # [b,c|a]: blue {b,c} weight 1, red {a,b} weight 2, coupled
    s = _oset("b c | a")
    g = build_coupled_graph(s)
    assert g.m == 1
    b, c, a = s.points.index("b"), s.points.index("c"), s.points.index("a")
    assert g.endpoints[0] == (b, c)
    assert g.endpoints[1] == (a, b)
    assert g.weight(0) == 1 and g.weight(1) == 2
    assert g.coupled_red(0) == 1 and g.coupled_blue(1) == 0


def test_coupled_graph_counts():
    rng = random.Random(0)
    s = _random_consistent(rng, 10, 23)
    g = build_coupled_graph(s)
    assert g.m == 23 and len(g.endpoints) == 46


def test_coupled_graph_keeps_parallel_edges():
    s = _oset("a b | c\na b | c")
    g = build_coupled_graph(s)
    assert g.m == 2
    assert g.endpoints[0] == g.endpoints[1]


# -- naive backend contract -----------------------------------------------------


def test_backend_delete_nonforest_keeps_msf():
    s = _oset("a b | c\na b | c")  # parallel edges: one blue is non-forest
    g = build_coupled_graph(s)
    be = NaiveMsfBackend(g)
    msf_before = list(be._msf)
    assert 1 not in msf_before  # the duplicate blue lost the tie
    assert be.delete_edge(1) is None
    assert list(be._msf) == msf_before


def test_backend_replacement_on_forest_deletion():
    s = _oset("a b | c\na b | c")
    g = build_coupled_graph(s)
    be = NaiveMsfBackend(g)
    # blue 0 is in the MSF; its parallel twin 1 replaces it
    assert be.delete_edge(0) == 1


def test_backend_component_count_tracks_unreplaced_deletions():
    s = _oset("a b | c")
    g = build_coupled_graph(s)
    be = NaiveMsfBackend(g)
    assert be.component_count() == 1  # blue+red span all 3 points
    assert be.delete_edge(g.coupled_red(0)) is None
    assert be.component_count() == 2
    assert be.delete_edge(0) is None
    assert be.component_count() == 3
    assert sorted(be.newly_isolated()) == sorted(g.endpoints[0])


def test_backend_heaviest_tie_breaks_to_lowest_id():
    s = _oset("a b | c\nd e | f")
    g = build_coupled_graph(s)
    be = NaiveMsfBackend(g)
    assert be.heaviest_msf_edge() == g.coupled_red(0)  # lowest-id red


def test_backend_trace_format():
    s = _oset("a b | c")
    g = build_coupled_graph(s)
    trace = []
    be = NaiveMsfBackend(g, trace=trace)
    be.delete_edge(1)
    be.delete_edge(0)
    assert trace == ["del 1 kind=red replaced=none", "del 0 kind=blue replaced=none"]


# -- cut invocation ----------------------------------------------------------------


def test_cut_single_constraint_hand_simulation():
    s = _oset("b c | a")
    g = build_coupled_graph(s)
    be = NaiveMsfBackend(g)
    batch = cut_inter_component_edges(be, g)
    assert batch == [0]  # the blue {b,c}, marked when its red was stripped
    assert be.alive_edge_count() == 0


def test_cut_disjoint_constraints_one_batch():
    s = _oset("b c | a\ny z | x")
    g = build_coupled_graph(s)
    be = NaiveMsfBackend(g)
    batch = cut_inter_component_edges(be, g)
    assert sorted(batch) == [0, 1]


def test_cut_entry_blue_heaviest_returns_empty():
    # star of blues with redundant reds: the MSF is all blue at entry
    s = _oset("a b | c\na c | d\na d | b")
    g = build_coupled_graph(s)
    be = NaiveMsfBackend(g)
    assert cut_inter_component_edges(be, g) == []
    assert be.alive_edge_count() == 6  # nothing deleted


# -- full builds -------------------------------------------------------------------


def test_build_via_msf_single_constraint_golden():
    s = _oset("a b | c")
    out = build_via_msf(s)
    assert write_newick(out.tree, s.points) == "((a,b),c);"


def test_build_via_msf_triangle_rejects_with_witness():
    s = _oset("a b | c\na c | d\na d | b")
    out = build_via_msf(s)
    assert not out.ok
    assert out.witness.points == (0, 1, 2, 3)


def test_build_via_msf_no_constraints():
    out = build_via_msf(OrientedSet(default_points(5), ()))
    assert out.ok and out.tree.n_leaves == 5


def test_phase_log_partitions_blues():
    rng = random.Random(4)
    s = _random_consistent(rng, 16, 40)
    dbg = MsfDebug()
    out = build_via_msf(s, debug=dbg)
    assert out.ok
    assert isinstance(dbg.phase_log, PhaseLog)
    assert dbg.phase_log.is_partition_of(40)


@pytest.mark.parametrize("n", [8, 64])
def test_differential_with_debug_invariants(n):
    rng = random.Random(n)
    for trial in range(30):
        s = _random_consistent(rng, n, 2 * n)
        if trial % 2:
            s = _mutate(rng, s)
        dbg = MsfDebug()
        got = build_via_msf(s, debug=dbg)  # debug mode asserts the invariants
        want = build_binary(s)
        assert got.ok == want.ok
        if got.ok:
            assert got.tree.binary
            assert all(satisfies(got.tree, c) for c in s.constraints)


def test_trace_lines_well_formed():
    rng = random.Random(9)
    s = _random_consistent(rng, 10, 15)
    trace = []
    build_via_msf(s, trace=trace)
    assert trace, "deletions must be traced"
    for line in trace:
        parts = line.split()
        assert parts[0] == "del"
        assert parts[2] in ("kind=blue", "kind=red")
        assert parts[3].startswith("replaced=")


# -- k-tuple pipeline -----------------------------------------------------------------


def test_ktuple_via_msf_matches_baseline():
    shape = tree_from_nested((((0, 1), 2), 3))
    oset = OrientedSet(default_points(4), (KTuple((0, 1, 2, 3), shape),))
    got = build_ktuple_via_msf(oset)
    from hctree.builder import reduce_ktuple

    reduced = OrientedSet(oset.points, tuple(reduce_ktuple(oset.constraints[0])))
    want = build_binary(reduced)
    assert got.ok == want.ok
    assert all(satisfies(got.tree, c) for c in reduced.constraints)


def test_ktuple_via_msf_two_queries_consistent():
    s = parse_constraints("tree: (((a,b),c),d);\ntree: ((a,b),(d,e));")
    out = build_ktuple_via_msf(s)
    assert out.ok
    for c in s.constraints:
        assert satisfies(out.tree, c)


def test_ktuple_via_msf_rejects_multiway_shape():
    shape = tree_from_nested((0, 1, 2))
    oset = OrientedSet(default_points(3), (KTuple((0, 1, 2), shape),))
    with pytest.raises(ValueError):
        build_ktuple_via_msf(oset)


def test_ktuple_via_msf_accepts_chain_orientations():
    from hctree.dimension import construct_tuple_chain
    from hctree.tree_ops import enumerate_binary_trees

    chain = construct_tuple_chain(6, 4)
    shapes = [list(enumerate_binary_trees(list(t))) for t in chain.tuples]
    rng = random.Random(12)
    for _ in range(50):
        oset = OrientedSet(chain.points, tuple(
            KTuple(t, rng.choice(s)) for t, s in zip(chain.tuples, shapes)))
        out = build_ktuple_via_msf(oset)
        assert out.ok
        assert all(satisfies(out.tree, c) for c in oset.constraints)


def test_ktuple_via_msf_rejects_mixed_k():
    s = OrientedSet(
        default_points(5),
        (
            KTuple((0, 1, 2), tree_from_nested(((0, 1), 2))),
            KTuple((0, 1, 2, 4), tree_from_nested(((0, 1), (2, 4)))),
        ),
    )
    with pytest.raises(ValueError):
        build_ktuple_via_msf(s)
