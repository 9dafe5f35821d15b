import itertools
import math
import random
from collections import Counter

import numpy as np
import pytest

from hctree.core import SplitPair, tree_from_nested
from hctree.pac import (
    ExperimentConfig,
    ThresholdReport,
    aggregate_csv,
    contradiction_threshold,
    count_until_contradiction,
    distance_labeler,
    hierarchical_vectors,
    load_vectors_csv,
    render_report_svg,
    run_agnostic,
    run_nonbinary,
    run_nonbinary_trial,
    run_realizable,
    sample_labeled_triplet,
    trials_csv,
)
from hctree.tree_ops import orientation_of, random_binary_tree, random_multiway_tree, satisfies


# -- sampling -----------------------------------------------------------------


def test_sample_three_leaf_tree_unique_label():
    t = tree_from_nested(((0, 1), 2))
    rng = random.Random(0)
    for _ in range(20):
        assert sample_labeled_triplet(t, rng) == SplitPair(0, 1, 2)


def test_sample_uniform_over_subsets_chi_square():
    t = random_binary_tree(4, 0)
    rng = random.Random(123)
    draws = 60000
    counts = Counter()
    for _ in range(draws):
        c = sample_labeled_triplet(t, rng)
        counts[c.points] += 1
    assert len(counts) == 4
    expected = draws / 4
    sigma = math.sqrt(draws * 0.25 * 0.75)
    for got in counts.values():
        assert abs(got - expected) <= 3 * sigma


def test_sample_labels_satisfied_by_source():
    rng = random.Random(5)
    t = random_multiway_tree(12, rng)
    for _ in range(100):
        assert satisfies(t, sample_labeled_triplet(t, rng))


# -- distance labeling ----------------------------------------------------------


def test_distance_labeler_collinear():
    vecs = np.array([[0.0], [1.0], [10.0]])
    label = distance_labeler(vecs)
    assert label((0, 1, 2)) == SplitPair(0, 1, 2)


def test_distance_labeler_tie_rule():
    # standard basis vectors: all pairwise distances exactly tie, so the
    # lexicographically first pair wins
    vecs = np.eye(3)
    label = distance_labeler(vecs)
    assert label((0, 1, 2)) == SplitPair(0, 1, 2)


def test_distance_labeler_matches_reimplementation():
    rng = np.random.default_rng(7)
    vecs = rng.uniform(size=(30, 100))
    label = distance_labeler(vecs)

    def oracle(a, b, c):
        # independent re-implementation with explicit norms
        d = {
            (a, b): float(np.linalg.norm(vecs[a] - vecs[b])),
            (a, c): float(np.linalg.norm(vecs[a] - vecs[c])),
            (b, c): float(np.linalg.norm(vecs[b] - vecs[c])),
        }
        pair = min(sorted(d), key=lambda p: d[p])
        cut = ({a, b, c} - set(pair)).pop()
        return SplitPair(pair[0], pair[1], cut)

    pyrng = random.Random(0)
    for _ in range(1000):
        a, b, c = sorted(pyrng.sample(range(30), 3))
        assert label((a, b, c)) == oracle(a, b, c)


def test_distance_labeler_permutation_covariant():
    rng = np.random.default_rng(3)
    vecs = rng.uniform(size=(6, 8))
    perm = [3, 5, 0, 1, 4, 2]
    permuted = vecs[perm]
    base = distance_labeler(vecs)
    moved = distance_labeler(permuted)
    inv = {new: old for new, old in enumerate(perm)}
    for t in itertools.combinations(range(6), 3):
        got = moved(t)
        mapped = base(tuple(sorted(inv[p] for p in t)))
        assert {inv[got.first], inv[got.second]} == {mapped.first, mapped.second}
        assert inv[got.cut] == mapped.cut


# -- realizable pipeline -----------------------------------------------------------


def test_realizable_smoke_and_monotone():
    cfg = ExperimentConfig(mode="realizable", n=24, k_ratios=(1, 4, 16), trials=10, seed=11)
    rep = run_realizable(cfg)
    errs = {p.k_ratio: p.mean for p in rep.points}
    assert errs[1] > errs[16]  # more samples help (1-sigma slack implicit at this gap)
    assert all(0.0 <= r.error <= 1.0 for r in rep.rows)


def test_realizable_full_information_zero_error():
    n = 8
    ratio = math.comb(n, 3) * 4 / n  # oversample so every triplet appears w.h.p.
    cfg = ExperimentConfig(mode="realizable", n=n, k_ratios=(ratio,), trials=3,
                           seed=2, test_size=2000)
    rep = run_realizable(cfg)
    assert all(r.error <= 0.02 for r in rep.rows)


def test_realizable_bit_exact_reproducible():
    cfg = ExperimentConfig(mode="realizable", n=20, k_ratios=(2,), trials=4, seed=9)
    a = trials_csv(run_realizable(cfg))
    b = trials_csv(run_realizable(cfg))
    assert a == b


def test_realizable_parallel_matches_serial():
    cfg = ExperimentConfig(mode="realizable", n=16, k_ratios=(2, 4), trials=3, seed=1)
    serial = trials_csv(run_realizable(cfg, jobs=1))
    parallel = trials_csv(run_realizable(cfg, jobs=2))
    assert serial == parallel


# -- agnostic pipeline ---------------------------------------------------------------


def test_agnostic_smoke():
    cfg = ExperimentConfig(mode="agnostic-vectors", n=24, k_ratios=(2,), trials=3,
                           seed=5, dim=16, test_size=400)
    rep = run_agnostic(cfg)
    assert len(rep.rows) == 3
    assert all(0.0 <= r.error <= 1.0 for r in rep.rows)


def test_agnostic_single_triplet_self_consistent():
    # n=3: the one training label is reproduced when tested on itself
    vecs = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]])
    label = distance_labeler(vecs)
    from hctree.builder import build_agnostic
    from hctree.core import OrientedSet, default_points

    c = label((0, 1, 2))
    tree, violations = build_agnostic(OrientedSet(default_points(3), (c,)))
    assert violations == 0
    assert orientation_of(tree, 0, 1, 2) == c


def test_agnostic_hierarchical_below_uniform():
    cfg = ExperimentConfig(mode="agnostic-vectors", n=32, k_ratios=(4,), trials=5,
                           seed=13, dim=32, test_size=600)
    uniform = run_agnostic(cfg)
    hier_vecs = hierarchical_vectors(32, 32, random.Random("hier"))
    cfg_file = ExperimentConfig(mode="agnostic-file", n=32, k_ratios=(4,), trials=5,
                                seed=13, dim=32, test_size=600)
    hier = run_agnostic(cfg_file, vectors=hier_vecs)
    assert hier.points[0].mean < uniform.points[0].mean


def test_load_vectors_csv_named_and_plain():
    names, arr = load_vectors_csv("p0,1.0,2.0\np1,3.0,4.0\n")
    assert names == ["p0", "p1"]
    assert arr.shape == (2, 2)
    names2, arr2 = load_vectors_csv("1.0,2.0\n3.0,4.0\n")
    assert names2 is None
    with pytest.raises(ValueError):
        load_vectors_csv("1.0,2.0\n3.0\n")
    with pytest.raises(ValueError):
        load_vectors_csv("a,b\n")


# -- contradiction threshold -----------------------------------------------------------


def test_threshold_realizable_labels_hit_cap():
    t = random_binary_tree(8, 0)

    def label(triple):
        return orientation_of(t, *triple)

    assert count_until_contradiction(8, label, random.Random(1), cap=math.comb(8, 3)) is None


def test_threshold_smoke():
    cfg = ExperimentConfig(mode="agnostic-vectors", n=30, k_ratios=(1,), trials=4,
                           seed=17, dim=50)
    rep = contradiction_threshold(cfg)
    assert isinstance(rep, ThresholdReport)
    assert all(c is not None for c in rep.counts)
    assert rep.mean is not None and 0 < rep.mean < math.comb(30, 3)


# -- nonbinary pipeline ------------------------------------------------------------------


def test_nonbinary_star_error_zero():
    star = tree_from_nested(tuple(range(9)))
    for ratio in (0.5, 2.0):
        assert run_nonbinary_trial(star, ratio, random.Random(4), 300) == 0.0


def test_nonbinary_realizable_stream_consistent():
    rng = random.Random(21)
    ground = random_multiway_tree(15, rng)
    from hctree.builder import build_nonbinary
    from hctree.core import OrientedSet, default_points

    train = tuple(sample_labeled_triplet(ground, rng) for _ in range(40))
    out = build_nonbinary(OrientedSet(default_points(15), train))
    assert out.ok
    assert all(satisfies(out.tree, c) for c in train)


def test_nonbinary_product_roughly_constant_on_fixed_tree():
    rng = random.Random(2)
    ground = random_multiway_tree(48, rng, child_counts=(2, 3, 4))
    products = []
    for ratio in (1, 2, 4):
        errs = [run_nonbinary_trial(ground, ratio, random.Random(f"{ratio}:{t}"), 800)
                for t in range(6)]
        products.append(ratio * sum(errs) / len(errs))
    mid = sum(products) / len(products)
    for p in products:
        assert 0.5 * mid <= p <= 1.5 * mid  # the declared +/-50 percent band


def test_nonbinary_smoke_report():
    cfg = ExperimentConfig(mode="nonbinary", n=20, k_ratios=(1, 2), trials=3, seed=8,
                           test_size=300)
    rep = run_nonbinary(cfg)
    assert len(rep.rows) == 6
    assert len(rep.points) == 2


# -- emission ---------------------------------------------------------------------------


def test_csv_schemas():
    cfg = ExperimentConfig(mode="realizable", n=12, k_ratios=(2,), trials=2, seed=0)
    rep = run_realizable(cfg)
    trials = trials_csv(rep).splitlines()
    assert trials[0] == "mode,n,k_ratio,trial,error,seconds"
    assert len(trials) == 3
    assert trials[1].endswith(",0.000000")  # timings off by default
    agg = aggregate_csv(rep).splitlines()
    assert agg[0] == "mode,n,k_ratio,mean_error,q10,q90,product"
    assert len(agg) == 2


def test_svg_renders_static_markup():
    cfg = ExperimentConfig(mode="realizable", n=12, k_ratios=(2, 4), trials=2, seed=0)
    svg = render_report_svg(run_realizable(cfg))
    assert svg.startswith("<svg")
    assert "polyline" in svg and "http" not in svg.replace(
        "http://www.w3.org/2000/svg", "")


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(mode="bogus", n=10, k_ratios=(1,))
    with pytest.raises(ValueError):
        ExperimentConfig(mode="realizable", n=10, k_ratios=(0,))
    with pytest.raises(ValueError):
        ExperimentConfig(mode="realizable", n=10, k_ratios=(1,), trials=0)
