"""Online mistake-bound machinery: the recursive shattered-tree construction,
its verification, version-space (halving) learning, and the adversarial game.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .core import (
    BudgetError,
    Constraint,
    KTuple,
    OrientedSet,
    PointSet,
    default_points,
)
from .builder import build_agnostic, build_binary, reduce_ktuple
from .dimension import triplet_orientations
from .tree_ops import enumerate_binary_trees, ladder, orientation_of, random_binary_tree, satisfies


@dataclass
class LLeaf:
    order: tuple[int, ...]


@dataclass
class LNode:
    tuple_pts: tuple[int, ...]
    down_label: tuple[int, ...]  # ladder order, ascending
    up_label: tuple[int, ...]    # ladder order, descending
    down: Union["LNode", LLeaf]
    up: Union["LNode", LLeaf]
    partition: Optional[tuple[tuple[int, ...], ...]] = None  # set at block roots


@dataclass
class LittlestoneTree:
    """Complete binary adversary tree: nodes ask a tuple, edges commit to one
    of two ladder orientations of it."""

    root: Union[LNode, LLeaf]
    n: int
    n_prime: int
    k: int
    depth: int


def _largest_power(k: int, n: int) -> int:
    p = k
    while p * k <= n:
        p *= k
    return p


def default_tournament(block: Sequence[int], k: int) -> list[tuple[int, ...]]:
    """Partition a sorted block into consecutive k-tuples."""
    b = sorted(block)
    return [tuple(b[i:i + k]) for i in range(0, len(b), k)]


def build_littlestone_tree(n: int, k: int,
                           tournament=None,
                           depth_budget: int = 16,
                           debug: bool = False) -> LittlestoneTree:
    """Recursive sort-tournament construction of a shattered adversary tree.

    Works on n' = the largest power of k at most n.  Each block of n'/k
    layers asks one tuple per layer, labeling the two child edges with the
    ascending and descending ladder on that tuple; block leaves reassign each
    point to set index i*k + r from its previous set index i and its rank r
    in the one ladder that contained it on the path.  Total depth is
    (n'/k) * log_k(n').
    """
    if k < 2:
        raise ValueError("tuple arity must be at least 2")
    if n < k:
        raise ValueError("need at least k points")
    if tournament is None:
        tournament = default_tournament
    n_prime = _largest_power(k, n)
    levels = round(math.log(n_prime, k))
    total_depth = (n_prime // k) * levels
    if total_depth > depth_budget:
        raise BudgetError("littlestone-depth",
                          f"depth {total_depth} exceeds budget {depth_budget}")
    block_depth = n_prime // k

    def reassign(partition: list[list[int]], tuples: list[tuple[int, ...]],
                 choices: tuple[str, ...]) -> list[list[int]]:
        layer_of = {p: tau for tau, t in enumerate(tuples) for p in t}
        fresh: list[list[int]] = [[] for _ in range(len(partition) * k)]
        for i, block in enumerate(partition):
            for x in block:
                tau = layer_of[x]
                lab = tuples[tau] if choices[tau] == "D" else tuple(reversed(tuples[tau]))
                rank = lab.index(x) + 1
                fresh[i * k + rank - 1].append(x)
        return [sorted(b) for b in fresh]

    def grow(partition: list[list[int]]) -> Union[LNode, LLeaf]:
        if debug:
            sizes = {len(b) for b in partition}
            assert len(sizes) == 1, "partition blocks must stay equal-sized"
            assert len(partition) * sizes.pop() == n_prime
        if len(partition[0]) == 1:
            return LLeaf(order=tuple(b[0] for b in partition))
        tuples: list[tuple[int, ...]] = []
        for block in partition:
            tuples.extend(tournament(block, k))
        assert len(tuples) == block_depth

        def block_node(tau: int, choices: tuple[str, ...]) -> Union[LNode, LLeaf]:
            if tau == block_depth:
                return grow(reassign(partition, tuples, choices))
            t = tuples[tau]
            down_label = tuple(sorted(t))
            return LNode(
                tuple_pts=tuple(sorted(t)),
                down_label=down_label,
                up_label=tuple(reversed(down_label)),
                down=block_node(tau + 1, choices + ("D",)),
                up=block_node(tau + 1, choices + ("U",)),
            )

        node = block_node(0, ())
        node.partition = tuple(tuple(b) for b in partition)
        return node

    root = grow([list(range(n_prime))])
    return LittlestoneTree(root=root, n=n, n_prime=n_prime, k=k, depth=total_depth)


def ladder_label_constraint(label: Sequence[int]) -> Optional[Constraint]:
    """The tree constraint a ladder edge label stands for; None when the
    label has fewer than 3 points (no triplet content)."""
    if len(label) < 3:
        return None
    return KTuple(tuple(sorted(label)), ladder(label))


def verify_shattered(L: LittlestoneTree, path_budget: int = 1 << 14) -> bool:
    """Check every root-to-leaf path is realizable: the ladder on the leaf's
    final point order must satisfy every edge label along the path."""
    if 2 ** L.depth > path_budget:
        raise BudgetError("shatter-paths", f"2^{L.depth} paths exceed budget {path_budget}")
    stack: list[tuple[Union[LNode, LLeaf], list[tuple[int, ...]]]] = [(L.root, [])]
    while stack:
        node, labels = stack.pop()
        if isinstance(node, LLeaf):
            witness = ladder(node.order)
            for lab in labels:
                c = ladder_label_constraint(lab)
                if c is not None and not satisfies(witness, c):
                    return False
            continue
        stack.append((node.down, labels + [node.down_label]))
        stack.append((node.up, labels + [node.up_label]))
    return True


def rank_order_check(L: LittlestoneTree) -> bool:
    """Direct structural assertions on the recorded construction:

    * every edge label's point order is preserved in the final index order of
      every descendant leaf, and
    * at every block root of depth s*(n'/k) the partition has k^s equal-size
      sets of size n'/k^s.
    """
    block_depth = L.n_prime // L.k

    def walk(node, depth) -> list[tuple[int, ...]]:
        if isinstance(node, LLeaf):
            return [node.order]
        if node.partition is not None:
            if depth % block_depth != 0:
                return []
            s = depth // block_depth
            if len(node.partition) != L.k ** s:
                return []
            want = L.n_prime // (L.k ** s)
            if any(len(b) != want for b in node.partition):
                return []
        below = []
        for child, lab in ((node.down, node.down_label), (node.up, node.up_label)):
            leaves = walk(child, depth + 1)
            if not leaves:
                return []
            for order in leaves:
                pos = {p: i for i, p in enumerate(order)}
                ranks = [pos[p] for p in lab]
                if any(ranks[i] >= ranks[i + 1] for i in range(len(ranks) - 1)):
                    return []
            below.extend(leaves)
        return below

    return bool(walk(L.root, 0))


# ---------------------------------------------------------------------------
# Learners
# ---------------------------------------------------------------------------


def _as_primitive_set(c: Constraint) -> frozenset:
    if isinstance(c, KTuple):
        return frozenset(reduce_ktuple(c))
    return frozenset([c])


def same_orientation(c1: Constraint, c2: Constraint) -> bool:
    """Constraint equality across representations (a 3-point ladder k-tuple
    equals its split pair)."""
    return _as_primitive_set(c1) == _as_primitive_set(c2)


class ConstantLearner:
    """Predicts the canonically-first orientation of every triplet."""

    def predict(self, t: Sequence[int]) -> Constraint:
        if len(t) != 3:
            raise ValueError("constant learner answers triplets only")
        return triplet_orientations(t)[0]

    def update(self, label: Constraint) -> None:
        pass


class HalvingLearner:
    """Version-space learner over all binary shapes on n points.

    Predictions are plurality votes over the surviving trees (canonical-order
    tie break); updates drop every tree inconsistent with the revealed label.
    A mistake therefore shrinks the space by a factor of at least 1/3, giving
    at most log_{3/2}((2n-3)!!) mistakes on realizable triplet streams.
    """

    def __init__(self, n: int, cap: int = 7):
        self.n = n
        self.trees = list(enumerate_binary_trees(n, cap=cap))
        self.alive = [True] * len(self.trees)

    @property
    def version_space_size(self) -> int:
        return sum(self.alive)

    def predict(self, t: Sequence[int]) -> Constraint:
        if len(t) != 3:
            raise ValueError("halving learner answers triplets only")
        a, b, c = sorted(t)
        options = triplet_orientations((a, b, c))
        counts = {o: 0 for o in options}
        for tree, ok in zip(self.trees, self.alive):
            if ok:
                counts[orientation_of(tree, a, b, c)] += 1
        return max(options, key=lambda o: (counts[o], -options.index(o)))

    def update(self, label: Constraint) -> None:
        prim = _as_primitive_set(label)
        for i, (tree, ok) in enumerate(zip(self.trees, self.alive)):
            if ok and not all(satisfies(tree, c) for c in prim):
                self.alive[i] = False
        if not any(self.alive):
            raise ValueError("label sequence is not realizable by any binary tree")


class TreeConsistentLearner:
    """Predicts from a tree built over the constraints seen so far."""

    def __init__(self, n: int):
        self.n = n
        self.points = default_points(n)
        self.seen: list[Constraint] = []

    def predict(self, t: Sequence[int]) -> Constraint:
        if len(t) != 3:
            raise ValueError("tree-consistent learner answers triplets only")
        flat: list[Constraint] = []
        for c in self.seen:
            if isinstance(c, KTuple):
                flat.extend(reduce_ktuple(c))
            else:
                flat.append(c)
        outcome = build_binary(OrientedSet(self.points, tuple(flat)))
        if not outcome.ok:
            raise ValueError("seen constraints are contradictory")
        return orientation_of(outcome.tree, *sorted(t))

    def update(self, label: Constraint) -> None:
        self.seen.append(label)


@dataclass(frozen=True)
class GameRound:
    round: int
    tuple_pts: tuple[int, ...]
    prediction: Constraint
    label: Constraint
    mistake: bool


def adversary_game(L: LittlestoneTree, learner) -> tuple[int, list[GameRound]]:
    """Walk the adversary tree against a learner: present each node's tuple,
    then follow the child edge whose label differs from the prediction (down
    when both differ).  Every revealed label contradicts the prediction, so a
    shattered tree of depth d forces exactly d mistakes."""
    if L.k < 3:
        raise ValueError("the game needs tuples with at least 3 points")
    node = L.root
    mistakes = 0
    transcript: list[GameRound] = []
    rnd = 0
    while isinstance(node, LNode):
        rnd += 1
        asked = node.tuple_pts
        pred = learner.predict(asked)
        down_c = ladder_label_constraint(node.down_label)
        up_c = ladder_label_constraint(node.up_label)
        if same_orientation(pred, down_c):
            label, node = up_c, node.up
        else:
            label, node = down_c, node.down
        mistake = not same_orientation(pred, label)
        mistakes += mistake
        transcript.append(GameRound(rnd, asked, pred, label, mistake))
        learner.update(label)
    return mistakes, transcript


def transcript_csv(rows: Sequence[GameRound], points: Optional[PointSet] = None) -> str:
    """Game transcript in the round,tuple,prediction,label,mistake format."""
    from .core import serialize_constraint

    out = ["round,tuple,prediction,label,mistake"]
    for r in rows:
        if points is None:
            pts = default_points(max(r.tuple_pts, default=0) + 1)
        else:
            pts = points
        tup = " ".join(pts.labels[p] for p in r.tuple_pts)
        pred = serialize_constraint(r.prediction, pts)
        lab = serialize_constraint(r.label, pts)
        out.append(f"{r.round},{tup},{pred},{lab},{int(r.mistake)}")
    return "\n".join(out) + "\n"


def halving_adversary_run(n: int, seed: int = 0) -> int:
    """Greedy adversary against the halving learner: each round force a
    mistake while keeping the version space as large as possible.  Returns
    the mistakes made before no forcing move remains."""
    rng = random.Random(seed)
    learner = HalvingLearner(n)
    triplets = list(itertools.combinations(range(n), 3))
    mistakes = 0
    while True:
        best_key = None
        best_moves = []
        for t in triplets:
            pred = learner.predict(t)
            for lab in triplet_orientations(t):
                if lab == pred:
                    continue
                remaining = sum(
                    1 for tree, ok in zip(learner.trees, learner.alive)
                    if ok and satisfies(tree, lab)
                )
                if remaining == 0:
                    continue
                if best_key is None or remaining > best_key:
                    best_key = remaining
                    best_moves = [(t, lab)]
                elif remaining == best_key:
                    best_moves.append((t, lab))
        if not best_moves:
            return mistakes
        t, lab = rng.choice(best_moves)
        learner.predict(t)  # the mistake happens here by construction
        learner.update(lab)
        mistakes += 1


def agnostic_regret_run(n: int, rounds: int, flip_rate: float, seed: int = 0) -> dict:
    """Regret measurement on a noisy stream: labels come from a hidden tree
    but flip with the given rate.  The learner rebuilds a best-effort tree
    from everything seen; OPT is the best single tree in hindsight.  Reported
    as a measurement; no bound is asserted."""
    rng = random.Random(seed)
    ground = random_binary_tree(n, rng)
    points = default_points(n)
    stream: list[tuple[tuple[int, int, int], Constraint]] = []
    for _ in range(rounds):
        t = tuple(sorted(rng.sample(range(n), 3)))
        label = orientation_of(ground, *t)
        if rng.random() < flip_rate:
            label = rng.choice([o for o in triplet_orientations(t) if o != label])
        stream.append((t, label))

    mistakes = 0
    seen: list[Constraint] = []
    for t, label in stream:
        if seen:
            tree, _ = build_agnostic(OrientedSet(points, tuple(seen)))
            pred = orientation_of(tree, *t)
        else:
            pred = triplet_orientations(t)[0]
        mistakes += pred != label
        seen.append(label)

    opt = min(
        sum(1 for t, label in stream if orientation_of(tree, *t) != label)
        for tree in enumerate_binary_trees(n)
    )
    return {"mistakes": mistakes, "opt": opt, "regret": mistakes - opt}
