"""Pure tree algorithms: LCA, constraint satisfaction, triplet extraction,
ladders, enumeration, random generation, binarization."""

from __future__ import annotations

import itertools
import random
from typing import Iterator, Optional, Sequence

from .core import (
    BudgetError,
    Constraint,
    HierarchicalTree,
    KTuple,
    OrientedSet,
    PointSet,
    SplitPair,
    ThreeWay,
    TreeAssembler,
    default_points,
    tree_from_nested,
)

ENUMERATION_CAP = 8


def lca(t: HierarchicalTree, u: int, v: int) -> int:
    """Deepest node whose subtree contains both leaf points u and v."""
    if u == v:
        raise ValueError("lca needs two distinct points")
    a = t.leaf_node(u)
    b = t.leaf_node(v)
    seen = set()
    x: Optional[int] = a
    while x is not None:
        seen.add(x)
        x = t.parent[x]
    y: Optional[int] = b
    while y not in seen:
        y = t.parent[y]
        if y is None:  # disconnected arena; cannot happen for valid trees
            raise ValueError("points share no ancestor")
    return y


def orientation_of(t: HierarchicalTree, a: int, b: int, c: int) -> Constraint:
    """The unique constraint t satisfies on the 3-subset {a, b, c}."""
    lab = lca(t, a, b)
    lac = lca(t, a, c)
    lbc = lca(t, b, c)
    da, db, dc = t.depth[lab], t.depth[lac], t.depth[lbc]
    if da == db == dc:
        return ThreeWay(a, b, c)
    if da > db:
        return SplitPair(a, b, c)
    if db > da:
        return SplitPair(a, c, b)
    return SplitPair(b, c, a)


def satisfies(t: HierarchicalTree, c: Constraint) -> bool:
    """Whether tree t satisfies the constraint.

    A split pair ``[a,b|c]`` holds iff lca(a,c) == lca(b,c) with lca(a,b)
    strictly below; a three-way holds iff all three pairwise LCAs coincide;
    a k-tuple holds iff every triplet orientation of its shape holds in t.
    """
    if isinstance(c, SplitPair):
        lac = lca(t, c.first, c.cut)
        lbc = lca(t, c.second, c.cut)
        if lac != lbc:
            return False
        return t.depth[lca(t, c.first, c.second)] > t.depth[lac]
    if isinstance(c, ThreeWay):
        a, b, cc = c.points
        return lca(t, a, b) == lca(t, a, cc) == lca(t, b, cc)
    if isinstance(c, KTuple):
        for x, y, z in itertools.combinations(c.points, 3):
            if orientation_of(c.shape, x, y, z) != orientation_of(t, x, y, z):
                return False
        return True
    raise TypeError(f"not a constraint: {c!r}")


def extract_triplets(t: HierarchicalTree, points: Optional[PointSet] = None) -> OrientedSet:
    """The full orientation of the tree: one constraint per 3-subset of leaves.

    Output size is C(n, 3).  Pairwise LCA depths are precomputed so the total
    cost is O(n^2 * depth + n^3).
    """
    leaves = t.leaf_points()
    if len(leaves) < 3:
        raise ValueError("triplet extraction needs at least 3 leaves")
    if points is None:
        points = default_points(max(leaves) + 1)
    pair_depth: dict[tuple[int, int], int] = {}
    for u, v in itertools.combinations(leaves, 2):
        pair_depth[(u, v)] = t.depth[lca(t, u, v)]
    constraints: list[Constraint] = []
    for a, b, c in itertools.combinations(leaves, 3):
        dab = pair_depth[(a, b)]
        dac = pair_depth[(a, c)]
        dbc = pair_depth[(b, c)]
        if dab == dac == dbc:
            constraints.append(ThreeWay(a, b, c))
        elif dab > dac:
            constraints.append(SplitPair(a, b, c))
        elif dac > dab:
            constraints.append(SplitPair(a, c, b))
        else:
            constraints.append(SplitPair(b, c, a))
    return OrientedSet(points, tuple(constraints))


def ladder(points_in_order: Sequence[int]) -> HierarchicalTree:
    """Caterpillar tree: rank-1 point splits off first, and so on down."""
    pts = list(points_in_order)
    if len(pts) < 2:
        raise ValueError("a ladder needs at least 2 points")
    asm = TreeAssembler()
    node = asm.leaf(pts[-1])
    for p in reversed(pts[:-1]):
        node = asm.node([asm.leaf(p), node])
    return asm.build(node)


def restrict(t: HierarchicalTree, pts: Sequence[int]) -> HierarchicalTree:
    """Topology induced by a leaf subset (unary nodes suppressed)."""
    keep = set(pts)
    if len(keep) < 2:
        raise ValueError("restriction needs at least 2 points")

    asm = TreeAssembler()
    results: dict[int, Optional[int]] = {}
    stack: list[tuple[int, bool]] = [(t.root, False)]
    while stack:
        v, expanded = stack.pop()
        p = t.node_point[v]
        if p is not None:
            results[v] = asm.leaf(p) if p in keep else None
            continue
        if expanded:
            kept = [results[c] for c in t.children[v] if results[c] is not None]
            results[v] = None if not kept else kept[0] if len(kept) == 1 else asm.node(kept)
        else:
            stack.append((v, True))
            for c in t.children[v]:
                stack.append((c, False))
    root = results[t.root]
    if root is None:
        raise ValueError("no requested point is a leaf of the tree")
    return asm.build(root)


# ---------------------------------------------------------------------------
# Enumeration and random generation
# ---------------------------------------------------------------------------


def double_factorial_odd(n: int) -> int:
    """(2n-3)!! -- the number of leaf-labeled rooted binary shapes."""
    out = 1
    for k in range(3, 2 * n - 2, 2):
        out *= k
    return out


def _insert_leaf(shape, leaf, pos):
    """Insert ``leaf`` at edge position ``pos`` of a nested-tuple shape.

    Positions are counted in prefix order, one per node ("above that node");
    position 0 of the top call is above the root.  Returns (shape, remaining);
    remaining < 0 signals the insertion happened.
    """
    if pos == 0:
        return (shape, leaf), -1
    if isinstance(shape, int):
        return shape, pos - 1
    l, r = shape
    l2, pos = _insert_leaf(l, leaf, pos - 1)
    if pos < 0:
        return (l2, r), -1
    r2, pos = _insert_leaf(r, leaf, pos)
    return (l, r2), pos


def enumerate_binary_trees(points: Sequence[int] | int,
                           cap: int = ENUMERATION_CAP) -> Iterator[HierarchicalTree]:
    """Yield every rooted binary shape on the given leaves exactly once.

    The stream has (2n-3)!! elements; n above ``cap`` raises BudgetError.
    """
    leaves = list(range(points)) if isinstance(points, int) else list(points)
    n = len(leaves)
    if n < 2:
        raise ValueError("enumeration needs at least 2 leaves")
    if n > cap:
        raise BudgetError("enumeration-cap", f"n={n} exceeds enumeration cap {cap}")

    def rec(i, shape):
        if i == n:
            yield shape
            return
        for pos in range(2 * i - 1):
            grown, left = _insert_leaf(shape, leaves[i], pos)
            assert left < 0
            yield from rec(i + 1, grown)

    for shape in rec(2, (leaves[0], leaves[1])):
        yield tree_from_nested(shape)


def _set_partitions(items: list):
    """All unordered partitions into non-empty blocks, each exactly once."""
    if len(items) == 1:
        yield [[items[0]]]
        return
    head, rest = items[0], items[1:]
    for sub in _set_partitions(rest):
        yield [[head]] + [blk[:] for blk in sub]
        for i in range(len(sub)):
            cand = [blk[:] for blk in sub]
            cand[i] = [head] + cand[i]
            yield cand


def enumerate_multiway_trees(points: Sequence[int] | int,
                             cap: int = ENUMERATION_CAP) -> Iterator[HierarchicalTree]:
    """Yield every rooted multiway shape (internal degree >= 2) exactly once."""
    leaves = list(range(points)) if isinstance(points, int) else list(points)
    n = len(leaves)
    if n < 2:
        raise ValueError("enumeration needs at least 2 leaves")
    if n > cap:
        raise BudgetError("enumeration-cap", f"n={n} exceeds enumeration cap {cap}")

    def shapes(block):
        if len(block) == 1:
            yield block[0]
            return
        for part in _set_partitions(block):
            if len(part) < 2:
                continue
            for combo in itertools.product(*(list(shapes(b)) for b in part)):
                yield tuple(combo)

    for s in shapes(leaves):
        yield tree_from_nested(s)


def random_binary_tree(n: int, rng: random.Random | int) -> HierarchicalTree:
    """Uniform leaf-labeled binary shape on points 0..n-1.

    Leaf i+1 is inserted on an edge (or above the root) chosen uniformly among
    the 2i-1 positions of the current i-leaf tree, which is uniform over the
    (2n-3)!! shapes.  Built on flat arrays: no recursion, O(n) memory.
    """
    if n < 2:
        raise ValueError("need at least 2 points")
    if isinstance(rng, int):
        rng = random.Random(rng)
    # arena: children pairs for internal nodes, None for leaves
    children: list[Optional[list[int]]] = [None, None]
    parent: list[Optional[int]] = [None, None]
    point: list[Optional[int]] = [0, 1]
    root = 2
    children.append([0, 1])
    parent += [None]
    parent[0] = parent[1] = 2
    point.append(None)
    for leaf in range(2, n):
        pos = rng.randrange(2 * leaf - 1)
        leaf_id = len(children)
        children.append(None)
        parent.append(None)
        point.append(leaf)
        joint = len(children)
        children.append(None)  # filled below
        parent.append(None)
        point.append(None)
        if pos == 0:
            children[joint] = [root, leaf_id]
            parent[root] = parent[leaf_id] = joint
            root = joint
        else:
            # position pos-1 among the non-root nodes, in id order
            target = pos - 1 if pos - 1 < root else pos  # skip the root id
            up = parent[target]
            children[joint] = [target, leaf_id]
            parent[target] = parent[leaf_id] = joint
            children[up][children[up].index(target)] = joint
            parent[joint] = up
    return HierarchicalTree(
        [c if c is not None else [] for c in children], parent, root, point)


def random_multiway_tree(n: int, rng: random.Random | int,
                         child_counts: Sequence[int] = (2, 3, 4)) -> HierarchicalTree:
    """Random multiway shape: each internal node draws its child count from
    ``child_counts`` (capped by the block size) and splits its block randomly."""
    if n < 2:
        raise ValueError("need at least 2 points")
    if isinstance(rng, int):
        rng = random.Random(rng)
    asm = TreeAssembler()

    def go(block) -> int:
        if len(block) == 1:
            return asm.leaf(block[0])
        c = min(rng.choice(list(child_counts)), len(block))
        shuffled = block[:]
        rng.shuffle(shuffled)
        # c non-empty groups: seed one element each, scatter the rest
        groups = [[shuffled[i]] for i in range(c)]
        for x in shuffled[c:]:
            groups[rng.randrange(c)].append(x)
        return asm.node(go(sorted(g)) for g in groups)

    return asm.build(go(list(range(n))))


def random_binary_shape_over(parts: Sequence[int], rng: random.Random,
                             asm: TreeAssembler) -> int:
    """Random binary combination of already-built arena node ids."""
    ids = list(parts)
    if len(ids) == 1:
        return ids[0]
    guide = random_binary_tree(len(ids), rng)
    results: dict[int, int] = {}
    stack: list[tuple[int, bool]] = [(guide.root, False)]
    while stack:
        v, expanded = stack.pop()
        p = guide.node_point[v]
        if p is not None:
            results[v] = ids[p]
            continue
        if expanded:
            results[v] = asm.node([results[c] for c in guide.children[v]])
        else:
            stack.append((v, True))
            for c in guide.children[v]:
                stack.append((c, False))
    return results[guide.root]


def binarize(t: HierarchicalTree, rng: random.Random | int | None = None) -> HierarchicalTree:
    """Replace every node with > 2 children by a random binary tree on them.

    Already-binary trees are returned unchanged.  Every split-pair constraint
    satisfied by t is satisfied by the result (grouping only gets finer).
    """
    if t.binary:
        return t
    if rng is None:
        rng = random.Random(0)
    elif isinstance(rng, int):
        rng = random.Random(rng)
    asm = TreeAssembler()
    results: dict[int, int] = {}
    stack: list[tuple[int, bool]] = [(t.root, False)]
    while stack:
        v, expanded = stack.pop()
        p = t.node_point[v]
        if p is not None:
            results[v] = asm.leaf(p)
            continue
        if expanded:
            kids = [results[c] for c in t.children[v]]
            results[v] = asm.node(kids) if len(kids) == 2 else \
                random_binary_shape_over(kids, rng, asm)
        else:
            stack.append((v, True))
            for c in t.children[v]:
                stack.append((c, False))
    return asm.build(results[t.root])
