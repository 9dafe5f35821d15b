"""Baseline tree constructors.

The satisfiability engine is a top-down splitter: each split-pair constraint
``[a,b|c]`` generates the edge (a,b); a point set splits along the connected
components of the edges its induced constraints generate.  A set that stays
connected is a closed-set witness of unsatisfiability.  The non-binary variant
additionally closes the edge set under three-way extensions: once two points
of ``[a|b|c]`` are connected, all three are.

``build_agnostic`` tolerates contradictory input by cutting a global minimum
number of edges whenever a set refuses to disconnect.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import (
    Constraint,
    HierarchicalTree,
    KTuple,
    OrientedSet,
    SplitPair,
    ThreeWay,
    Triplet,
    TreeAssembler,
    constraint_points,
)
from .dsu import UnionFind
from .tree_ops import extract_triplets, random_binary_shape_over, satisfies


@dataclass(frozen=True)
class ClosedSetWitness:
    """A point set connected by the edges its induced constraints generate."""

    points: tuple[int, ...]
    constraints: tuple[Constraint, ...]


@dataclass(frozen=True)
class BuildOutcome:
    tree: Optional[HierarchicalTree] = None
    witness: Optional[ClosedSetWitness] = None

    def __post_init__(self):
        if (self.tree is None) == (self.witness is None):
            raise ValueError("outcome is exactly one of tree or witness")

    @property
    def ok(self) -> bool:
        return self.tree is not None


class _Contradiction(Exception):
    def __init__(self, witness: ClosedSetWitness):
        self.witness = witness


def generated_edges(constraints: Sequence[Constraint],
                    subset: Optional[Sequence[int]] = None) -> list[tuple[int, int]]:
    """Edges e([a,b|c]) = (a,b) of the split pairs induced by ``subset``
    (every constraint point inside it); all constraints when subset is None."""
    keep = None if subset is None else set(subset)
    out = []
    for c in constraints:
        if not isinstance(c, SplitPair):
            continue
        if keep is None or all(p in keep for p in c.points):
            out.append(c.pair)
    return out


def _induced(constraints: Sequence[Constraint], member: dict[int, int], comp: int):
    """Constraints all of whose points map to component ``comp``."""
    out = []
    for c in constraints:
        pts = constraint_points(c)
        if all(member.get(p) == comp for p in pts):
            out.append(c)
    return out


def _split_components(S: list[int], constraints: list[Constraint],
                      allow_threeway: bool) -> list[list[int]]:
    """Components of the generated-edge graph on S, with three-way closure
    applied when ``allow_threeway``.  Constraints must be induced by S."""
    idx = {p: i for i, p in enumerate(S)}
    uf = UnionFind(len(S))
    pending: list[ThreeWay] = []
    for c in constraints:
        if isinstance(c, SplitPair):
            uf.union(idx[c.first], idx[c.second])
        elif isinstance(c, ThreeWay):
            if not allow_threeway:
                raise ValueError("three-way constraint in a binary-only build")
            pending.append(c)
        else:
            raise ValueError("k-tuple constraints must be reduced before building")
    changed = True
    while changed and pending:
        changed = False
        rest = []
        for tw in pending:
            ra, rb, rc = uf.find(idx[tw.a]), uf.find(idx[tw.b]), uf.find(idx[tw.c])
            if ra == rb or ra == rc or rb == rc:
                uf.union(idx[tw.a], idx[tw.b])
                uf.union(idx[tw.a], idx[tw.c])
                changed = True
            else:
                rest.append(tw)
        pending = rest
    groups: dict[int, list[int]] = {}
    for p in S:
        groups.setdefault(uf.find(idx[p]), []).append(p)
    return sorted(groups.values(), key=lambda g: g[0])


def _combine_binary(asm: TreeAssembler, child_ids: list[int],
                    rng: Optional[random.Random]) -> int:
    if len(child_ids) == 1:
        return child_ids[0]
    if rng is not None:
        return random_binary_shape_over(child_ids, rng, asm)
    # left-leaning comb; children arrive sorted by smallest member
    acc = child_ids[0]
    for nxt in child_ids[1:]:
        acc = asm.node([acc, nxt])
    return acc


def _build_top_down(points: Sequence[int], constraints: Sequence[Constraint],
                    *, allow_threeway: bool, binarize_splits: bool,
                    rng: Optional[random.Random]) -> HierarchicalTree:
    """Shared splitter; raises _Contradiction on a connected set."""
    asm = TreeAssembler()
    # records: (S, cons, child_record_ids); filled breadth-first, assembled in
    # reverse so no recursion depth limit applies
    records: list[tuple[list[int], list[Constraint], list[int]]] = []
    jobs: list[tuple[list[int], list[Constraint], Optional[int]]] = [
        (sorted(points), list(constraints), None)
    ]
    while jobs:
        S, cons, parent_rec = jobs.pop()
        rec_id = len(records)
        records.append((S, cons, []))
        if parent_rec is not None:
            records[parent_rec][2].append(rec_id)
        if len(S) == 1:
            continue
        comps = _split_components(S, cons, allow_threeway)
        if len(comps) == 1:
            raise _Contradiction(ClosedSetWitness(tuple(S), tuple(cons)))
        member: dict[int, int] = {}
        for ci, comp in enumerate(comps):
            for p in comp:
                member[p] = ci
        buckets: list[list[Constraint]] = [[] for _ in comps]
        for c in cons:
            pts = constraint_points(c)
            owner = member[pts[0]]
            if all(member[p] == owner for p in pts[1:]):
                buckets[owner].append(c)
        # push in reverse so children assemble in sorted component order
        for comp, bucket in zip(reversed(comps), reversed(buckets)):
            jobs.append((comp, bucket, rec_id))

    node_of: dict[int, int] = {}
    for rec_id in range(len(records) - 1, -1, -1):
        S, _, child_recs = records[rec_id]
        if len(S) == 1:
            node_of[rec_id] = asm.leaf(S[0])
            continue
        child_ids = [node_of[cr] for cr in child_recs]
        if binarize_splits:
            node_of[rec_id] = _combine_binary(asm, child_ids, rng)
        else:
            node_of[rec_id] = asm.node(child_ids)
    return asm.build(node_of[0])


def build_binary(oset: OrientedSet, rng: Optional[random.Random | int] = None) -> BuildOutcome:
    """Construct a binary tree satisfying every split-pair constraint, or a
    closed-set witness when none exists.

    Multiway splits are binarized with a deterministic left-leaning comb over
    components sorted by smallest member, or uniformly at random when ``rng``
    is given.
    """
    if not oset.only_split_pairs():
        raise ValueError("build_binary accepts split-pair constraints only")
    if isinstance(rng, int):
        rng = random.Random(rng)
    try:
        tree = _build_top_down(range(oset.points.n), oset.constraints,
                               allow_threeway=False, binarize_splits=True, rng=rng)
    except _Contradiction as c:
        return BuildOutcome(witness=c.witness)
    return BuildOutcome(tree=tree)


def build_nonbinary(oset: OrientedSet) -> BuildOutcome:
    """Construct a multiway tree satisfying split-pair and three-way
    constraints, or a closed-set witness (three-way closure included)."""
    try:
        tree = _build_top_down(range(oset.points.n), oset.constraints,
                               allow_threeway=True, binarize_splits=False, rng=None)
    except _Contradiction as c:
        return BuildOutcome(witness=c.witness)
    return BuildOutcome(tree=tree)


def reduce_ktuple(c: KTuple) -> list[Constraint]:
    """The triplet constraints equivalent to a k-tuple shape constraint.

    A tree satisfies the k-tuple iff it satisfies every returned constraint.
    """
    return list(extract_triplets(c.shape).constraints)


def shared_pair_decomposition(tuple_points: Sequence[int],
                              pivot_pair: tuple[int, int]) -> list[Triplet]:
    """The k-2 triplets {(p, q, x)} sharing the pivot pair.

    Any joint orientation of these triplets is realizable by a single tree on
    the tuple, which is what makes them 'independent'.
    """
    p, q = pivot_pair
    pts = list(tuple_points)
    if p not in pts or q not in pts or p == q:
        raise ValueError("pivot pair must be two distinct tuple points")
    return [Triplet(p, q, x) for x in sorted(pts) if x != p and x != q]


# ---------------------------------------------------------------------------
# Agnostic builder
# ---------------------------------------------------------------------------


def stoer_wagner_min_cut(vertices: list[int],
                         adj: dict[int, dict[int, int]]) -> tuple[list[int], int]:
    """Deterministic global minimum cut of a connected weighted graph.

    Returns (one side of the cut as original vertices, cut weight).  Ties are
    broken toward the lexicographically smallest sorted side.
    """
    if len(vertices) < 2:
        raise ValueError("min cut needs at least 2 vertices")
    active = sorted(vertices)
    graph = {u: dict(adj.get(u, {})) for u in active}
    merged = {u: [u] for u in active}
    best_side: Optional[list[int]] = None
    best_weight = None
    while len(active) > 1:
        start = active[0]
        in_a = {start}
        weights = {v: graph[start].get(v, 0) for v in active if v != start}
        order = [start]
        while len(order) < len(active):
            pick = min((v for v in weights if v not in in_a),
                       key=lambda v: (-weights[v], v))
            in_a.add(pick)
            order.append(pick)
            for v, w in graph[pick].items():
                if v not in in_a:
                    weights[v] = weights.get(v, 0) + w
        s, t = order[-2], order[-1]
        phase_weight = weights[t]
        side = sorted(merged[t])
        if (best_weight is None or phase_weight < best_weight
                or (phase_weight == best_weight and side < best_side)):
            best_weight = phase_weight
            best_side = side
        # contract t into s
        merged[s].extend(merged[t])
        for v, w in graph[t].items():
            if v == s:
                continue
            graph[s][v] = graph[s].get(v, 0) + w
            graph[v][s] = graph[s][v]
            del graph[v][t]
        graph[s].pop(t, None)
        del graph[t]
        del merged[t]
        active.remove(t)
    return best_side, best_weight


def build_agnostic(oset: OrientedSet,
                   rng: Optional[random.Random | int] = None) -> tuple[HierarchicalTree, int]:
    """Best-effort binary tree for possibly contradictory split pairs.

    Disconnected sets split along components as in the exact builder; a
    connected set is split along a global minimum edge cut of its constraint
    multigraph and the cut constraints are discarded.  Returns the tree and
    the number of input constraints it violates, recounted against the final
    tree (the cut count is only a heuristic proxy).
    """
    if not oset.only_split_pairs():
        raise ValueError("build_agnostic accepts split-pair constraints only")
    if isinstance(rng, int):
        rng = random.Random(rng)
    asm = TreeAssembler()
    records: list[tuple[list[int], list[int]]] = []  # (S, child record ids)
    jobs: list[tuple[list[int], list[Constraint], Optional[int], bool]] = [
        (list(range(oset.points.n)), list(oset.constraints), None, False)
    ]
    while jobs:
        S, cons, parent_rec, from_cut = jobs.pop()
        rec_id = len(records)
        records.append((S, []))
        if parent_rec is not None:
            records[parent_rec][1].append(rec_id)
        if len(S) == 1:
            continue
        comps = _split_components(S, cons, allow_threeway=False)
        if len(comps) > 1:
            member = {p: ci for ci, comp in enumerate(comps) for p in comp}
            buckets: list[list[Constraint]] = [[] for _ in comps]
            for c in cons:
                if member[c.first] == member[c.cut]:
                    buckets[member[c.first]].append(c)
            for comp, bucket in zip(reversed(comps), reversed(buckets)):
                jobs.append((comp, bucket, rec_id, False))
            continue
        adj: dict[int, dict[int, int]] = {p: {} for p in S}
        for c in cons:
            u, v = c.pair
            adj[u][v] = adj[u].get(v, 0) + 1
            adj[v][u] = adj[v].get(u, 0) + 1
        side, _ = stoer_wagner_min_cut(S, adj)
        side_set = set(side)
        other = sorted(p for p in S if p not in side_set)
        halves = (side, other) if side < other else (other, side)
        buckets2: list[list[Constraint]] = [[], []]
        for c in cons:
            in_side = [p in side_set for p in (c.first, c.second, c.cut)]
            if in_side[0] != in_side[1]:
                continue  # cut edge: constraint dropped as violated
            if in_side[0] == in_side[2]:
                buckets2[0 if in_side[0] == (halves[0] is side) else 1].append(c)
        for half, bucket in zip(reversed(halves), reversed(buckets2)):
            jobs.append((list(half), bucket, rec_id, True))

    node_of: dict[int, int] = {}
    for rec_id in range(len(records) - 1, -1, -1):
        S, child_recs = records[rec_id]
        if len(S) == 1:
            node_of[rec_id] = asm.leaf(S[0])
            continue
        node_of[rec_id] = _combine_binary(asm, [node_of[cr] for cr in child_recs], rng)
    tree = asm.build(node_of[0])
    violations = sum(1 for c in oset.constraints if not satisfies(tree, c))
    return tree, violations


def witness_is_connected(w: ClosedSetWitness) -> bool:
    """Check the witness contract: its constraints (with three-way closure)
    connect its point set."""
    comps = _split_components(sorted(w.points), list(w.constraints), allow_threeway=True)
    return len(comps) == 1


def find_closed_set(oset: OrientedSet) -> Optional[tuple[int, ...]]:
    """The witness point set from the appropriate builder, verified connected;
    None when a tree exists."""
    outcome = build_binary(oset) if oset.only_split_pairs() else build_nonbinary(oset)
    if outcome.ok:
        return None
    w = outcome.witness
    if not witness_is_connected(w):
        raise AssertionError("builder returned a disconnected witness")
    return w.points
