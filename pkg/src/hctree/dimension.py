"""Brute-force and constructive machinery for contradictory orientations,
critical sets, and Natarajan-dimension bounds.

Everything here is oracle-grade: searches are exhaustive within explicit
budgets, constructions are re-verified by the exhaustive checks rather than
trusted, and running out of budget raises BudgetError instead of guessing.
"""

from __future__ import annotations

import itertools
import random
from typing import Optional, Sequence

from .core import (
    BudgetError,
    Constraint,
    ConstraintSet,
    KTuple,
    OrientedSet,
    PointSet,
    SplitPair,
    ThreeWay,
    default_points,
)
from .dsu import RollbackUnionFind, UnionFind
from .builder import build_binary, build_nonbinary, reduce_ktuple, shared_pair_decomposition
from .tree_ops import enumerate_binary_trees, enumerate_multiway_trees

DEFAULT_ORIENTATION_BUDGET = 3 ** 15
DEFAULT_SUBSET_BUDGET = 2 ** 20
CRITICAL_SET_CAP = 16
EXHAUSTIVE_CONNECT_CAP = 15


def triplet_orientations(t: Sequence[int], allow_threeway: bool = False) -> list[Constraint]:
    """The orientations of a 3-subset in canonical order."""
    a, b, c = sorted(t)
    out: list[Constraint] = [SplitPair(a, b, c), SplitPair(a, c, b), SplitPair(b, c, a)]
    if allow_threeway:
        out.append(ThreeWay(a, b, c))
    return out


def orientation_satisfiable(points: PointSet, constraints: Sequence[Constraint],
                            nonbinary: bool = False) -> bool:
    """Whether some tree (binary, or multiway when ``nonbinary``) satisfies
    all constraints.  K-tuples are reduced to their triplet constraints."""
    flat: list[Constraint] = []
    for c in constraints:
        if isinstance(c, KTuple):
            flat.extend(reduce_ktuple(c))
        else:
            flat.append(c)
    has_threeway = any(isinstance(c, ThreeWay) for c in flat)
    if has_threeway and not nonbinary:
        return False  # a binary tree never separates three points at once
    oset = OrientedSet(points, tuple(flat))
    if nonbinary:
        return build_nonbinary(oset).ok
    return build_binary(oset).ok


def exists_contradictory_orientation(cset: ConstraintSet, allow_threeway: bool = False,
                                     budget: int = DEFAULT_ORIENTATION_BUDGET
                                     ) -> Optional[OrientedSet]:
    """Exhaustive search for an orientation no tree satisfies.

    Tries all 3^m (4^m with three-way labels) orientations in canonical order
    and returns the first contradictory one, or None.
    """
    if cset.k not in (None, 3):
        raise ValueError("orientation search expects triplet sets")
    m = len(cset.tuples)
    per = 4 if allow_threeway else 3
    if per ** m > budget:
        raise BudgetError("orientation-budget",
                          f"{per}^{m} orientations exceed budget {budget}")
    choices = [triplet_orientations(t, allow_threeway) for t in cset.tuples]
    for combo in itertools.product(*choices):
        if not orientation_satisfiable(cset.points, combo, nonbinary=allow_threeway):
            return OrientedSet(cset.points, tuple(combo))
    return None


def find_critical_set(cset: ConstraintSet, cap: int = CRITICAL_SET_CAP
                      ) -> Optional[tuple[int, ...]]:
    """Smallest point subset inducing at least |S|-1 tuples; ties go to the
    lexicographically first subset.  Exhaustive, n above ``cap`` is refused.

    Sizes below 3 are skipped: a tuple needs 3 points, so smaller subsets
    satisfy the count only vacuously and can never be connected by edges.
    """
    n = cset.points.n
    if n > cap:
        raise BudgetError("critical-set-cap", f"n={n} exceeds exhaustive cap {cap}")
    tuples = [frozenset(t) for t in cset.tuples]
    for size in range(3, n + 1):
        for S in itertools.combinations(range(n), size):
            sset = set(S)
            induced = sum(1 for t in tuples if t <= sset)
            if induced >= size - 1:
                return S
    return None


def _induced_tuples(cset: ConstraintSet, S: Sequence[int]) -> list[tuple[int, ...]]:
    sset = set(S)
    return [t for t in cset.tuples if set(t) <= sset]


def _connect_exhaustive(points: PointSet, S: Sequence[int],
                        tuples: list[tuple[int, ...]]) -> Optional[list[Constraint]]:
    """Depth-first search over orientations for one whose edges connect S,
    pruning branches that cannot reach a spanning forest."""
    idx = {p: i for i, p in enumerate(S)}
    uf = RollbackUnionFind(len(S))
    chosen: list[Constraint] = []

    def dfs(i: int) -> bool:
        if uf.components == 1:
            return True
        if i == len(tuples):
            return False
        if uf.components - 1 > len(tuples) - i:
            return False  # not enough edges left to connect
        for c in triplet_orientations(tuples[i]):
            u, v = c.pair
            mark = uf.snapshot()
            uf.union(idx[u], idx[v])
            chosen.append(c)
            if dfs(i + 1):
                return True
            chosen.pop()
            uf.rollback(mark)
        return False

    if dfs(0):
        # orient any tuples left unprocessed (search can stop early) canonically
        rest = tuples[len(chosen):]
        return chosen + [triplet_orientations(t)[0] for t in rest]
    return None


def _connect_local_search(points: PointSet, S: Sequence[int],
                          tuples: list[tuple[int, ...]],
                          step_cap: int = 20000, restarts: int = 20
                          ) -> Optional[list[Constraint]]:
    """Fallback beyond the exhaustive cap: greedy maximum-forest start, then
    reorientation moves that never increase the component count."""
    idx = {p: i for i, p in enumerate(S)}
    rng = random.Random(0x5eed)

    def components_of(orient: list[Constraint]) -> int:
        uf = UnionFind(len(S))
        for c in orient:
            uf.union(idx[c.pair[0]], idx[c.pair[1]])
        return uf.components

    steps = 0
    for attempt in range(restarts):
        order = list(range(len(tuples)))
        if attempt:
            rng.shuffle(order)
        orient: list[Optional[Constraint]] = [None] * len(tuples)
        uf = UnionFind(len(S))
        for i in order:
            placed = False
            for c in triplet_orientations(tuples[i]):
                u, v = c.pair
                if uf.find(idx[u]) != uf.find(idx[v]):
                    uf.union(idx[u], idx[v])
                    orient[i] = c
                    placed = True
                    break
            if not placed:
                orient[i] = triplet_orientations(tuples[i])[0]
        current = [c for c in orient]
        comp = components_of(current)
        while comp > 1 and steps < step_cap:
            steps += 1
            i = rng.randrange(len(tuples))
            alternatives = [c for c in triplet_orientations(tuples[i]) if c != current[i]]
            c = rng.choice(alternatives)
            candidate = list(current)
            candidate[i] = c
            new_comp = components_of(candidate)
            if new_comp <= comp:
                current = candidate
                comp = new_comp
        if comp == 1:
            return current
    raise BudgetError("reorientation-steps",
                      f"local search exhausted {step_cap} steps x {restarts} restarts")


def connect_critical_set(cset: ConstraintSet, S: Sequence[int]) -> OrientedSet:
    """An orientation of the tuples induced by a critical set whose generated
    edges connect it.  Criticality is re-checked before searching."""
    S = tuple(sorted(S))
    tuples = _induced_tuples(cset, S)
    if len(tuples) < len(S) - 1:
        raise ValueError("S does not induce enough tuples to be critical")
    smallest = find_critical_set(cset)
    if smallest is None or len(smallest) != len(S):
        raise ValueError("S is not minimal among qualifying subsets")
    if len(tuples) <= EXHAUSTIVE_CONNECT_CAP:
        chosen = _connect_exhaustive(cset.points, S, tuples)
        if chosen is None:
            raise AssertionError("critical set admits no connecting orientation")
    else:
        chosen = _connect_local_search(cset.points, S, tuples)
    return OrientedSet(cset.points, tuple(chosen))


# ---------------------------------------------------------------------------
# Natarajan shattering
# ---------------------------------------------------------------------------


LabelPair = tuple[Constraint, Constraint]


def is_n_shattered(cset: ConstraintSet, pairs: Sequence[LabelPair],
                   nonbinary: bool = False,
                   budget: int = DEFAULT_SUBSET_BUDGET) -> bool:
    """Whether every on/off combination of the per-tuple label pairs is
    satisfiable.  Checks all 2^m subsets through the builder."""
    m = len(cset.tuples)
    if len(pairs) != m:
        raise ValueError("one label pair per tuple required")
    for t, (f1, f2) in zip(cset.tuples, pairs):
        if f1 == f2:
            raise ValueError("label pair must be two distinct constraints")
        for f in (f1, f2):
            pts = f.points if isinstance(f, KTuple) else tuple(sorted(f.points))
            if tuple(pts) != tuple(t):
                raise ValueError(f"label {f} is not an orientation of tuple {t}")
    if 2 ** m > budget:
        raise BudgetError("subset-budget", f"2^{m} subsets exceed budget {budget}")
    for mask in range(2 ** m):
        combo = [pairs[i][0] if (mask >> i) & 1 else pairs[i][1] for i in range(m)]
        if not orientation_satisfiable(cset.points, combo, nonbinary=nonbinary):
            return False
    return True


def tuple_orientations(t: Sequence[int], k: int, nonbinary: bool = False) -> list[Constraint]:
    """All orientations of a k-subset: triplet labels for k=3, tree shapes
    (as k-tuple constraints) for larger k."""
    if k == 3:
        return triplet_orientations(t, allow_threeway=nonbinary)
    trees = enumerate_multiway_trees(list(t)) if nonbinary else enumerate_binary_trees(list(t))
    return [KTuple(tuple(sorted(t)), shape) for shape in trees]


def natarajan_dimension(n: int, k: int = 3, nonbinary: bool = False,
                        cap: int = 6,
                        subset_budget: int = DEFAULT_SUBSET_BUDGET) -> int:
    """Maximum size of a shatterable tuple set, by exhaustive search.

    Shattering is monotone under taking subsets, so the search grows m until
    no m-set of tuples admits any label-pair assignment that shatters.
    """
    if n > cap:
        raise BudgetError("natarajan-cap", f"n={n} exceeds exhaustive cap {cap}")
    if k > n:
        raise ValueError("tuple size exceeds point count")
    points = default_points(n)
    all_tuples = list(itertools.combinations(range(n), k))
    m = 0
    while m < len(all_tuples):
        m += 1
        found = False
        for tset in itertools.combinations(all_tuples, m):
            cset = ConstraintSet(points, tset)
            per_tuple_pairs = [
                list(itertools.combinations(tuple_orientations(t, k, nonbinary), 2))
                for t in tset
            ]
            for assignment in itertools.product(*per_tuple_pairs):
                if is_n_shattered(cset, assignment, nonbinary=nonbinary,
                                  budget=subset_budget):
                    found = True
                    break
            if found:
                break
        if not found:
            return m - 1
    return len(all_tuples)


def _graft_sibling(shape_points: Sequence[int], base_ladder: Sequence[int],
                   at_point: int, new_point: int):
    """Ladder on ``base_ladder`` with ``new_point`` attached as the sibling of
    ``at_point``; returned as a nested spec."""
    def nest(pts):
        if len(pts) == 1:
            leaf = pts[0]
            return (leaf, new_point) if leaf == at_point else leaf
        head = pts[0]
        first = (head, new_point) if head == at_point else head
        return (first, nest(pts[1:]))
    return nest(list(base_ladder))


def construct_shattered_set(n: int, k: int = 3) -> tuple[ConstraintSet, list[LabelPair]]:
    """A shatterable set of n-k+1 tuples: a fixed (k-1)-point block plus one
    floating point per tuple, labeled by where the floating point attaches.

    The output is meant to be re-verified with :func:`is_n_shattered`; it is
    never assumed correct.
    """
    if n < k:
        raise ValueError("need at least k points")
    if k < 3:
        raise ValueError("tuples have at least 3 points")
    from .core import tree_from_nested

    anchor = list(range(k - 1))
    floating = list(range(k - 1, n))
    tuples = [tuple(anchor + [b]) for b in floating]
    pairs: list[LabelPair] = []
    for b in floating:
        if k == 3:
            f1: Constraint = SplitPair(anchor[0], b, anchor[1])
            f2: Constraint = SplitPair(anchor[1], b, anchor[0])
        else:
            s1 = tree_from_nested(_graft_sibling(anchor, anchor, anchor[0], b))
            s2 = tree_from_nested(_graft_sibling(anchor, anchor, anchor[1], b))
            f1 = KTuple(tuple(sorted(anchor + [b])), s1)
            f2 = KTuple(tuple(sorted(anchor + [b])), s2)
        pairs.append((f1, f2))
    points = default_points(n)
    return ConstraintSet(points, tuple(tuples)), pairs


def construct_tuple_chain(n: int, k: int) -> ConstraintSet:
    """The overlapping chain t_1..t_m with |t_i ∩ t_{i+1}| = 2 and
    m = ceil((n-1)/(k-2)) - 1; every orientation of it is satisfiable."""
    if k < 3:
        raise ValueError("tuples have at least 3 points")
    m = -(-(n - 1) // (k - 2)) - 1
    if m < 1:
        raise ValueError("chain needs at least one tuple; increase n")
    tuples = []
    for i in range(m):
        start = i * (k - 2)
        tuples.append(tuple(range(start, start + k)))
    assert tuples[-1][-1] <= n - 1
    return ConstraintSet(default_points(n), tuple(tuples))


def tuple_threshold_check(cset: ConstraintSet,
                          budget: int = DEFAULT_ORIENTATION_BUDGET
                          ) -> Optional[OrientedSet]:
    """Search for a contradictory orientation of a k-tuple set through its
    shared-pair triplet decomposition (pivot: the two smallest tuple points).

    A contradictory orientation of the decomposed triplets certifies one of
    the tuple set, because each tuple realizes any orientation of its own
    decomposition triplets.
    """
    triplets: list[tuple[int, ...]] = []
    for t in cset.tuples:
        pivot = (t[0], t[1])
        triplets.extend(tr.points for tr in shared_pair_decomposition(t, pivot))
    if 3 ** len(triplets) > budget:
        raise BudgetError("orientation-budget",
                          f"3^{len(triplets)} orientations exceed budget {budget}")
    choices = [triplet_orientations(t) for t in triplets]
    for combo in itertools.product(*choices):
        if not orientation_satisfiable(cset.points, combo, nonbinary=False):
            return OrientedSet(cset.points, tuple(combo))
    return None
