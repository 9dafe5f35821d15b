"""Independent test oracles: enumeration of all tree shapes as nested tuples
with direct triplet labeling, packed into bitmask tables for fast exhaustive
satisfiability checks.  Deliberately shares no code with the builders under
test."""

from __future__ import annotations

import itertools

import numpy as np

from hctree.core import SplitPair, ThreeWay


def triple_index_map(n: int) -> dict[tuple[int, int, int], int]:
    return {t: i for i, t in enumerate(itertools.combinations(range(n), 3))}


def constraint_code(c, tim: dict) -> int:
    """4*T + position-of-cut (3 for a three-way split)."""
    if isinstance(c, SplitPair):
        triple = tuple(sorted((c.first, c.second, c.cut)))
        return 4 * tim[triple] + triple.index(c.cut)
    if isinstance(c, ThreeWay):
        return 4 * tim[c.points] + 3
    raise TypeError(f"no code for {c!r}")


def binary_shapes(leaves):
    """All rooted binary shapes on the leaf list, as nested pairs."""
    n = len(leaves)

    def insert(shape, leaf, pos):
        if pos == 0:
            return (shape, leaf), -1
        if isinstance(shape, int):
            return shape, pos - 1
        l, r = shape
        l2, pos = insert(l, leaf, pos - 1)
        if pos < 0:
            return (l2, r), -1
        r2, pos = insert(r, leaf, pos)
        return (l, r2), pos

    def rec(i, shape):
        if i == n:
            yield shape
            return
        for pos in range(2 * i - 1):
            grown, _ = insert(shape, leaves[i], pos)
            yield from rec(i + 1, grown)

    yield from rec(2, (leaves[0], leaves[1]))


def multiway_shapes(leaves):
    """All rooted shapes with internal degree >= 2, as nested tuples."""

    def set_partitions(items):
        if len(items) == 1:
            yield [[items[0]]]
            return
        head, rest = items[0], items[1:]
        for sub in set_partitions(rest):
            yield [[head]] + [blk[:] for blk in sub]
            for i in range(len(sub)):
                cand = [blk[:] for blk in sub]
                cand[i] = [head] + cand[i]
                yield cand

    def shapes(block):
        if len(block) == 1:
            yield block[0]
            return
        for part in set_partitions(block):
            if len(part) < 2:
                continue
            for combo in itertools.product(*(list(shapes(b)) for b in part)):
                yield tuple(combo)

    yield from shapes(list(leaves))


def shape_code_mask(shape, tim: dict) -> int:
    """Bitmask of the constraint codes a nested shape satisfies; every
    3-subset of its leaves contributes exactly one code."""
    mask = 0

    def rec(s) -> list[int]:
        nonlocal mask
        if isinstance(s, int):
            return [s]
        kids = [rec(ch) for ch in s]
        for i in range(len(kids)):
            for j in range(len(kids)):
                if i == j:
                    continue
                for x, y in itertools.combinations(kids[i], 2):
                    for z in kids[j]:
                        triple = tuple(sorted((x, y, z)))
                        mask |= 1 << (4 * tim[triple] + triple.index(z))
        for a, b, c in itertools.combinations(range(len(kids)), 3):
            for x in kids[a]:
                for y in kids[b]:
                    for z in kids[c]:
                        triple = tuple(sorted((x, y, z)))
                        mask |= 1 << (4 * tim[triple] + 3)
        merged = []
        for k in kids:
            merged.extend(k)
        return merged

    rec(shape)
    return mask


class MaskOracle:
    """Exhaustive satisfiability: a constraint set is satisfiable iff some
    enumerated tree's code mask contains all of its codes."""

    def __init__(self, n: int, multiway: bool):
        self.n = n
        self.tim = triple_index_map(n)
        bits = 4 * len(self.tim)
        self.words = (bits + 63) // 64
        gen = multiway_shapes(range(n)) if multiway else binary_shapes(list(range(n)))
        rows = []
        for shape in gen:
            m = shape_code_mask(shape, self.tim)
            rows.append(np.frombuffer(m.to_bytes(self.words * 8, "little"), dtype=np.uint64))
        self.table = np.vstack(rows)

    def set_mask(self, constraints) -> np.ndarray:
        m = 0
        for c in constraints:
            m |= 1 << constraint_code(c, self.tim)
        return np.frombuffer(m.to_bytes(self.words * 8, "little"), dtype=np.uint64)

    def satisfiable(self, constraints) -> bool:
        w = self.set_mask(constraints)
        return bool(np.any(np.all((self.table & w) == w, axis=1)))

    def min_violations(self, constraints) -> int:
        """Fewest constraints any enumerated tree violates."""
        codes = [constraint_code(c, self.tim) for c in constraints]
        best = len(codes)
        table_ints = [int.from_bytes(row.tobytes(), "little") for row in self.table]
        for row in table_ints:
            miss = sum(1 for code in codes if not (row >> code) & 1)
            best = min(best, miss)
        return best
