"""Domain types and text formats for hierarchical-tree constraint problems.

A problem instance lives on a set of named points.  Points are interned to
dense integer indices at parse time and every algorithm in this package works
on indices; names only matter at the I/O boundary.

Constraint kinds:

* ``SplitPair(a, b, cut)`` -- written ``a b | c``: the pair stays together
  strictly below the node that cuts ``c`` off.
* ``ThreeWay(a, b, c)`` -- written ``a | b | c``: all three points separate
  simultaneously at one (multiway) node.
* ``KTuple(points, shape)`` -- a labeled tree shape on k points, written as a
  ``tree: <newick>;`` line.

All types are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Union


class ParseError(ValueError):
    """Malformed constraint or tree text.  Carries a 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class BudgetError(RuntimeError):
    """A configured search cap was exceeded.  ``cap`` names the violated cap."""

    def __init__(self, cap: str, message: str = ""):
        self.cap = cap
        super().__init__(message or f"budget exceeded: {cap}")


# Characters that would break the line grammar or the Newick grammar if they
# appeared inside a point name.
_FORBIDDEN_CHARS = set("|,();:#")


def _valid_label(label: str) -> bool:
    if not label:
        return False
    return not any(ch in _FORBIDDEN_CHARS or ch.isspace() for ch in label)


@dataclass(frozen=True)
class PointSet:
    """Named points; index i refers to ``labels[i]``."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 1:
            raise ValueError("point set needs at least one point")
        seen = set()
        for lab in self.labels:
            if not _valid_label(lab):
                raise ValueError(f"invalid point name {lab!r}")
            if lab in seen:
                raise ValueError(f"duplicate point name {lab!r}")
            seen.add(lab)

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._index_map[label]
        except KeyError:
            raise KeyError(f"unknown point {label!r}") from None

    @property
    def _index_map(self) -> dict[str, int]:
        cached = self.__dict__.get("_index_map_cache")
        if cached is None:
            cached = {lab: i for i, lab in enumerate(self.labels)}
            self.__dict__["_index_map_cache"] = cached
        return cached


def default_points(n: int, prefix: str = "x") -> PointSet:
    """Synthetic point names for index-only callers."""
    return PointSet(tuple(f"{prefix}{i}" for i in range(n)))


@dataclass(frozen=True, order=True)
class Triplet:
    """An unlabeled 3-subset, stored in sorted order."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        if len({self.a, self.b, self.c}) != 3:
            raise ValueError("triplet points must be pairwise distinct")
        s = sorted((self.a, self.b, self.c))
        object.__setattr__(self, "a", s[0])
        object.__setattr__(self, "b", s[1])
        object.__setattr__(self, "c", s[2])

    @property
    def points(self) -> tuple[int, int, int]:
        return (self.a, self.b, self.c)


@dataclass(frozen=True, order=True)
class SplitPair:
    """``[first, second | cut]``: cut separates strictly above the pair."""

    first: int
    second: int
    cut: int

    def __post_init__(self):
        if len({self.first, self.second, self.cut}) != 3:
            raise ValueError("split-pair points must be pairwise distinct")
        lo, hi = sorted((self.first, self.second))
        object.__setattr__(self, "first", lo)
        object.__setattr__(self, "second", hi)

    @property
    def points(self) -> tuple[int, ...]:
        return tuple(sorted((self.first, self.second, self.cut)))

    @property
    def pair(self) -> tuple[int, int]:
        return (self.first, self.second)


@dataclass(frozen=True, order=True)
class ThreeWay:
    """``[a | b | c]``: the three points separate at a single node."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        if len({self.a, self.b, self.c}) != 3:
            raise ValueError("three-way points must be pairwise distinct")
        s = sorted((self.a, self.b, self.c))
        object.__setattr__(self, "a", s[0])
        object.__setattr__(self, "b", s[1])
        object.__setattr__(self, "c", s[2])

    @property
    def points(self) -> tuple[int, ...]:
        return (self.a, self.b, self.c)


@dataclass(frozen=True)
class KTuple:
    """A tree shape prescribed on ``points`` (its leaves), k >= 3."""

    points: tuple[int, ...]
    shape: "HierarchicalTree"

    def __post_init__(self):
        pts = tuple(sorted(self.points))
        if len(set(pts)) != len(pts):
            raise ValueError("k-tuple points must be distinct")
        if len(pts) < 3:
            raise ValueError("k-tuple needs at least 3 points")
        if tuple(sorted(self.shape.leaf_points())) != pts:
            raise ValueError("shape leaves must equal the k-tuple points")
        object.__setattr__(self, "points", pts)

    @property
    def _key(self):
        cached = self.__dict__.get("_key_cache")
        if cached is None:
            cached = (self.points, self.shape.topology_key())
            self.__dict__["_key_cache"] = cached
        return cached

    def __eq__(self, other):
        if not isinstance(other, KTuple):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)


Constraint = Union[SplitPair, ThreeWay, KTuple]


@dataclass(frozen=True)
class ConstraintSet:
    """Unlabeled tuples over a point set; k is uniform across the set."""

    points: PointSet
    tuples: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        norm = []
        k = None
        for t in self.tuples:
            tt = tuple(sorted(t))
            if len(set(tt)) != len(tt):
                raise ValueError(f"repeated point in tuple {t}")
            if k is None:
                k = len(tt)
            elif len(tt) != k:
                raise ValueError("mixed tuple sizes in one constraint set")
            if tt and (tt[0] < 0 or tt[-1] >= self.points.n):
                raise ValueError(f"point index out of range in tuple {t}")
            norm.append(tt)
        object.__setattr__(self, "tuples", tuple(norm))

    @property
    def k(self) -> Optional[int]:
        return len(self.tuples[0]) if self.tuples else None


@dataclass(frozen=True)
class OrientedSet:
    """Fully labeled constraints over a point set."""

    points: PointSet
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        n = self.points.n
        for c in self.constraints:
            pts = constraint_points(c)
            if min(pts, default=0) < 0 or max(pts, default=-1) >= n:
                raise ValueError(f"constraint {c} references unknown point")
        object.__setattr__(self, "constraints", tuple(self.constraints))

    def only_split_pairs(self) -> bool:
        return all(isinstance(c, SplitPair) for c in self.constraints)


def constraint_points(c: Constraint) -> tuple[int, ...]:
    if isinstance(c, (SplitPair, ThreeWay, KTuple)):
        return c.points
    raise TypeError(f"not a constraint: {c!r}")


# ---------------------------------------------------------------------------
# Hierarchical trees
# ---------------------------------------------------------------------------


class HierarchicalTree:
    """Rooted tree whose leaves carry distinct point indices.

    Internal nodes have >= 2 children; ``binary`` reports whether every
    internal node has exactly 2.  Instances are immutable; build them through
    :class:`TreeAssembler` or :func:`tree_from_nested`.
    """

    __slots__ = ("children", "parent", "root", "node_point", "depth", "binary",
                 "_leaf_node", "_topo_key")

    def __init__(self, children, parent, root, node_point):
        self.children: tuple[tuple[int, ...], ...] = tuple(tuple(c) for c in children)
        self.parent: tuple[Optional[int], ...] = tuple(parent)
        self.root: int = root
        self.node_point: tuple[Optional[int], ...] = tuple(node_point)
        depth = [0] * len(self.parent)
        # parents precede children in assembler order is not guaranteed; walk down
        stack = [(root, 0)]
        while stack:
            v, d = stack.pop()
            depth[v] = d
            for ch in self.children[v]:
                stack.append((ch, d + 1))
        self.depth: tuple[int, ...] = tuple(depth)
        self.binary: bool = all(len(c) == 2 for c in self.children if c)
        self._leaf_node: dict[int, int] = {
            p: v for v, p in enumerate(self.node_point) if p is not None
        }
        self._topo_key = None

    # -- basic structure --------------------------------------------------

    def n_nodes(self) -> int:
        return len(self.parent)

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    def leaf_points(self) -> tuple[int, ...]:
        return tuple(sorted(self._leaf_node))

    @property
    def n_leaves(self) -> int:
        return len(self._leaf_node)

    def leaf_node(self, point: int) -> int:
        try:
            return self._leaf_node[point]
        except KeyError:
            raise KeyError(f"point {point} is not a leaf of this tree") from None

    def has_point(self, point: int) -> bool:
        return point in self._leaf_node

    def subtree_points(self, v: int) -> list[int]:
        out = []
        stack = [v]
        while stack:
            u = stack.pop()
            p = self.node_point[u]
            if p is not None:
                out.append(p)
            stack.extend(self.children[u])
        return out

    def topology_key(self):
        """Canonical hashable key: equal iff the leaf-labeled shapes are equal."""
        if self._topo_key is None:
            keys: dict[int, tuple] = {}
            stack: list[tuple[int, bool]] = [(self.root, False)]
            while stack:
                v, expanded = stack.pop()
                p = self.node_point[v]
                if p is not None:
                    keys[v] = (0, p)
                elif expanded:
                    keys[v] = (1, tuple(sorted(keys[c] for c in self.children[v])))
                else:
                    stack.append((v, True))
                    stack.extend((c, False) for c in self.children[v])
            self._topo_key = keys[self.root]
        return self._topo_key

    def __repr__(self):
        return f"HierarchicalTree(leaves={self.n_leaves}, binary={self.binary})"


class TreeAssembler:
    """Mutable builder; ``build`` freezes the arena into a HierarchicalTree."""

    def __init__(self):
        self._children: list[list[int]] = []
        self._point: list[Optional[int]] = []

    def leaf(self, point: int) -> int:
        self._children.append([])
        self._point.append(point)
        return len(self._point) - 1

    def node(self, children: Iterable[int]) -> int:
        ch = list(children)
        if len(ch) < 2:
            raise ValueError("internal node needs at least 2 children")
        self._children.append(ch)
        self._point.append(None)
        return len(self._point) - 1

    def build(self, root: int) -> HierarchicalTree:
        parent: list[Optional[int]] = [None] * len(self._point)
        for v, ch in enumerate(self._children):
            for c in ch:
                parent[c] = v
        return HierarchicalTree(self._children, parent, root, self._point)


def tree_from_nested(spec) -> HierarchicalTree:
    """Build a tree from nested tuples/lists of point indices.

    ``tree_from_nested(((0, 1), 2))`` is the 3-leaf tree that keeps 0 and 1
    together below the root.  Iterative, so nesting depth is unbounded.
    """
    if isinstance(spec, int):
        raise ValueError("a tree needs at least one internal node or one leaf set")
    asm = TreeAssembler()
    done: dict[int, int] = {}  # id(nested spec) -> arena node id
    stack: list[tuple[object, bool]] = [(spec, False)]
    while stack:
        node, expanded = stack.pop()
        if isinstance(node, int):
            continue
        if expanded:
            done[id(node)] = asm.node(
                asm.leaf(ch) if isinstance(ch, int) else done[id(ch)]
                for ch in node
            )
        else:
            stack.append((node, True))
            for ch in node:
                stack.append((ch, False))
    return asm.build(done[id(spec)])


def nested_from_tree(t: HierarchicalTree):
    def go(v):
        p = t.node_point[v]
        if p is not None:
            return p
        return tuple(go(c) for c in t.children[v])
    return go(t.root)


def validate_tree(t: HierarchicalTree) -> Optional[str]:
    """Return None when all invariants hold, else the first violation's name.

    Violations: ``multiple-root``, ``acyclic``, ``leaf-bijection``,
    ``unary-node``, ``arity-flag``.
    """
    n = t.n_nodes()
    roots = [v for v in range(n) if t.parent[v] is None]
    if len(roots) != 1 or roots[0] != t.root:
        return "multiple-root"
    seen = [False] * n
    stack = [t.root]
    count = 0
    while stack:
        v = stack.pop()
        if seen[v]:
            return "acyclic"
        seen[v] = True
        count += 1
        stack.extend(t.children[v])
    if count != n:
        return "acyclic"
    points = [p for p in t.node_point if p is not None]
    if len(points) != len(set(points)):
        return "leaf-bijection"
    for v in range(n):
        if t.node_point[v] is not None and t.children[v]:
            return "leaf-bijection"
        if t.node_point[v] is None and len(t.children[v]) == 1:
            return "unary-node"
        if t.node_point[v] is None and not t.children[v]:
            return "leaf-bijection"
    if t.binary != all(len(c) == 2 for c in t.children if c):
        return "arity-flag"
    return None


# ---------------------------------------------------------------------------
# Newick
# ---------------------------------------------------------------------------


def parse_newick(text: str, points: Optional[PointSet] = None,
                 line: Optional[int] = None) -> tuple[HierarchicalTree, PointSet]:
    """Parse a Newick string with named leaves and unnamed internal nodes.

    When ``points`` is given, leaf names must resolve against it; otherwise a
    new PointSet is created with names in order of first appearance.
    The parser keeps an explicit stack, so input depth is unbounded.
    """
    s = text.strip()
    if not s.endswith(";"):
        raise ParseError("newick must end with ';'", line)
    s = s[:-1].strip()
    names: list[str] = []
    name_to_idx: dict[str, int] = {} if points is None else dict(points._index_map)

    def intern(name: str) -> int:
        if points is not None:
            if name not in name_to_idx:
                raise ParseError(f"unknown point {name!r} in newick", line)
            return name_to_idx[name]
        if name in name_to_idx:
            raise ParseError(f"duplicate leaf {name!r} in newick", line)
        name_to_idx[name] = len(names)
        names.append(name)
        return name_to_idx[name]

    asm = TreeAssembler()
    stack: list[list[int]] = []  # open groups of finished child node ids
    finished: Optional[int] = None
    pos = 0
    expecting_item = True
    while pos < len(s):
        ch = s[pos]
        if ch == "(":
            if not expecting_item:
                raise ParseError("misplaced '(' in newick", line)
            stack.append([])
            pos += 1
        elif ch == ",":
            if expecting_item or not stack:
                raise ParseError("misplaced ',' in newick", line)
            stack[-1].append(finished)
            finished = None
            expecting_item = True
            pos += 1
        elif ch == ")":
            if expecting_item or not stack:
                raise ParseError("unbalanced parentheses in newick", line)
            group = stack.pop()
            group.append(finished)
            if len(group) == 1:
                raise ParseError("unary node in newick", line)
            finished = asm.node(group)
            expecting_item = False
            pos += 1
        else:
            if not expecting_item:
                raise ParseError("missing ',' between newick items", line)
            start = pos
            while pos < len(s) and s[pos] not in "(),":
                pos += 1
            name = s[start:pos].strip()
            if not _valid_label(name):
                raise ParseError(f"invalid leaf name {name!r} in newick", line)
            finished = asm.leaf(intern(name))
            expecting_item = False
    if stack or expecting_item or finished is None:
        raise ParseError("unbalanced parentheses in newick", line)
    tree = asm.build(finished)
    pts = points if points is not None else PointSet(tuple(names))
    violation = validate_tree(tree)
    if violation is not None:
        raise ParseError(f"invalid tree: {violation}", line)
    return tree, pts


def write_newick(t: HierarchicalTree, points: PointSet) -> str:
    """Canonical Newick: children ordered by their smallest leaf name.
    Iterative post-order, so tree depth is unbounded."""
    # results[v] = (smallest leaf name in subtree, rendered text)
    results: dict[int, tuple[str, str]] = {}
    stack: list[tuple[int, bool]] = [(t.root, False)]
    while stack:
        v, expanded = stack.pop()
        p = t.node_point[v]
        if p is not None:
            name = points.labels[p]
            results[v] = (name, name)
            continue
        if expanded:
            parts = sorted(results[c] for c in t.children[v])
            results[v] = (parts[0][0], "(" + ",".join(txt for _, txt in parts) + ")")
        else:
            stack.append((v, True))
            for c in t.children[v]:
                stack.append((c, False))
    return results[t.root][1] + ";"


# ---------------------------------------------------------------------------
# Constraint files
# ---------------------------------------------------------------------------


def _split_comment(raw: str) -> str:
    i = raw.find("#")
    return raw if i < 0 else raw[:i]


def parse_constraints(text: str) -> Union[OrientedSet, ConstraintSet]:
    """Parse the one-constraint-per-line format.

    Labeled lines (``a b | c``, ``a | b | c``, ``tree: ...;``) produce an
    OrientedSet; unlabeled lines (``a b c``) a ConstraintSet.  Mixing the two
    kinds is an error, as is mixing tuple sizes in an unlabeled file.
    Points are interned in first-appearance order.
    """
    names: list[str] = []
    index: dict[str, int] = {}

    def intern(name: str, line_no: int) -> int:
        if not _valid_label(name):
            raise ParseError(f"invalid point name {name!r}", line_no)
        if name not in index:
            index[name] = len(names)
            names.append(name)
        return index[name]

    labeled: list[tuple[int, object]] = []   # (line, parsed payload)
    unlabeled: list[tuple[int, tuple[str, ...]]] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = _split_comment(raw).strip()
        if not stripped:
            continue
        if stripped.startswith("tree:"):
            payload = stripped[len("tree:"):].strip()
            labeled.append((line_no, ("ktuple", payload)))
            # names interned after the pass, in appearance order of the line
            continue
        if "|" in stripped:
            parts = [p.strip() for p in stripped.split("|")]
            if len(parts) == 2:
                pair = parts[0].split()
                if len(pair) != 2 or not parts[1] or len(parts[1].split()) != 1:
                    raise ParseError(f"malformed split-pair line {stripped!r}", line_no)
                labeled.append((line_no, ("split", pair[0], pair[1], parts[1])))
            elif len(parts) == 3:
                if any(len(p.split()) != 1 or not p for p in parts):
                    raise ParseError(f"malformed three-way line {stripped!r}", line_no)
                labeled.append((line_no, ("threeway", *parts)))
            else:
                raise ParseError(f"malformed constraint line {stripped!r}", line_no)
        else:
            toks = tuple(stripped.split())
            if len(toks) < 3:
                raise ParseError(f"tuple needs at least 3 points, got {stripped!r}", line_no)
            unlabeled.append((line_no, toks))

    if labeled and unlabeled:
        bad_line = unlabeled[0][0] if labeled[0][0] < unlabeled[0][0] else labeled[0][0]
        raise ParseError("labeled and unlabeled lines cannot be mixed", bad_line)
    if not labeled and not unlabeled:
        raise ParseError("no constraints in input", 1)

    if unlabeled:
        tuples = []
        k = None
        for line_no, toks in unlabeled:
            if len(set(toks)) != len(toks):
                raise ParseError(f"repeated point in tuple {' '.join(toks)!r}", line_no)
            if k is None:
                k = len(toks)
            elif len(toks) != k:
                raise ParseError(f"tuple size {len(toks)} differs from earlier size {k}", line_no)
            tuples.append(tuple(intern(tk, line_no) for tk in toks))
        points = PointSet(tuple(names))
        return ConstraintSet(points, tuple(tuples))

    # Two-pass for labeled constraints: intern names first (k-tuple newicks
    # contribute names in their leaf order), then build constraint objects.
    staged = []
    for line_no, payload in labeled:
        kind = payload[0]
        if kind == "split":
            _, a, b, c = payload
            if len({a, b, c}) != 3:
                raise ParseError(f"repeated point in constraint {a} {b} | {c}", line_no)
            staged.append((line_no, "split", intern(a, line_no), intern(b, line_no),
                           intern(c, line_no)))
        elif kind == "threeway":
            _, a, b, c = payload
            if len({a, b, c}) != 3:
                raise ParseError(f"repeated point in constraint {a} | {b} | {c}", line_no)
            staged.append((line_no, "threeway", intern(a, line_no), intern(b, line_no),
                           intern(c, line_no)))
        else:
            _, nwk = payload
            tree, local_pts = parse_newick(nwk, line=line_no)
            idxs = tuple(intern(lab, line_no) for lab in local_pts.labels)
            staged.append((line_no, "ktuple", tree, local_pts, idxs))

    points = PointSet(tuple(names))
    constraints: list[Constraint] = []
    for item in staged:
        line_no, kind = item[0], item[1]
        if kind == "split":
            constraints.append(SplitPair(item[2], item[3], item[4]))
        elif kind == "threeway":
            constraints.append(ThreeWay(item[2], item[3], item[4]))
        else:
            tree, local_pts, idxs = item[2], item[3], item[4]
            remapped = _remap_tree_points(tree, {i: idxs[i] for i in range(len(idxs))})
            if remapped.n_leaves < 3:
                raise ParseError("k-tuple needs at least 3 points", line_no)
            constraints.append(KTuple(remapped.leaf_points(), remapped))
    return OrientedSet(points, tuple(constraints))


def _remap_tree_points(t: HierarchicalTree, mapping: dict[int, int]) -> HierarchicalTree:
    asm = TreeAssembler()

    def go(v) -> int:
        p = t.node_point[v]
        if p is not None:
            return asm.leaf(mapping[p])
        return asm.node(go(c) for c in t.children[v])

    return asm.build(go(t.root))


def serialize_constraint(c: Constraint, points: PointSet) -> str:
    """Canonical single-line form, names sorted within the tuple."""
    if isinstance(c, SplitPair):
        x, y = sorted((points.labels[c.first], points.labels[c.second]))
        return f"{x} {y} | {points.labels[c.cut]}"
    if isinstance(c, ThreeWay):
        x, y, z = sorted(points.labels[p] for p in c.points)
        return f"{x} | {y} | {z}"
    if isinstance(c, KTuple):
        return "tree: " + write_newick(c.shape, points)
    raise TypeError(f"not a constraint: {c!r}")


def serialize_constraints(s: Union[OrientedSet, ConstraintSet]) -> str:
    """Canonical text form; line order follows the set, names sorted in-line."""
    lines = []
    if isinstance(s, OrientedSet):
        for c in s.constraints:
            lines.append(serialize_constraint(c, s.points))
    elif isinstance(s, ConstraintSet):
        for t in s.tuples:
            lines.append(" ".join(sorted(s.points.labels[p] for p in t)))
    else:
        raise TypeError(f"not a constraint set: {s!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def structurally_equal(a: Union[OrientedSet, ConstraintSet],
                       b: Union[OrientedSet, ConstraintSet]) -> bool:
    """Equality up to point-index renumbering (names decide identity)."""
    if type(a) is not type(b):
        return False
    if set(a.points.labels) != set(b.points.labels):
        return False
    return serialize_constraints(_canonical(a)) == serialize_constraints(_canonical(b))


def _canonical(s: Union[OrientedSet, ConstraintSet]):
    """Renumber points by sorted name and sort lines, for comparison only."""
    order = sorted(range(s.points.n), key=lambda i: s.points.labels[i])
    remap = {old: new for new, old in enumerate(order)}
    points = PointSet(tuple(s.points.labels[i] for i in order))
    if isinstance(s, ConstraintSet):
        tuples = sorted(tuple(sorted(remap[p] for p in t)) for t in s.tuples)
        return ConstraintSet(points, tuple(tuples))
    constraints: list[Constraint] = []
    for c in s.constraints:
        if isinstance(c, SplitPair):
            constraints.append(SplitPair(remap[c.first], remap[c.second], remap[c.cut]))
        elif isinstance(c, ThreeWay):
            constraints.append(ThreeWay(*(remap[p] for p in c.points)))
        else:
            shape = _remap_tree_points(c.shape, remap)
            constraints.append(KTuple(shape.leaf_points(), shape))
    keyed = sorted(constraints, key=lambda c: serialize_constraint(c, points))
    return OrientedSet(points, tuple(keyed))
