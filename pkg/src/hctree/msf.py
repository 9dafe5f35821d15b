"""Coupled-edge construction driven by a decremental minimum spanning forest.

Each split-pair ``[b,c|a]`` contributes a weight-1 blue edge {b,c} and a
weight-2 red edge {a,b}, coupled to each other.  Phase 1 repeatedly strips
red edges off the top of the MSF, marking their coupled blue edges, until the
heaviest MSF edge is blue; the marked blues are then deleted as one batch.
Rejection happens when a batch comes back empty while blue edges survive.
Phase 2 replays the batches backwards through a union-find, joining component
roots under fresh nodes, then combs any remaining trees together.

The MSF backend is a pluggable contract; the required reference backend
recomputes the forest by a stable Kruskal pass after every deletion.
"""

from __future__ import annotations

import abc
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import KTuple, OrientedSet, SplitPair, TreeAssembler
from .dsu import UnionFind
from .builder import BuildOutcome, build_binary, reduce_ktuple


@dataclass(frozen=True)
class CoupledGraph:
    """Weighted multigraph of coupled blue/red edges.

    Edge ids 0..m-1 are the blue (weight 1) edges in constraint order; ids
    m..2m-1 are the red (weight 2) edges; blue i is coupled to red m+i.
    Ascending edge id is exactly the stable Kruskal order.
    """

    n: int
    m: int
    endpoints: tuple[tuple[int, int], ...]

    def is_blue(self, eid: int) -> bool:
        return eid < self.m

    def weight(self, eid: int) -> int:
        return 1 if eid < self.m else 2

    def coupled_blue(self, red_id: int) -> int:
        return red_id - self.m

    def coupled_red(self, blue_id: int) -> int:
        return blue_id + self.m


def build_coupled_graph(oset: OrientedSet) -> CoupledGraph:
    """One blue and one red edge per constraint; parallel edges are kept."""
    if not oset.only_split_pairs():
        raise ValueError("the coupled graph is defined for split pairs only")
    blues = []
    reds = []
    for c in oset.constraints:
        blues.append((c.first, c.second))
        reds.append((c.cut, c.first))
    return CoupledGraph(oset.points.n, len(blues), tuple(blues) + tuple(reds))


class MsfBackend(abc.ABC):
    """Decremental minimum-spanning-forest contract.

    The maintained forest must always be an MSF of the surviving multigraph
    (weights 1 and 2 only), with ties broken toward lower edge ids.
    """

    trace: Optional[list[str]] = None

    @abc.abstractmethod
    def delete_edge(self, eid: int) -> Optional[int]:
        """Delete an edge; return the replacement MSF edge id, if any."""

    @abc.abstractmethod
    def heaviest_msf_edge(self) -> Optional[int]:
        """Max-weight MSF edge, lowest id among ties; None for an empty MSF."""

    @abc.abstractmethod
    def component_count(self) -> int:
        ...

    @abc.abstractmethod
    def newly_isolated(self) -> list[int]:
        """Vertices isolated (in the surviving multigraph) by the last deletion."""

    @abc.abstractmethod
    def alive_edge_count(self) -> int:
        ...


class NaiveMsfBackend(MsfBackend):
    """Reference backend: stable Kruskal recompute after each MSF deletion.

    Deleting a non-forest edge leaves the forest unchanged; deleting a forest
    edge admits at most one replacement, which is reported.
    """

    def __init__(self, graph: CoupledGraph, trace: Optional[list[str]] = None):
        self.g = graph
        self.alive = [True] * (2 * graph.m)
        self.trace = trace
        self._degree = [0] * graph.n
        for u, v in graph.endpoints:
            self._degree[u] += 1
            self._degree[v] += 1
        self._alive_count = 2 * graph.m
        self._last_isolated: list[int] = []
        self._recompute()

    def _recompute(self):
        uf = UnionFind(self.g.n)
        msf = []
        for eid in range(2 * self.g.m):
            if self.alive[eid]:
                u, v = self.g.endpoints[eid]
                if uf.union(u, v):
                    msf.append(eid)
        self._msf = msf  # ascending ids: all blues then all reds
        self._msf_set = set(msf)

    def heaviest_msf_edge(self) -> Optional[int]:
        if not self._msf:
            return None
        i = bisect_left(self._msf, self.g.m)
        if i < len(self._msf):
            return self._msf[i]  # lowest-id red
        return self._msf[0]      # no red: lowest-id blue

    def delete_edge(self, eid: int) -> Optional[int]:
        if not self.alive[eid]:
            raise ValueError(f"edge {eid} already deleted")
        self.alive[eid] = False
        self._alive_count -= 1
        u, v = self.g.endpoints[eid]
        self._last_isolated = []
        for x in (u, v):
            self._degree[x] -= 1
            if self._degree[x] == 0:
                self._last_isolated.append(x)
        replacement = None
        if eid in self._msf_set:
            old = self._msf_set
            self._recompute()
            gained = self._msf_set - old
            assert len(gained) <= 1
            replacement = next(iter(gained), None)
        if self.trace is not None:
            kind = "blue" if self.g.is_blue(eid) else "red"
            rep = "none" if replacement is None else str(replacement)
            self.trace.append(f"del {eid} kind={kind} replaced={rep}")
        return replacement

    def component_count(self) -> int:
        return self.g.n - len(self._msf)

    def newly_isolated(self) -> list[int]:
        return list(self._last_isolated)

    def alive_edge_count(self) -> int:
        return self._alive_count


@dataclass(frozen=True)
class PhaseLog:
    """Blue-edge lists, one per cut invocation, in emission order."""

    lists: tuple[tuple[int, ...], ...]

    def all_edges(self) -> list[int]:
        return [e for lst in self.lists for e in lst]

    def is_partition_of(self, m: int) -> bool:
        flat = self.all_edges()
        return len(flat) == len(set(flat)) and set(flat) == set(range(m))


@dataclass
class MsfDebug:
    """Opt-in instrumentation: per-invocation blue-component snapshots plus
    the phase log, with the structural invariants asserted during the run."""

    snapshots: list[frozenset[frozenset[int]]] = field(default_factory=list)
    phase_log: Optional[PhaseLog] = None


def cut_inter_component_edges(backend: MsfBackend, g: CoupledGraph) -> list[int]:
    """One stripping pass: delete heaviest red edges, marking their coupled
    blues, until the heaviest MSF edge is blue (or the MSF runs out); then
    delete the marked blues and return them in emission order."""
    marked: list[int] = []
    while True:
        h = backend.heaviest_msf_edge()
        if h is None or g.is_blue(h):
            break
        backend.delete_edge(h)
        marked.append(g.coupled_blue(h))
    for blue in marked:
        backend.delete_edge(blue)
    return marked


def _blue_components(n: int, g: CoupledGraph, alive_blues) -> frozenset[frozenset[int]]:
    uf = UnionFind(n)
    for b in alive_blues:
        uf.union(*g.endpoints[b])
    return frozenset(frozenset(grp) for grp in uf.groups().values())


def build_via_msf(oset: OrientedSet,
                  backend_factory: Callable[[CoupledGraph], MsfBackend] = NaiveMsfBackend,
                  debug: Optional[MsfDebug] = None,
                  trace: Optional[list[str]] = None) -> BuildOutcome:
    """Two-phase coupled-edge construction; agrees with the baseline builder
    on accept/reject, and its accepted tree satisfies every constraint."""
    if not oset.only_split_pairs():
        raise ValueError("build_via_msf accepts split-pair constraints only")
    n = oset.points.n
    g = build_coupled_graph(oset)
    if g.m == 0:
        return build_binary(oset)
    backend = backend_factory(g)
    if trace is not None:
        backend.trace = trace

    logs: list[list[int]] = []
    alive_blues = set(range(g.m))
    while backend.alive_edge_count() > 0:
        if debug is not None:
            debug.snapshots.append(_blue_components(n, g, alive_blues))
        batch = cut_inter_component_edges(backend, g)
        if not batch:
            # no progress while blue components remain: reject; the witness is
            # recovered off the hot path by the baseline builder
            fallback = build_binary(oset)
            if fallback.ok:
                raise AssertionError("msf engine rejected a satisfiable set")
            return fallback
        if debug is not None:
            comps = debug.snapshots[-1]
            comp_of = {p: c for c in comps for p in c}
            for blue in batch:
                ru, rv = g.endpoints[g.coupled_red(blue)]
                assert comp_of[ru] is not comp_of[rv], \
                    "deleted red edge inside one blue component"
        logs.append(batch)
        alive_blues.difference_update(batch)

    if debug is not None:
        debug.phase_log = PhaseLog(tuple(tuple(lst) for lst in logs))

    uf = UnionFind(n)
    asm = TreeAssembler()
    root_node = {p: asm.leaf(p) for p in range(n)}
    for j in range(len(logs) - 1, -1, -1):
        for blue in reversed(logs[j]):
            x, y = g.endpoints[blue]
            rx, ry = uf.find(x), uf.find(y)
            if rx != ry:
                fresh = asm.node([root_node[rx], root_node[ry]])
                uf.union(x, y)
                root_node[uf.find(x)] = fresh
        if debug is not None:
            now = frozenset(frozenset(grp) for grp in uf.groups().values())
            assert now == debug.snapshots[j], \
                "phase-2 sets diverge from phase-1 blue components"
    groups = sorted(uf.groups().values(), key=min)
    roots = [root_node[uf.find(grp[0])] for grp in groups]
    acc = roots[-1]
    for t in roots[-2::-1]:
        acc = asm.node([t, acc])
    tree = asm.build(acc)
    return BuildOutcome(tree=tree)


def build_ktuple_via_msf(oset: OrientedSet,
                         backend_factory: Callable[[CoupledGraph], MsfBackend] = NaiveMsfBackend,
                         debug: Optional[MsfDebug] = None,
                         trace: Optional[list[str]] = None) -> BuildOutcome:
    """Reduce equal-size binary k-tuple constraints to split pairs and run the
    coupled-edge construction on the union."""
    sizes = set()
    split_pairs: list[SplitPair] = []
    for c in oset.constraints:
        if not isinstance(c, KTuple):
            raise ValueError("build_ktuple_via_msf accepts k-tuple constraints only")
        sizes.add(len(c.points))
        for r in reduce_ktuple(c):
            if not isinstance(r, SplitPair):
                raise ValueError("k-tuple shape must be binary for this pipeline")
            split_pairs.append(r)
    if len(sizes) > 1:
        raise ValueError("k must be uniform across the constraint set")
    reduced = OrientedSet(oset.points, tuple(split_pairs))
    return build_via_msf(reduced, backend_factory=backend_factory, debug=debug, trace=trace)
