"""Decoding graphs and minimum-weight perfect matching.

Three routes share one ``DecodingGraph``:

* ``Matcher``: pymatching (sparse blossom), used for Monte Carlo throughput;
* ``mwpm``: Dijkstra distances between defects plus exact blossom on the
  complete defect graph (networkx), used as a readable reference;
* ``brute_force_match``: exhaustive pairing over at most 12 defects, the
  oracle for both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import networkx as nx
import numpy as np
import pymatching
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

PROBABILITY_FLOOR = 1e-15
MAX_BRUTE_FORCE_DEFECTS = 12


def edge_weight(p: float) -> float:
    p = min(max(p, PROBABILITY_FLOOR), 0.5)
    return math.log((1.0 - p) / p)


@dataclass(frozen=True)
class Edge:
    u: int
    v: Optional[int]  # None: boundary
    probability: float
    fault_ids: frozenset[int]
    sources: tuple[int, ...] = ()
    heralds: frozenset[int] = frozenset()
    weight_override: Optional[float] = None

    @property
    def weight(self) -> float:
        if self.weight_override is not None:
            return self.weight_override
        return edge_weight(self.probability)


@dataclass
class DecodingGraph:
    """Nodes are local indices into ``detector_ids``; the boundary is implicit."""

    detector_ids: tuple[int, ...]
    edges: tuple[Edge, ...]
    num_fault_ids: int
    hyperedges: tuple = ()
    _adj: Optional[sp.csr_matrix] = field(default=None, repr=False)
    _edge_at: Optional[dict] = field(default=None, repr=False)

    @property
    def num_nodes(self) -> int:
        return len(self.detector_ids)

    @property
    def boundary(self) -> int:
        return len(self.detector_ids)

    def local(self, global_ids: Iterable[int]) -> list[int]:
        pos = {g: i for i, g in enumerate(self.detector_ids)}
        return [pos[g] for g in global_ids]

    def edge_lookup(self) -> dict:
        if self._edge_at is None:
            at = {}
            for k, e in enumerate(self.edges):
                v = self.boundary if e.v is None else e.v
                key = (min(e.u, v), max(e.u, v))
                if key not in at or e.weight < self.edges[at[key]].weight:
                    at[key] = k
            self._edge_at = at
        return self._edge_at

    def adjacency(self) -> sp.csr_matrix:
        if self._adj is None:
            n = self.num_nodes + 1
            rows, cols, w = [], [], []
            for (a, b), k in self.edge_lookup().items():
                rows += [a, b]
                cols += [b, a]
                w += [self.edges[k].weight] * 2
            self._adj = sp.csr_matrix((w, (rows, cols)), shape=(n, n))
        return self._adj


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, Optional[int]], ...]  # local nodes; None = boundary
    weight: float
    correction: tuple[int, ...]  # edge indices, each used an odd number of times
    predicted: frozenset[int]  # fault ids flipped by the correction

    def signature(self, graph: DecodingGraph) -> set[int]:
        """Nodes flipped by the correction (must equal the defects)."""
        out: set[int] = set()
        for k in self.correction:
            e = graph.edges[k]
            out ^= {e.u}
            if e.v is not None:
                out ^= {e.v}
        return out


def reweight_for_erasures(graph: DecodingGraph, herald_bits) -> DecodingGraph:
    """Copy of ``graph`` with every edge fed by a fired herald set to weight 0."""
    fired = {int(h) for h in np.flatnonzero(np.asarray(herald_bits))}
    if not fired:
        return graph
    edges = tuple(
        replace(e, probability=0.5, weight_override=0.0) if e.heralds & fired else e for e in graph.edges
    )
    return DecodingGraph(graph.detector_ids, edges, graph.num_fault_ids, graph.hyperedges)


def _paths(graph: DecodingGraph, defects: Sequence[int]):
    adj = graph.adjacency()
    if not defects:
        return np.zeros((0, graph.num_nodes + 1)), np.zeros((0, graph.num_nodes + 1), dtype=int)
    dist, pred = dijkstra(adj, directed=False, indices=list(defects), return_predecessors=True)
    return dist, pred


def _trace(graph: DecodingGraph, pred_row, src: int, dst: int) -> list[int]:
    at = graph.edge_lookup()
    out = []
    node = dst
    while node != src:
        prev = int(pred_row[node])
        if prev < 0:
            raise ValueError("no path between matched nodes")
        out.append(at[(min(prev, node), max(prev, node))])
        node = prev
    return out


def _result(graph, defects, dist, pred, pairs_idx) -> MatchResult:
    """Build a MatchResult from pairs of positions into ``defects`` (j=None: boundary)."""
    b = graph.boundary
    pairs = []
    weight = 0.0
    used: dict[int, int] = {}
    for i, j in pairs_idx:
        target = b if j is None else defects[j]
        weight += dist[i, target]
        for k in _trace(graph, pred[i], defects[i], target):
            used[k] = used.get(k, 0) ^ 1
        pairs.append((defects[i], None if j is None else defects[j]))
    corr = tuple(sorted(k for k, v in used.items() if v))
    pred_ids: set[int] = set()
    for k in corr:
        pred_ids ^= set(graph.edges[k].fault_ids)
    return MatchResult(tuple(pairs), float(weight), corr, frozenset(pred_ids))


def _check_defects(graph, defects):
    defects = sorted(set(int(x) for x in defects))
    if any(not 0 <= x < graph.num_nodes for x in defects):
        raise ValueError("defect outside the graph")
    return defects


def mwpm(graph: DecodingGraph, defects: Iterable[int]) -> MatchResult:
    """Exact minimum-weight matching of ``defects`` (local node ids), boundary allowed."""
    defects = _check_defects(graph, defects)
    if not defects:
        return MatchResult((), 0.0, (), frozenset())
    dist, pred = _paths(graph, defects)
    n = len(defects)
    b = graph.boundary
    g = nx.Graph()
    # defect i is node i, its boundary copy is node n + i
    for i in range(n):
        if math.isinf(dist[i, b]) and all(math.isinf(dist[i, defects[j]]) for j in range(n) if j != i):
            raise ValueError(f"defect {defects[i]} cannot be matched")
        if not math.isinf(dist[i, b]):
            g.add_edge(i, n + i, weight=float(dist[i, b]))
        for j in range(i + 1, n):
            if not math.isinf(dist[i, defects[j]]):
                g.add_edge(i, j, weight=float(dist[i, defects[j]]))
            g.add_edge(n + i, n + j, weight=0.0)
    matching = nx.min_weight_matching(g)
    pairs = []
    for a, c in sorted(tuple(sorted(e)) for e in matching):
        if a < n and c < n:
            pairs.append((a, c))
        elif a < n:
            pairs.append((a, None))
    if sum(2 if j is not None else 1 for _, j in pairs) != n:
        raise ValueError("no perfect matching of the defects")
    return _result(graph, defects, dist, pred, pairs)


def brute_force_match(graph: DecodingGraph, defects: Iterable[int]) -> MatchResult:
    """Exhaustive optimum over all pairings and boundary assignments (<= 12 defects)."""
    defects = _check_defects(graph, defects)
    n = len(defects)
    if n > MAX_BRUTE_FORCE_DEFECTS:
        raise ValueError(f"brute force limited to {MAX_BRUTE_FORCE_DEFECTS} defects, got {n}")
    if not n:
        return MatchResult((), 0.0, (), frozenset())
    dist, pred = _paths(graph, defects)
    b = graph.boundary
    D = [[float(dist[i, defects[j]]) for j in range(n)] for i in range(n)]
    B = [float(dist[i, b]) for i in range(n)]

    @lru_cache(maxsize=None)
    def best(mask: int) -> tuple[float, tuple]:
        if mask == 0:
            return 0.0, ()
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        options = []
        w, tail = best(rest)
        options.append((B[i] + w, ((i, None),) + tail))
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            w, tail = best(rest & ~(1 << j))
            options.append((D[i][j] + w, ((i, j),) + tail))
        return min(options, key=lambda o: o[0])

    w, pairs = best((1 << n) - 1)
    if math.isinf(w):
        raise ValueError("no perfect matching of the defects")
    return _result(graph, defects, dist, pred, pairs)


class Matcher:
    """pymatching wrapper with per-shot erasure reweighting.

    Predictions are arrays over the graph's fault ids.  Heralded shots are
    decoded one at a time after switching their erased edges to weight 0.
    """

    def __init__(self, graph: DecodingGraph):
        self.graph = graph
        self._m = pymatching.Matching()
        self._herald_edges: dict[int, list[int]] = {}
        touched = set()
        for k, e in enumerate(graph.edges):
            self._add(e, e.weight)
            touched.add(e.u)
            if e.v is not None:
                touched.add(e.v)
            for h in e.heralds:
                self._herald_edges.setdefault(h, []).append(k)
        for node in range(graph.num_nodes):
            if node not in touched:
                self._m.add_boundary_edge(node, set(), weight=edge_weight(PROBABILITY_FLOOR))
        self._m.ensure_num_fault_ids(max(graph.num_fault_ids, 1))
        self.relevant_heralds = np.array(sorted(self._herald_edges), dtype=np.int64)

    def _add(self, e: Edge, w: float, strategy: str = "disallow"):
        if e.v is None:
            self._m.add_boundary_edge(e.u, set(e.fault_ids), weight=w, merge_strategy=strategy)
        else:
            self._m.add_edge(e.u, e.v, set(e.fault_ids), weight=w, merge_strategy=strategy)

    def decode_batch(self, syndromes: np.ndarray, heralds: Optional[np.ndarray] = None) -> np.ndarray:
        syndromes = np.asarray(syndromes, dtype=np.uint8)
        n = syndromes.shape[0]
        nf = self.graph.num_fault_ids
        out = np.zeros((n, nf), dtype=np.uint8)
        if n == 0:
            return out
        erased = np.zeros(n, dtype=bool)
        if heralds is not None and len(self.relevant_heralds):
            hs = heralds[:, self.relevant_heralds]
            erased = hs.any(axis=1)
        plain = ~erased & syndromes.any(axis=1)
        if plain.any():
            out[plain] = self._m.decode_batch(syndromes[plain])[:, :nf]
        for i in np.flatnonzero(erased):
            fired = self.relevant_heralds[np.flatnonzero(hs[i])]
            out[i] = self._decode_erased(syndromes[i], fired)[:nf]
        return out

    def _decode_erased(self, syndrome: np.ndarray, fired: Iterable[int]) -> np.ndarray:
        ks = sorted({k for h in fired for k in self._herald_edges[int(h)]})
        for k in ks:
            self._add(self.graph.edges[k], 0.0, "replace")
        try:
            if not syndrome.any():
                return np.zeros(max(self.graph.num_fault_ids, 1), dtype=np.uint8)
            return self._m.decode(syndrome)
        finally:
            for k in ks:
                self._add(self.graph.edges[k], self.graph.edges[k].weight, "replace")

    def decode_to_edges(self, syndrome: np.ndarray) -> np.ndarray:
        return self._m.decode_to_edges_array(np.asarray(syndrome, dtype=np.uint8))
