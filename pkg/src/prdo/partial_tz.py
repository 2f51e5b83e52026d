"""Thorup-Zwick structure cut at level h, queried by a search over max-in-range trees."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import PathResult, WeightedGraph
from .hierarchy import Hierarchy, bunches, build_hierarchy
from .preservers import _path_from_vertices


@dataclass
class MaxInRangeTree:
    """Nodes as rows (lo, hi, split, left, right); split/left/right are -1 at leaves."""
    nodes: np.ndarray

    def root(self) -> int:
        return 0

    def is_leaf(self, node: int) -> bool:
        return self.nodes[node, 2] < 0

    def interval(self, node: int):
        return int(self.nodes[node, 0]), int(self.nodes[node, 1])

    def depth(self) -> int:
        def rec(x):
            if self.is_leaf(x):
                return 0
            return 1 + max(rec(int(self.nodes[x, 3])), rec(int(self.nodes[x, 4])))
        return rec(0)


def _mid(lo: int, hi: int) -> int:
    if hi - lo == 2:
        return hi
    c = (lo + hi) // 2
    return c if c % 2 == 0 else c - 1


def gaps(pivot_dists) -> np.ndarray:
    """Gap j = d(u, pivot j+2) - d(u, pivot j); infinite when the upper pivot is missing."""
    d = np.asarray(pivot_dists, dtype=float)
    out = np.full(max(len(d) - 2, 0), np.inf)
    for j in range(len(d) - 2):
        if np.isfinite(d[j + 2]):
            out[j] = d[j + 2] - d[j]
    return out


def build_max_in_range_tree(pivot_dists, h: int | None = None) -> MaxInRangeTree:
    """Tree over even intervals of [0, h]; pivot_dists covers levels 0..h."""
    d = np.asarray(pivot_dists, dtype=float)
    if h is None:
        h = len(d) - 1
    if h % 2:
        raise ValueError("h must be even")
    fin = d[np.isfinite(d)]
    if np.any(np.diff(fin) < 0) or np.any(np.isfinite(d[1:]) & ~np.isfinite(d[:-1])):
        raise ValueError("pivot distances must be non-decreasing")
    delta = gaps(d)
    rows = []

    def make(lo, hi):
        idx = len(rows)
        rows.append([lo, hi, -1, -1, -1])
        if lo == hi:
            return idx
        mid = _mid(lo, hi)
        cands = list(range(lo, mid - 1, 2))
        vals = [delta[c] if c < len(delta) else np.inf for c in cands]
        j = cands[int(np.argmax(vals))]
        rows[idx][2] = j
        rows[idx][3] = make(lo, j)
        rows[idx][4] = make(mid, hi)
        return idx

    make(0, h)
    return MaxInRangeTree(np.array(rows, dtype=np.int64))


@dataclass
class PartialAnswer:
    kind: str
    path: PathResult | None = None
    path_u: PathResult | None = None
    path_v: PathResult | None = None
    level: int = -1
    q_evals: int = 0

    @property
    def direct(self) -> bool:
        return self.kind == "direct"


@dataclass
class PartialTZOracle:
    """Pivots and bunches for levels 0..h, cluster pointers, and per-vertex search trees.

    Cluster pointers are stored per center a as sorted member ids with the next
    vertex toward a.  ``S`` is A_h.
    """
    g: WeightedGraph = field(repr=False)
    k: int
    h: int
    requested_h: int
    hierarchy: Hierarchy
    bunch_ptr: list
    bunch_members: list
    cl_ptr: np.ndarray
    cl_members: np.ndarray
    cl_next: np.ndarray
    trees: list
    component: np.ndarray
    edges: set

    @property
    def S(self) -> np.ndarray:
        lv = self.hierarchy.levels
        return lv[self.h] if self.h < len(lv) else np.zeros(0, dtype=np.int64)

    def pivot(self, i: int, v: int) -> int:
        return int(self.hierarchy.pivot[i, v]) if i <= self.hierarchy.l else -1

    def in_bunch(self, i: int, v: int, u: int) -> bool:
        if u < 0 or i >= len(self.bunch_ptr):
            return False
        seg = self.bunch_members[i][self.bunch_ptr[i][v]:self.bunch_ptr[i][v + 1]]
        j = np.searchsorted(seg, u)
        return bool(j < len(seg) and seg[j] == u)

    def Q(self, u: int, v: int, i: int) -> bool:
        return self.in_bunch(i, v, self.pivot(i, u)) or self.in_bunch(i + 1, u, self.pivot(i + 1, v))

    def _chase_pivot(self, v: int, i: int) -> PathResult:
        h = self.hierarchy
        p = int(h.pivot[i, v])
        verts = [v]
        x = v
        while x != p:
            x = int(h.pivot_parent[i, x])
            verts.append(x)
        return _path_from_vertices(self.g, verts)

    def _chase_cluster(self, a: int, b: int) -> PathResult:
        """Path b -> a following the pointers of cluster C(a)."""
        lo, hi = self.cl_ptr[a], self.cl_ptr[a + 1]
        members = self.cl_members[lo:hi]
        nxt = self.cl_next[lo:hi]
        verts = [b]
        x = b
        for _ in range(self.g.n + 1):
            if x == a:
                break
            j = np.searchsorted(members, x)
            if j >= len(members) or members[j] != x:
                raise RuntimeError(f"vertex {x} not in cluster of {a}")
            x = int(nxt[j])
            verts.append(x)
        return _path_from_vertices(self.g, verts)

    def _search(self, u: int, v: int):
        tree = self.trees[u]
        node = 0
        evals = 0
        while not tree.is_leaf(node):
            j = int(tree.nodes[node, 2])
            evals += 1
            node = int(tree.nodes[node, 3] if self.Q(u, v, j) else tree.nodes[node, 4])
        i = int(tree.nodes[node, 0])
        if i >= self.h:
            return None, evals
        evals += 1
        return (i if self.Q(u, v, i) else None), evals

    def _direct(self, u: int, v: int, i: int) -> PathResult:
        p = self.pivot(i, u)
        if self.in_bunch(i, v, p):
            return self._chase_pivot(u, i).concat(self._chase_cluster(p, v).reversed())
        p = self.pivot(i + 1, v)
        return self._chase_pivot(v, i + 1).concat(self._chase_cluster(p, u).reversed()).reversed()

    def query(self, u: int, v: int) -> PartialAnswer | None:
        if self.component[u] != self.component[v]:
            return None
        if u == v:
            return PartialAnswer("direct", PathResult.trivial(u), level=0)
        i, e1 = self._search(u, v)
        if i is not None:
            return PartialAnswer("direct", self._direct(u, v, i), level=i, q_evals=e1)
        i, e2 = self._search(v, u)
        if i is not None:
            return PartialAnswer("direct", self._direct(v, u, i).reversed(), level=i, q_evals=e1 + e2)
        return PartialAnswer("escape", path_u=self._chase_pivot(u, self.h),
                             path_v=self._chase_pivot(v, self.h), level=self.h, q_evals=e1 + e2)

    def size_breakdown(self) -> dict:
        n = self.g.n
        return {
            "pivot_maps": n * (self.h + 1),
            "cluster_pointers": int(len(self.cl_members)),
            "pivots_and_bunches": n * (self.h + 1) + int(sum(len(m) for m in self.bunch_members)),
            "search_trees": int(sum(2 * len(t.nodes) for t in self.trees)),
        }

    @property
    def size_words(self) -> int:
        return sum(self.size_breakdown().values())


def even_up(h: int) -> int:
    return h + (h % 2)


def build_partial_tz(g: WeightedGraph, k: int, h: int, seed: int = 0) -> PartialTZOracle:
    """Hierarchy with q_i = n^(-1/k); levels 0..h stored; S = A_h."""
    if h < 1:
        raise ValueError("h must be at least 1")
    if h >= k:
        raise ValueError(f"h={h} must be smaller than k={k}")
    he = even_up(h)
    n = max(g.n, 2)
    levels = max(k, he + 1)
    hier = build_hierarchy(g, [n ** (-1.0 / k)] * (levels - 1), seed)
    return assemble_partial_tz(g, hier, he, k, requested_h=h)


def assemble_partial_tz(g: WeightedGraph, hier: Hierarchy, h: int, k: int, requested_h: int | None = None):
    n = g.n
    top = min(h, hier.l - 1)
    table = bunches(hier, g, 1.0, max_level=top)
    # cluster of a lives at level min(top level of a, h)
    ptr = np.zeros(n + 1, dtype=np.int64)
    mem, nxt = [], []
    edges = set()
    for a in range(n):
        lv = min(int(hier.top_level[a]), top)
        vs, par, pe, _ = table.clusters[lv][a]
        mem.append(vs)
        nxt.append(par)
        ptr[a + 1] = ptr[a] + len(vs)
        edges.update(int(e) for e in pe.tolist() if e >= 0)
    for i in range(1, top + 1):
        edges.update(int(e) for e in hier.pivot_edge[i].tolist() if e >= 0)
    pd = np.vstack([hier.pivot_dist, np.full((max(0, h + 1 - hier.pivot_dist.shape[0]), n), np.inf)])
    trees = [build_max_in_range_tree(pd[: h + 1, u], h) for u in range(n)]
    return PartialTZOracle(
        g, k, h, h if requested_h is None else requested_h, hier,
        table.ptr, table.members,
        ptr, np.concatenate(mem) if mem else np.zeros(0, dtype=np.int64),
        np.concatenate(nxt) if nxt else np.zeros(0, dtype=np.int64),
        trees, g.components(), edges)


def predicates(o: PartialTZOracle, u: int, v: int, i: int):
    """(P, Q) evaluated with exact distances; P needs d(u, v), so this is a test-side helper."""
    d = o.g.dist(u, v)
    pu = o.hierarchy.pivot_dist[i, u] if i <= o.hierarchy.l else math.inf
    P = bool(pu <= i * d * (1 + 1e-12)) if i > 0 else True
    return P, (o.Q(u, v, i) if i < o.h else False)


def partial_query(o: PartialTZOracle, u: int, v: int) -> PartialAnswer | None:
    return o.query(u, v)
