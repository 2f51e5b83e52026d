"""Sampled level sets, pivots, bunches, hop-edge sets and branching events."""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .graph import WeightedGraph

RESAMPLE_TRIES = 8

PIVOT_EDGE = 1
HALF_BUNCH_EDGE = 2
UPPER_LEVEL_EDGE = 3


@dataclass
class Hierarchy:
    """Level sets A_0 ⊇ ... ⊇ A_l = ∅ with pivots.

    Row i of ``pivot``/``pivot_dist``/``pivot_parent``/``pivot_edge`` covers level i
    for i in 0..l; row l is all -1 / inf.  ``pivot_parent`` is the next vertex on
    the chosen shortest path toward the pivot.
    """
    n: int
    levels: list
    probs: list
    seed: int
    pivot: np.ndarray
    pivot_dist: np.ndarray
    pivot_parent: np.ndarray
    pivot_edge: np.ndarray
    top_level: np.ndarray
    forced: list = field(default_factory=list)

    @property
    def l(self) -> int:
        return len(self.levels) - 1

    def in_level(self, v: int, i: int) -> bool:
        return bool(self.top_level[v] >= i)

    def describe(self) -> dict:
        return {
            "n": self.n,
            "l": self.l,
            "probs": [float(q) for q in self.probs],
            "level_sizes": [int(len(a)) for a in self.levels],
            "forced_levels": list(self.forced),
        }


def build_hierarchy(g: WeightedGraph, probs, seed: int = 0) -> Hierarchy:
    """Sample A_{i+1} from A_i with probability probs[i]; compute pivots per level.

    An empty sample is redrawn a few times, then the smallest id of A_i is promoted,
    so every level below l is nonempty.
    """
    n = g.n
    rng = np.random.default_rng(seed)
    levels = [np.arange(n, dtype=np.int64)]
    forced = []
    for i, q in enumerate(probs):
        if not q > 0:
            raise ValueError(f"probability {q} at level {i} is not positive")
        q = min(float(q), 1.0)
        prev = levels[-1]
        mask = np.zeros(len(prev), dtype=bool)
        for _ in range(RESAMPLE_TRIES):
            mask = rng.random(len(prev)) < q
            if mask.any() or len(prev) == 0:
                break
        if len(prev) and not mask.any():
            mask[0] = True
            forced.append(i + 1)
        levels.append(prev[mask])
    levels.append(np.zeros(0, dtype=np.int64))
    l = len(levels) - 1

    top = np.zeros(n, dtype=np.int64)
    for i in range(1, l):
        top[levels[i]] = i
    pivot = np.full((l + 1, n), -1, dtype=np.int64)
    pdist = np.full((l + 1, n), np.inf)
    ppar = np.full((l + 1, n), -1, dtype=np.int64)
    pedge = np.full((l + 1, n), -1, dtype=np.int64)
    for i in range(l):
        if len(levels[i]) == 0:
            continue
        dist, root, par, pe = g.multi_source(levels[i])
        pivot[i], pdist[i], ppar[i], pedge[i] = root, dist, par, pe
    return Hierarchy(n, levels, [float(q) for q in probs], seed, pivot, pdist, ppar, pedge, top, forced)


@dataclass
class BunchTable:
    """Per level, for each v the members u of B^rho_i(v) with d(v,u).

    Also keeps, for each u in A_i, the shortest-path tree of its cluster
    {v : u in B^rho_i(v)} as (vertices, parent vertices, parent edges, distances).
    """
    rho: float
    ptr: list
    members: list
    dists: list
    clusters: list

    def bunch(self, i: int, v: int) -> np.ndarray:
        return self.members[i][self.ptr[i][v]:self.ptr[i][v + 1]]

    def bunch_dists(self, i: int, v: int) -> np.ndarray:
        return self.dists[i][self.ptr[i][v]:self.ptr[i][v + 1]]

    def contains(self, i: int, v: int, u: int) -> bool:
        if i >= len(self.ptr):
            return False
        seg = self.bunch(i, v)
        j = np.searchsorted(seg, u)
        return bool(j < len(seg) and seg[j] == u)

    def level_count(self) -> int:
        return len(self.ptr)


def bunches(h: Hierarchy, g: WeightedGraph, rho: float = 1.0, max_level: int | None = None) -> BunchTable:
    """Truncated Dijkstra from every u in A_i, stopping at v once d(u,v) >= rho*d(v,p_{i+1}(v))."""
    n, l = g.n, h.l
    top = l if max_level is None else min(l, max_level + 1)
    ptr, members, dists, clusters = [], [], [], []
    for i in range(top):
        if i == l - 1:
            thr = np.full(n, np.inf)
        else:
            thr = rho * h.pivot_dist[i + 1]
        rows_v, rows_u, rows_d = [], [], []
        level_clusters = {}
        for u in h.levels[i].tolist():
            dist, _, par, pe = g.multi_source([u], thr)
            vs = np.nonzero(np.isfinite(dist))[0]
            level_clusters[u] = (vs, par[vs], pe[vs], dist[vs])
            rows_v.append(vs)
            rows_u.append(np.full(len(vs), u, dtype=np.int64))
            rows_d.append(dist[vs])
        if rows_v:
            v_all = np.concatenate(rows_v)
            u_all = np.concatenate(rows_u)
            d_all = np.concatenate(rows_d)
        else:
            v_all = u_all = np.zeros(0, dtype=np.int64)
            d_all = np.zeros(0)
        order = np.lexsort((u_all, v_all))
        counts = np.bincount(v_all, minlength=n)
        p = np.zeros(n + 1, dtype=np.int64)
        p[1:] = np.cumsum(counts)
        ptr.append(p)
        members.append(u_all[order])
        dists.append(d_all[order])
        clusters.append(level_clusters)
    return BunchTable(float(rho), ptr, members, dists, clusters)


@dataclass
class HopEdgeSet:
    """Deduplicated virtual edges (x, y) weighted by d_G(x, y), with level and flag."""
    x: np.ndarray
    y: np.ndarray
    weight: np.ndarray
    level: np.ndarray
    flag: np.ndarray

    def __len__(self):
        return len(self.x)

    def as_extra(self):
        return list(zip(self.x.tolist(), self.y.tolist(), self.weight.tolist()))

    def select(self, mask) -> "HopEdgeSet":
        return HopEdgeSet(self.x[mask], self.y[mask], self.weight[mask], self.level[mask], self.flag[mask])


def hop_edge_sets(h: Hierarchy, b: BunchTable, upper_from: int | None = None) -> HopEdgeSet:
    """The half-bunch hopset: pivot edges (v, p_i(v)) over all v and bunch edges over v in A_i.

    Each unordered pair keeps its first occurrence in (level, pivot-before-bunch)
    order.  Levels >= upper_from get the upper-level flag.
    """
    seen = {}
    out = []
    n = h.n
    for i in range(min(h.l, b.level_count())):
        piv = h.pivot[i]
        for v in range(n):
            p = int(piv[v])
            if p >= 0 and p != v:
                key = (min(v, p), max(v, p))
                if key not in seen:
                    seen[key] = len(out)
                    out.append((v, p, float(h.pivot_dist[i, v]), i, PIVOT_EDGE))
        for v in h.levels[i].tolist():
            seg = b.bunch(i, v)
            ds = b.bunch_dists(i, v)
            for u, d in zip(seg.tolist(), ds.tolist()):
                if u == v:
                    continue
                key = (min(v, u), max(v, u))
                if key not in seen:
                    seen[key] = len(out)
                    out.append((v, u, d, i, HALF_BUNCH_EDGE))
    if not out:
        z = np.zeros(0, dtype=np.int64)
        return HopEdgeSet(z, z, np.zeros(0), z, z)
    x, y, w, lv, fl = (np.array(c) for c in zip(*out))
    fl = fl.astype(np.int64)
    if upper_from is not None:
        fl[lv >= upper_from] = UPPER_LEVEL_EDGE
    return HopEdgeSet(x.astype(np.int64), y.astype(np.int64), w.astype(float), lv.astype(np.int64), fl)


def level_pairs(h: Hierarchy, b: BunchTable, i: int, extended: bool = False, unordered: bool = False):
    """Pairs (v, u) for v in A_i and u in the (extended) bunch of v at level i.

    With ``unordered`` the self pairs are dropped and (v,u)/(u,v) merged.
    """
    pairs = []
    for v in h.levels[i].tolist():
        us = b.bunch(i, v).tolist()
        if extended:
            p = int(h.pivot[i, v])
            if p >= 0 and p not in us:
                us.append(p)
        pairs.extend((v, u) for u in us)
    if unordered:
        pairs = sorted({(min(a, c), max(a, c)) for a, c in pairs if a != c})
    return pairs


def count_branching_events(g: WeightedGraph, pairs) -> int:
    """Number of (a, b, x) with x on both chosen paths but with different incident edges there.

    Each unordered pair {a, b} of distinct demand pairs counts once per vertex x.
    """
    by_vertex = defaultdict(Counter)
    for a, c in pairs:
        p = g.shortest_path(int(a), int(c))
        if p is None:
            continue
        verts, edges = p.vertices, p.edges
        for j, x in enumerate(verts):
            sig = frozenset(edges[max(0, j - 1):j + 1])
            by_vertex[x][sig] += 1
    total = 0
    for sigs in by_vertex.values():
        cnt = sum(sigs.values())
        total += cnt * (cnt - 1) // 2 - sum(c * (c - 1) // 2 for c in sigs.values())
    return total


def branching_bound(h: Hierarchy, full: BunchTable, i: int) -> int:
    """4 * sum over u in A_i of |B_i(u)|^3."""
    return 4 * sum(len(full.bunch(i, u)) ** 3 for u in h.levels[i].tolist())


def expected_size_bounds(h: Hierarchy, i: int) -> dict:
    """Upper bounds on E|H̄_i| and E|Branch(H^{1/2}_i)| for this hierarchy's probabilities."""
    n, l = h.n, h.l
    qs = h.probs
    prod = math.prod(min(q, 1.0) for q in qs[:i])
    if i < l - 1:
        q = min(qs[i], 1.0)
        return {"extended_bunch_pairs": n / q * prod, "branching": 24 * n / q ** 3 * prod}
    top = n * math.prod(min(q, 1.0) for q in qs[: l - 1])
    return {"extended_bunch_pairs": 2 * max(1.0, top ** 2), "branching": 60 * max(1.0, top ** 4)}
