"""Half-bunch hopsets and interactive distance preservers built on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import (EdgeSet, HopGraph, PathResult, WeightedGraph, is_virtual,
                    trace_rounds, virtual_index)
from .hierarchy import (HALF_BUNCH_EDGE, PIVOT_EDGE, UPPER_LEVEL_EDGE, HopEdgeSet,
                        build_hierarchy, bunches, hop_edge_sets)

SLACK = 1e-12


class DemandError(KeyError):
    """Query for a pair the structure was not built to serve."""


def _key(u: int, v: int):
    return (u, v) if u <= v else (v, u)


def _normalize_pairs(pairs):
    out = {}
    for a, b in pairs:
        out[_key(int(a), int(b))] = None
    return list(out)


def _path_from_vertices(g: WeightedGraph, verts) -> PathResult:
    verts = [int(x) for x in verts]
    edges = []
    w = 0.0
    for a, b in zip(verts, verts[1:]):
        e = g.edge_between(a, b)
        if e < 0:
            raise ValueError(f"no edge between {a} and {b}")
        edges.append(e)
        w += float(g.ew[e])
    return PathResult(verts, edges, w)


# ------------------------------------------------------------------ parameters

def log43(x: float) -> float:
    return math.log(x) / math.log(4 / 3)


def v1_levels(k: int) -> int:
    return math.ceil(log43(k) - 1e-12) + 1


def v1_probs(n: int, k: int) -> list:
    l = v1_levels(k)
    return [0.5 * n ** (-(4 / 3) ** i / (3 * k)) for i in range(l - 1)]


def hop_cap_1eps(l: int, eps: float) -> int:
    """2 (2 ceil(72 l / eps))^(l-1), the hop bound read off the hopset argument."""
    return 2 * (2 * math.ceil(72 * l / eps)) ** (l - 1)


def hop_cap_3eps(l: int, eps: float) -> int:
    return math.floor((12 + 40 / eps) ** (l - 1) + 1e-9)


def gamma_43(eps: float, k: int) -> int:
    return hop_cap_1eps(v1_levels(k), eps)


def v2_params(n: int, k: int, eps: float) -> dict:
    """Two-regime sampling: v1 rates below level h, faster decay from h on."""
    eps3 = eps / 3
    gamma = gamma_43(eps3, k)
    h = math.ceil(log43(k * math.log(gamma) / math.log(n) + 1) - 1e-12)
    l = math.ceil(math.log2(k) - 1e-12) + 1 + h
    probs = []
    for i in range(l - 1):
        if i < h:
            q = 0.5 * n ** (-(4 / 3) ** i / (3 * k))
        else:
            q = 0.5 * (n / gamma) ** (-(2 ** (i - h)) / k)
        probs.append(min(q, 1.0))
    return {"gamma": gamma, "h": h, "l": l, "probs": probs, "hop_cap": hop_cap_1eps(l, eps3)}


# ------------------------------------------------------------------ simple preservers

@dataclass
class PivotNextHopMap:
    """Next vertex toward p_i(v) for every v; chasing it yields the chosen shortest path."""
    level: int
    pivot: np.ndarray
    next_hop: np.ndarray
    g: WeightedGraph = field(repr=False)

    def query(self, v: int, p: int) -> PathResult:
        if int(self.pivot[v]) != p:
            raise DemandError(f"({v},{p}) is not a level-{self.level} pivot pair")
        verts = [v]
        x = v
        for _ in range(len(self.pivot) + 1):
            if x == p:
                break
            x = int(self.next_hop[x])
            verts.append(x)
        else:
            raise RuntimeError("next-hop chase did not terminate")
        return _path_from_vertices(self.g, verts)

    def edges(self) -> set:
        out = set()
        for v, x in enumerate(self.next_hop.tolist()):
            if x >= 0:
                out.add(self.g.edge_between(v, x))
        return out

    @property
    def size_words(self) -> int:
        return len(self.next_hop)


def build_pivot_preserver(g: WeightedGraph, h, i: int) -> PivotNextHopMap:
    if not 0 <= i < h.l:
        raise ValueError(f"level {i} outside 0..{h.l - 1}")
    return PivotNextHopMap(i, h.pivot[i].copy(), h.pivot_parent[i].copy(), g)


@dataclass
class ExactPairwisePreserver:
    """Stores the chosen shortest path of every demand pair explicitly."""
    g: WeightedGraph = field(repr=False)
    paths: dict = field(default_factory=dict)

    declared_stretch = 1.0

    def query(self, u: int, v: int) -> PathResult | None:
        key = _key(u, v)
        if key not in self.paths:
            raise DemandError(f"pair ({u},{v}) outside demand set")
        verts = self.paths[key]
        if verts is None:
            return None
        p = _path_from_vertices(self.g, verts)
        return p if verts[0] == u else p.reversed()

    @property
    def demand(self):
        return list(self.paths)

    def edges(self) -> set:
        out = set()
        for verts in self.paths.values():
            if verts is not None:
                for a, b in zip(verts, verts[1:]):
                    out.add(self.g.edge_between(int(a), int(b)))
        return out

    @property
    def size_words(self) -> int:
        return sum(2 + (0 if p is None else len(p)) for p in self.paths.values())


def build_exact_pairwise_preserver(g: WeightedGraph, pairs) -> ExactPairwisePreserver:
    out = ExactPairwisePreserver(g)
    for a, b in _normalize_pairs(pairs):
        p = g.shortest_path(a, b)
        out.paths[(a, b)] = None if p is None else np.array(p.vertices, dtype=np.int64)
    return out


# ------------------------------------------------------------------ hopset

@dataclass
class Hopset:
    g: WeightedGraph = field(repr=False)
    hop_edges: HopEdgeSet
    pivot_maps: dict
    bunch_paths: ExactPairwisePreserver
    upper: object = None
    approx: float = 1.0
    levels: int = 0

    def witness(self, j: int) -> PathResult:
        x, y = int(self.hop_edges.x[j]), int(self.hop_edges.y[j])
        f, lv = int(self.hop_edges.flag[j]), int(self.hop_edges.level[j])
        if f == PIVOT_EDGE:
            return self.pivot_maps[lv].query(x, y)
        if f == HALF_BUNCH_EDGE:
            return self.bunch_paths.query(x, y)
        return self.upper.query(x, y)

    def support(self) -> set:
        s = set()
        for m in self.pivot_maps.values():
            s |= m.edges()
        s |= self.bunch_paths.edges()
        if self.upper is not None:
            s |= self.upper.edges
        s.discard(-1)
        return s

    def hop_graph(self) -> HopGraph:
        return HopGraph(self.g, self.hop_edges.as_extra())


def _assemble_hopset(g, hier, upper_from=None) -> Hopset:
    half = bunches(hier, g, 0.5)
    hop = hop_edge_sets(hier, half, upper_from=upper_from)
    pivot_maps = {i: build_pivot_preserver(g, hier, i) for i in range(1, hier.l)}
    d2_pairs = [(int(a), int(b)) for a, b, f in zip(hop.x, hop.y, hop.flag) if f == HALF_BUNCH_EDGE]
    d2 = build_exact_pairwise_preserver(g, d2_pairs)
    return Hopset(g, hop, pivot_maps, d2, None, 1.0, hier.l)


def build_half_bunch_hopset(g: WeightedGraph, k: int, probs=None, seed: int = 0) -> Hopset:
    if k < 3:
        raise ValueError("k must be at least 3")
    if probs is None:
        probs = v1_probs(g.n, k)
    hier = build_hierarchy(g, probs, seed)
    return _assemble_hopset(g, hier)


@dataclass
class HopsetReport:
    pairs: int
    violations: int
    max_stretch: float
    min_sufficient_beta: int
    hop_edges: int
    support_size: int


def verify_hopset(g: WeightedGraph, hs, alpha: float, beta: int, sources=None) -> HopsetReport:
    """Check d^(beta)_{G+H}(s, t) <= alpha d_G(s, t) for every target t of each source s."""
    hg = hs.hop_graph() if isinstance(hs, Hopset) else hs
    dist = g.apsp()[0]
    a = min(float(alpha), 1e300)
    srcs = range(g.n) if sources is None else sources
    full = max(g.n - 1, 1)
    beta = int(min(beta, full))
    pairs = viol = 0
    worst = 1.0
    need = 0
    for s in srcs:
        exact = dist[s]
        first, _ = hg.first_rounds(s, full, exact, 1.0 if alpha <= 1 else a)
        _, at_beta = hg.first_rounds(s, beta, exact, a)
        reach = np.isfinite(exact)
        reach[s] = False
        pairs += int(reach.sum())
        ok = at_beta[reach] <= a * exact[reach] * (1 + SLACK)
        viol += int((~ok).sum())
        if reach.any():
            worst = max(worst, float(np.max(at_beta[reach] / exact[reach])))
            need = max(need, int(first[reach].max()))
    support = len(hs.support()) if isinstance(hs, Hopset) else -1
    return HopsetReport(pairs, viol, worst, need, len(hg.extra), support)


# ------------------------------------------------------------------ interactive preservers

@dataclass
class InteractivePreserver:
    """Per-pair hop-bounded paths in G plus the hopset, expanded through sub-oracles at query time.

    ``stored`` maps a canonical pair to (vertices, marks): a mark is a G edge id,
    or a negative virtual marker naming a hop edge.
    """
    g: WeightedGraph = field(repr=False)
    kind: str
    k: int
    eps: float
    declared_stretch: float
    path_alpha: float
    hop_cap: int
    hopset: Hopset
    stored: dict
    edges: set
    params: dict = field(default_factory=dict)

    def _expand(self, a: int, b: int, mark: int) -> PathResult:
        g = self.g
        if not is_virtual(mark):
            return PathResult([a, b], [mark], float(g.ew[mark]))
        return self._expand_hop(virtual_index(mark), a)

    def _expand_hop(self, j: int, a: int) -> PathResult:
        x = int(self.hopset.hop_edges.x[j])
        p = self.hopset.witness(j)
        if p is None:
            raise RuntimeError(f"hop edge {j} has no witness path")
        return p if x == a or p.vertices[0] == a else p.reversed()

    def query(self, u: int, v: int) -> PathResult | None:
        key = _key(u, v)
        if key not in self.stored:
            raise DemandError(f"pair ({u},{v}) outside demand set")
        rec = self.stored[key]
        if rec is None:
            return None
        verts, marks = rec
        out = PathResult.trivial(int(verts[0]))
        for a, b, mark in zip(verts, verts[1:], marks):
            piece = self._expand(int(a), int(b), int(mark))
            if piece.vertices[0] != a:
                piece = piece.reversed()
            out = out.concat(piece)
        return out if u == out.vertices[0] else out.reversed()

    def universe(self) -> EdgeSet:
        return EdgeSet(self.g, self.edges)

    @property
    def demand(self):
        return list(self.stored)

    def hop_counts(self):
        return [len(r[1]) for r in self.stored.values() if r is not None]

    def stored_weight(self, u: int, v: int) -> float:
        verts, marks = self.stored[_key(u, v)]
        hop = self.hopset.hop_edges
        return sum(float(hop.weight[virtual_index(m)]) if is_virtual(m) else float(self.g.ew[m])
                   for m in marks)

    def missing_audit(self) -> int:
        """Largest number of stored-path edges lying outside the hopset support."""
        support = self.hopset.support()
        worst = 0
        for rec in self.stored.values():
            if rec is None:
                continue
            worst = max(worst, sum(1 for m in rec[1] if not is_virtual(m) and m not in support))
        return worst

    def size_breakdown(self) -> dict:
        hs = self.hopset
        out = {
            "stored_paths": sum(2 + len(r[0]) + len(r[1]) for r in self.stored.values() if r is not None),
            "flags": len(hs.hop_edges),
            "pivot_maps": sum(m.size_words for m in hs.pivot_maps.values()),
            "pairwise_exact": hs.bunch_paths.size_words,
        }
        if hs.upper is not None:
            out["upper_preserver"] = hs.upper.size_words
        return out

    @property
    def size_words(self) -> int:
        return sum(self.size_breakdown().values())


def _store_paths(g, hs: Hopset, pairs, alpha: float, cap: int):
    hg = hs.hop_graph()
    dist = g.apsp()[0]
    by_source = {}
    for a, b in pairs:
        by_source.setdefault(a, []).append(b)
    stored = {}
    rounds = max(1, min(cap, g.n - 1))
    for s, targets in by_source.items():
        stop = np.full(g.n, np.inf)
        for t in targets:
            stop[t] = dist[s, t]
        tab_d, tab_v, tab_e = hg.tables(s, rounds, stop, alpha * (1 + SLACK))
        for t in targets:
            if t == s:
                stored[(s, t)] = (np.array([s], dtype=np.int64), np.zeros(0, dtype=np.int64))
                continue
            exact = dist[s, t]
            if not np.isfinite(exact):
                stored[(s, t)] = None
                continue
            good = np.nonzero(tab_d[:, t] <= alpha * exact * (1 + SLACK))[0]
            if len(good) == 0:
                raise RuntimeError(f"no path for ({s},{t}) within {alpha} stretch and {cap} hops")
            p = trace_rounds(tab_d, tab_v, tab_e, t, int(good[0]))
            stored[(s, t)] = (np.array(p.vertices, dtype=np.int64), np.array(p.edges, dtype=np.int64))
    return stored


def _finish(g, kind, k, eps, declared, alpha, cap, hs, pairs, params):
    stored = _store_paths(g, hs, pairs, alpha, cap)
    edges = hs.support()
    for rec in stored.values():
        if rec is not None:
            edges.update(int(m) for m in rec[1] if not is_virtual(m))
    return InteractivePreserver(g, kind, k, eps, declared, alpha, cap, hs, stored, edges, params)


def build_eps_preserver_v1(g: WeightedGraph, k: int, eps: float, pairs, seed: int = 0,
                           stretch_kind: str = "1eps") -> InteractivePreserver:
    """Hopset preserver with v1 sampling; stretch 1+eps, or 3+eps with stretch_kind='3eps'."""
    if k < 3:
        raise ValueError("k must be at least 3")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if stretch_kind == "1eps" and eps > 2 * math.log2(k):
        raise ValueError("eps must be at most 2 log2 k")
    pairs = _normalize_pairs(pairs)
    probs = v1_probs(g.n, k)
    hier = build_hierarchy(g, probs, seed)
    hs = _assemble_hopset(g, hier)
    l = hier.l
    if stretch_kind == "3eps":
        alpha, cap, kind = 3 + eps, hop_cap_3eps(l, eps), "3eps"
    else:
        alpha, cap, kind = 1 + eps, hop_cap_1eps(l, eps), "v1"
    params = {"l": l, "probs": probs, "level_sizes": [len(a) for a in hier.levels]}
    return _finish(g, kind, k, eps, alpha, alpha, cap, hs, pairs, params)


def build_3eps_preserver(g: WeightedGraph, k: int, eps: float, pairs, seed: int = 0) -> InteractivePreserver:
    return build_eps_preserver_v1(g, k, eps, pairs, seed, stretch_kind="3eps")


def build_eps_preserver_v2(g: WeightedGraph, k: int, eps: float, pairs, seed: int = 0,
                           strict: bool = True) -> InteractivePreserver:
    """Two-regime hierarchy; upper-level bunch edges go through a nested v1 preserver at eps/3."""
    if strict and not 3 <= k <= math.log2(max(g.n, 2)):
        raise ValueError(f"k={k} outside [3, log2 n]")
    if not 0 < eps <= 1:
        raise ValueError("eps must be in (0, 1]")
    pairs = _normalize_pairs(pairs)
    par = v2_params(max(g.n, 2), k, eps)
    hier = build_hierarchy(g, par["probs"], seed)
    hs = _assemble_hopset_v2(g, hier, par["h"], k, eps / 3, seed)
    alpha = 1 + eps / 3
    params = {"l": hier.l, "h": par["h"], "gamma": par["gamma"], "probs": par["probs"],
              "level_sizes": [len(a) for a in hier.levels]}
    return _finish(g, "v2", k, eps, alpha * alpha, alpha, par["hop_cap"], hs, pairs, params)


def _assemble_hopset_v2(g, hier, h, k, eps3, seed) -> Hopset:
    half = bunches(hier, g, 0.5)
    hop = hop_edge_sets(hier, half)
    upper = (hop.flag == HALF_BUNCH_EDGE) & (hop.level >= h)
    hop.flag[upper] = UPPER_LEVEL_EDGE
    pivot_maps = {i: build_pivot_preserver(g, hier, i) for i in range(1, hier.l)}
    d2_pairs = [(int(a), int(b)) for a, b, f in zip(hop.x, hop.y, hop.flag) if f == HALF_BUNCH_EDGE]
    d2 = build_exact_pairwise_preserver(g, d2_pairs)
    d3_pairs = [(int(a), int(b)) for a, b, f in zip(hop.x, hop.y, hop.flag) if f == UPPER_LEVEL_EDGE]
    d3 = build_eps_preserver_v1(g, k, eps3, d3_pairs, seed=seed + 7919) if d3_pairs else None
    return Hopset(g, hop, pivot_maps, d2, d3, 1 + eps3, hier.l)


def preserver_query(p, u: int, v: int) -> PathResult | None:
    return p.query(u, v)
