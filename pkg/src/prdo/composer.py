"""Composed path-reporting oracles: partial TZ + emulator on S + preserver on the emulator's pairs,
and the cluster-graph wrap over a stretch-friendly partition."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .emulators import MetricGraph, build_ap_emulator, build_mn_emulator, build_tz_emulator, tree_path
from .graph import PathResult, WeightedGraph
from .partial_tz import build_partial_tz
from .preservers import build_3eps_preserver, build_eps_preserver_v1, gamma_43, log43


@dataclass(frozen=True)
class Preset:
    emulator: str
    preserver: str
    eps_divisor_emulator: float = 1.0
    eps_divisor_preserver: float = 1.0


PRESETS = {
    "row1": Preset("tz", "v1", 12, 12),
    "row2": Preset("ap", "v1", 12, 12),
    "row3": Preset("tz", "3eps"),
    "row4": Preset("ap", "3eps"),
    "row5": Preset("mn", "v1", 12, 12),
    "row6": Preset("mn", "3eps"),
}
PRESETS["thm6.1"] = PRESETS["row1"]
PRESETS["thm6.2"] = PRESETS["row6"]
WRAP_PRESETS = ("thm6.3", "ultra")
ALL_PRESETS = tuple(sorted(PRESETS)) + WRAP_PRESETS

EMULATOR_DELTA = {"tz": 1, "ap": 1, "mn": 0}


def _loglog_ratio(n: int) -> float:
    ln = math.log2(max(n, 4))
    return math.log2(ln) / ln


def select_params(n: int, k: int, eps: float, preset="thm6.1", strict: bool = True) -> dict:
    """Closed-form h and k1 for a preset; h is rounded up to even and kept in [2, k-1]."""
    if strict and not 3 <= k <= math.log2(max(n, 2)):
        raise ValueError(f"k={k} outside [3, log2 n]")
    if k < 3:
        raise ValueError("k must be at least 3")
    if not 0 < eps <= 0.5:
        raise ValueError("eps must be in (0, 1/2]")
    p = PRESETS[preset] if isinstance(preset, str) else preset
    eps_e = eps / p.eps_divisor_emulator
    eps_p = eps / p.eps_divisor_preserver
    delta = EMULATOR_DELTA[p.emulator]
    if p.preserver == "v1":
        tau = math.log(gamma_43(eps_p, k)) / math.log(k)
    else:
        tau = log43(12 + 40 / eps_p)
    sigma = delta + tau
    h_raw = math.ceil(sigma * k * _loglog_ratio(n) - 1e-12) * math.ceil(1 / eps - 1e-12)
    h = h_raw + (h_raw % 2)
    top = k - 1 if (k - 1) % 2 == 0 else k - 2
    h = max(2, min(h, top))
    k1 = math.ceil(k * (1 + 2 * eps) / h - 1e-12)
    return {"h": h, "h_formula": h_raw, "k1": k1, "sigma": sigma, "delta": delta, "tau": tau,
            "emulator": p.emulator, "preserver": p.preserver, "eps_emulator": eps_e,
            "eps_preserver": eps_p, "k": k, "eps": eps}


def _emulator(kind, metric, k1, eps, seed):
    if kind == "tz":
        return build_tz_emulator(metric, k1, seed)
    if kind == "mn":
        return build_mn_emulator(metric, k1, seed)
    if kind == "ap":
        return build_ap_emulator(metric, k1, eps, seed)
    raise ValueError(f"unknown emulator {kind!r}")


def _preserver(kind, g, k, eps, pairs, seed):
    if kind == "v1":
        return build_eps_preserver_v1(g, k, eps, pairs, seed)
    if kind == "3eps":
        return build_3eps_preserver(g, k, eps, pairs, seed)
    raise ValueError(f"unknown preserver {kind!r}")


@dataclass
class ComposedPRDO:
    """Direct answers come from the partial oracle; escapes go pivot -> emulator path -> pivot,
    with each emulator edge expanded by the preserver."""
    g: WeightedGraph = field(repr=False)
    preset: str
    params: dict
    d0: object = field(repr=False)
    de: object = field(repr=False)
    dp: object = field(repr=False)
    edges: set = field(repr=False)
    declared_stretch: float
    composition_bound: float

    @property
    def S(self):
        return self.d0.S

    def query_ops(self, u: int, v: int):
        """(path, Q-evaluations + emulator ops, 'direct' | 'escape')."""
        ans = self.d0.query(u, v)
        if ans is None:
            return None, 0, "unreachable"
        if ans.direct:
            return ans.path, ans.q_evals, "direct"
        pu, pv = ans.path_u, ans.path_v
        a, b = pu.vertices[-1], pv.vertices[-1]
        mid, ops = self.de.query_ops(a, b)
        out = pu
        cur = a
        for x, y, e in zip(mid.vertices, mid.vertices[1:], mid.edges):
            piece = self.dp.query(int(x), int(y))
            if piece.vertices[0] != cur:
                piece = piece.reversed()
            out = out.concat(piece)
            cur = int(y)
        return out.concat(pv.reversed()), ans.q_evals + ops, "escape"

    def query(self, u: int, v: int) -> PathResult | None:
        return self.query_ops(u, v)[0]

    def size_breakdown(self) -> dict:
        return {"partial_tz": self.d0.size_words, "emulator": self.de.size_words,
                "preserver": 0 if self.dp is None else self.dp.size_words}

    @property
    def size_words(self) -> int:
        return sum(self.size_breakdown().values())

    def describe(self) -> dict:
        return {**self.params, "preset": self.preset, "S": int(len(self.S)),
                "H_E": len(self.de.pairs), "P": len(self.de.pairs),
                "declared_stretch": self.declared_stretch, "composition_bound": self.composition_bound,
                "spanner_edges": len(self.edges)}


def compose_prdo(g: WeightedGraph, k: int, eps: float, emulator_kind: str | None = None,
                 preserver_kind: str | None = None, seed: int = 0, preset: str = "thm6.1",
                 strict: bool = True) -> ComposedPRDO:
    if emulator_kind is not None or preserver_kind is not None:
        base = PRESETS[preset]
        p = Preset(emulator_kind or base.emulator, preserver_kind or base.preserver,
                   12 if (preserver_kind or base.preserver) == "v1" else 1,
                   12 if (preserver_kind or base.preserver) == "v1" else 1)
        name = f"{p.emulator}+{p.preserver}"
    else:
        p, name = PRESETS[preset], preset
    par = select_params(g.n, k, eps, p, strict)
    d0 = build_partial_tz(g, k, par["h"], seed)
    S = d0.S
    if len(S) == 0:
        raise ValueError("partial oracle left S empty")
    metric = MetricGraph.from_graph(g, S)
    de = _emulator(p.emulator, metric, par["k1"], par["eps_emulator"], seed + 1)
    pairs = de.pairs
    dp = _preserver(p.preserver, g, k, par["eps_preserver"], pairs, seed + 2) if pairs else None
    edges = set(d0.edges)
    if dp is not None:
        edges |= set(dp.edges)
    h = par["h"]
    alpha_p = 1.0 if dp is None else dp.declared_stretch
    stretch_e = de.declared_stretch
    declared = 2 * h + alpha_p * stretch_e * (2 * h + 1)
    alpha_e = stretch_e / par["k1"]
    comp = 2 * alpha_p * alpha_e * ((1 + 3 * eps) * k + 2.5 * h)
    par = {**par, "alpha_P": alpha_p, "emulator_stretch": stretch_e, "emulator_params": de.params}
    return ComposedPRDO(g, name, par, d0, de, dp, edges, declared, comp)


# ------------------------------------------------------------------ stretch-friendly partitions

@dataclass
class StretchFriendlyPartition:
    """Clusters with rooted trees; parent[v] = -1 at roots, parent_edge the G edge to the parent."""
    g: WeightedGraph = field(repr=False)
    t: int
    cluster: np.ndarray
    roots: np.ndarray
    parent: np.ndarray
    parent_edge: np.ndarray
    depth: np.ndarray

    @property
    def count(self) -> int:
        return len(self.roots)

    @property
    def max_depth(self) -> int:
        return int(self.depth.max(initial=0))

    @property
    def depth_constant(self) -> float:
        return self.max_depth / self.t

    def tree_path(self, x: int, y: int) -> PathResult:
        verts = tree_path(self.parent, self.depth, x, y)
        edges, w = [], 0.0
        for a, b in zip(verts, verts[1:]):
            e = int(self.parent_edge[a]) if self.parent[a] == b else int(self.parent_edge[b])
            edges.append(e)
            w += float(self.g.ew[e])
        return PathResult(verts, edges, w)

    def tree_edges(self) -> set:
        return {int(e) for e in self.parent_edge.tolist() if e >= 0}

    def check(self) -> dict:
        """Count violations of the depth, outgoing-edge and internal-edge properties, edge by edge."""
        g = self.g
        n = g.n
        # heaviest edge on the root path of every vertex
        root_max = np.zeros(n)
        for v in np.argsort(self.depth, kind="stable").tolist():
            p = self.parent[v]
            if p >= 0:
                root_max[v] = max(root_max[p], float(g.ew[self.parent_edge[v]]))
        cap = 3 * self.t
        out = {"depth": int(np.sum(self.depth > cap)), "outgoing": 0, "internal": 0,
               "max_depth": self.max_depth, "depth_cap": cap, "clusters": self.count}
        for e in range(g.m):
            x, y, w = int(g.eu[e]), int(g.ev[e]), float(g.ew[e])
            if self.cluster[x] != self.cluster[y]:
                if root_max[x] > w or root_max[y] > w:
                    out["outgoing"] += 1
            else:
                p = self.tree_path(x, y)
                if any(float(g.ew[f]) > w for f in p.edges):
                    out["internal"] += 1
        return out


def build_stretch_friendly_partition(g: WeightedGraph, t: int) -> StretchFriendlyPartition:
    """Kruskal-order pass where every small cluster acts on its lightest outgoing edge.

    A cluster joining another through its lightest outgoing edge, re-rooted at the
    joining vertex and keeping the other cluster's root, keeps both weight properties.
    Small clusters merge with small ones; one whose lightest edge reaches a finished
    cluster is frozen with that edge as a hook and may still absorb small clusters.
    Anything reaching t vertices is finished (fewer than 2t vertices), and leftover
    frozen clusters hang off their hooks at the end, so depth stays below 3t.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    n = g.n
    parent = np.full(n, -1, dtype=np.int64)
    pedge = np.full(n, -1, dtype=np.int64)
    owner = np.arange(n)
    members = {v: [v] for v in range(n)}
    root = {v: v for v in range(n)}

    def reroot(c, a):
        # reverse parent pointers from a up to the cluster root
        prev, prev_e, x = -1, -1, a
        while x >= 0:
            nx, ne = int(parent[x]), int(pedge[x])
            parent[x], pedge[x] = prev, prev_e
            prev, prev_e, x = x, ne, nx
        root[c] = a

    def attach(small, big, a, b, e):
        reroot(small, a)
        parent[a], pedge[a] = b, e
        for x in members[small]:
            owner[x] = big
        members[big].extend(members.pop(small))
        root.pop(small)

    # state: 0 active (small, no outgoing edge seen yet), 1 frozen (small, hooked), 2 done
    state = {v: 2 if t <= 1 else 0 for v in range(n)}
    hook = {}

    def grow(small, big, a, b, e):
        attach(small, big, a, b, e)
        state.pop(small)
        if len(members[big]) >= t:
            state[big] = 2
            hook.pop(big, None)

    order = np.lexsort((np.arange(g.m), g.ew))
    for e in order.tolist():
        x, y = int(g.eu[e]), int(g.ev[e])
        cx, cy = int(owner[x]), int(owner[y])
        if cx == cy:
            continue
        if state[cx] != 0:
            if state[cy] != 0:
                continue
            cx, cy, x, y = cy, cx, y, x
        # cx is active and e is its lightest outgoing edge
        if state[cy] == 0:
            if (len(members[cx]), -root[cx]) < (len(members[cy]), -root[cy]):
                grow(cx, cy, x, y, e)
            else:
                grow(cy, cx, y, x, e)
        elif state[cy] == 1:
            grow(cx, cy, x, y, e)
        else:
            state[cx] = 1
            hook[cx] = (x, y, e)
    for c, (a, b, e) in sorted(hook.items()):
        attach(c, int(owner[b]), a, b, e)
    roots = np.array(sorted(root.values()), dtype=np.int64)
    cluster = np.empty(n, dtype=np.int64)
    rank = {int(r): i for i, r in enumerate(roots.tolist())}
    depth = np.zeros(n, dtype=np.int64)
    for v in range(n):
        d, x = 0, v
        while parent[x] >= 0:
            x = int(parent[x])
            d += 1
        depth[v] = d
        cluster[v] = rank[x]
    return StretchFriendlyPartition(g, t, cluster, roots, parent, pedge, depth)


@dataclass
class ClusterGraph:
    graph: WeightedGraph
    witness: np.ndarray

    @classmethod
    def build(cls, part: StretchFriendlyPartition) -> "ClusterGraph":
        g = part.g
        best = {}
        for e in np.lexsort((np.arange(g.m), g.ew)).tolist():
            a, b = int(part.cluster[g.eu[e]]), int(part.cluster[g.ev[e]])
            if a != b:
                best.setdefault((min(a, b), max(a, b)), e)
        keys = sorted(best)
        hg = WeightedGraph(part.count, [a for a, _ in keys], [b for _, b in keys],
                           [float(g.ew[best[k]]) for k in keys])
        return cls(hg, np.array([best[k] for k in keys], dtype=np.int64))


@dataclass
class PartitionPRDO:
    """Inner oracle on the cluster graph, stitched back through cluster trees and witness edges."""
    g: WeightedGraph = field(repr=False)
    partition: StretchFriendlyPartition
    cluster_graph: ClusterGraph
    inner: object = field(repr=False)
    declared_stretch: float
    edges: set = field(repr=False)
    params: dict = field(default_factory=dict)

    def _tree(self, x: int, y: int) -> PathResult:
        return self.partition.tree_path(x, y)

    def _cluster_of(self, v: int) -> int:
        return int(self.partition.cluster[v])

    def query_ops(self, u: int, v: int):
        g = self.g
        cu, cv = self._cluster_of(u), self._cluster_of(v)
        if cu == cv:
            return self._tree(u, v), 0, "cluster"
        q, ops, _ = self.inner.query_ops(cu, cv)
        if q is None:
            return None, ops, "unreachable"
        out = PathResult.trivial(u)
        cur = u
        wit = self.cluster_graph.witness
        for c, e in zip(q.vertices, q.edges):
            f = int(wit[e])
            x, y = int(g.eu[f]), int(g.ev[f])
            if self._cluster_of(x) != c:
                x, y = y, x
            out = out.concat(self._tree(cur, x)).concat(PathResult([x, y], [f], float(g.ew[f])))
            cur = y
        return out.concat(self._tree(cur, v)), ops, "stitched"

    def query(self, u: int, v: int) -> PathResult | None:
        return self.query_ops(u, v)[0]

    def size_breakdown(self) -> dict:
        return {"parent_pointers": self.g.n, "cluster_and_depth": 2 * self.g.n,
                "inner": self.inner.size_words, "witness_edges": len(self.inner.edges)}

    @property
    def size_words(self) -> int:
        return sum(self.size_breakdown().values())

    def describe(self) -> dict:
        return {**self.params, "declared_stretch": self.declared_stretch,
                "spanner_edges": len(self.edges), "clusters": self.partition.count,
                "max_depth": self.partition.max_depth}


class UltraSparsePRDO(PartitionPRDO):
    """Same answers as the plain wrap; cluster id and depth are recovered by walking to the root."""

    def _walk(self, v: int):
        d, x = 0, v
        par = self.partition.parent
        while par[x] >= 0:
            x = int(par[x])
            d += 1
        return x, d

    def _cluster_of(self, v: int) -> int:
        r, _ = self._walk(v)
        return int(np.searchsorted(self.partition.roots, r))

    def _tree(self, x: int, y: int) -> PathResult:
        depth = {x: self._walk(x)[1], y: self._walk(y)[1]}
        par = self.partition.parent

        class _Depth(dict):
            def __missing__(s, z):
                s[z] = self._walk(z)[1]
                return s[z]

        dd = _Depth(depth)
        verts = tree_path(par, dd, x, y)
        g = self.g
        edges, w = [], 0.0
        pe = self.partition.parent_edge
        for a, b in zip(verts, verts[1:]):
            e = int(pe[a]) if par[a] == b else int(pe[b])
            edges.append(e)
            w += float(g.ew[e])
        return PathResult(verts, edges, w)

    def size_breakdown(self) -> dict:
        return {"parent_pointers": self.g.n, "inner": self.inner.size_words,
                "witness_edges": len(self.inner.edges)}


def compose_with_partition(g: WeightedGraph, t: int, inner_builder, ultra: bool = False,
                           params=None) -> PartitionPRDO:
    """inner_builder(cluster_graph) must return an oracle with query_ops, edges and declared_stretch."""
    part = build_stretch_friendly_partition(g, t)
    cg = ClusterGraph.build(part)
    inner = inner_builder(cg.graph)
    edges = part.tree_edges() | {int(cg.witness[e]) for e in inner.edges}
    D = part.max_depth
    declared = 2 * D + (2 * D + 1) * inner.declared_stretch
    cls = UltraSparsePRDO if ultra else PartitionPRDO
    par = {"t": t, "clusters": part.count, "max_depth": D, "depth_constant": part.depth_constant,
           "inner_stretch": inner.declared_stretch, **(params or {})}
    return cls(g, part, cg, inner, declared, edges, par)


def compose_ultra_sparse(g: WeightedGraph, t: int, inner_builder, params=None) -> UltraSparsePRDO:
    return compose_with_partition(g, t, inner_builder, ultra=True, params=params)


class ExactInner:
    """Exact shortest-path oracle, used when the cluster graph is too small for a composed oracle."""

    def __init__(self, g: WeightedGraph):
        self.g = g
        self.edges = set()
        self.paths = {}
        for s in range(g.n):
            for x in range(s + 1, g.n):
                p = g.shortest_path(s, x)
                if p is not None:
                    self.paths[(s, x)] = p
                    self.edges.update(p.edges)
        self.declared_stretch = 1.0

    def query_ops(self, u: int, v: int):
        if u == v:
            return PathResult.trivial(u), 0, "direct"
        p = self.paths.get((min(u, v), max(u, v)))
        if p is None:
            return None, 0, "unreachable"
        return (p if p.vertices[0] == u else p.reversed()), 1, "direct"

    @property
    def size_words(self) -> int:
        return sum(len(p.vertices) for p in self.paths.values())


def _inner_builder(k: int, eps: float, seed: int, preset: str = "thm6.2"):
    def build(h: WeightedGraph):
        if h.n < 8 or h.m == 0:
            return ExactInner(h)
        kk = max(3, min(k, h.n - 1))
        return compose_prdo(h, kk, eps, seed=seed, preset=preset, strict=False)
    return build


def wrap_t(n: int, k: int, preset: str) -> int:
    if preset == "ultra":
        return max(2, math.ceil(math.log2(math.log2(max(n, 4))) - 1e-12))
    return max(1, math.ceil(k * _loglog_ratio(n) - 1e-12))


def build_preset(g: WeightedGraph, k: int, eps: float, preset: str, seed: int = 0, strict: bool = True):
    """Any named preset, including the two partition wraps."""
    if preset in PRESETS:
        return compose_prdo(g, k, eps, seed=seed, preset=preset, strict=strict)
    if preset not in WRAP_PRESETS:
        raise ValueError(f"unknown preset {preset!r}")
    t = wrap_t(g.n, k, preset)
    if preset == "ultra":
        k_in = max(3, math.ceil(math.log2(max(g.n, 2)) - 1e-12))
        return compose_ultra_sparse(g, t, _inner_builder(k_in, eps, seed), {"preset": preset, "k": k_in, "eps": eps})
    return compose_with_partition(g, t, _inner_builder(k, eps, seed), params={"preset": preset, "k": k, "eps": eps})


def prdo_query(p, u: int, v: int) -> PathResult | None:
    return p.query(u, v)
