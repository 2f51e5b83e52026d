"""Interactive emulators over a metric on a vertex subset: TZ, HST-based and cover-based."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import PathResult, WeightedGraph, virtual_id
from .hierarchy import build_hierarchy
from .partial_tz import assemble_partial_tz, even_up

GUPTA_LIMIT = 8.0
EXHAUSTIVE_TERMINALS = 512


class ConstructionError(RuntimeError):
    pass


# ------------------------------------------------------------------ metric

class MetricGraph:
    """Shortest-path metric of G restricted to ``vertices``; local ids index the matrix."""

    def __init__(self, vertices, dist: np.ndarray, g: WeightedGraph | None = None):
        self.vertices = np.asarray(vertices, dtype=np.int64)
        self.dist = np.asarray(dist, dtype=float)
        self.g = g
        self.local = {int(v): i for i, v in enumerate(self.vertices.tolist())}
        self._graph = None

    @classmethod
    def from_graph(cls, g: WeightedGraph, vertices) -> "MetricGraph":
        vs = np.unique(np.asarray(vertices, dtype=np.int64))
        return cls(vs, g.apsp()[0][np.ix_(vs, vs)], g)

    @classmethod
    def from_matrix(cls, dist) -> "MetricGraph":
        d = np.asarray(dist, dtype=float)
        return cls(np.arange(d.shape[0]), d)

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def graph(self) -> WeightedGraph:
        """Complete graph on local ids weighted by the metric (infinite pairs omitted)."""
        if getattr(self, "_graph", None) is None:
            iu, ju = np.triu_indices(self.size, 1)
            w = self.dist[iu, ju]
            keep = np.isfinite(w)
            self._graph = WeightedGraph(self.size, iu[keep], ju[keep], w[keep])
        return self._graph

    def components(self) -> np.ndarray:
        fin = np.isfinite(self.dist)
        return np.argmax(fin, axis=1)


# ------------------------------------------------------------------ shared tree walking

def tree_path(parent, depth, a: int, b: int):
    """Vertex list a -> b in a rooted forest given parent and depth arrays (or dicts)."""
    left, right = [a], [b]
    x, y = a, b
    while depth[x] > depth[y]:
        x = int(parent[x])
        left.append(x)
    while depth[y] > depth[x]:
        y = int(parent[y])
        right.append(y)
    while x != y:
        if parent[x] < 0 or parent[y] < 0:
            return None
        x, y = int(parent[x]), int(parent[y])
        left.append(x)
        right.append(y)
    return left + right[-2::-1]


class _VirtualEdges:
    """Registry of emulator edges in G ids; each edge is reported as a virtual marker."""

    def __init__(self):
        self.edges = []
        self.index = {}

    def add(self, a: int, b: int, w: float, tag=None) -> int:
        key = (min(a, b), max(a, b), tag)
        j = self.index.get(key)
        if j is None:
            j = len(self.edges)
            self.index[key] = j
            self.edges.append((min(a, b), max(a, b), float(w)))
        return j

    def lookup(self, a: int, b: int, tag=None) -> int:
        return self.index[(min(a, b), max(a, b), tag)]


def _virtual_path(reg: _VirtualEdges, verts, tag=None) -> PathResult:
    edges, w = [], 0.0
    for a, b in zip(verts, verts[1:]):
        j = reg.lookup(a, b, tag)
        edges.append(virtual_id(j))
        w += reg.edges[j][2]
    return PathResult(list(verts), edges, w)


@dataclass
class InteractiveEmulator:
    kind: str
    metric: MetricGraph = field(repr=False)
    declared_stretch: float
    params: dict

    @property
    def edge_list(self):
        return self._reg.edges

    @property
    def pairs(self):
        return sorted({(a, b) for a, b, _ in self._reg.edges})

    def query(self, u: int, v: int) -> PathResult | None:
        return self.query_ops(u, v)[0]

    def _check(self, u, v):
        if u not in self.metric.local or v not in self.metric.local:
            raise KeyError(f"({u},{v}) not in emulator vertex set")


# ------------------------------------------------------------------ TZ emulator

class TZEmulator(InteractiveEmulator):
    """Full TZ hierarchy on the metric, queried with the partial-TZ search at h = k1 (rounded even)."""

    def __init__(self, metric: MetricGraph, k1: int, seed: int = 0):
        if k1 < 1:
            raise ValueError("k1 must be at least 1")
        K = metric.graph
        n = max(metric.size, 2)
        hier = build_hierarchy(K, [n ** (-1.0 / k1)] * (k1 - 1), seed)
        h = even_up(k1)
        self.core = assemble_partial_tz(K, hier, h, k1)
        super().__init__("tz", metric, float(2 * k1 - 1), {"k1": k1, "h": h})
        self._reg = _VirtualEdges()
        V = metric.vertices
        for e in sorted(self.core.edges):
            a, b = int(K.eu[e]), int(K.ev[e])
            self._reg.add(int(V[a]), int(V[b]), float(K.ew[e]))

    def query_ops(self, u: int, v: int):
        self._check(u, v)
        if u == v:
            return PathResult.trivial(u), 0
        lu, lv = self.metric.local[u], self.metric.local[v]
        ans = self.core.query(lu, lv)
        if ans is None:
            return None, 0
        if not ans.direct:
            raise ConstructionError("TZ emulator search escaped; top level should always succeed")
        V = self.metric.vertices
        return _virtual_path(self._reg, [int(V[x]) for x in ans.path.vertices]), ans.q_evals

    @property
    def size_words(self) -> int:
        return self.core.size_words


def build_tz_emulator(m: MetricGraph, k1: int, seed: int = 0) -> TZEmulator:
    return TZEmulator(m, k1, seed)


# ------------------------------------------------------------------ HSTs

@dataclass
class HST:
    """Rooted labelled forest; leaves carry the points they stand for."""
    parent: np.ndarray
    label: np.ndarray
    leaf_point: np.ndarray
    leaf_of: dict

    def __post_init__(self):
        self.depth = np.zeros(len(self.parent), dtype=np.int64)
        for x in range(len(self.parent)):
            # parents are always created before children
            p = self.parent[x]
            self.depth[x] = 0 if p < 0 else self.depth[p] + 1

    @property
    def points(self):
        return sorted(self.leaf_of)

    def validate(self):
        for x, p in enumerate(self.parent.tolist()):
            if p >= 0 and self.label[x] > self.label[p]:
                raise ConstructionError(f"child label above parent at node {x}")
            if self.leaf_point[x] >= 0 and self.label[x] != 0:
                raise ConstructionError(f"leaf {x} has nonzero label")
        if np.any(self.label < 0):
            raise ConstructionError("negative label")

    def lca(self, a: int, b: int) -> int:
        x, y = self.leaf_of[a], self.leaf_of[b]
        while self.depth[x] > self.depth[y]:
            x = self.parent[x]
        while self.depth[y] > self.depth[x]:
            y = self.parent[y]
        while x != y:
            if self.parent[x] < 0:
                return -1
            x, y = self.parent[x], self.parent[y]
        return int(x)

    def rho(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        z = self.lca(a, b)
        return math.inf if z < 0 else float(self.label[z])

    def rho_matrix(self, pts=None) -> np.ndarray:
        """Tree distances (lca labels) over the given points, default all leaves, in one pass."""
        pts = self.points if pts is None else list(pts)
        pos = {p: i for i, p in enumerate(pts)}
        out = np.full((len(pts), len(pts)), np.inf)
        np.fill_diagonal(out, 0.0)
        below = [[] for _ in range(len(self.parent))]
        for p in pts:
            below[self.leaf_of[p]].append(pos[p])
        order = np.argsort(-self.depth, kind="stable")
        for x in order.tolist():
            p = self.parent[x]
            if p >= 0:
                if below[p] and below[x]:
                    a = np.array(below[p])
                    b = np.array(below[x])
                    out[np.ix_(a, b)] = self.label[p]
                    out[np.ix_(b, a)] = self.label[p]
                below[p].extend(below[x])
        return out


def hst_from_partition(points, labels_by_level, radii) -> HST:
    """Build an HST from nested partitions (level 0 coarsest), compressing single-child chains."""
    points = list(points)
    parent, label, leaf_point = [], [], []
    node_of = {}
    prev = None
    for t, lab in enumerate(labels_by_level):
        groups = {}
        for idx, c in enumerate(lab.tolist()):
            groups.setdefault(c, []).append(idx)
        cur = {}
        for c, members in groups.items():
            key = tuple(members)
            par = -1 if prev is None else prev[members[0]]
            if par >= 0 and tuple(node_of[par]) == key:
                node = par
            else:
                node = len(parent)
                parent.append(par)
                label.append(0.0)
                leaf_point.append(-1)
                node_of[node] = members
            if len(members) == 1:
                label[node] = 0.0
                leaf_point[node] = points[members[0]]
            else:
                label[node] = float(radii[t])
            for m in members:
                cur[m] = node
        prev = cur
    leaf_of = {points[i]: prev[i] for i in range(len(points))}
    return HST(np.array(parent, dtype=np.int64), np.array(label), np.array(leaf_point, dtype=np.int64), leaf_of)


def hst_edge_weights(t: HST):
    """Tree edges (child, parent, (ℓ(parent) - ℓ(child)) / 2); leaf distances equal lca labels."""
    out = []
    for x, p in enumerate(t.parent.tolist()):
        if p >= 0:
            w = (t.label[p] - t.label[x]) / 2
            if w < 0:
                raise ConstructionError(f"negative label difference on edge {x}-{p}")
            out.append((x, p, float(w)))
    return out


def random_hst(n_leaves: int, seed: int = 0, max_children: int = 4) -> HST:
    """Random HST with integer labels, used by tests and benchmarks."""
    rng = np.random.default_rng(seed)
    parent, label, leaf_point, leaf_of = [], [], [], {}

    def grow(par, count, cap):
        node = len(parent)
        parent.append(par)
        leaf_point.append(-1)
        if count == 1:
            label.append(0.0)
            leaf_point[node] = len(leaf_of)
            leaf_of[len(leaf_of)] = node
            return
        label.append(float(rng.integers(max(1, cap // 8), cap + 1)))
        kids = int(min(count, rng.integers(2, max_children + 1)))
        cuts = np.sort(rng.choice(np.arange(1, count), kids - 1, replace=False))
        for size in np.diff(np.concatenate([[0], cuts, [count]])).tolist():
            grow(node, int(size), max(1, int(label[node])))

    grow(-1, n_leaves, 2 ** 12)
    return HST(np.array(parent, dtype=np.int64), np.array(label), np.array(leaf_point, dtype=np.int64), leaf_of)


# ------------------------------------------------------------------ Gupta contraction

@dataclass
class ContractedTree:
    """A tree on the terminals only, with measured distortion against the source tree."""
    terminals: list
    edges: list
    min_ratio: float
    max_ratio: float
    exhaustive: bool

    def rooted(self):
        """Parent / depth / parent-weight dicts rooted at the smallest terminal of each component."""
        adj = {t: [] for t in self.terminals}
        for a, b, w in self.edges:
            adj[a].append((b, w))
            adj[b].append((a, w))
        parent, depth, pw = {}, {}, {}
        for r in self.terminals:
            if r in parent:
                continue
            parent[r], depth[r], pw[r] = -1, 0, 0.0
            stack = [r]
            while stack:
                x = stack.pop()
                for y, w in sorted(adj[x]):
                    if y not in parent:
                        parent[y], depth[y], pw[y] = x, depth[x] + 1, w
                        stack.append(y)
        return parent, depth, pw


def _distortion(terminals, edges, reference, sample_rng=None):
    pos = {t: i for i, t in enumerate(terminals)}
    tg = WeightedGraph.from_edges(len(terminals), [(pos[a], pos[b], w) for a, b, w in edges if w > 0]) \
        if edges else WeightedGraph(len(terminals), [], [], [])
    zero = [(pos[a], pos[b]) for a, b, w in edges if w == 0]
    if zero:
        raise ConstructionError("zero-weight contracted edge")
    d = tg.apsp()[0]
    iu, ju = np.triu_indices(len(terminals), 1)
    if sample_rng is not None and len(iu) > 200000:
        pick = sample_rng.choice(len(iu), 200000, replace=False)
        iu, ju = iu[pick], ju[pick]
    ref = reference[iu, ju]
    ok = np.isfinite(ref)
    r = d[iu, ju][ok] / ref[ok]
    if r.size == 0:
        return 1.0, 1.0
    return float(r.min()), float(r.max())


def gupta_contract_hst(t: HST, check: bool = True) -> ContractedTree:
    """Remove the internal nodes of an HST, keeping leaf distances within a factor 8."""
    n = len(t.parent)
    rounded = np.array([0.0 if l <= 0 else 2.0 ** math.ceil(math.log2(l) - 1e-12) for l in t.label])
    group = np.arange(n)
    order = np.argsort(t.depth, kind="stable")
    for x in order.tolist():
        p = t.parent[x]
        if p >= 0 and t.leaf_point[x] < 0 and rounded[x] == rounded[p]:
            group[x] = group[p]
    rep = {}
    children = {}
    for x in np.argsort(-t.depth, kind="stable").tolist():
        if t.leaf_point[x] >= 0:
            rep[x] = int(t.leaf_point[x])
        p = t.parent[x]
        if p >= 0 and group[x] != group[p]:
            children.setdefault(int(group[p]), []).append(int(group[x]) if t.leaf_point[x] < 0 else x)
    # groups are resolved bottom-up: a group's rep is the smallest rep among its children
    def resolve(gid):
        if gid in rep:
            return rep[gid]
        best = min(resolve(c) for c in children.get(gid, []))
        rep[gid] = best
        return best

    for gid in sorted(set(group.tolist()), key=lambda z: -t.depth[z]):
        if t.leaf_point[gid] < 0 and gid in children:
            resolve(gid)
    edges = []
    for gid, kids in children.items():
        if t.leaf_point[gid] >= 0 and gid not in rep:
            continue
        rg = rep[gid]
        for c in kids:
            rc = rep[c]
            if rc != rg:
                edges.append((min(rc, rg), max(rc, rg), t.rho(rc, rg)))
    terminals = t.points
    lo, hi = 1.0, 1.0
    exhaustive = len(terminals) <= EXHAUSTIVE_TERMINALS
    if check and len(terminals) > 1:
        ref = t.rho_matrix(terminals)
        lo, hi = _distortion(terminals, edges, ref, None if exhaustive else np.random.default_rng(0))
        if lo < 1 - 1e-9 or hi > GUPTA_LIMIT + 1e-9:
            raise ConstructionError(f"contraction distortion [{lo}, {hi}] outside [1, 8]")
    return ContractedTree(terminals, sorted(edges), lo, hi, exhaustive)


def gupta_contract(tree, terminals=None, check: bool = True) -> ContractedTree:
    """Contract a weighted tree onto its terminals.

    An HST is handled by the label-rounding scheme.  For a general tree (a
    WeightedGraph that is a forest) every node delegates to its nearest
    terminal below it, rooted at the smallest terminal; the result is checked
    and rejected when the distortion leaves [1, 8].
    """
    if isinstance(tree, HST):
        return gupta_contract_hst(tree, check)
    g = tree
    terms = sorted(int(x) for x in terminals)
    tset = set(terms)
    d = g.apsp()[0]
    parent = np.full(g.n, -1, dtype=np.int64)
    seen = np.zeros(g.n, dtype=bool)
    order = []
    for r in terms:
        if seen[r]:
            continue
        seen[r] = True
        stack = [r]
        while stack:
            x = stack.pop()
            order.append(x)
            for y, _ in g.adjacency(x):
                if not seen[y]:
                    seen[y] = True
                    parent[y] = x
                    stack.append(y)
    rep = np.full(g.n, -1, dtype=np.int64)
    for x in reversed(order):
        if x in tset:
            rep[x] = x
    for x in reversed(order):
        p = parent[x]
        if p >= 0 and rep[x] >= 0 and p not in tset:
            cur = rep[p]
            if cur < 0 or (d[p, rep[x]], rep[x]) < (d[p, cur], cur):
                rep[p] = rep[x]
    edges = set()
    for x in order:
        p = parent[x]
        if p >= 0 and rep[x] >= 0 and rep[p] >= 0 and rep[x] != rep[p]:
            a, b = int(rep[x]), int(rep[p])
            edges.add((min(a, b), max(a, b), float(d[a, b])))
    edges = sorted(edges)
    lo = hi = 1.0
    exhaustive = len(terms) <= EXHAUSTIVE_TERMINALS
    if check and len(terms) > 1:
        ref = d[np.ix_(terms, terms)]
        lo, hi = _distortion(terms, edges, ref, None if exhaustive else np.random.default_rng(0))
        if lo < 1 - 1e-9 or hi > GUPTA_LIMIT + 1e-9:
            raise ConstructionError(f"contraction distortion [{lo}, {hi}] outside [1, 8]")
    return ContractedTree(terms, edges, lo, hi, exhaustive)


# ------------------------------------------------------------------ Mendel-Naor style hierarchy

def _carve(D: np.ndarray, rng):
    """Nested random ball-carving partitions of all points of D until every part is a singleton.

    Returns (labels per level, radius bound per level); parts at level t have diameter <= radii[t].
    """
    m = D.shape[0]
    fin = np.isfinite(D)
    comp = np.argmax(fin, axis=1)
    finite = D[fin]
    dmax = float(finite.max()) if finite.size else 1.0
    dmax = max(dmax, 1e-300)
    labels = [comp.astype(np.int64)]
    radii = [dmax]
    rank = rng.permutation(m)
    t = 0
    while len(np.unique(labels[-1])) < m:
        t += 1
        r_next = dmax / 2 ** t
        prev = labels[-1]
        cur = np.empty(m, dtype=np.int64)
        for c in np.unique(prev).tolist():
            members = np.nonzero(prev == c)[0]
            if len(members) == 1:
                cur[members] = members[0]
                continue
            R = rng.uniform(r_next / 4, r_next / 2)
            centers = members[np.argsort(rank[members], kind="stable")]
            close = D[np.ix_(centers, members)] <= R
            first = np.argmax(close, axis=0)
            cur[members] = centers[first]
        labels.append(cur)
        radii.append(r_next)
        if t > 2000:
            raise ConstructionError("partition did not separate points")
    return labels, radii


def _rho_from_partition(labels, radii) -> np.ndarray:
    m = len(labels[0])
    rho = np.full((m, m), np.inf)
    for lab, r in zip(labels, radii):
        same = lab[:, None] == lab[None, :]
        rho[same] = r
    np.fill_diagonal(rho, 0.0)
    return rho


@dataclass
class MNHierarchy:
    levels: list
    hsts: list
    removed_ratio: list
    max_ratio: float
    k1: int

    @property
    def c_mn(self) -> float:
        return self.max_ratio / self.k1

    @property
    def total_size(self) -> int:
        return int(sum(len(x) for x in self.levels))


def build_mn_hierarchy(m: MetricGraph, k1: int, seed: int = 0, tries: int = 4) -> MNHierarchy:
    """Shrinking point sets with an HST on each; points leaving at level j have bounded tree/metric ratio."""
    if k1 < 1:
        raise ValueError("k1 must be at least 1")
    rng = np.random.default_rng(seed)
    N = max(m.size, 2)
    X = np.arange(m.size)
    levels, hsts, ratios = [], [], []
    worst = 1.0
    while len(X):
        best = None
        quota = math.ceil(len(X) * N ** (-1.0 / k1))
        for _ in range(tries):
            D = m.dist[np.ix_(X, X)]
            labels, radii = _carve(D, rng)
            rho = _rho_from_partition(labels, radii)
            with np.errstate(invalid="ignore", divide="ignore"):
                r = np.where(np.isfinite(D) & (D > 0), rho / np.where(D > 0, D, 1), 0.0)
            if np.any(np.isfinite(D) & (rho < D * (1 - 1e-12))):
                continue
            ratio = r.max(axis=0) if len(X) > 1 else np.zeros(1)
            order = np.lexsort((X, ratio))
            take = set(order[:quota].tolist()) | set(np.nonzero(ratio <= 4 * k1)[0].tolist())
            take = np.array(sorted(take))
            score = (float(ratio[take].max()), -len(take))
            if best is None or score < best[0]:
                best = (score, labels, radii, take, ratio)
        if best is None:
            raise ConstructionError("ultrametric lower bound failed on every retry")
        _, labels, radii, take, ratio = best
        hst = hst_from_partition(X.tolist(), labels, radii)
        hst.validate()
        levels.append(X.copy())
        hsts.append(hst)
        ratios.append(float(ratio[take].max()))
        worst = max(worst, ratios[-1])
        keep = np.ones(len(X), dtype=bool)
        keep[take] = False
        X = X[keep]
    return MNHierarchy(levels, hsts, ratios, worst, k1)


class MNEmulator(InteractiveEmulator):
    """Union of contracted HSTs; a query walks the tree of level min(j(u), j(v))."""

    def __init__(self, metric: MetricGraph, k1: int, seed: int = 0):
        mh = build_mn_hierarchy(metric, k1, seed)
        self.mn = mh
        self.top = np.zeros(metric.size, dtype=np.int64)
        self.parent, self.depth = [], []
        self.contracted = []
        reg = _VirtualEdges()
        V = metric.vertices
        gmax = 1.0
        for j, (X, hst) in enumerate(zip(mh.levels, mh.hsts)):
            self.top[X] = j
            ct = gupta_contract_hst(hst)
            gmax = max(gmax, ct.max_ratio)
            self.contracted.append(ct)
            par, dep, _ = ct.rooted()
            self.parent.append({x: par[x] for x in X.tolist()})
            self.depth.append({x: dep[x] for x in X.tolist()})
            for a, b, w in ct.edges:
                reg.add(int(V[a]), int(V[b]), w, tag=j)
        self._reg = reg
        super().__init__("mn", metric, GUPTA_LIMIT * mh.max_ratio,
                         {"k1": k1, "levels": len(mh.levels), "max_ratio": mh.max_ratio,
                          "c_mn": mh.c_mn, "gupta_max": gmax, "sum_level_sizes": mh.total_size})

    def estimate(self, u: int, v: int) -> float:
        """Tree distance at the lower of the two top levels; lies in [d, max_ratio * d]."""
        a, b = self.metric.local[u], self.metric.local[v]
        j = min(self.top[a], self.top[b])
        return self.mn.hsts[j].rho(a, b)

    def query_ops(self, u: int, v: int):
        self._check(u, v)
        if u == v:
            return PathResult.trivial(u), 1
        a, b = self.metric.local[u], self.metric.local[v]
        j = int(min(self.top[a], self.top[b]))
        verts = tree_path(self.parent[j], self.depth[j], a, b)
        if verts is None:
            return None, 1
        V = self.metric.vertices
        return _virtual_path(self._reg, [int(V[x]) for x in verts], tag=j), 1

    @property
    def size_words(self) -> int:
        return int(self.metric.size + 2 * self.mn.total_size)

    def size_breakdown(self) -> dict:
        return {"top_level": self.metric.size, "tree_parent_depth": 2 * self.mn.total_size}


def build_mn_emulator(m: MetricGraph, k1: int, seed: int = 0) -> MNEmulator:
    return MNEmulator(m, k1, seed)


# ------------------------------------------------------------------ cover coarsening

@dataclass
class Cover:
    """Clusters as sorted vertex arrays with a declared center each."""
    clusters: list
    centers: list


def induced_tree(g: WeightedGraph, members, center: int):
    """Shortest-path tree of G[members] from center: (dist, parent) over all of V (inf/-1 outside)."""
    thr = np.zeros(g.n)
    thr[np.asarray(members, dtype=np.int64)] = np.inf
    dist, _, par, _ = g.multi_source([center], thr)
    return dist, par


def cover_radius(g: WeightedGraph, cover: Cover) -> float:
    r = 0.0
    for c, ctr in zip(cover.clusters, cover.centers):
        dist, _ = induced_tree(g, c, ctr)
        r = max(r, float(dist[c].max()))
    return r


def optimal_centers(g: WeightedGraph, clusters) -> list:
    out = []
    for c in clusters:
        best = None
        for x in np.asarray(c).tolist():
            dist, _ = induced_tree(g, c, x)
            ecc = float(dist[c].max())
            if best is None or ecc < best[0]:
                best = (ecc, x)
        out.append(best[1])
    return out


def coarsen_cover(g: WeightedGraph, clusters, k: int, centers=None, check: bool = True) -> Cover:
    """Merge clusters in phases of disjoint kernels.

    Each kernel grows from a seed while the clusters touching it outnumber the
    kernel's clusters by more than |S|^(1/k); the kernel is emitted with the
    seed's center and the touching clusters leave the phase.
    """
    clusters = [np.unique(np.asarray(c, dtype=np.int64)) for c in clusters]
    m = len(clusters)
    if centers is None:
        centers = optimal_centers(g, clusters)
    M = np.zeros((m, g.n), dtype=bool)
    for i, c in enumerate(clusters):
        M[i, c] = True
    factor = m ** (1.0 / k)
    covered = np.zeros(m, dtype=bool)
    out_clusters, out_centers, home = [], [], np.full(m, -1, dtype=np.int64)
    phases = 0
    while not covered.all():
        phases += 1
        pool = ~covered
        while pool.any():
            seed = int(np.nonzero(pool)[0][0])
            Y = np.zeros(m, dtype=bool)
            Y[seed] = True
            while True:
                kernel = M[Y].any(axis=0)
                Z = pool & (M[:, kernel].any(axis=1))
                if Z.sum() <= factor * Y.sum():
                    break
                Y = Z
            kernel = M[Y].any(axis=0)
            idx = len(out_clusters)
            out_clusters.append(np.nonzero(kernel)[0])
            out_centers.append(int(centers[seed]))
            home[Y] = idx
            covered |= Y
            pool &= ~Z
    cover = Cover(out_clusters, out_centers)
    cover.home = home
    cover.phases = phases
    if check:
        check_coarsening(g, clusters, centers, cover, k)
    return cover


def check_coarsening(g, clusters, centers, cover: Cover, k: int, rad_in: float | None = None):
    """Assert containment, radius and membership; returns the measured quantities."""
    m = len(clusters)
    for i, c in enumerate(clusters):
        t = cover.clusters[cover.home[i]]
        if not np.all(np.isin(c, t)):
            raise ConstructionError(f"cluster {i} not contained in its home cluster")
    if rad_in is None:
        rad_in = cover_radius(g, Cover(clusters, list(centers)))
    rad_out = cover_radius(g, cover)
    if rad_out > (2 * k - 1) * rad_in * (1 + 1e-9):
        raise ConstructionError(f"radius {rad_out} exceeds (2k-1)*{rad_in}")
    count = np.zeros(g.n, dtype=np.int64)
    for t in cover.clusters:
        count[t] += 1
    bound = 2 * k * m ** (1.0 / k)
    if count.max(initial=0) > bound:
        raise ConstructionError(f"membership {count.max()} exceeds {bound}")
    return {"rad_in": rad_in, "rad_out": rad_out, "max_membership": int(count.max(initial=0)),
            "membership_bound": bound}


# ------------------------------------------------------------------ cover-based emulator

class APEmulator(InteractiveEmulator):
    """Neighborhood covers at scales (1+eps)^i, searched with an HST distance estimate."""

    def __init__(self, metric: MetricGraph, k1: int, eps: float, seed: int = 0):
        if k1 < 1 or not eps > 0:
            raise ValueError("need k1 >= 1 and eps > 0")
        K = metric.graph
        D = metric.dist
        fin = np.isfinite(D) & (D > 0)
        unit = float(D[fin].min()) if fin.any() else 1.0
        diam = float(D[fin].max() / unit) if fin.any() else 1.0
        lam = max(0, math.ceil(math.log(diam) / math.log1p(eps) - 1e-12)) if diam > 1 else 0
        self.mn_part = MNEmulator(metric, k1, seed)
        self.C = self.mn_part.mn.max_ratio
        self.unit, self.diam, self.lam, self.eps = unit, diam, lam, eps
        self.home = np.zeros((lam + 1, metric.size), dtype=np.int64)
        self.trees = []
        reg = _VirtualEdges()
        V = metric.vertices
        stats = []
        for i in range(lam + 1):
            W = unit * (1 + eps) ** i
            balls = [np.nonzero(D[v] <= W * (1 + 1e-12))[0] for v in range(metric.size)]
            cover = coarsen_cover(K, balls, k1, centers=list(range(metric.size)), check=False)
            st = check_coarsening(K, balls, list(range(metric.size)), cover, k1, rad_in=W)
            stats.append(st)
            self.home[i] = cover.home
            level = []
            for c, ctr in zip(cover.clusters, cover.centers):
                dist, par = induced_tree(K, c, ctr)
                members = c.tolist()
                parent = {x: int(par[x]) for x in members}
                depth = {}
                for x in sorted(members, key=lambda z: dist[z]):
                    depth[x] = 0 if parent[x] < 0 else depth[parent[x]] + 1
                level.append((set(members), parent, depth))
                for x in members:
                    if parent[x] >= 0:
                        reg.add(int(V[x]), int(V[parent[x]]), float(D[x, parent[x]]))
            self.trees.append(level)
        self._reg = reg
        self.cover_stats = stats
        super().__init__("ap", metric, 4 * (1 + eps) * k1,
                         {"k1": k1, "eps": eps, "lambda": lam, "unit": unit, "C": self.C,
                          "max_membership": max(s["max_membership"] for s in stats)})

    def query_ops(self, u: int, v: int):
        self._check(u, v)
        if u == v:
            return PathResult.trivial(u), 1
        a, b = self.metric.local[u], self.metric.local[v]
        est = self.mn_part.estimate(u, v)
        if not math.isfinite(est):
            return None, 1
        dh = min(est / self.unit, self.diam)
        base = math.log1p(self.eps)
        lo = max(0, math.floor(math.log(max(dh / self.C, 1e-300)) / base + 1e-12))
        hi = min(self.lam, max(0, math.ceil(math.log(dh) / base - 1e-12)))
        lo = min(lo, hi)
        ops = 1
        while lo < hi:
            mid = (lo + hi) // 2
            ops += 1
            members = self.trees[mid][self.home[mid, b]][0]
            if a in members:
                hi = mid
            else:
                lo = mid + 1
        members, parent, depth = self.trees[lo][self.home[lo, b]]
        ops += 1
        if a not in members:
            raise ConstructionError(f"({u},{v}) not covered at scale {lo}")
        verts = tree_path(parent, depth, a, b)
        V = self.metric.vertices
        return _virtual_path(self._reg, [int(V[x]) for x in verts]), ops

    @property
    def size_words(self) -> int:
        trees = sum(2 * len(t[0]) for level in self.trees for t in level)
        return int(self.home.size + trees + self.mn_part.size_words)

    def size_breakdown(self) -> dict:
        return {"home_clusters": int(self.home.size),
                "tree_pointers": sum(2 * len(t[0]) for level in self.trees for t in level),
                "hst_oracle": self.mn_part.size_words}


def build_ap_emulator(m, k1: int, eps: float, seed: int = 0) -> APEmulator:
    if isinstance(m, WeightedGraph):
        m = MetricGraph.from_graph(m, np.arange(m.n))
    return APEmulator(m, k1, eps, seed)


def emulator_query(e: InteractiveEmulator, u: int, v: int) -> PathResult | None:
    return e.query(u, v)


EMULATORS = {"tz": build_tz_emulator, "mn": build_mn_emulator}
