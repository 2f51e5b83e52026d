"""Weighted undirected graphs, exact and hop-limited shortest paths, path checks."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

REL_TOL = 1e-9


class GraphFormatError(ValueError):
    pass


class PathError(ValueError):
    pass


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer, used to give each edge a fixed pseudo-random tie value
    z = (x.astype(np.uint64) + np.uint64(0x9E3779B97F4A7C15))
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(24)).astype(np.int64)


def is_virtual(e: int) -> bool:
    return e < 0


def virtual_id(j: int) -> int:
    """Marker used in PathResult.edges for the j-th virtual edge."""
    return -j - 1


def virtual_index(e: int) -> int:
    return -e - 1


@dataclass
class PathResult:
    vertices: list
    edges: list
    weight: float

    @staticmethod
    def trivial(u: int) -> "PathResult":
        return PathResult([u], [], 0.0)

    def reversed(self) -> "PathResult":
        return PathResult(self.vertices[::-1], self.edges[::-1], self.weight)

    def __len__(self):
        return len(self.edges)

    def concat(self, other: "PathResult") -> "PathResult":
        if self.vertices[-1] != other.vertices[0]:
            raise PathError(f"cannot join paths at {self.vertices[-1]} and {other.vertices[0]}")
        return PathResult(self.vertices + other.vertices[1:], self.edges + other.edges,
                          self.weight + other.weight)


@dataclass
class ShortestPathTree:
    source: int
    dist: np.ndarray
    parent: np.ndarray
    parent_edge: np.ndarray

    def path_to(self, g: "WeightedGraph", v: int) -> PathResult | None:
        if not np.isfinite(self.dist[v]):
            return None
        return _trace(g, self.parent_edge, self.source, v, float(self.dist[v]))


def _trace(g, parent_edge, src, v, weight) -> PathResult:
    verts = [v]
    edges = []
    x = v
    while x != src:
        e = int(parent_edge[x])
        if e < 0:
            raise PathError(f"no tree path from {src} to {v}")
        edges.append(e)
        a = int(g.eu[e])
        x = int(g.ev[e]) if a == x else a
        verts.append(x)
    verts.reverse()
    edges.reverse()
    return PathResult(verts, edges, weight)


class WeightedGraph:
    """Undirected graph on vertices 0..n-1 with positive finite weights.

    Edges are stored once with u < v, sorted, so edge ids are canonical.
    """

    def __init__(self, n: int, eu, ev, ew):
        self.n = int(n)
        self.eu = np.asarray(eu, dtype=np.int64)
        self.ev = np.asarray(ev, dtype=np.int64)
        self.ew = np.asarray(ew, dtype=np.float64)
        self._build_csr()
        self._apsp = None
        self._index = None

    @classmethod
    def from_edges(cls, n: int, edges) -> "WeightedGraph":
        best: dict = {}
        for item in edges:
            u, v, w = int(item[0]), int(item[1]), float(item[2])
            if u == v:
                raise GraphFormatError(f"self-loop at vertex {u}")
            if not (w > 0 and math.isfinite(w)):
                raise GraphFormatError(f"non-positive or non-finite weight {w} on ({u},{v})")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"vertex id out of range in ({u},{v}) for n={n}")
            key = (u, v) if u < v else (v, u)
            if key not in best or w < best[key]:
                best[key] = w
        keys = sorted(best)
        eu = [k[0] for k in keys]
        ev = [k[1] for k in keys]
        ew = [best[k] for k in keys]
        return cls(n, eu, ev, ew)

    def _build_csr(self):
        n, m = self.n, len(self.eu)
        src = np.concatenate([self.eu, self.ev])
        dst = np.concatenate([self.ev, self.eu])
        eid = np.concatenate([np.arange(m), np.arange(m)]).astype(np.int64)
        order = np.lexsort((eid, dst, src))
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, src + 1, 1)
        self.indptr = np.cumsum(self.indptr)
        self.nbr = dst[order].astype(np.int64)
        self.adj_eid = eid[order]
        self.adj_w = self.ew[self.adj_eid] if m else np.zeros(0)
        self.tie = _mix64(np.arange(m))
        self.adj_tie = self.tie[self.adj_eid] if m else np.zeros(0, dtype=np.int64)

    @property
    def m(self) -> int:
        return len(self.eu)

    def edges(self):
        return [(int(a), int(b), float(w)) for a, b, w in zip(self.eu, self.ev, self.ew)]

    def adjacency(self, v: int):
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return list(zip(self.nbr[lo:hi].tolist(), self.adj_eid[lo:hi].tolist()))

    def other(self, e: int, x: int) -> int:
        a = int(self.eu[e])
        return int(self.ev[e]) if a == x else a

    def edge_between(self, a: int, b: int) -> int:
        """Edge id joining a and b, or -1."""
        if self._index is None:
            self._index = {(int(x), int(y)): e for e, (x, y) in enumerate(zip(self.eu, self.ev))}
        return self._index.get((a, b) if a < b else (b, a), -1)

    def components(self) -> np.ndarray:
        """Component label per vertex (smallest vertex id in the component)."""
        parent = np.arange(self.n)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in zip(self.eu.tolist(), self.ev.tolist()):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        return np.array([find(x) for x in range(self.n)], dtype=np.int64)

    def apsp(self):
        """All-pairs distances and per-source parent-edge table (cached)."""
        if self._apsp is None:
            self._apsp = _kernels.apsp(self.indptr, self.nbr, self.adj_eid, self.adj_w, self.adj_tie)
        return self._apsp

    def dist(self, u: int, v: int) -> float:
        return float(self.apsp()[0][u, v])

    def shortest_path(self, u: int, v: int) -> PathResult | None:
        d, pe = self.apsp()
        if not np.isfinite(d[u, v]):
            return None
        return _trace(self, pe[u], u, v, float(d[u, v]))

    def aspect_ratio(self) -> float:
        d = self.apsp()[0]
        off = d[~np.eye(self.n, dtype=bool)]
        off = off[np.isfinite(off)]
        if off.size == 0:
            return 1.0
        return float(off.max() / off.min())

    def multi_source(self, sources, thr=None):
        return _kernels.sssp(self.indptr, self.nbr, self.adj_eid, self.adj_w, self.adj_tie,
                             np.asarray(sources, dtype=np.int64), thr)

    def __eq__(self, other):
        return (isinstance(other, WeightedGraph) and self.n == other.n
                and np.array_equal(self.eu, other.eu) and np.array_equal(self.ev, other.ev)
                and np.array_equal(self.ew, other.ew))

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={self.m})"


# ------------------------------------------------------------------ I/O

def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return source.decode()
    if isinstance(source, str):
        with open(source) as fh:
            return fh.read()
    data = source.read()
    return data.decode() if isinstance(data, bytes) else data


def load_graph(source, fmt: str = "edge-list") -> WeightedGraph:
    """Parse an edge list ("n m" header, then "u v w") or DIMACS .gr text."""
    text = _read_text(source)
    if fmt in ("edge-list", "edgelist", "txt"):
        return _parse_edge_list(text)
    if fmt in ("dimacs-gr", "dimacs", "gr"):
        return _parse_dimacs(text)
    raise GraphFormatError(f"unknown format {fmt!r}")


def _parse_edge_list(text: str) -> WeightedGraph:
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if n is None:
                if len(parts) != 2:
                    raise ValueError("header must be 'n m'")
                n, _ = int(parts[0]), int(parts[1])
                continue
            if len(parts) != 3:
                raise ValueError("edge line must be 'u v w'")
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise GraphFormatError(f"line {lineno}: {exc}") from None
    if n is None:
        raise GraphFormatError("line 1: missing header")
    try:
        return WeightedGraph.from_edges(n, edges)
    except GraphFormatError as exc:
        raise GraphFormatError(f"{exc}") from None


def _parse_dimacs(text: str) -> WeightedGraph:
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        try:
            if parts[0] == "p":
                n = int(parts[2])
            elif parts[0] == "a":
                if n is None:
                    raise ValueError("arc before problem line")
                edges.append((int(parts[1]) - 1, int(parts[2]) - 1, float(parts[3])))
            else:
                raise ValueError(f"unexpected record {parts[0]!r}")
        except (ValueError, IndexError) as exc:
            raise GraphFormatError(f"line {lineno}: {exc}") from None
    if n is None:
        raise GraphFormatError("missing problem line")
    return WeightedGraph.from_edges(n, edges)


def _fmt_w(w: float) -> str:
    if w.is_integer() and abs(w) < 2 ** 53:
        return str(int(w))
    return repr(w)


def save_graph(g: WeightedGraph, target=None, fmt: str = "edge-list") -> str:
    out = io.StringIO()
    if fmt in ("edge-list", "edgelist", "txt"):
        out.write(f"{g.n} {g.m}\n")
        for a, b, w in g.edges():
            out.write(f"{a} {b} {_fmt_w(w)}\n")
    elif fmt in ("dimacs-gr", "dimacs", "gr"):
        out.write(f"p sp {g.n} {2 * g.m}\n")
        for a, b, w in g.edges():
            out.write(f"a {a + 1} {b + 1} {_fmt_w(w)}\n")
            out.write(f"a {b + 1} {a + 1} {_fmt_w(w)}\n")
    else:
        raise GraphFormatError(f"unknown format {fmt!r}")
    text = out.getvalue()
    if isinstance(target, str):
        with open(target, "w") as fh:
            fh.write(text)
    elif target is not None:
        target.write(text)
    return text


# ------------------------------------------------------------------ queries

def dijkstra_sssp(g: WeightedGraph, source: int) -> ShortestPathTree:
    if not 0 <= source < g.n:
        raise IndexError(f"source {source} out of range")
    dist, _, par, pe = g.multi_source([source])
    return ShortestPathTree(source, dist, par, pe)


@dataclass
class HopGraph:
    """G together with extra virtual edges, laid out for round-based relaxation."""
    g: WeightedGraph
    extra: list = field(default_factory=list)

    def __post_init__(self):
        g = self.g
        xa = np.array([e[0] for e in self.extra], dtype=np.int64)
        xb = np.array([e[1] for e in self.extra], dtype=np.int64)
        xw = np.array([e[2] for e in self.extra], dtype=np.float64)
        xid = np.array([virtual_id(j) for j in range(len(self.extra))], dtype=np.int64)
        a = np.concatenate([g.eu, xa])
        b = np.concatenate([g.ev, xb])
        w = np.concatenate([g.ew, xw])
        ids = np.concatenate([np.arange(g.m, dtype=np.int64), xid])
        self.src2 = np.ascontiguousarray(np.concatenate([a, b]))
        self.dst2 = np.ascontiguousarray(np.concatenate([b, a]))
        self.w2 = np.ascontiguousarray(np.concatenate([w, w]))
        self.eid2 = np.ascontiguousarray(np.concatenate([ids, ids]))

    def edge_weight(self, e: int) -> float:
        if e >= 0:
            return float(self.g.ew[e])
        return float(self.extra[virtual_index(e)][2])

    def tables(self, source: int, rounds: int, stop_exact=None, alpha=1.0):
        return _kernels.bf_tables(self.g.n, self.src2, self.dst2, self.w2, self.eid2,
                                  source, rounds, stop_exact, alpha)

    def first_rounds(self, source: int, rounds: int, exact, alpha: float):
        return _kernels.bf_first_round(self.g.n, self.src2, self.dst2, self.w2,
                                       source, rounds, exact, alpha)


def trace_rounds(dist, pv, pe, v: int, b: int) -> PathResult | None:
    """Walk round tables back from (round b, vertex v) to the source."""
    b = min(b, dist.shape[0] - 1)
    if not np.isfinite(dist[b, v]):
        return None
    weight = float(dist[b, v])
    verts, edges = [v], []
    x = v
    while b > 0:
        if pe[b, x] == -1 and pv[b, x] == -1:
            b -= 1
            continue
        edges.append(int(pe[b, x]))
        x = int(pv[b, x])
        verts.append(x)
        b -= 1
    verts.reverse()
    edges.reverse()
    return PathResult(verts, edges, weight)


def hop_limited_distance(g: WeightedGraph, extra, u: int, v: int, beta: int):
    """Minimum weight of a u-v path in G plus extra using at most beta edges.

    Returns (weight, path); (inf, None) when no such path exists.
    Virtual edges appear in the path as negative markers (see virtual_id).
    """
    if beta < 1:
        raise ValueError("beta must be >= 1")
    if u == v:
        return 0.0, PathResult.trivial(u)
    hg = extra if isinstance(extra, HopGraph) else HopGraph(g, list(extra or []))
    rounds = min(int(beta), max(g.n - 1, 1))
    dist, pv, pe = hg.tables(u, rounds)
    p = trace_rounds(dist, pv, pe, v, dist.shape[0] - 1)
    if p is None:
        return math.inf, None
    return p.weight, p


# ------------------------------------------------------------------ validation

class EdgeSet:
    """An edge universe: a subset of G's edges plus optional virtual edges."""

    def __init__(self, g: WeightedGraph, allowed=None, virtual=None):
        self.g = g
        self.allowed = None if allowed is None else set(int(e) for e in allowed)
        self.virtual = list(virtual or [])

    def lookup(self, e: int):
        if e >= 0:
            if e >= self.g.m or (self.allowed is not None and e not in self.allowed):
                return None
            return int(self.g.eu[e]), int(self.g.ev[e]), float(self.g.ew[e])
        j = virtual_index(e)
        if j >= len(self.virtual):
            return None
        a, b, w = self.virtual[j]
        return int(a), int(b), float(w)

    def __len__(self):
        base = self.g.m if self.allowed is None else len(self.allowed)
        return base + len(self.virtual)


def validate_path(universe: EdgeSet, p: PathResult, u: int, v: int) -> float:
    if not p.vertices or p.vertices[0] != u or p.vertices[-1] != v:
        raise PathError(f"path does not run from {u} to {v}")
    if len(p.edges) != len(p.vertices) - 1:
        raise PathError("broken adjacency: edge count does not match vertex count")
    total = 0.0
    for i, e in enumerate(p.edges):
        rec = universe.lookup(int(e))
        if rec is None:
            raise PathError(f"edge outside universe: {e}")
        a, b, w = rec
        x, y = p.vertices[i], p.vertices[i + 1]
        if not ((a == x and b == y) or (a == y and b == x)):
            raise PathError(f"broken adjacency at step {i}: edge {e} does not join {x} and {y}")
        total += w
    if abs(total - p.weight) > REL_TOL * max(1.0, abs(total)):
        raise PathError(f"weight mismatch: declared {p.weight}, actual {total}")
    return p.weight
