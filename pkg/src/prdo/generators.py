"""Seeded synthetic graphs with integer weights in [1, max_weight]."""
from __future__ import annotations

import numpy as np

from .graph import WeightedGraph


def _weights(rng, count, max_weight):
    return rng.integers(1, max_weight + 1, size=count).astype(float)


def erdos_renyi(n: int, p: float, seed: int = 0, max_weight: int = 100) -> WeightedGraph:
    """G(n, p) plus a random spanning tree, so the result is always connected."""
    rng = np.random.default_rng(seed)
    edges = {}
    perm = rng.permutation(n)
    for i in range(1, n):
        a, b = int(perm[i]), int(perm[rng.integers(0, i)])
        edges[(min(a, b), max(a, b))] = None
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.shape[0]) < p
    for a, b in zip(iu[keep].tolist(), ju[keep].tolist()):
        edges[(a, b)] = None
    keys = sorted(edges)
    w = _weights(rng, len(keys), max_weight)
    return WeightedGraph.from_edges(n, [(a, b, x) for (a, b), x in zip(keys, w)])


def grid(rows: int, cols: int, seed: int = 0, max_weight: int = 100) -> WeightedGraph:
    rng = np.random.default_rng(seed)
    keys = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                keys.append((v, v + 1))
            if r + 1 < rows:
                keys.append((v, v + cols))
    w = _weights(rng, len(keys), max_weight)
    return WeightedGraph.from_edges(rows * cols, [(a, b, x) for (a, b), x in zip(keys, w)])


def path_graph(n: int, seed: int = 0, max_weight: int = 100) -> WeightedGraph:
    rng = np.random.default_rng(seed)
    w = _weights(rng, n - 1, max_weight)
    return WeightedGraph.from_edges(n, [(i, i + 1, w[i]) for i in range(n - 1)])


def random_geometric(n: int, radius: float, seed: int = 0, max_weight: int = 100) -> WeightedGraph:
    """Unit-square points joined within radius; weight grows with distance.

    Components are chained together by their closest pair so the graph is connected.
    """
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    scale = max_weight / np.sqrt(2)
    edges = {}
    iu, ju = np.triu_indices(n, 1)
    for a, b in zip(iu.tolist(), ju.tolist()):
        if d[a, b] <= radius:
            edges[(a, b)] = max(1.0, float(np.ceil(d[a, b] * scale)))
    # join components greedily
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    order = np.argsort(d[iu, ju], kind="stable")
    for k in order.tolist():
        a, b = int(iu[k]), int(ju[k])
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            edges[(a, b)] = max(1.0, float(np.ceil(d[a, b] * scale)))
    return WeightedGraph.from_edges(n, [(a, b, w) for (a, b), w in sorted(edges.items())])


GENERATORS = {
    "er": erdos_renyi,
    "grid": grid,
    "path": path_graph,
    "geometric": random_geometric,
}


def generate(spec: str, seed: int = 0, max_weight: int = 100) -> WeightedGraph:
    """Build from a short text like 'er:200:0.05', 'grid:10x12', 'path:50', 'geometric:100:0.2'."""
    kind, *args = spec.split(":")
    if kind == "er":
        return erdos_renyi(int(args[0]), float(args[1]) if len(args) > 1 else 0.05, seed, max_weight)
    if kind == "grid":
        r, c = args[0].lower().split("x")
        return grid(int(r), int(c), seed, max_weight)
    if kind == "path":
        return path_graph(int(args[0]), seed, max_weight)
    if kind == "geometric":
        return random_geometric(int(args[0]), float(args[1]) if len(args) > 1 else 0.15, seed, max_weight)
    raise ValueError(f"unknown generator {kind!r}")
