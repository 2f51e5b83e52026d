"""Reference implementations that share no code with the package's kernels."""
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from prdo.generators import erdos_renyi, grid, path_graph, random_geometric

TOL = 1e-9


def exact_apsp(g) -> np.ndarray:
    """All-pairs distances by scipy's Dijkstra."""
    if g.m == 0:
        d = np.full((g.n, g.n), np.inf)
        np.fill_diagonal(d, 0.0)
        return d
    a = csr_matrix((g.ew, (g.eu, g.ev)), shape=(g.n, g.n))
    return dijkstra(a, directed=False)


def hop_limited(n, edges, beta, sources=None) -> np.ndarray:
    """Row s holds the lightest weight of a path from s using at most beta edges.

    Plain Jacobi Bellman-Ford: every round relaxes from the previous round only.
    """
    sources = np.arange(n) if sources is None else np.asarray(sources)
    a = np.array([e[0] for e in edges], dtype=np.int64)
    b = np.array([e[1] for e in edges], dtype=np.int64)
    w = np.array([e[2] for e in edges], dtype=float)
    src = np.concatenate([a, b])
    dst = np.concatenate([b, a])
    ww = np.concatenate([w, w])
    d = np.full((len(sources), n), np.inf)
    d[np.arange(len(sources)), sources] = 0.0
    for _ in range(beta):
        cand = d[:, src] + ww
        nxt = d.copy()
        for j in range(len(dst)):
            np.minimum(nxt[:, dst[j]], cand[:, j], out=nxt[:, dst[j]])
        if np.array_equal(nxt, d):
            break
        d = nxt
    return d


def path_weight(g, p, u, v, allowed=None, virtual=None) -> float:
    """Walk the reported path edge by edge and return its recomputed weight.

    With ``virtual`` (a list of (a, b, w)) every edge must be a virtual marker -j-1
    naming entry j of that list.
    """
    assert p.vertices[0] == u and p.vertices[-1] == v, "wrong endpoints"
    assert len(p.edges) == len(p.vertices) - 1, "edge and vertex counts disagree"
    total = 0.0
    for x, y, e in zip(p.vertices, p.vertices[1:], p.edges):
        if virtual is not None:
            assert e < 0 and -e - 1 < len(virtual), f"{e} is not an emulator edge"
            a, b, w = virtual[-e - 1]
            assert {a, b} == {x, y}, f"emulator edge {e} does not join {x} and {y}"
            total += w
            continue
        assert 0 <= e < g.m, f"edge id {e} is not a graph edge"
        assert {int(g.eu[e]), int(g.ev[e])} == {x, y}, f"edge {e} does not join {x} and {y}"
        if allowed is not None:
            assert e in allowed, f"edge {e} outside the allowed set"
        total += float(g.ew[e])
    assert abs(total - p.weight) <= TOL * max(1.0, total), "declared weight is off"
    return total


def families(n: int, seed: int):
    """One graph per generator family, all with about n vertices."""
    side = max(2, int(round(n ** 0.5)))
    return [
        ("er", erdos_renyi(n, 4.0 / n, seed=seed)),
        ("grid", grid(side, max(2, n // side), seed=seed)),
        ("geometric", random_geometric(n, 0.15, seed=seed)),
        ("path", path_graph(n, seed=seed)),
    ]
