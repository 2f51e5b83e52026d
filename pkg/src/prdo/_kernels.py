"""Hot loops: Dijkstra with lexicographic keys and round-based Bellman-Ford.

Every kernel has a numba version and a plain numpy/heapq version with the
same tie-breaking. Set ``PRDO_NO_NUMBA=1`` to force the fallback.
"""
import heapq
import os

import numpy as np

USE_NUMBA = os.environ.get("PRDO_NO_NUMBA", "0").lower() not in ("1", "true", "yes")
try:
    import numba
except ImportError:  # pragma: no cover
    numba = None
    USE_NUMBA = False

INF = np.inf


# ---------------------------------------------------------------- fallback

def _sssp_py(indptr, nbr, eid, wt, tie, sources, thr, use_thr):
    n = indptr.shape[0] - 1
    dist = np.full(n, INF)
    tb = np.zeros(n, dtype=np.int64)
    root = np.full(n, -1, dtype=np.int64)
    par = np.full(n, -1, dtype=np.int64)
    pe = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    heap = []
    for s in sources:
        s = int(s)
        if use_thr and not (0.0 < thr[s]):
            continue
        if root[s] == -1 or s < root[s]:
            dist[s] = 0.0
            root[s] = s
            heapq.heappush(heap, (0.0, s, 0, s))
    indptr_l = indptr.tolist()
    nbr_l = nbr.tolist()
    eid_l = eid.tolist()
    wt_l = wt.tolist()
    tie_l = tie.tolist()
    while heap:
        d, r, t, x = heapq.heappop(heap)
        if done[x] or d != dist[x] or r != root[x] or t != tb[x]:
            continue
        done[x] = True
        for j in range(indptr_l[x], indptr_l[x + 1]):
            y = nbr_l[j]
            if done[y]:
                continue
            nd = d + wt_l[j]
            if use_thr and not (nd < thr[y]):
                continue
            nt = t + tie_l[j]
            e = eid_l[j]
            dy = dist[y]
            if nd < dy:
                better = True
            elif nd == dy:
                ry = root[y]
                if r != ry:
                    better = r < ry
                elif nt != tb[y]:
                    better = nt < tb[y]
                else:
                    better = x < par[y] or (x == par[y] and e < pe[y])
            else:
                better = False
            if better:
                dist[y] = nd
                root[y] = r
                tb[y] = nt
                par[y] = x
                pe[y] = e
                heapq.heappush(heap, (nd, r, nt, y))
    return dist, root, par, pe


def _apsp_py(indptr, nbr, eid, wt, tie):
    n = indptr.shape[0] - 1
    dist = np.empty((n, n))
    pe = np.empty((n, n), dtype=np.int64)
    empty = np.zeros(0)
    for s in range(n):
        d, _, _, p = _sssp_py(indptr, nbr, eid, wt, tie, np.array([s]), empty, False)
        dist[s] = d
        pe[s] = p
    return dist, pe


def _bf_tables_py(n, src2, dst2, w2, eid2, source, rounds, stop_exact, alpha):
    dist = np.full((rounds + 1, n), INF)
    pv = np.full((rounds + 1, n), -1, dtype=np.int64)
    pe = np.full((rounds + 1, n), -1, dtype=np.int64)
    dist[0, source] = 0.0
    last = 0
    for b in range(1, rounds + 1):
        prev = dist[b - 1]
        cand = prev[src2] + w2
        best = np.full(n, INF)
        np.minimum.at(best, dst2, cand)
        cur = prev.copy()
        imp = best < prev
        if imp.any():
            ok = np.isfinite(cand) & imp[dst2] & (cand == best[dst2])
            idx = np.nonzero(ok)[0]
            tg, first = np.unique(dst2[idx], return_index=True)
            sel = idx[first]
            cur[tg] = best[tg]
            pv[b, tg] = src2[sel]
            pe[b, tg] = eid2[sel]
        dist[b] = cur
        last = b
        if not imp.any():
            break
        if stop_exact.shape[0] == n and np.all(cur <= alpha * stop_exact):
            break
    return dist[: last + 1], pv[: last + 1], pe[: last + 1]


def _bf_first_py(n, src2, dst2, w2, source, rounds, exact, alpha):
    prev = np.full(n, INF)
    prev[source] = 0.0
    first = np.full(n, -1, dtype=np.int64)
    good = prev <= alpha * exact
    first[good] = 0
    for b in range(1, rounds + 1):
        cand = prev[src2] + w2
        best = np.full(n, INF)
        np.minimum.at(best, dst2, cand)
        cur = np.minimum(prev, best)
        newly = (first < 0) & (cur <= alpha * exact)
        first[newly] = b
        changed = bool((cur < prev).any())
        prev = cur
        if not changed or (first >= 0).all():
            break
    return first, prev


# ---------------------------------------------------------------- numba

if USE_NUMBA:
    @numba.njit(cache=True)
    def _sssp_nb(indptr, nbr, eid, wt, tie, sources, thr, use_thr):
        n = indptr.shape[0] - 1
        dist = np.full(n, np.inf)
        tb = np.zeros(n, dtype=np.int64)
        root = np.full(n, -1, dtype=np.int64)
        par = np.full(n, -1, dtype=np.int64)
        pe = np.full(n, -1, dtype=np.int64)
        done = np.zeros(n, dtype=np.bool_)
        heap = [(0.0, np.int64(0), np.int64(0), np.int64(0))]
        heap.pop()
        for si in range(sources.shape[0]):
            s = sources[si]
            if use_thr and not (0.0 < thr[s]):
                continue
            if root[s] == -1 or s < root[s]:
                dist[s] = 0.0
                root[s] = s
                heapq.heappush(heap, (0.0, np.int64(s), np.int64(0), np.int64(s)))
        while len(heap) > 0:
            d, r, t, x = heapq.heappop(heap)
            if done[x] or d != dist[x] or r != root[x] or t != tb[x]:
                continue
            done[x] = True
            for j in range(indptr[x], indptr[x + 1]):
                y = nbr[j]
                if done[y]:
                    continue
                nd = d + wt[j]
                if use_thr and not (nd < thr[y]):
                    continue
                nt = t + tie[j]
                e = eid[j]
                dy = dist[y]
                better = False
                if nd < dy:
                    better = True
                elif nd == dy:
                    ry = root[y]
                    if r != ry:
                        better = r < ry
                    elif nt != tb[y]:
                        better = nt < tb[y]
                    else:
                        better = x < par[y] or (x == par[y] and e < pe[y])
                if better:
                    dist[y] = nd
                    root[y] = r
                    tb[y] = nt
                    par[y] = x
                    pe[y] = e
                    heapq.heappush(heap, (nd, r, nt, np.int64(y)))
        return dist, root, par, pe

    @numba.njit(cache=True)
    def _apsp_nb(indptr, nbr, eid, wt, tie):
        n = indptr.shape[0] - 1
        dist = np.empty((n, n))
        pe = np.empty((n, n), dtype=np.int64)
        empty = np.zeros(0)
        src = np.zeros(1, dtype=np.int64)
        for s in range(n):
            src[0] = s
            d, _, _, p = _sssp_nb(indptr, nbr, eid, wt, tie, src, empty, False)
            dist[s, :] = d
            pe[s, :] = p
        return dist, pe

    @numba.njit(cache=True)
    def _bf_tables_nb(n, src2, dst2, w2, eid2, source, rounds, stop_exact, alpha):
        dist = np.full((rounds + 1, n), np.inf)
        pv = np.full((rounds + 1, n), -1, dtype=np.int64)
        pe = np.full((rounds + 1, n), -1, dtype=np.int64)
        dist[0, source] = 0.0
        last = 0
        check = stop_exact.shape[0] == n
        for b in range(1, rounds + 1):
            for v in range(n):
                dist[b, v] = dist[b - 1, v]
            changed = False
            for j in range(src2.shape[0]):
                x = src2[j]
                dx = dist[b - 1, x]
                if dx == np.inf:
                    continue
                y = dst2[j]
                c = dx + w2[j]
                if c < dist[b, y]:
                    dist[b, y] = c
                    pv[b, y] = x
                    pe[b, y] = eid2[j]
                    changed = True
            last = b
            if not changed:
                break
            if check:
                allgood = True
                for v in range(n):
                    if dist[b, v] > alpha * stop_exact[v]:
                        allgood = False
                        break
                if allgood:
                    break
        return dist[: last + 1], pv[: last + 1], pe[: last + 1]

    @numba.njit(cache=True)
    def _bf_first_nb(n, src2, dst2, w2, source, rounds, exact, alpha):
        prev = np.full(n, np.inf)
        prev[source] = 0.0
        first = np.full(n, -1, dtype=np.int64)
        remaining = 0
        for v in range(n):
            if prev[v] <= alpha * exact[v]:
                first[v] = 0
            else:
                remaining += 1
        cur = prev.copy()
        for b in range(1, rounds + 1):
            changed = False
            for j in range(src2.shape[0]):
                dx = prev[src2[j]]
                if dx == np.inf:
                    continue
                y = dst2[j]
                c = dx + w2[j]
                if c < cur[y]:
                    cur[y] = c
                    changed = True
            for v in range(n):
                if first[v] < 0 and cur[v] <= alpha * exact[v]:
                    first[v] = b
                    remaining -= 1
                prev[v] = cur[v]
            if not changed or remaining == 0:
                break
        return first, prev


# ---------------------------------------------------------------- dispatch

def sssp(indptr, nbr, eid, wt, tie, sources, thr=None):
    """Multi-source Dijkstra; returns (dist, root, parent, parent_edge)."""
    sources = np.ascontiguousarray(sources, dtype=np.int64)
    use_thr = thr is not None
    thr_a = np.ascontiguousarray(thr, dtype=np.float64) if use_thr else np.zeros(0)
    fn = _sssp_nb if USE_NUMBA else _sssp_py
    return fn(indptr, nbr, eid, wt, tie, sources, thr_a, use_thr)


def apsp(indptr, nbr, eid, wt, tie):
    fn = _apsp_nb if USE_NUMBA else _apsp_py
    return fn(indptr, nbr, eid, wt, tie)


def bf_tables(n, src2, dst2, w2, eid2, source, rounds, stop_exact=None, alpha=1.0):
    """Per-round hop-limited distances with predecessor tables."""
    se = np.zeros(0) if stop_exact is None else np.ascontiguousarray(stop_exact, dtype=np.float64)
    fn = _bf_tables_nb if USE_NUMBA else _bf_tables_py
    return fn(n, src2, dst2, w2, eid2, int(source), int(rounds), se, float(alpha))


def bf_first_round(n, src2, dst2, w2, source, rounds, exact, alpha):
    """First round at which each vertex is within alpha of its exact distance."""
    fn = _bf_first_nb if USE_NUMBA else _bf_first_py
    return fn(n, src2, dst2, w2, int(source), int(rounds),
              np.ascontiguousarray(exact, dtype=np.float64), float(alpha))
