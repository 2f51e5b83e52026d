"""Build orchestration, ground-truth verification, op-count benchmarks and size statistics."""
from __future__ import annotations

import math
import multiprocessing as mp
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import serialize
from .composer import ALL_PRESETS, PartitionPRDO, build_preset
from .emulators import MetricGraph, MNEmulator, build_ap_emulator, build_mn_emulator, build_tz_emulator
from .generators import generate
from .graph import EdgeSet, PathError, WeightedGraph, load_graph, validate_path
from .hierarchy import build_hierarchy
from .partial_tz import PartialTZOracle, build_partial_tz
from .preservers import (
    ExactPairwisePreserver,
    InteractivePreserver,
    PivotNextHopMap,
    build_3eps_preserver,
    build_eps_preserver_v1,
    build_eps_preserver_v2,
    build_exact_pairwise_preserver,
    build_pivot_preserver,
)

CONSTRUCTS = ("prdo", "exact", "pivot", "v1", "v2", "3eps", "partial-tz", "emulator")
STRETCH_BINS = (1.0, 1.0 + 1e-9, 1.5, 2, 3, 5, 10, 20, 50, 100, math.inf)
SLACK = 1e-9


@dataclass
class ExperimentSpec:
    graph: str
    seed: int = 0
    fmt: str = "edge-list"
    construct: str = "prdo"
    params: dict = field(default_factory=dict)
    queries: str = "all"


def make_graph(source: str, seed: int = 0, fmt: str = "edge-list", max_weight: int = 100) -> WeightedGraph:
    """A path to a graph file, or a generator text such as 'er:200:0.05'."""
    if os.path.exists(source):
        return load_graph(source, fmt)
    return generate(source, seed, max_weight)


def random_pairs(n: int, count: int, seed: int):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, n, size=count)
    b = rng.integers(0, n, size=count)
    return [(int(x), int(y)) for x, y in zip(a, b)]


def all_pairs(vertices):
    vs = sorted(int(v) for v in vertices)
    return [(a, b) for i, a in enumerate(vs) for b in vs[i + 1:]]


def build_bundle(g: WeightedGraph, construct: str = "prdo", k: int = 4, eps: float = 0.5,
                 preset: str = "thm6.1", seed: int = 0, emulator: str = "tz", demand: int = 500,
                 h: int = 2, k1: int = 2, level: int = 1, strict: bool = True) -> dict:
    """Build one construction; the bundle is what gets serialized."""
    meta = {"construct": construct, "k": k, "eps": eps, "seed": seed, "n": g.n, "m": g.m}
    t0 = time.perf_counter()
    if construct == "prdo":
        if preset not in ALL_PRESETS:
            raise ValueError(f"unknown preset {preset!r}")
        o = build_preset(g, k, eps, preset, seed, strict)
        meta["preset"] = preset
    elif construct in ("exact", "v1", "v2", "3eps"):
        pairs = random_pairs(g.n, demand, seed + 101)
        if construct == "exact":
            o = build_exact_pairwise_preserver(g, pairs)
        elif construct == "v1":
            o = build_eps_preserver_v1(g, k, eps, pairs, seed)
        elif construct == "v2":
            o = build_eps_preserver_v2(g, k, eps, pairs, seed, strict=strict)
        else:
            o = build_3eps_preserver(g, k, eps, pairs, seed)
        meta["demand"] = demand
    elif construct == "pivot":
        from .preservers import v1_probs
        hier = build_hierarchy(g, v1_probs(g.n, max(k, 3)), seed)
        o = build_pivot_preserver(g, hier, level)
        meta["level"] = level
    elif construct == "partial-tz":
        o = build_partial_tz(g, k, h, seed)
        meta["h"] = h
    elif construct == "emulator":
        m = MetricGraph.from_graph(g, np.arange(g.n))
        if emulator == "tz":
            o = build_tz_emulator(m, k1, seed)
        elif emulator == "mn":
            o = build_mn_emulator(m, k1, seed)
        elif emulator == "ap":
            o = build_ap_emulator(m, k1, eps, seed)
        else:
            raise ValueError(f"unknown emulator {emulator!r}")
        meta.update(emulator=emulator, k1=k1)
    else:
        raise ValueError(f"unknown construction {construct!r}")
    meta["build_seconds"] = round(time.perf_counter() - t0, 3)
    return {"graph": g, "kind": construct, "oracle": o, "meta": meta}


def save_bundle(bundle: dict, path) -> int:
    # build time is not part of the file, so equal seeds give equal bytes
    stored = {**bundle, "meta": {k: v for k, v in bundle["meta"].items() if k != "build_seconds"}}
    return serialize.save(stored, path, kind=bundle["kind"])


def load_bundle(path) -> dict:
    _, b = serialize.load(path)
    return b


# ------------------------------------------------------------------ per-construction adapters

def _edge_set(o):
    e = o.edges
    return set(e() if callable(e) else e)


def default_queries(bundle: dict):
    o, g = bundle["oracle"], bundle["graph"]
    if isinstance(o, (InteractivePreserver, ExactPairwisePreserver)):
        return sorted(o.demand)
    if isinstance(o, PivotNextHopMap):
        return [(v, int(o.pivot[v])) for v in range(g.n) if o.pivot[v] >= 0]
    if hasattr(o, "metric"):
        return all_pairs(o.metric.vertices)
    return all_pairs(range(g.n))


def _universe(bundle):
    o, g = bundle["oracle"], bundle["graph"]
    if hasattr(o, "metric"):
        return EdgeSet(g, allowed=set(), virtual=o.edge_list)
    if isinstance(o, PartialTZOracle):
        return EdgeSet(g, o.edges)
    return EdgeSet(g, _edge_set(o))


def _bound(o) -> float:
    if isinstance(o, PartialTZOracle):
        return 2 * o.h + 1
    if isinstance(o, PivotNextHopMap):
        return 1.0
    return float(o.declared_stretch)


class _Tally:
    """Mergeable verification counts."""

    def __init__(self):
        self.checks = {}
        self.max_stretch = 0.0
        self.hist = [0] * (len(STRETCH_BINS) - 1)
        self.ops_max = 0
        self.ops_sum = 0
        self.queries = 0
        self.kinds = {}
        self.failures = []

    def check(self, name, ok, detail=None):
        c = self.checks.setdefault(name, [0, 0])
        c[0 if ok else 1] += 1
        if not ok and detail is not None:
            self.failures.append(detail)

    def stretch(self, r):
        self.max_stretch = max(self.max_stretch, r)
        i = int(np.searchsorted(STRETCH_BINS, r, side="right")) - 1
        self.hist[min(max(i, 0), len(self.hist) - 1)] += 1

    def merge(self, other: "_Tally"):
        for k, (p, f) in other.checks.items():
            c = self.checks.setdefault(k, [0, 0])
            c[0] += p
            c[1] += f
        self.max_stretch = max(self.max_stretch, other.max_stretch)
        self.hist = [a + b for a, b in zip(self.hist, other.hist)]
        self.ops_max = max(self.ops_max, other.ops_max)
        self.ops_sum += other.ops_sum
        self.queries += other.queries
        for k, v in other.kinds.items():
            self.kinds[k] = self.kinds.get(k, 0) + v
        self.failures.extend(other.failures)
        return self


def _run_one(bundle, u, v, dist, universe, bound, tally: _Tally):
    o = bundle["oracle"]
    d = float(dist)
    tally.queries += 1
    try:
        if isinstance(o, PartialTZOracle):
            _check_partial(o, u, v, d, universe, tally)
            return
        if hasattr(o, "query_ops"):
            res = o.query_ops(u, v)
            p, ops = res[0], res[1]
            kind = res[2] if len(res) > 2 else "path"
        else:
            p, ops, kind = o.query(u, v), 1, "path"
        tally.ops_max = max(tally.ops_max, ops)
        tally.ops_sum += ops
        tally.kinds[kind] = tally.kinds.get(kind, 0) + 1
        if p is None:
            tally.check("reachability", not math.isfinite(d), (u, v, "no path for reachable pair"))
            return
        validate_path(universe, p, u, v)
        tally.check("path_valid", True)
        _stretch_checks(tally, u, v, p.weight, d, bound)
    except (PathError, KeyError, RuntimeError) as exc:
        tally.check("path_valid", False, (u, v, f"{type(exc).__name__}: {exc}"))


def _stretch_checks(tally, u, v, w, d, bound):
    tally.check("lower_bound", w >= d * (1 - SLACK), (u, v, f"weight {w} below distance {d}"))
    r = 1.0 if d == 0 else w / d
    tally.stretch(r)
    tally.check("stretch", r <= bound * (1 + SLACK), (u, v, f"stretch {r:.6g} above {bound:.6g}"))


def _check_partial(o, u, v, d, universe, tally):
    ans = o.query(u, v)
    if ans is None:
        tally.check("reachability", not math.isfinite(d), (u, v, "no answer for reachable pair"))
        return
    tally.ops_max = max(tally.ops_max, ans.q_evals)
    tally.ops_sum += ans.q_evals
    tally.kinds[ans.kind] = tally.kinds.get(ans.kind, 0) + 1
    cap = 2 * (math.ceil(math.log2(max(o.h, 1))) + 2)
    tally.check("q_evaluations", ans.q_evals <= cap, (u, v, f"{ans.q_evals} Q evaluations > {cap}"))
    if ans.direct:
        validate_path(universe, ans.path, u, v)
        tally.check("path_valid", True)
        _stretch_checks(tally, u, v, ans.path.weight, d, 2 * o.h + 1)
        return
    for x, leg in ((u, ans.path_u), (v, ans.path_v)):
        end = int(o.hierarchy.pivot[o.h, x])
        validate_path(universe, leg, x, end)
        tally.check("path_valid", True)
        tally.check("escape_leg", leg.weight <= o.h * d * (1 + SLACK) + SLACK,
                    (u, v, f"escape leg {leg.weight} above h*d = {o.h * d}"))


def _distances(g: WeightedGraph, pairs):
    if g.n <= 3000:
        D = g.apsp()[0]
        return np.array([D[a, b] for a, b in pairs])
    out = np.empty(len(pairs))
    by_src = {}
    for i, (a, _) in enumerate(pairs):
        by_src.setdefault(a, []).append(i)
    for a, idx in by_src.items():
        dist = g.multi_source([a])[0]
        for i in idx:
            out[i] = dist[pairs[i][1]]
    return out


_WORK = {}


def _worker(chunk):
    b = _WORK["bundle"]
    t = _Tally()
    for u, v, d in chunk:
        _run_one(b, u, v, d, _WORK["universe"], _WORK["bound"], t)
    return t


def worker_count() -> int:
    env = os.environ.get("PRDO_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def structure_checks(bundle: dict, tally: _Tally):
    o = bundle["oracle"]
    if isinstance(o, PartitionPRDO):
        c = o.partition.check()
        for name in ("depth", "outgoing", "internal"):
            tally.check(f"partition_{name}", c[name] == 0, ("-", "-", f"{c[name]} {name} violations"))
        tally.check("partition_count", o.partition.count <= max(1, bundle["graph"].n / o.partition.t),
                    ("-", "-", "too many clusters"))
        o = o.inner
    emu = getattr(o, "de", o)
    if isinstance(emu, MNEmulator):
        for hst in emu.mn.hsts:
            try:
                hst.validate()
                tally.check("hst_valid", True)
            except Exception as exc:
                tally.check("hst_valid", False, ("-", "-", str(exc)))
        for ct in emu.contracted:
            tally.check("gupta_range", 1 - SLACK <= ct.min_ratio and ct.max_ratio <= 8 + SLACK,
                        ("-", "-", f"contraction range [{ct.min_ratio}, {ct.max_ratio}]"))


def verify(bundle: dict, pairs=None, workers: int | None = None) -> dict:
    """Validate every answer against exact distances and run the structure checks."""
    g = bundle["graph"]
    pairs = default_queries(bundle) if pairs is None else [(int(a), int(b)) for a, b in pairs]
    t0 = time.perf_counter()
    dist = _distances(g, pairs)
    work = [(a, b, d) for (a, b), d in zip(pairs, dist.tolist())]
    universe = _universe(bundle)
    bound = _bound(bundle["oracle"])
    workers = worker_count() if workers is None else workers
    tally = _Tally()
    if workers <= 1 or len(work) < 2000:
        for u, v, d in work:
            _run_one(bundle, u, v, d, universe, bound, tally)
    else:
        _WORK.update(bundle=bundle, universe=universe, bound=bound)
        size = math.ceil(len(work) / workers)
        chunks = [work[i:i + size] for i in range(0, len(work), size)]
        with mp.get_context("fork").Pool(workers) as pool:
            for part in pool.map(_worker, chunks):
                tally.merge(part)
        _WORK.clear()
    structure_checks(bundle, tally)
    elapsed = time.perf_counter() - t0
    failed = sum(f for _, f in tally.checks.values())
    o = bundle["oracle"]
    return {
        "instance": {k: v for k, v in bundle["meta"].items() if k != "build_seconds"},
        "checks": {k: {"pass": p, "fail": f} for k, (p, f) in sorted(tally.checks.items())},
        "passed": failed == 0,
        "queries": tally.queries,
        "declared_stretch": bound,
        "max_stretch": tally.max_stretch,
        "stretch_histogram": dict(zip([f"[{a},{b})" for a, b in zip(STRETCH_BINS, STRETCH_BINS[1:])], tally.hist)),
        "answer_kinds": dict(sorted(tally.kinds.items())),
        "ops": {"max": tally.ops_max, "mean": tally.ops_sum / max(1, tally.queries)},
        "size_words": size_words(o),
        "size_breakdown": size_breakdown(o),
        "failures": sorted(tally.failures, key=str)[:20],
        "timing": {"verify_seconds": round(elapsed, 3), "workers": workers},
    }


def report_fingerprint(report: dict) -> dict:
    """The report without wall-clock fields, for determinism comparisons."""
    return {k: v for k, v in report.items() if k != "timing"}


def size_words(o) -> int:
    return int(o.size_words)


def size_breakdown(o) -> dict:
    if hasattr(o, "size_breakdown"):
        return {k: int(v) for k, v in o.size_breakdown().items()}
    return {"total": int(o.size_words)}


def bench(bundle: dict, pairs=None, repetitions: int = 3) -> dict:
    """Op counts (what the bounds talk about) and wall time per query, kept apart."""
    o = bundle["oracle"]
    pairs = default_queries(bundle) if pairs is None else pairs
    ops = []
    for u, v in pairs:
        if isinstance(o, PartialTZOracle):
            ans = o.query(u, v)
            ops.append(0 if ans is None else ans.q_evals)
        elif hasattr(o, "query_ops"):
            ops.append(o.query_ops(u, v)[1])
        else:
            o.query(u, v)
            ops.append(1)
    best = math.inf
    for _ in range(repetitions):
        t0 = time.perf_counter()
        for u, v in pairs:
            o.query(u, v)
        best = min(best, time.perf_counter() - t0)
    arr = np.array(ops) if ops else np.zeros(1)
    return {"queries": len(pairs), "repetitions": repetitions,
            "ops_mean": float(arr.mean()), "ops_max": int(arr.max()), "ops_p50": float(np.median(arr)),
            "us_per_query": 1e6 * best / max(1, len(pairs))}


def stats(bundle: dict) -> dict:
    o, g = bundle["oracle"], bundle["graph"]
    out = {"kind": bundle["kind"], "n": g.n, "m": g.m, "size_words": size_words(o),
           "size_breakdown": size_breakdown(o)}
    if isinstance(o, InteractivePreserver):
        out.update(preserver_edges=len(o.edges), missing_audit=o.missing_audit(),
                   hop_edges=len(o.hopset.hop_edges), support_size=len(o.hopset.support()),
                   max_stored_hops=max(o.hop_counts(), default=0), hop_cap=o.hop_cap)
    elif isinstance(o, (ExactPairwisePreserver, PivotNextHopMap)):
        out["preserver_edges"] = len(_edge_set(o) - {-1})
    if isinstance(o, PartitionPRDO):
        n, t = g.n, o.partition.t
        extra = len(o.edges) - n
        out.update(spanner_edges=len(o.edges), clusters=o.partition.count, t=t,
                   max_depth=o.partition.max_depth,
                   edge_constant=extra / (n / t) if n else 0.0)
    elif hasattr(o, "edges") and not hasattr(o, "metric"):
        out["spanner_edges"] = len(_edge_set(o))
    if hasattr(o, "describe"):
        out["params"] = o.describe()
    elif hasattr(o, "params"):
        out["params"] = o.params
    return out


def report_tsv(report: dict) -> str:
    rows = ["check\tpass\tfail"]
    for k, c in report["checks"].items():
        rows.append(f"{k}\t{c['pass']}\t{c['fail']}")
    rows.append(f"max_stretch\t{report['max_stretch']:.6f}\t")
    rows.append(f"declared_stretch\t{report['declared_stretch']:.6f}\t")
    return "\n".join(rows) + "\n"
