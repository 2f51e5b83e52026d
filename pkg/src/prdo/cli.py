"""prdo command line: build | query | verify | bench | stats | gen."""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import harness, serialize
from .composer import ALL_PRESETS
from .graph import save_graph


def _pairs(args, bundle):
    g = bundle["graph"]
    if getattr(args, "all", False):
        return harness.all_pairs(range(g.n))
    src = getattr(args, "pairs", None)
    if src is None:
        return None
    if src.startswith("random-"):
        return harness.random_pairs(g.n, int(src.split("-", 1)[1]), getattr(args, "seed", 0))
    out = []
    with open(src) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                a, b = line.split()[:2]
                out.append((int(a), int(b)))
    return out


def cmd_build(args) -> int:
    g = harness.make_graph(args.graph, args.seed, args.format)
    b = harness.build_bundle(g, args.construct, args.k, args.eps, args.preset, args.seed,
                             args.emulator, args.demand, args.h, args.k1, args.level,
                             strict=not args.loose)
    size = harness.save_bundle(b, args.out)
    rep = harness.stats(b)
    rep["file_bytes"] = size
    rep["build_seconds"] = b["meta"]["build_seconds"]
    print(serialize.to_json(rep))
    return 0


def cmd_query(args) -> int:
    b = harness.load_bundle(args.oracle)
    g, o = b["graph"], b["oracle"]
    pairs = _pairs(args, b) or harness.default_queries(b)
    dist = harness._distances(g, pairs) if args.exact else None
    out = sys.stdout
    out.write("u\tv\td_exact\td_reported\tstretch\tpath_len\n")
    for i, (u, v) in enumerate(pairs):
        if hasattr(o, "hierarchy") and not hasattr(o, "d0"):
            ans = o.query(u, v)
            p = None if ans is None else (ans.path if ans.direct else None)
        else:
            p = o.query(u, v)
        w = math.inf if p is None else p.weight
        d = "" if dist is None else f"{dist[i]:g}"
        s = "" if dist is None else (f"{w / dist[i]:.6f}" if dist[i] > 0 else "1.000000")
        out.write(f"{u}\t{v}\t{d}\t{w:g}\t{s}\t{0 if p is None else len(p)}\n")
    return 0


def cmd_verify(args) -> int:
    b = harness.load_bundle(args.oracle)
    rep = harness.verify(b, _pairs(args, b), args.workers)
    if args.json:
        print(serialize.to_json(rep))
    else:
        sys.stdout.write(harness.report_tsv(rep))
    return 0 if rep["passed"] else 1


def cmd_bench(args) -> int:
    b = harness.load_bundle(args.oracle)
    print(serialize.to_json(harness.bench(b, _pairs(args, b), args.repetitions)))
    return 0


def cmd_stats(args) -> int:
    b = harness.load_bundle(args.oracle)
    print(serialize.to_json(harness.stats(b)))
    return 0


def cmd_gen(args) -> int:
    g = harness.make_graph(args.spec, args.seed, max_weight=args.max_weight)
    text = save_graph(g, args.out, args.format)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="prdo", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build an oracle and write it to a file")
    b.add_argument("--graph", required=True, help="graph file or generator text, e.g. er:200:0.05")
    b.add_argument("--format", default="edge-list", choices=["edge-list", "dimacs-gr"])
    b.add_argument("--construct", default="prdo", choices=harness.CONSTRUCTS)
    b.add_argument("--preset", default="thm6.1", choices=ALL_PRESETS)
    b.add_argument("--emulator", default="tz", choices=["tz", "mn", "ap"])
    b.add_argument("--k", type=int, default=4)
    b.add_argument("--eps", type=float, default=0.5)
    b.add_argument("--h", type=int, default=2, help="partial TZ depth")
    b.add_argument("--k1", type=int, default=2, help="emulator parameter")
    b.add_argument("--level", type=int, default=1, help="pivot preserver level")
    b.add_argument("--demand", type=int, default=500, help="random demand pairs for preservers")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--loose", action="store_true", help="skip the k <= log2 n domain check")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build)

    for name, fn, hlp in (("query", cmd_query, "answer queries as TSV"),
                          ("verify", cmd_verify, "check answers against exact distances"),
                          ("bench", cmd_bench, "op counts and timings")):
        q = sub.add_parser(name, help=hlp)
        q.add_argument("--oracle", required=True)
        q.add_argument("--pairs", help="file of 'u v' lines or random-N")
        q.add_argument("--all", action="store_true", help="all vertex pairs")
        q.add_argument("--seed", type=int, default=0)
        if name == "query":
            q.add_argument("--exact", action="store_true", help="include exact distances and stretch")
        if name == "verify":
            q.add_argument("--workers", type=int, default=None)
            q.add_argument("--json", action="store_true")
        if name == "bench":
            q.add_argument("--repetitions", type=int, default=3)
        q.set_defaults(func=fn)

    s = sub.add_parser("stats", help="size breakdown")
    s.add_argument("--oracle", required=True)
    s.set_defaults(func=cmd_stats)

    gg = sub.add_parser("gen", help="write a generated graph")
    gg.add_argument("spec", help="er:N:P | grid:RxC | path:N | geometric:N:R")
    gg.add_argument("--seed", type=int, default=0)
    gg.add_argument("--max-weight", type=int, default=100)
    gg.add_argument("--format", default="edge-list", choices=["edge-list", "dimacs-gr"])
    gg.add_argument("--out")
    gg.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"prdo {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
