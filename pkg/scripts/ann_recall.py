"""Measure recall@k of the HNSW index against exact search on random vectors.

    python scripts/ann_recall.py --n 20000 --dim 64 --queries 200 --k 10
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from inses.embedding import VectorIndex
from inses.hnsw import HNSWIndex


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    items = {f"v{i:06d}": x for i, x in enumerate(rng.normal(size=(args.n, args.dim)))}
    exact = VectorIndex(items)
    t0 = time.perf_counter()
    ann = HNSWIndex(items, seed=args.seed)
    build_s = time.perf_counter() - t0

    hits = 0
    t0 = time.perf_counter()
    for q in rng.normal(size=(args.queries, args.dim)):
        want = {k for k, _ in exact.top_k_nodes(q, args.k)}
        hits += len(want & {k for k, _ in ann.top_k_nodes(q, args.k)})
    query_s = time.perf_counter() - t0
    print(f"n={args.n} dim={args.dim} k={args.k}: recall {hits / (args.queries * args.k):.4f}, "
          f"build {build_s:.1f}s, {1000 * query_s / args.queries:.1f} ms/query (incl. exact)")


if __name__ == "__main__":
    main()
