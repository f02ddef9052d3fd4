#!/usr/bin/env python3
"""Time exact nearest-neighbor redaction on a synthetic Gaussian store.

Compares the float32 screened index, the float64 batched scan and the
per-query exhaustive scan, and checks that all three agree.

    python scripts/bench_nn.py --n 400000 --dim 300 --tokens 10000
"""

import argparse
import time

import numpy as np

from vickrey.embeddings import EmbeddingStore, NNIndex, nearest_neighbors
from vickrey.mechanisms import Mechanism, MechanismConfig, redact_corpus


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--dim", type=int, default=300)
    ap.add_argument("--tokens", type=int, default=10_000)
    ap.add_argument("--epsilon", type=float, default=50.0)
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--scan-queries", type=int, default=20,
                    help="single queries timed against the per-query scan")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    start = time.perf_counter()
    matrix = rng.standard_normal((args.n, args.dim), dtype=np.float32).astype(np.float64)
    store = EmbeddingStore([f"w{i}" for i in range(args.n)], matrix, name="synthetic")
    del matrix
    print(f"store {args.n} x {args.dim}: {time.perf_counter() - start:.1f}s")

    ids = np.minimum(rng.zipf(1.2, args.tokens) - 1, args.n - 1)
    docs = [[store.vocab[i] for i in ids[j:j + 100]] for j in range(0, args.tokens, 100)]
    cfg = MechanismConfig(args.epsilon, t=args.t)
    outputs = {}
    for prec in ("float32", "float64"):
        start = time.perf_counter()
        index = NNIndex(store, precision=prec)
        outputs[prec] = redact_corpus(docs, Mechanism(store, cfg, index=index), seed=args.seed)
        print(f"redact {args.tokens} tokens, {prec} index: {time.perf_counter() - start:.1f}s")
    print("outputs identical:", outputs["float32"] == outputs["float64"])

    index = NNIndex(store)
    queries = store.matrix[rng.integers(0, args.n, args.scan_queries)]
    queries = queries + rng.standard_normal(queries.shape) * 0.5
    t_idx = t_scan = 0.0
    agree = True
    for q in queries:
        s = time.perf_counter()
        a = index.query(q, 2)
        t_idx += time.perf_counter() - s
        s = time.perf_counter()
        b = nearest_neighbors(store, q, 2)
        t_scan += time.perf_counter() - s
        agree &= a.ids == b.ids and a.distances == b.distances
    m = len(queries)
    print(f"single query: index {1e3 * t_idx / m:.1f} ms, scan {1e3 * t_scan / m:.1f} ms, agree={agree}")


if __name__ == "__main__":
    main()
