#!/usr/bin/env python3
"""Exact privacy/utility tradeoff on the five-word line fixture.

Writes a CSV of (epsilon, variant, E, L) computed from the exact 1-d
transition kernel, for the Laplace preset, several t values, the
second-neighbor preset and the deterministic j-th neighbor ablation.

    python scripts/tradeoff_fixture.py --output fixture_tradeoff.csv
"""

import argparse
import sys

from vickrey.audit import AuditMetric, Auditor, AuditSettings, Prior, SentimentLexicon
from vickrey.embeddings import EmbeddingStore
from vickrey.mechanisms import MechanismConfig
from vickrey.tuner import sweep

WORDS = ["A", "B", "C", "D", "E"]
COORDS = [0.0, 1.0, 2.5, 4.0, 6.0]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--output", default="-", help="CSV path, '-' for stdout")
    ap.add_argument("--eps", default="0.25,0.5,1,2,4,8,16,32")
    ap.add_argument("--prior", choices=["uniform", "empirical"], default="uniform")
    args = ap.parse_args(argv)

    store = EmbeddingStore(WORDS, COORDS, name="line")
    weights = [0.2] * 5 if args.prior == "uniform" else [0.4, 0.3, 0.15, 0.1, 0.05]
    auditor = Auditor(store, Prior(range(5), weights),
                      d_L=AuditMetric("sentiment", SentimentLexicon("AB", "CDE")),
                      settings=AuditSettings(exact=True))
    variants = [{"t": t} for t in (0.0, 0.25, 0.5, 0.75, 1.0)]
    variants += [{"variant": "snn"}]
    variants += [{"variant": "nth", "rank": j} for j in (2, 3)]
    eps = [float(x) for x in args.eps.split(",")]
    curve = sweep(auditor, MechanismConfig(1.0), eps, variants)

    out = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    try:
        curve.to_csv(out, comment=f"line fixture, exact kernel, prior={args.prior}")
    finally:
        if out is not sys.stdout:
            out.close()


if __name__ == "__main__":
    main()
