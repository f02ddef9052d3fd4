#!/usr/bin/env python3
"""Privacy/utility sweep on real embeddings and a sentiment lexicon.

Audits the Laplace preset, several t values, the Mahalanobis preset and
the second-neighbor preset with a uniform prior over lexicon words,
indicator d_E and sentiment-flip d_L, by Monte Carlo.

    python scripts/glove_experiment.py --embeddings glove.6B.300d.txt \\
        --positive positive-words.txt --negative negative-words.txt \\
        --samples 200 --output glove_sweep.csv
"""

import argparse
import logging

import numpy as np

from vickrey.audit import AuditMetric, Auditor, AuditSettings, Prior, SentimentLexicon
from vickrey.embeddings import load_embeddings
from vickrey.mechanisms import MechanismConfig
from vickrey.tuner import sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--embeddings", required=True)
    ap.add_argument("--format", default="glove-text")
    ap.add_argument("--limit", type=int)
    ap.add_argument("--positive", required=True)
    ap.add_argument("--negative", required=True)
    ap.add_argument("--eps", default="5,10,25,50,100")
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--repetitions", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--mahalanobis", action="store_true", help="include the Mahalanobis preset")
    ap.add_argument("--output", default="glove_sweep.csv")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO)

    store = load_embeddings(args.embeddings, args.format, limit=args.limit)
    lex = SentimentLexicon.from_files(args.positive, args.negative)
    ids = np.unique(store.ids_of(lex.words()))
    logging.info("%d of %d lexicon words in vocabulary", ids.size, len(lex))
    auditor = Auditor(store, Prior.uniform(ids), d_L=AuditMetric("sentiment", lex),
                      settings=AuditSettings(n_samples=args.samples, seed=args.seed, threads=args.threads))
    variants = [{"t": t} for t in (0.0, 0.25, 0.5, 0.75, 1.0)] + [{"variant": "snn"}]
    if args.mahalanobis:
        variants.append({"noise": "mahalanobis"})
    eps = [float(x) for x in args.eps.split(",")]
    curve = sweep(auditor, MechanismConfig(1.0), eps, variants, args.repetitions)
    with open(args.output, "w", newline="") as fh:
        curve.to_csv(fh, comment=f"embeddings={args.embeddings} samples={args.samples} seed={args.seed}")
    for rep in curve:
        p = rep.params
        print(f"eps={rep.epsilon:g} {p['variant']} t={p.get('t')} noise={p.get('noise')}: "
              f"E={rep.inference_error:.4f} L={rep.utility_loss:.4f}")


if __name__ == "__main__":
    main()
