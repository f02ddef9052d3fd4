"""Empirical privacy and utility measurement for word-redaction mechanisms.

The adversary knows the mechanism's transition kernel ``f(w'|w)`` and a
prior ``pi`` over redactable words, and infers the input from an observed
output with the Bayes posterior

    g(w_hat | w') = pi(w_hat) f(w' | w_hat) / sum_w pi(w) f(w' | w).

Inference error averages ``d_E(w_hat, w)`` over input, output and guess;
utility loss averages ``d_L(w, w')`` over input and output.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, stats

from .embeddings import EmbeddingStore, NNIndex, read_word_list, row_distances
from .errors import DimensionNotOne, EmptyPrior, LexiconMissingWord
from .mechanisms import Mechanism, MechanismConfig, candidate_probabilities
from .metrics import regularized_covariance

Z95 = 1.959963984540054


# --------------------------------------------------------------------------
# priors

@dataclass(frozen=True, eq=False)
class Prior:
    """Weights over redactable word ids, kept sorted by id."""

    ids: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64).ravel()
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if ids.size == 0 or ids.size != w.size:
            raise EmptyPrior("prior needs one weight per id and at least one id")
        if len(np.unique(ids)) != ids.size:
            raise ValueError("prior ids must be distinct")
        if (w < 0).any() or not np.isfinite(w).all():
            raise ValueError("prior weights must be finite and non-negative")
        total = w.sum()
        if total <= 0:
            raise EmptyPrior("prior has no mass")
        order = np.argsort(ids)
        object.__setattr__(self, "ids", ids[order])
        object.__setattr__(self, "weights", w[order] / total)

    @classmethod
    def uniform(cls, ids) -> "Prior":
        ids = np.asarray(ids)
        return cls(ids, np.ones(len(ids)))

    @classmethod
    def from_counts(cls, ids, counts) -> "Prior":
        return cls(ids, counts)

    @classmethod
    def from_corpus(cls, store: EmbeddingStore, ids, docs: Iterable[Sequence[str]]) -> "Prior":
        """Empirical frequencies of the redactable ``ids`` in a tokenized corpus."""
        ids = np.asarray(ids, dtype=np.int64)
        pos = {int(i): r for r, i in enumerate(ids)}
        counts = np.zeros(len(ids))
        for doc in docs:
            for tok in doc:
                i = store.get(tok)
                if i is not None and i in pos:
                    counts[pos[i]] += 1
        if counts.sum() == 0:
            raise EmptyPrior("no redactable word occurs in the corpus")
        return cls(ids, counts)


# --------------------------------------------------------------------------
# transition kernels

@dataclass(eq=False)
class TransitionModel:
    """Row-stochastic estimate of f(w'|w).

    Rows are redactable input ids; columns are output ids. Outputs that are
    not stored as columns have probability zero.
    """

    rows: np.ndarray
    cols: np.ndarray
    probs: np.ndarray
    counts: np.ndarray | None = None
    n_samples: int | None = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (len(self.rows), len(self.cols)):
            raise ValueError(f"probs shape {self.probs.shape} does not match rows/cols")

    def row_of(self, w: int) -> np.ndarray:
        return self.probs[int(np.searchsorted(self.rows, w))]

    def prob(self, w: int, w_out: int) -> float:
        r = np.searchsorted(self.rows, w)
        c = np.searchsorted(self.cols, w_out)
        if c < len(self.cols) and self.cols[c] == w_out:
            return float(self.probs[r, c])
        return 0.0

    def dense(self, n_vocab: int) -> np.ndarray:
        out = np.zeros((len(self.rows), n_vocab))
        out[:, self.cols] = self.probs
        return out

    def to_csv(self, stream, vocab=None, comment: str | None = None):
        """Long format: ``input,output,probability,count``; zero cells omitted."""
        if comment:
            stream.write(f"# {comment}\n")
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["input", "output", "probability", "count"])
        name = (lambda i: vocab[i]) if vocab is not None else (lambda i: int(i))
        for r, wi in enumerate(self.rows):
            for c in np.flatnonzero(self.probs[r]):
                cnt = "" if self.counts is None else int(self.counts[r, c])
                w.writerow([name(wi), name(self.cols[c]), repr(float(self.probs[r, c])), cnt])

    @classmethod
    def from_csv(cls, stream, store: EmbeddingStore) -> "TransitionModel":
        lines = [ln for ln in stream if not ln.startswith("#")]
        reader = csv.DictReader(lines)
        cells = [(store.id_of(rec["input"]), store.id_of(rec["output"]),
                  float(rec["probability"]), rec.get("count") or "") for rec in reader]
        rows = np.unique([c[0] for c in cells])
        cols = np.unique(np.concatenate([rows, [c[1] for c in cells]]))
        probs = np.zeros((len(rows), len(cols)))
        counts = np.zeros_like(probs, dtype=np.int64) if cells and all(c[3] for c in cells) else None
        for wi, wo, p, cnt in cells:
            r, c = np.searchsorted(rows, wi), np.searchsorted(cols, wo)
            probs[r, c] = p
            if counts is not None:
                counts[r, c] = int(cnt)
        n = int(counts[0].sum()) if counts is not None else None
        return cls(rows, cols, probs, counts, n)


def word_rng(seed: int, word: int, repetition: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, word, repetition])


def estimate_transition(mechanism, ids, n_samples: int, seed: int = 0, repetition: int = 0,
                        threads: int = 1) -> TransitionModel:
    """Monte-Carlo kernel: empirical output frequencies over ``n_samples`` runs per word.

    Word ``w`` draws from ``word_rng(seed, w, repetition)``, so the estimate
    does not depend on ``threads``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    ids = np.unique(np.asarray(ids, dtype=np.int64))
    n_vocab = mechanism.store.n
    if threads > 1 and hasattr(mechanism, "index"):
        mechanism.index

    def one(w):
        out = mechanism.sample(int(w), n_samples, word_rng(seed, int(w), repetition))
        vals, cnt = np.unique(out, return_counts=True)
        return vals, cnt

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, ids))
    else:
        results = [one(w) for w in ids]
    if n_vocab <= 4096:
        cols = np.arange(n_vocab)
    else:
        cols = np.unique(np.concatenate([ids] + [v for v, _ in results]))
    counts = np.zeros((len(ids), len(cols)), dtype=np.int64)
    for r, (vals, cnt) in enumerate(results):
        counts[r, np.searchsorted(cols, vals)] = cnt
    return TransitionModel(ids, cols, counts / n_samples, counts, n_samples)


# exact kernel in one dimension ------------------------------------------------

def _laplace_mass(rate, x0, a, b):
    """Mass of the density rate/2 * exp(-rate |z - x0|) on [a, b]."""
    def upper_tail(z):  # mass on [z, inf) for z >= x0
        return 0.5 * math.exp(-rate * (z - x0)) if z < math.inf else 0.0

    def lower_tail(z):  # mass on (-inf, z] for z <= x0
        return 0.5 * math.exp(rate * (z - x0)) if z > -math.inf else 0.0

    if a >= x0:
        return upper_tail(a) - upper_tail(b)
    if b <= x0:
        return lower_tail(b) - lower_tail(a)
    return 1.0 - lower_tail(a) - upper_tail(b)


def exact_transition_1d(config: MechanismConfig, store: EmbeddingStore, rows=None,
                        cov=None) -> TransitionModel:
    """Transition kernel of a mechanism on a one-dimensional store, by quadrature.

    The line is cut wherever the neighbor ranking or the noise density
    changes form (pairwise midpoints, word positions, the input itself);
    on each piece the selection weights are integrated against the noise
    density.
    """
    if store.dim != 1:
        raise DimensionNotOne(f"store dimension is {store.dim}")
    if store.n > 32:
        raise ValueError("exact 1-d kernels are limited to 32 words")
    xs = store.matrix[:, 0]
    n = store.n
    rows = np.arange(n) if rows is None else np.unique(np.asarray(rows, dtype=np.int64))
    scale = 1.0
    if config.noise == "mahalanobis":
        var = float(np.atleast_2d(regularized_covariance(store, config.cov_lambda) if cov is None else cov)[0, 0])
        scale = math.sqrt(var)
    rate = config.epsilon / scale
    sel_scale = scale if (config.noise == "mahalanobis" and config.selection == "noise") else 1.0
    k = config.k
    probs = np.zeros((len(rows), n))
    constant = config.variant in ("snn", "nth") or (config.variant == "vickrey" and config.t in (0.0, 1.0))

    if config.variant == "identity":
        probs[np.arange(len(rows)), rows] = 1.0
        return TransitionModel(rows, np.arange(n), probs)

    # rows sharing a candidate set are integrated together; every input
    # position is a cut point so each piece is smooth for all of them
    if config.candidates == "exclude-input":
        groups = [([r], np.delete(np.arange(n), w)) for r, w in enumerate(rows)]
    else:
        groups = [(list(range(len(rows))), np.arange(n))]

    for members, cand in groups:
        members = np.asarray(members)
        x0 = xs[rows[members]]
        cx = xs[cand]
        mids = (cx[:, None] + cx[None, :]) / 2.0
        pts = np.unique(np.concatenate([mids.ravel(), cx, x0]))
        edges = np.concatenate([[-np.inf], pts, [np.inf]])
        for a, b in zip(edges[:-1], edges[1:]):
            if not b > a:
                continue
            zm = b - 1.0 if a == -np.inf else (a + 1.0 if b == np.inf else 0.5 * (a + b))
            dm = np.abs(zm - cx)
            order = np.lexsort((cand, dm))[:k]
            ranked, rx = cand[order], cx[order]
            if constant:
                weights = candidate_probabilities(config, (np.abs(zm - rx) / sel_scale)[None, :])[0]
                mass = np.array([_laplace_mass(rate, x, a, b) for x in x0])
                probs[np.ix_(members, ranked)] += mass[:, None] * weights
                continue

            def integrand(z, rx=rx):
                dens = 0.5 * rate * np.exp(-rate * np.abs(z - x0))
                w_sel = candidate_probabilities(config, (np.abs(z - rx) / sel_scale)[None, :])[0]
                return dens[:, None] * w_sel[None, :]

            val, _ = integrate.quad_vec(integrand, a, b, epsabs=1e-13, epsrel=1e-11, limit=400)
            probs[np.ix_(members, ranked)] += val
    return TransitionModel(rows, np.arange(n), probs)


# --------------------------------------------------------------------------
# adversary and loss

def _aligned_prior(prior: Prior, f: TransitionModel) -> np.ndarray:
    pos = np.searchsorted(f.rows, prior.ids)
    ok = (pos < len(f.rows)) & (f.rows[np.minimum(pos, len(f.rows) - 1)] == prior.ids)
    if not ok.all():
        raise ValueError("prior support must be contained in the transition rows")
    pi = np.zeros(len(f.rows))
    pi[pos] = prior.weights
    return pi


def posterior(prior: Prior, f: TransitionModel) -> np.ndarray:
    """Adversary posterior ``g[w_hat, w']`` (rows index guesses, columns outputs).

    Columns of zero evidence (unreachable outputs) are left all-zero.
    """
    if prior is None or len(prior.ids) == 0:
        raise EmptyPrior("posterior needs a prior")
    pi = _aligned_prior(prior, f)
    joint = pi[:, None] * f.probs
    evidence = joint.sum(axis=0)
    g = np.zeros_like(joint)
    ok = evidence > 0
    g[:, ok] = joint[:, ok] / evidence[ok]
    return g


def map_posterior(g: np.ndarray) -> np.ndarray:
    """Point mass on the most probable guess per output; ties go to the lowest id."""
    out = np.zeros_like(g)
    defined = g.sum(axis=0) > 0
    best = g.argmax(axis=0)
    out[best[defined], np.flatnonzero(defined)] = 1.0
    return out


def expected_inference_error(prior: Prior, f: TransitionModel, g=None, d_E=None,
                             adversary: str = "posterior"):
    """Expected inference error and its 95% half-width.

    ``d_E`` is a ``(rows, rows)`` matrix indexed ``[guess, input]``; the
    default is the indicator of a wrong guess. The half-width is zero for a
    kernel without sample counts.
    """
    pi = _aligned_prior(prior, f)
    if g is None:
        g = posterior(prior, f)
    if adversary == "map":
        g = map_posterior(g)
    elif adversary != "posterior":
        raise ValueError(f"unknown adversary {adversary!r}")
    m = len(f.rows)
    if d_E is None:
        d_E = 1.0 - np.eye(m)
    d_E = np.asarray(d_E, dtype=np.float64)
    # h[c, w] = expected error for input w after observing column c
    h = g.T @ d_E
    per_row = np.einsum("wc,cw->w", f.probs, h)
    value = float(pi @ per_row)
    return value, _halfwidth(pi, f, h.T, per_row)


def expected_utility_loss(prior: Prior, f: TransitionModel, d_L=None):
    """Expected utility loss and its 95% half-width; ``d_L`` is ``(rows, cols)``."""
    pi = _aligned_prior(prior, f)
    if d_L is None:
        d_L = (f.rows[:, None] != f.cols[None, :]).astype(np.float64)
    d_L = np.asarray(d_L, dtype=np.float64)
    per_row = (f.probs * d_L).sum(axis=1)
    return float(pi @ per_row), _halfwidth(pi, f, d_L, per_row)


def _halfwidth(pi, f, values, means):
    if f.counts is None or not f.n_samples:
        return 0.0
    second = (f.probs * values ** 2).sum(axis=1)
    var = np.maximum(second - means ** 2, 0.0)
    return float(Z95 * math.sqrt((pi ** 2 * var).sum() / f.n_samples))


# --------------------------------------------------------------------------
# audit metrics

class SentimentLexicon:
    """Word polarity labels (+1 / -1)."""

    def __init__(self, positive: Iterable[str], negative: Iterable[str]):
        self.labels: dict[str, int] = {}
        for w in negative:
            self.labels[w] = -1
        for w in positive:
            self.labels[w] = 1

    @classmethod
    def from_files(cls, positive_path, negative_path) -> "SentimentLexicon":
        return cls(read_word_list(positive_path), read_word_list(negative_path))

    def __contains__(self, word):
        return word in self.labels

    def __len__(self):
        return len(self.labels)

    def label_array(self, store: EmbeddingStore, ids) -> np.ndarray:
        """Labels for ``ids``; 0 marks words outside the lexicon."""
        return np.array([self.labels.get(store.vocab[i], 0) for i in ids], dtype=np.int8)

    def words(self):
        return list(self.labels)


@dataclass(frozen=True, eq=False)
class AuditMetric:
    """``indicator``, ``euclidean`` (embedding distance) or ``sentiment`` (flip)."""

    kind: str = "indicator"
    lexicon: SentimentLexicon | None = None
    strict: bool = False

    def __post_init__(self):
        if self.kind not in ("indicator", "euclidean", "sentiment"):
            raise ValueError(f"unknown audit metric {self.kind!r}")
        if self.kind == "sentiment" and self.lexicon is None:
            raise ValueError("sentiment metric needs a lexicon")

    def matrix(self, store: EmbeddingStore, rows, cols) -> np.ndarray:
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        if self.kind == "indicator":
            return (rows[:, None] != cols[None, :]).astype(np.float64)
        if self.kind == "euclidean":
            b = store.matrix[cols]
            return np.stack([row_distances(b, store.matrix[r]) for r in rows])
        lr = self.lexicon.label_array(store, rows)
        lc = self.lexicon.label_array(store, cols)
        if self.strict:
            missing = np.concatenate([rows[lr == 0], cols[lc == 0]])
            if missing.size:
                raise LexiconMissingWord(store.vocab[int(missing[0])])
        return ((lr[:, None] != lc[None, :]) & (lr[:, None] != 0) & (lc[None, :] != 0)).astype(np.float64)

    def unlabeled_columns(self, store, cols) -> np.ndarray:
        if self.kind != "sentiment":
            return np.zeros(len(cols), dtype=bool)
        return self.lexicon.label_array(store, cols) == 0


# --------------------------------------------------------------------------
# reports

@dataclass
class AuditReport:
    epsilon: float
    params: dict
    inference_error: float
    utility_loss: float
    error_halfwidth: float = 0.0
    loss_halfwidth: float = 0.0
    n_samples: int = 0
    repetitions: int = 1
    unlabeled_mass: float = 0.0
    adversary: str = "posterior"
    exact: bool = False

    @property
    def key(self):
        return (self.epsilon, tuple(sorted((k, str(v)) for k, v in self.params.items())))

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> dict:
        row = {"epsilon": self.epsilon}
        for k in ("variant", "t", "weights", "rank", "candidates", "noise", "cov_lambda", "selection"):
            v = self.params.get(k, "")
            row[k] = " ".join(str(x) for x in v) if isinstance(v, list) else v
        row.update(
            inference_error=self.inference_error,
            error_halfwidth=self.error_halfwidth,
            utility_loss=self.utility_loss,
            loss_halfwidth=self.loss_halfwidth,
            n_samples=self.n_samples,
            repetitions=self.repetitions,
            unlabeled_mass=self.unlabeled_mass,
            adversary=self.adversary,
            exact=int(self.exact),
        )
        return row


CSV_FIELDS = ["epsilon", "variant", "t", "weights", "rank", "candidates", "noise", "cov_lambda",
              "selection", "inference_error", "error_halfwidth", "utility_loss", "loss_halfwidth",
              "n_samples", "repetitions", "unlabeled_mass", "adversary", "exact"]


def write_reports_csv(stream, reports, comment: str | None = None):
    if comment:
        stream.write(f"# {comment}\n")
    w = csv.DictWriter(stream, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rep.csv_row().items()})


@dataclass
class AuditSettings:
    n_samples: int = 10_000
    exact: bool = False
    adversary: str = "posterior"
    seed: int = 0
    threads: int = 1


class Auditor:
    """Evaluates ``(E_M, L_M)`` for mechanism configurations on a fixed setup."""

    def __init__(self, store: EmbeddingStore, prior: Prior, d_E: AuditMetric | None = None,
                 d_L: AuditMetric | None = None, settings: AuditSettings | None = None,
                 index: NNIndex | None = None):
        self.store = store
        self.prior = prior
        self.d_E = d_E or AuditMetric("indicator")
        self.d_L = d_L or AuditMetric("indicator")
        self.settings = settings or AuditSettings()
        self._index = index
        self._de_cache = None

    @property
    def index(self) -> NNIndex:
        if self._index is None:
            self._index = NNIndex(self.store)
        return self._index

    def mechanism(self, config: MechanismConfig) -> Mechanism:
        shared = config.noise == "euclidean" or config.selection == "euclidean"
        return Mechanism(self.store, config, index=self.index if shared else None)

    def transition(self, config: MechanismConfig, repetition: int = 0) -> TransitionModel:
        s = self.settings
        if s.exact:
            return exact_transition_1d(config, self.store, rows=self.prior.ids)
        return estimate_transition(self.mechanism(config), self.prior.ids, s.n_samples,
                                   seed=s.seed, repetition=repetition, threads=s.threads)

    def _d_e(self, rows):
        if self._de_cache is None:
            self._de_cache = self.d_E.matrix(self.store, rows, rows)
        return self._de_cache

    def evaluate(self, f: TransitionModel, config: MechanismConfig) -> AuditReport:
        E, e_hw = expected_inference_error(self.prior, f, d_E=self._d_e(f.rows),
                                           adversary=self.settings.adversary)
        L, l_hw = expected_utility_loss(self.prior, f, self.d_L.matrix(self.store, f.rows, f.cols))
        unl = self.d_L.unlabeled_columns(self.store, f.cols)
        pi = _aligned_prior(self.prior, f)
        unlabeled = float(pi @ f.probs[:, unl].sum(axis=1)) if unl.any() else 0.0
        return AuditReport(
            epsilon=config.epsilon,
            params=config.params(),
            inference_error=E,
            utility_loss=L,
            error_halfwidth=e_hw,
            loss_halfwidth=l_hw,
            n_samples=0 if self.settings.exact else self.settings.n_samples,
            unlabeled_mass=unlabeled,
            adversary=self.settings.adversary,
            exact=self.settings.exact,
        )

    def audit(self, config: MechanismConfig, repetition: int = 0) -> AuditReport:
        return self.evaluate(self.transition(config, repetition), config)

    def audit_repeated(self, config: MechanismConfig, repetitions: int = 1) -> AuditReport:
        """Mean over independent repetitions; half-widths from their spread."""
        if repetitions <= 1 or self.settings.exact:
            return self.audit(config)
        reps = [self.audit(config, r) for r in range(repetitions)]
        e = np.array([r.inference_error for r in reps])
        l_ = np.array([r.utility_loss for r in reps])
        out = reps[0]
        out.inference_error = float(e.mean())
        out.utility_loss = float(l_.mean())
        out.error_halfwidth = float(Z95 * e.std(ddof=1) / math.sqrt(repetitions))
        out.loss_halfwidth = float(Z95 * l_.std(ddof=1) / math.sqrt(repetitions))
        out.unlabeled_mass = float(np.mean([r.unlabeled_mass for r in reps]))
        out.repetitions = repetitions
        return out


# --------------------------------------------------------------------------
# metric-DP checker

def clopper_pearson(count: int, n: int, alpha: float):
    """One-sided ``(lower, upper)`` exact binomial bounds, each at level ``1 - alpha``."""
    lo = 0.0 if count == 0 else float(stats.beta.ppf(alpha, count, n - count + 1))
    hi = 1.0 if count == n else float(stats.beta.ppf(1 - alpha, count + 1, n - count))
    return lo, hi


@dataclass
class DPCell:
    word: int
    other: int
    output: int
    count: int
    other_count: int
    log_ratio: float
    lower_bound: float
    bound: float
    testable: bool
    violation: bool


@dataclass
class DPReport:
    cells: list[DPCell] = field(default_factory=list)
    n_samples: int = 0
    confidence: float = 0.999

    @property
    def violations(self) -> list[DPCell]:
        return [c for c in self.cells if c.violation]

    @property
    def untestable(self) -> int:
        return sum(not c.testable for c in self.cells)

    def to_csv(self, stream, vocab=None, comment: str | None = None):
        if comment:
            stream.write(f"# {comment}\n")
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["word", "other", "output", "count", "other_count", "log_ratio",
                    "lower_bound", "bound", "testable", "violation"])
        name = (lambda i: vocab[i]) if vocab is not None else (lambda i: i)
        for c in self.cells:
            w.writerow([name(c.word), name(c.other), name(c.output), c.count, c.other_count,
                        repr(c.log_ratio), repr(c.lower_bound), repr(c.bound),
                        int(c.testable), int(c.violation)])

    def to_csv_string(self, vocab=None) -> str:
        buf = io.StringIO()
        self.to_csv(buf, vocab)
        return buf.getvalue()


def empirical_dp_check(mechanism, pairs, n_samples: int, seed: int = 0, epsilon: float | None = None,
                       distance=None, confidence: float = 0.999, min_count: int = 50,
                       threads: int = 1) -> DPReport:
    """Test Pr{M(w)=o} / Pr{M(w')=o} <= exp(eps d(w, w')) on sampled frequencies.

    A cell is testable when ``w`` produced ``o`` at least ``min_count`` times.
    It is flagged only when the lower confidence bound of the log-ratio,
    built from one-sided Clopper-Pearson limits splitting ``1 - confidence``
    between numerator and denominator, exceeds the bound.
    """
    pairs = [(int(a), int(b)) for a, b in pairs]
    eps = mechanism.epsilon if epsilon is None else epsilon
    dist = distance or mechanism.privacy_distance
    words = sorted({w for p in pairs for w in p})
    f = estimate_transition(mechanism, words, n_samples, seed=seed, threads=threads)
    alpha = (1.0 - confidence) / 2.0
    report = DPReport(n_samples=n_samples, confidence=confidence)
    cp_cache: dict[int, tuple[float, float]] = {}

    def bounds(c):
        if c not in cp_cache:
            cp_cache[c] = clopper_pearson(c, n_samples, alpha)
        return cp_cache[c]

    for w, w2 in pairs:
        if w == w2:
            continue
        bound = eps * dist(w, w2)
        c1row = f.counts[np.searchsorted(f.rows, w)]
        c2row = f.counts[np.searchsorted(f.rows, w2)]
        for c in np.flatnonzero(c1row):
            c1, c2 = int(c1row[c]), int(c2row[c])
            est = math.inf if c2 == 0 else math.log(c1 / c2)
            testable = c1 >= min_count
            lb = -math.inf
            if testable:
                lo1 = bounds(c1)[0]
                hi2 = bounds(c2)[1]
                lb = math.log(lo1) - math.log(hi2)
            report.cells.append(DPCell(w, w2, int(f.cols[c]), c1, c2, est, lb, bound,
                                       testable, testable and lb > bound + 1e-12))
    return report
