"""Word-redaction mechanisms built on noisy nearest-neighbor selection.

Every mechanism perturbs the input embedding with metric-calibrated noise
and then picks among the nearest vocabulary words to the noised point:

``vickrey``
    first or second neighbor, the first with probability
    ``(1-t) d2 / (t d1 + (1-t) d2)``. ``t=0`` is the plain noisy-1NN
    (Laplace) mechanism.
``generalized``
    one of the ``k`` nearest, the r-th with probability proportional to
    ``exp(-t_r d_r)``.
``snn``
    always the second neighbor, with the input removed from the pool.
``nth``
    always the j-th neighbor (ablation preset).
``identity``
    returns the input unchanged. Not private; a reference stub for audits.

Randomness per redaction is drawn in a fixed order (noise direction, noise
radius, one uniform for the selection) from a generator the caller owns, so
a token's output depends only on its own stream.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import linalg

from .embeddings import EmbeddingStore, NNIndex, nearest_neighbors
from .errors import OutOfVocabulary, VocabularyTooSmall
from .metrics import DistanceMetric, regularized_covariance
from .noise import NoiseSampler

VARIANTS = ("vickrey", "generalized", "snn", "nth", "identity")
POLICIES = ("include-input", "exclude-input")


@dataclass(frozen=True)
class MechanismConfig:
    epsilon: float
    variant: str = "vickrey"
    t: float = 0.0
    weights: tuple[float, ...] = ()
    rank: int = 1
    noise: str = "euclidean"
    candidates: str = "include-input"
    selection: str = "euclidean"
    cov_lambda: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.candidates not in POLICIES:
            raise ValueError(f"unknown candidate policy {self.candidates!r}")
        if self.noise not in ("euclidean", "mahalanobis"):
            raise ValueError(f"{self.noise!r} is not a noise metric")
        if self.selection not in ("euclidean", "noise"):
            raise ValueError(f"unknown selection metric {self.selection!r}")
        if not 0.0 <= self.cov_lambda <= 1.0:
            raise ValueError("cov_lambda must lie in [0, 1]")
        if self.variant == "vickrey" and not 0.0 <= self.t <= 1.0:
            raise ValueError(f"vickrey t must lie in [0, 1], got {self.t}")
        if self.variant == "generalized":
            if not self.weights:
                raise ValueError("generalized variant needs at least one weight")
            if min(self.weights) < 0 or not np.isfinite(self.weights).all():
                raise ValueError("generalized weights must be finite and non-negative")
        if self.variant == "nth" and self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.variant == "snn" and self.candidates != "exclude-input":
            object.__setattr__(self, "candidates", "exclude-input")

    @property
    def k(self) -> int:
        """Number of neighbor candidates the variant draws from."""
        return {"vickrey": 2, "snn": 2, "identity": 0,
                "generalized": len(self.weights), "nth": self.rank}[self.variant]

    def params(self) -> dict:
        """Variant parameters, for report keys."""
        out = {"variant": self.variant}
        if self.variant == "vickrey":
            out["t"] = self.t
        elif self.variant == "generalized":
            out["weights"] = list(self.weights)
        elif self.variant == "nth":
            out["rank"] = self.rank
        out["candidates"] = self.candidates
        out["noise"] = self.noise
        if self.noise == "mahalanobis":
            out["cov_lambda"] = self.cov_lambda
            out["selection"] = self.selection
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = list(self.weights)
        return d

    def replace(self, **changes) -> "MechanismConfig":
        return replace(self, **changes)


def laplace(epsilon) -> MechanismConfig:
    return MechanismConfig(epsilon, "vickrey", t=0.0)


def mahalanobis_preset(epsilon, cov_lambda=0.5) -> MechanismConfig:
    return MechanismConfig(epsilon, "vickrey", t=0.0, noise="mahalanobis", cov_lambda=cov_lambda)


def snn(epsilon) -> MechanismConfig:
    return MechanismConfig(epsilon, "snn", candidates="exclude-input")


def nth_neighbor(epsilon, rank) -> MechanismConfig:
    return MechanismConfig(epsilon, "nth", rank=rank)


# --------------------------------------------------------------------------
# selection rules

def selection_probability(t, d1, d2):
    """Probability of emitting the first neighbor.

    With ``d1 = d2 = 0`` and ``0 < t < 1`` the first neighbor is chosen.
    Works elementwise on arrays.
    """
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    if np.any(d1 < 0) or np.any(d2 < 0):
        raise ValueError("distances must be non-negative")
    if t == 0:
        p = np.ones(np.broadcast(d1, d2).shape)
    elif t == 1:
        p = np.zeros(np.broadcast(d1, d2).shape)
    else:
        num = (1.0 - t) * d2
        den = t * d1 + num
        with np.errstate(invalid="ignore", divide="ignore"):
            p = np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0)
    return p if p.ndim else float(p)


def generalized_probabilities(weights, distances):
    """Softmax of ``-weights * distances`` along the last axis, max-shifted."""
    w = np.asarray(weights, dtype=np.float64)
    d = np.asarray(distances, dtype=np.float64)
    logits = -w * d
    logits = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=-1, keepdims=True)


def candidate_probabilities(config: MechanismConfig, dists: np.ndarray) -> np.ndarray:
    """Selection probabilities over the ``k`` ranked candidates, row-wise."""
    dists = np.atleast_2d(dists)
    m = dists.shape[0]
    if config.variant == "vickrey":
        p1 = selection_probability(config.t, dists[:, 0], dists[:, 1])
        return np.column_stack([p1, 1.0 - p1])
    if config.variant == "generalized":
        return generalized_probabilities(config.weights, dists)
    probs = np.zeros((m, config.k))
    probs[:, config.k - 1] = 1.0
    return probs


@dataclass
class RedactionTrace:
    word: int
    noised: np.ndarray = field(repr=False)
    candidates: tuple[int, ...]
    distances: tuple[float, ...]
    probabilities: tuple[float, ...]
    chosen: int


# --------------------------------------------------------------------------

class Mechanism:
    """A configured mechanism bound to an embedding store.

    ``sampler`` overrides the noise source (any object with
    ``sample(rng, size)``); tests use it to pin the noise.
    """

    def __init__(self, store: EmbeddingStore, config: MechanismConfig, index: NNIndex | None = None,
                 sampler=None, cov=None):
        self.store = store
        self.config = config
        self.cov = None
        if config.noise == "mahalanobis":
            self.cov = regularized_covariance(store, config.cov_lambda) if cov is None else np.atleast_2d(cov)
            self.noise_metric = DistanceMetric.mahalanobis(self.cov)
        else:
            self.noise_metric = DistanceMetric("euclidean")
        if sampler is None:
            if self.cov is not None:
                sampler = NoiseSampler.from_cov(config.epsilon, self.cov)
            else:
                sampler = NoiseSampler("euclidean", config.epsilon, store.dim)
        self.sampler = sampler

        self._whiten = None
        self.selection_store = store
        if config.noise == "mahalanobis" and config.selection == "noise":
            self._whiten = self.noise_metric.chol
            white = linalg.solve_triangular(self._whiten, store.matrix.T, lower=True).T
            self.selection_store = EmbeddingStore(store.vocab, white, name=store.name + ":whitened")
            index = None
        self._index = index
        if config.variant != "identity":
            n_avail = store.n - (1 if config.candidates == "exclude-input" else 0)
            if config.k > n_avail:
                raise VocabularyTooSmall(
                    f"{config.variant} needs {config.k} candidates, only {n_avail} available"
                )

    @property
    def epsilon(self) -> float:
        return self.config.epsilon

    @property
    def index(self) -> NNIndex:
        if self._index is None:
            self._index = NNIndex(self.selection_store)
        return self._index

    def privacy_distance(self, w: int, w2: int) -> float:
        """Distance between two words under the noise metric."""
        return self.noise_metric(self.store.matrix[w], self.store.matrix[w2])

    def draw(self, rng: np.random.Generator, size: int):
        """Noise then selection uniforms, in the fixed per-redaction order."""
        z = self.sampler.sample(rng, size)
        u = rng.random(size)
        return z, u

    def neighbors(self, noised: np.ndarray, word_ids: np.ndarray):
        """Ranked candidate ids and distances for each noised point."""
        k = self.config.k
        q = np.atleast_2d(noised)
        if self._whiten is not None:
            q = linalg.solve_triangular(self._whiten, q.T, lower=True).T
        excl = np.asarray(word_ids) if self.config.candidates == "exclude-input" else None
        if q.shape[0] == 1 and self._index is None and self.store.n > 2048:
            nl = nearest_neighbors(self.selection_store, q[0], k, () if excl is None else (int(excl[0]),))
            return np.array([nl.ids]), np.array([nl.distances])
        return self.index.query_batch(q, k, exclude_ids=excl)

    def choose(self, cand_ids: np.ndarray, cand_d: np.ndarray, u: np.ndarray):
        probs = candidate_probabilities(self.config, cand_d)
        cum = np.cumsum(probs, axis=1)
        pick = (u[:, None] >= cum[:, :-1]).sum(axis=1)
        return cand_ids[np.arange(len(pick)), pick], probs

    def select(self, word_ids, noised, u):
        """Outputs for already-noised embeddings (vectorized)."""
        word_ids = np.asarray(word_ids, dtype=np.int64)
        if self.config.variant == "identity":
            return word_ids.copy()
        cand_ids, cand_d = self.neighbors(noised, word_ids)
        out, _ = self.choose(cand_ids, cand_d, np.asarray(u))
        return out

    def sample(self, w: int, n: int, rng: np.random.Generator, chunk: int = 1 << 16) -> np.ndarray:
        """``n`` independent outputs for input ``w``."""
        out = np.empty(n, dtype=np.int64)
        if self.config.variant == "identity":
            out.fill(w)
            return out
        base = self.store.matrix[w]
        for s in range(0, n, chunk):
            m = min(chunk, n - s)
            z, u = self.draw(rng, m)
            out[s:s + m] = self.select(np.full(m, w), base + z, u)
        return out

    def redact_word(self, w: int, rng: np.random.Generator, trace: bool = False):
        """One redaction of word id ``w``; returns ``(output id, trace or None)``."""
        if self.config.variant == "identity":
            return w, (RedactionTrace(w, self.store.matrix[w].copy(), (w,), (0.0,), (1.0,), w)
                       if trace else None)
        z, u = self.draw(rng, 1)
        noised = self.store.matrix[w] + z
        cand_ids, cand_d = self.neighbors(noised, np.array([w]))
        out, probs = self.choose(cand_ids, cand_d, u)
        chosen = int(out[0])
        if not trace:
            return chosen, None
        return chosen, RedactionTrace(
            word=w,
            noised=noised[0],
            candidates=tuple(int(i) for i in cand_ids[0]),
            distances=tuple(float(d) for d in cand_d[0]),
            probabilities=tuple(float(p) for p in probs[0]),
            chosen=chosen,
        )


def _require(config, variant):
    if config.variant != variant:
        raise ValueError(f"expected a {variant} configuration, got {config.variant}")


def vickrey_redact_word(w, config, store, rng, trace=False, sampler=None):
    _require(config, "vickrey")
    return Mechanism(store, config, sampler=sampler).redact_word(w, rng, trace=trace)


def generalized_redact_word(w, config, store, rng, sampler=None) -> int:
    _require(config, "generalized")
    return Mechanism(store, config, sampler=sampler).redact_word(w, rng)[0]


def snn_redact_word(w, epsilon, store, rng, sampler=None) -> int:
    return Mechanism(store, snn(epsilon), sampler=sampler).redact_word(w, rng)[0]


# --------------------------------------------------------------------------
# strings and corpora

def token_rng(seed: int, doc: int, position: int) -> np.random.Generator:
    """The independent stream for one token occurrence."""
    return np.random.default_rng([seed, doc, position])


def redact_corpus(docs: Sequence[Sequence[str]], mechanism: Mechanism, seed: int,
                  oov: str = "error", redactable=None, threads: int = 1,
                  batch: int = 1024) -> list[list[str]]:
    """Redact every token of every document independently.

    Tokens outside the vocabulary raise :class:`OutOfVocabulary` under
    ``oov="error"`` and are copied through under ``oov="pass"``. When
    ``redactable`` (a set of words) is given, other in-vocabulary tokens are
    copied through as well. The result does not depend on ``threads`` or
    ``batch``.
    """
    if oov not in ("error", "pass"):
        raise ValueError(f"unknown oov policy {oov!r}")
    store = mechanism.store
    out = [list(doc) for doc in docs]
    jobs = []
    for d, doc in enumerate(docs):
        for i, tok in enumerate(doc):
            wid = store.get(tok)
            if wid is None:
                if oov == "error":
                    raise OutOfVocabulary(tok, i if len(docs) == 1 else (d, i))
                continue
            if redactable is not None and tok not in redactable:
                continue
            jobs.append((d, i, wid))
    if not jobs:
        return out

    def run(part):
        ids = np.array([j[2] for j in part], dtype=np.int64)
        if mechanism.config.variant == "identity":
            return ids
        z = np.empty((len(part), store.dim))
        u = np.empty(len(part))
        for r, (d, i, _) in enumerate(part):
            zz, uu = mechanism.draw(token_rng(seed, d, i), 1)
            z[r], u[r] = zz[0], uu[0]
        return mechanism.select(ids, store.matrix[ids] + z, u)

    parts = [jobs[s:s + batch] for s in range(0, len(jobs), batch)]
    if threads > 1 and len(parts) > 1:
        mechanism.index  # build once before fan-out
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, parts))
    else:
        results = [run(p) for p in parts]
    for part, res in zip(parts, results):
        for (d, i, _), o in zip(part, res):
            out[d][i] = store.vocab[int(o)]
    return out


def redact_string(tokens: Sequence[str], mechanism: Mechanism, seed: int, doc: int = 0,
                  oov: str = "error", redactable=None) -> list[str]:
    """Redact one token sequence; token ``i`` uses ``token_rng(seed, doc, i)``."""
    if not tokens:
        return []
    padded = [[] for _ in range(doc)] + [list(tokens)]
    try:
        return redact_corpus(padded, mechanism, seed, oov=oov, redactable=redactable)[doc]
    except OutOfVocabulary as exc:
        pos = exc.position[1] if isinstance(exc.position, tuple) else exc.position
        raise OutOfVocabulary(exc.token, pos) from None
