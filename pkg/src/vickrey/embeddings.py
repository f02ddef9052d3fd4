"""Word-embedding storage, file loading and exact k-nearest-neighbor search.

Two text formats are understood:

* ``glove-text``: one ``word c1 ... cp`` row per line.
* ``fasttext-text``: a ``n p`` header line followed by GloVe-style rows.

All neighbor queries are *exact*. :class:`NNIndex` speeds up batches of
queries with a low-precision matrix-product screen, then re-ranks the
surviving candidates with the same float64 distance used by
:func:`nearest_neighbors`, so both paths return bitwise identical lists.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateWord,
    EmptyFile,
    KTooLarge,
    MalformedNumber,
    VocabularyTooSmall,
)

FORMATS = ("glove-text", "fasttext-text")


class EmbeddingStore:
    """Immutable vocabulary plus ``n x p`` embedding matrix.

    Row ``i`` of :attr:`matrix` is the embedding of ``vocab[i]``; ids are
    stable for the lifetime of the store.
    """

    def __init__(self, vocab: Sequence[str], matrix, name: str = ""):
        matrix = np.array(matrix, dtype=np.float64, copy=True)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
        if matrix.ndim != 2:
            raise DimensionMismatch(f"embedding matrix must be 2-d, got shape {matrix.shape}")
        vocab = list(vocab)
        if len(vocab) != matrix.shape[0]:
            raise DimensionMismatch(f"{len(vocab)} words but {matrix.shape[0]} rows")
        if matrix.shape[0] < 2:
            raise VocabularyTooSmall("an embedding store needs at least two words")
        if matrix.shape[1] < 1:
            raise DimensionMismatch("embedding dimension must be positive")
        if not np.isfinite(matrix).all():
            bad = int(np.argwhere(~np.isfinite(matrix))[0, 0])
            raise MalformedNumber(bad + 1, "non-finite coordinate")
        index = {}
        for i, w in enumerate(vocab):
            if w in index:
                raise DuplicateWord(w, i + 1)
            index[w] = i
        matrix.setflags(write=False)
        self._vocab = tuple(vocab)
        self._index = index
        self._matrix = matrix
        self.name = name

    @property
    def vocab(self) -> tuple[str, ...]:
        return self._vocab

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def n(self) -> int:
        return self._matrix.shape[0]

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    def __len__(self):
        return self.n

    def __contains__(self, word) -> bool:
        return word in self._index

    def __repr__(self):
        return f"EmbeddingStore(n={self.n}, dim={self.dim}, name={self.name!r})"

    def id_of(self, word: str) -> int:
        return self._index[word]

    def get(self, word: str, default=None):
        return self._index.get(word, default)

    def ids_of(self, words: Iterable[str], missing: str = "skip") -> np.ndarray:
        """Map words to ids. ``missing`` is ``"skip"`` or ``"error"``."""
        out = []
        for w in words:
            i = self._index.get(w)
            if i is None:
                if missing == "error":
                    raise KeyError(w)
                continue
            out.append(i)
        return np.asarray(out, dtype=np.int64)

    def vector(self, word_or_id) -> np.ndarray:
        if isinstance(word_or_id, str):
            word_or_id = self._index[word_or_id]
        return self._matrix[word_or_id]

    def restrict(self, words: Iterable[str], name: str | None = None) -> "EmbeddingStore":
        """New store holding only ``words`` that are present, in store order."""
        keep = np.sort(np.unique(self.ids_of(words)))
        return EmbeddingStore(
            [self._vocab[i] for i in keep], self._matrix[keep], name=name or self.name
        )


@dataclass(frozen=True)
class NeighborList:
    """Ascending ``(word id, distance)`` pairs; ties ordered by word id."""

    ids: tuple[int, ...]
    distances: tuple[float, ...]
    query: np.ndarray = field(repr=False, compare=False)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.ids, self.distances))

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, NeighborList):
            return NotImplemented
        return self.ids == other.ids and self.distances == other.distances


def _parse_row(line: str, lineno: int):
    parts = line.rstrip("\r\n").rstrip(" ").split(" ")
    word = parts[0]
    try:
        values = np.array(parts[1:], dtype=np.float64)
    except ValueError as exc:
        raise MalformedNumber(lineno, str(exc)) from None
    if not np.isfinite(values).all():
        raise MalformedNumber(lineno, "non-finite coordinate")
    return word, values


def load_embeddings(source, format: str = "glove-text", limit: int | None = None,
                    name: str | None = None) -> EmbeddingStore:
    """Parse a GloVe- or FastText-style text file into an :class:`EmbeddingStore`.

    ``source`` may be a path, a binary stream, or a text stream. ``limit``
    keeps only the first ``limit`` valid rows.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown embedding format {format!r}; expected one of {FORMATS}")
    close = False
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        stream = open(source, "r", encoding="utf-8")
        close = True
        name = name or str(source)
    elif isinstance(source, io.TextIOBase):
        stream = source
    else:
        stream = io.TextIOWrapper(source, encoding="utf-8")
    try:
        return _load(stream, format, limit, name or "")
    finally:
        if close:
            stream.close()


def _load(stream, format, limit, name):
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: dict[str, int] = {}
    dim = None
    header_dim = None
    for lineno, line in enumerate(stream, start=1):
        if limit is not None and len(rows) >= limit:
            break
        if not line.strip():
            continue
        if format == "fasttext-text" and header_dim is None:
            head = line.split()
            if len(head) != 2:
                raise MalformedNumber(lineno, "expected 'n p' header")
            try:
                int(head[0])
                header_dim = int(head[1])
            except ValueError:
                raise MalformedNumber(lineno, "expected 'n p' header") from None
            dim = header_dim
            continue
        word, values = _parse_row(line, lineno)
        if dim is None:
            dim = values.size
            if dim == 0:
                raise DimensionMismatch("row has no coordinates", lineno)
        elif values.size != dim:
            raise DimensionMismatch(f"expected {dim} coordinates, got {values.size}", lineno)
        if word in seen:
            raise DuplicateWord(word, lineno)
        seen[word] = lineno
        words.append(word)
        rows.append(values)
    if not rows:
        raise EmptyFile(f"no embedding rows in {name or 'stream'}")
    return EmbeddingStore(words, np.vstack(rows), name=name)


def read_word_list(source) -> list[str]:
    """Newline-delimited word file; blank lines and ``;`` comment lines are skipped."""
    if hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    else:
        with open(source, "r", encoding="utf-8", errors="replace") as fh:
            text = fh.read()
    out = []
    for line in text.splitlines():
        s = line.strip()
        if s and not s.startswith(";"):
            out.append(s)
    return out


# --------------------------------------------------------------------------
# exact search

def row_distances(rows: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Euclidean distance from ``query`` to every row; the canonical float64 form."""
    diff = rows - query
    return np.sqrt((diff * diff).sum(axis=-1))


def _check_query(store, query):
    q = np.asarray(query, dtype=np.float64)
    if q.ndim == 0:
        q = q[None]
    if q.shape != (store.dim,):
        raise DimensionMismatch(f"query has shape {q.shape}, store dimension is {store.dim}")
    return q


def _order(ids: np.ndarray, dists: np.ndarray, k: int):
    order = np.lexsort((ids, dists))[:k]
    return ids[order], dists[order]


def nearest_neighbors(store: EmbeddingStore, query, k: int, exclude=(), metric=None) -> NeighborList:
    """Exhaustive k-NN scan; the reference every accelerated path must reproduce."""
    q = _check_query(store, query)
    exclude = {int(e) for e in exclude}
    if k < 1 or k > store.n - len(exclude & set(range(store.n))):
        raise KTooLarge(f"k={k} with n={store.n} and {len(exclude)} excluded")
    if metric is None or metric.kind == "euclidean":
        chunk = max(1, (1 << 22) // store.dim)
        dists = np.concatenate(
            [row_distances(store.matrix[s:s + chunk], q) for s in range(0, store.n, chunk)]
        )
    else:
        dists = metric.to_rows(store.matrix, q)
    ids = np.arange(store.n)
    if exclude:
        keep = np.ones(store.n, dtype=bool)
        keep[list(exclude)] = False
        ids, dists = ids[keep], dists[keep]
    ids, dists = _order(ids, dists, k)
    return NeighborList(tuple(int(i) for i in ids), tuple(float(d) for d in dists), q)


class NNIndex:
    """Exact batched k-NN over a store.

    Scores every word with one matrix product in ``precision`` arithmetic,
    keeps everything within a rigorous rounding-error margin of the k-th
    score, and re-ranks those candidates with :func:`row_distances`.

    ``precision="float32"`` keeps a reduced-precision copy of the matrix (the
    fast path); ``"float64"`` scores against the store itself and allocates
    no copy. Stores with at most ``dense_limit`` words skip screening.
    """

    def __init__(self, store: EmbeddingStore, precision: str = "float32",
                 chunk: int = 128, dense_limit: int = 2048):
        if precision not in ("float32", "float64"):
            raise ValueError("precision must be 'float32' or 'float64'")
        self.store = store
        self.precision = precision
        self.chunk = chunk
        self.dense = store.n <= dense_limit
        m = store.matrix
        sq = (m * m).sum(axis=1)
        self._max_norm = float(np.sqrt(sq.max()))
        dtype = np.float32 if precision == "float32" else np.float64
        self._unit = 2.0 ** -24 if precision == "float32" else 2.0 ** -53
        if not self.dense:
            aug = np.empty((store.n, store.dim + 1), dtype=dtype)
            aug[:, :-1] = m
            aug[:, -1] = sq
            self._aug = aug

    def query(self, query, k: int, exclude=()) -> NeighborList:
        q = _check_query(self.store, query)
        exclude = sorted({int(e) for e in exclude})
        if k < 1 or k > self.store.n - len(exclude):
            raise KTooLarge(f"k={k} with n={self.store.n} and {len(exclude)} excluded")
        ids, dists = self._batch(q[None, :], k, [exclude])
        return NeighborList(tuple(int(i) for i in ids[0]), tuple(float(d) for d in dists[0]), q)

    def query_batch(self, queries, k: int, exclude_ids=None):
        """k-NN for every row of ``queries``.

        ``exclude_ids`` optionally gives one word id per query to leave out
        (``-1`` for none). Returns ``(ids, distances)``, both ``(m, k)``.
        """
        Q = np.asarray(queries, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[1] != self.store.dim:
            raise DimensionMismatch(f"queries have shape {Q.shape}, store dimension is {self.store.dim}")
        n_excl = 0 if exclude_ids is None else 1
        if k < 1 or k > self.store.n - n_excl:
            raise KTooLarge(f"k={k} with n={self.store.n}")
        excl = None
        if exclude_ids is not None:
            excl = [[int(e)] if e >= 0 else [] for e in np.asarray(exclude_ids).ravel()]
        return self._batch(Q, k, excl)

    def _batch(self, Q, k, excl):
        m = Q.shape[0]
        out_ids = np.empty((m, k), dtype=np.int64)
        out_d = np.empty((m, k), dtype=np.float64)
        if self.dense:
            step = max(1, (1 << 21) // (self.store.n * self.store.dim))
            for s in range(0, m, step):
                d = row_distances(self.store.matrix[None, :, :], Q[s:s + step, None, :])
                if excl is not None:
                    for r, ex in enumerate(excl[s:s + step]):
                        d[r, ex] = np.inf
                order = np.argsort(d, axis=1, kind="stable")[:, :k]
                out_ids[s:s + step] = order
                out_d[s:s + step] = np.take_along_axis(d, order, axis=1)
            return out_ids, out_d
        for s in range(0, m, self.chunk):
            e = min(m, s + self.chunk)
            cand = self._screen(Q[s:e], k, None if excl is None else excl[s:e])
            for r, c in enumerate(cand):
                d = row_distances(self.store.matrix[c], Q[s + r])
                ids, dd = _order(c, d, k)
                out_ids[s + r] = ids
                out_d[s + r] = dd
        return out_ids, out_d

    def _screen(self, Q, k, excl):
        dtype = self._aug.dtype
        b = Q.shape[0]
        qa = np.empty((b, Q.shape[1] + 1), dtype=dtype)
        qa[:, :-1] = -2.0 * Q
        qa[:, -1] = 1.0
        scores = qa @ self._aug.T
        rows = np.arange(b)
        if excl is not None:
            for r, ex in enumerate(excl):
                scores[r, ex] = np.inf
        qn = np.sqrt((Q * Q).sum(axis=1))
        p = self.store.dim
        mx = self._max_norm
        # dot-product rounding bound for the screen, plus the float64 re-rank error
        margin = 2.0 * (p + 4) * self._unit * (mx * mx + 2.0 * qn * mx) \
            + 4.0 * (p + 2) * 2.0 ** -53 * (qn + mx) ** 2
        found = [[] for _ in range(b)]
        kth = None
        for _ in range(k):
            idx = scores.argmin(axis=1)
            kth = scores[rows, idx].astype(np.float64)
            for r in range(b):
                found[r].append(idx[r])
            scores[rows, idx] = np.inf
        limit = kth + 2.0 * margin
        while True:
            idx = scores.argmin(axis=1)
            val = scores[rows, idx].astype(np.float64)
            active = val <= limit
            if not active.any():
                break
            for r in np.flatnonzero(active):
                found[r].append(idx[r])
            scores[rows[active], idx[active]] = np.inf
        return [np.asarray(f, dtype=np.int64) for f in found]


def build_index(store: EmbeddingStore, precision: str = "float32") -> NNIndex:
    return NNIndex(store, precision=precision)


def nn_distance_stats(store: EmbeddingStore, sample: int = 1000, seed: int = 0) -> dict:
    """Summary of first-neighbor distances over a random sample of words."""
    rng = np.random.default_rng(seed)
    ids = rng.choice(store.n, size=min(sample, store.n), replace=False)
    index = NNIndex(store, precision="float64")
    _, d = index.query_batch(store.matrix[ids], 1, exclude_ids=ids)
    norms = np.sqrt((store.matrix ** 2).sum(axis=1))
    d = d[:, 0]
    return {
        "n": store.n,
        "dim": store.dim,
        "norm_mean": float(norms.mean()),
        "norm_max": float(norms.max()),
        "nn_distance_mean": float(d.mean()),
        "nn_distance_median": float(np.median(d)),
        "nn_distance_min": float(d.min()),
        "sampled": int(ids.size),
    }

