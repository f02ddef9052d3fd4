import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from vickrey.embeddings import (
    EmbeddingStore,
    NNIndex,
    build_index,
    load_embeddings,
    nearest_neighbors,
    read_word_list,
)
from vickrey.errors import (
    DimensionMismatch,
    DuplicateWord,
    EmptyFile,
    KTooLarge,
    MalformedNumber,
    VocabularyTooSmall,
)
from vickrey.metrics import DistanceMetric


def _glove(text):
    return load_embeddings(io.BytesIO(text.encode("utf-8")), "glove-text")


def test_load_glove_minimal():
    store = _glove("a 0.0\nb 1.0\nc 2.5\n")
    assert store.n == 3 and store.dim == 1
    assert store.vocab == ("a", "b", "c")
    np.testing.assert_array_equal(store.matrix[:, 0], [0.0, 1.0, 2.5])


def test_duplicate_word_reports_token_and_line():
    with pytest.raises(DuplicateWord) as exc:
        _glove("a 0.0\nb 1.0\nc 2.5\na 9.9\n")
    assert exc.value.word == "a" and exc.value.line == 4


def test_dimension_mismatch_and_malformed():
    with pytest.raises(DimensionMismatch) as exc:
        _glove("a 0.0 1.0\nb 1.0\n")
    assert exc.value.line == 2
    with pytest.raises(MalformedNumber) as exc:
        _glove("a 0.0\nb x1\n")
    assert exc.value.line == 2
    with pytest.raises(MalformedNumber):
        _glove("a 0.0\nb nan\n")
    with pytest.raises(EmptyFile):
        _glove("\n\n")


def test_fasttext_header_and_limit():
    text = "3 2\nx 1 2\ny 3 4\nz 5 6\n"
    store = load_embeddings(io.StringIO(text), "fasttext-text")
    assert store.vocab == ("x", "y", "z") and store.dim == 2
    store = load_embeddings(io.StringIO(text), "fasttext-text", limit=2)
    assert store.vocab == ("x", "y")
    with pytest.raises(DimensionMismatch):
        load_embeddings(io.StringIO("2 3\nx 1 2\ny 3 4\n"), "fasttext-text")


def test_tokens_are_case_sensitive():
    store = _glove("The 1\nthe 2\n")
    assert store.id_of("The") != store.id_of("the")


def test_file_checksum_against_line_count(tmp_path):
    # independent count: raw lines and whitespace fields
    rng = np.random.default_rng(3)
    n, p = 1500, 40
    path = tmp_path / "emb.txt"
    with open(path, "w") as fh:
        for i in range(n):
            fh.write(f"tok{i} " + " ".join(f"{v:.5f}" for v in rng.standard_normal(p)) + "\n")
    with open(path) as fh:
        lines = fh.read().splitlines()
    widths = {len(line.split()) - 1 for line in lines}
    store = load_embeddings(path)
    assert (store.n, store.dim) == (len(lines), widths.pop())
    assert np.isfinite(store.matrix).all()


def test_store_invariants():
    with pytest.raises(VocabularyTooSmall):
        EmbeddingStore(["a"], [[1.0]])
    with pytest.raises(DuplicateWord):
        EmbeddingStore(["a", "a"], [[1.0], [2.0]])
    store = EmbeddingStore(["a", "b", "c"], [[0.0], [1.0], [2.0]])
    with pytest.raises(ValueError):
        store.matrix[0, 0] = 5.0
    sub = store.restrict(["c", "a", "zz"])
    assert sub.vocab == ("a", "c")


def test_read_word_list_skips_comments():
    words = read_word_list(io.StringIO(";header\n\nabound\n a+ \n"))
    assert words == ["abound", "a+"]


# neighbor search -----------------------------------------------------------

def test_nearest_neighbors_examples(line_store):
    nl = nearest_neighbors(line_store, 1.2, 2)
    assert nl.ids == (1, 0)
    np.testing.assert_allclose(nl.distances, [0.2, 1.2], atol=1e-12)
    assert nearest_neighbors(line_store, 0.5, 1).entries == [(0, 0.5)]
    nl = nearest_neighbors(line_store, 1.2, 2, exclude={1})
    assert nl.ids == (0, 2)
    np.testing.assert_allclose(nl.distances, [1.2, 1.3], atol=1e-12)


def test_nearest_neighbors_errors(line_store):
    with pytest.raises(KTooLarge):
        nearest_neighbors(line_store, 0.0, 5, exclude={0})
    with pytest.raises(DimensionMismatch):
        nearest_neighbors(line_store, [0.0, 1.0], 1)


def test_mahalanobis_neighbors_match_scaled_euclidean():
    store = EmbeddingStore(list("abcd"), [[0, 0], [2, 0], [0, 1.5], [3, 3]])
    metric = DistanceMetric.mahalanobis(np.diag([4.0, 1.0]))
    nl = nearest_neighbors(store, [0.2, 0.1], 4, metric=metric)
    scaled = EmbeddingStore(list("abcd"), store.matrix / [2.0, 1.0])
    ref = nearest_neighbors(scaled, np.array([0.1, 0.1]), 4)
    assert nl.ids == ref.ids
    np.testing.assert_allclose(nl.distances, ref.distances, rtol=1e-12)


@pytest.mark.parametrize("precision", ["float32", "float64"])
def test_index_matches_exhaustive_scan(precision):
    rng = np.random.default_rng(11)
    store = EmbeddingStore([f"w{i}" for i in range(10_000)], rng.standard_normal((10_000, 48)))
    index = build_index(store, precision=precision)
    assert not index.dense
    queries = store.matrix[rng.integers(0, store.n, 1000)] + 0.7 * rng.standard_normal((1000, 48))
    ids, dists = index.query_batch(queries, 3)
    for q, i, d in zip(queries, ids, dists):
        ref = nearest_neighbors(store, q, 3)
        assert tuple(i) == ref.ids
        assert tuple(d) == ref.distances  # bitwise


def test_index_exclusion():
    rng = np.random.default_rng(5)
    store = EmbeddingStore([f"w{i}" for i in range(3000)], rng.standard_normal((3000, 16)))
    index = NNIndex(store)
    q = store.matrix[7] + 0.01
    top = index.query(q, 4)
    far = int(np.argmax(((store.matrix - q) ** 2).sum(1)))
    assert index.query(q, 4, exclude={far}) == top
    assert index.query(q, 3, exclude={7}) == nearest_neighbors(store, q, 3, exclude={7})
    ids, _ = index.query_batch(np.stack([q, q]), 2, exclude_ids=[7, -1])
    assert ids[0, 0] != 7 and ids[1, 0] == 7


coords = hnp.arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 4)),
                    elements=st.integers(-3, 3).map(float))


@settings(max_examples=60, deadline=None)
@given(m=coords, q=st.lists(st.integers(-6, 6), min_size=4, max_size=4), data=st.data())
def test_index_equals_scan_with_ties(m, q, data):
    # integer grids force exact distance ties; ids must break them
    n, p = m.shape
    store = EmbeddingStore([str(i) for i in range(n)], m)
    query = np.array(q[:p], dtype=float) / 2.0
    k = data.draw(st.integers(1, n))
    ref = nearest_neighbors(store, query, k)
    for index in (NNIndex(store), NNIndex(store, dense_limit=0), NNIndex(store, "float64", dense_limit=0)):
        assert index.query(query, k) == ref
    assert nearest_neighbors(store, query, k) == ref
    dists = np.array(ref.distances)
    assert (np.diff(dists) >= 0).all()
    for a, b, da, db in zip(ref.ids, ref.ids[1:], ref.distances, ref.distances[1:]):
        assert da < db or a < b
    if k < n:
        assert nearest_neighbors(store, query, k + 1).ids[:k] == ref.ids
