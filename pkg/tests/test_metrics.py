import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from vickrey.embeddings import EmbeddingStore
from vickrey.errors import DimensionMismatch, NotPositiveDefinite
from vickrey.metrics import (
    DistanceMetric,
    euclidean,
    indicator,
    mahalanobis,
    regularized_covariance,
    sqrtm_spd,
)


def test_euclidean_examples():
    x = np.array([0.3, -1.0, 2.0])
    assert euclidean(x, x) == 0.0
    assert euclidean(1.2, 2.5) == pytest.approx(1.3, abs=1e-15)
    with pytest.raises(DimensionMismatch):
        euclidean([1, 2], [1, 2, 3])


def test_euclidean_against_compensated_sum():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, y = rng.standard_normal((2, 300))
        oracle = math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(x.tolist(), y.tolist())))
        assert euclidean(x, y) == pytest.approx(oracle, rel=1e-12)


def test_mahalanobis_examples():
    assert mahalanobis([0.0], [2.0], [[4.0]]) == pytest.approx(1.0)
    assert mahalanobis([2.0, 0.0], [0.0, 0.0], np.diag([4.0, 1.0])) == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    for x, y in rng.standard_normal((100, 2, 7)):
        assert mahalanobis(x, y, np.eye(7)) == pytest.approx(euclidean(x, y), abs=1e-9)
    with pytest.raises(NotPositiveDefinite):
        mahalanobis([0, 0], [1, 1], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        mahalanobis([0, 0], [1, 1], np.eye(3))


def test_regularized_covariance_line(line_store):
    oracle = statistics.variance([0.0, 1.0, 2.5, 4.0, 6.0])
    assert oracle == pytest.approx(5.7)
    np.testing.assert_allclose(regularized_covariance(line_store, 0.0), [[1.0]])
    np.testing.assert_allclose(regularized_covariance(line_store, 1.0), [[oracle]], rtol=1e-14)
    np.testing.assert_allclose(regularized_covariance(line_store, 0.5), [[0.5 * oracle + 0.5]], rtol=1e-14)


def test_regularized_covariance_degenerate():
    store = EmbeddingStore(list("abc"), [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(NotPositiveDefinite):
        regularized_covariance(store, 1.0)
    cov = regularized_covariance(store, 0.9)
    assert np.linalg.eigvalsh(cov).min() > 0
    np.testing.assert_array_equal(cov, cov.T)


def test_sqrtm_spd():
    a = np.array([[4.0, 1.0], [1.0, 3.0]])
    r = sqrtm_spd(a)
    np.testing.assert_allclose(r @ r, a, atol=1e-12)
    np.testing.assert_allclose(r, r.T)


@pytest.mark.parametrize("metric", [
    DistanceMetric("euclidean"),
    DistanceMetric.mahalanobis(regularized_covariance(np.random.default_rng(2).standard_normal((40, 5)), 0.5)),
    DistanceMetric("indicator"),
])
def test_triangle_inequality_random_triples(metric):
    rng = np.random.default_rng(7)
    x, y, z = (rng.standard_normal((10_000, 5)) for _ in range(3))
    if metric.kind == "indicator":
        y[::3] = x[::3]
        z[::5] = y[::5]
    dxz, dxy, dyz = metric.norm(x - z), metric.norm(x - y), metric.norm(y - z)
    assert (dxz <= dxy + dyz + 1e-9).all()
    assert (metric.norm(np.zeros((3, 5))) == 0).all()


@settings(max_examples=80)
@given(hnp.arrays(np.float64, (3, 4), elements=st.floats(-50, 50).filter(lambda v: v == 0 or abs(v) > 1e-6)))
def test_metric_axioms(pts):
    x, y, z = pts
    m = DistanceMetric.mahalanobis(np.diag([2.0, 0.5, 1.0, 3.0]))
    for d in (euclidean, indicator, m):
        assert d(x, x) == 0
        assert d(x, y) == pytest.approx(d(y, x), rel=1e-12, abs=1e-12)
        assert d(x, z) <= d(x, y) + d(y, z) + 1e-9
        if np.abs(x - y).max() > 1e-6:
            assert d(x, y) > 0


def test_pairwise_shapes():
    m = DistanceMetric("euclidean")
    a = np.array([[0.0, 0.0], [3.0, 4.0]])
    np.testing.assert_allclose(m.pairwise(a), [[0, 5], [5, 0]])
    np.testing.assert_allclose(m.to_rows(a, [0.0, 0.0]), [0, 5])
