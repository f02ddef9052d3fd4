"""Metric-DP word redaction with first/second and k-nearest-neighbor selection,
plus an empirical privacy-utility audit and budget-constrained tuner."""

from .audit import (
    AuditMetric,
    Auditor,
    AuditReport,
    AuditSettings,
    DPReport,
    Prior,
    SentimentLexicon,
    TransitionModel,
    empirical_dp_check,
    estimate_transition,
    exact_transition_1d,
    expected_inference_error,
    expected_utility_loss,
    posterior,
)
from .embeddings import (
    EmbeddingStore,
    NeighborList,
    NNIndex,
    build_index,
    load_embeddings,
    nearest_neighbors,
    read_word_list,
)
from .mechanisms import (
    Mechanism,
    MechanismConfig,
    laplace,
    mahalanobis_preset,
    nth_neighbor,
    redact_corpus,
    redact_string,
    selection_probability,
    snn,
)
from .metrics import DistanceMetric, euclidean, mahalanobis, regularized_covariance
from .noise import NoiseSampler, sample_l2, sample_mahalanobis
from .tuner import TradeoffCurve, TunerConfig, sweep, tune

__version__ = "0.1.0"
