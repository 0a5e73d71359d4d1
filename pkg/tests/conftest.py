import numpy as np
import pytest

from eval_metrics import LabelSet
from retrieval_index import build_index
from semantic_features import SemanticVector, SparseFeature, truncate_top_k
from similarity import DistanceParams
from synth_corpus import generate_corpus


def random_features(rng, count, n_classes=1000, k=60, prefix='img'):
    """Top-k features of Dirichlet-distributed dense vectors"""
    vectors = rng.dirichlet(np.ones(n_classes), size=count)
    return [truncate_top_k(SemanticVector(f"{prefix}_{i:05d}", v), k) for i, v in enumerate(vectors)]


def feature(image_id, pairs):
    return SparseFeature.from_pairs(image_id, pairs)


def labels_of(**sets):
    return {image_id: LabelSet(image_id, frozenset(labels)) for image_id, labels in sets.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture(scope='session')
def planted_corpus():
    """10 clusters x 100 images, 40 of 60 top classes shared inside a cluster"""
    return generate_corpus(clusters=10, per_cluster=100, overlap=40, k=60, n_classes=1000, seed=7)


@pytest.fixture(scope='session')
def planted_index(planted_corpus):
    return build_index(planted_corpus.features, DistanceParams(), 1000)


@pytest.fixture(scope='session')
def planted_labels(planted_corpus):
    return {label_set.image_id: label_set for label_set in planted_corpus.labels}
