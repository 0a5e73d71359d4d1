"""
Planted-cluster corpus generator.

Stands in for a labelled image collection run through a classifier. Each
cluster owns a disjoint core of `overlap` classes with a cluster-specific base
probability profile; every member carries the whole core (base profile times
seeded multiplicative noise) plus private classes drawn from the classes no
core uses. Core probabilities always outrank private ones.

With `common` > 0 every image also carries the same `common` classes, drawn
once for the whole corpus and ranked above every core class. They say nothing
about the cluster, so a top-K with K <= common keeps no cluster information
and retrieval quality climbs as K grows into the core.

Labels are the cluster name, optionally plus one secondary concept for
multi-level relevance.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from errors import ValidationError
from eval_metrics import LabelSet
from feature_store import write_labels, write_probabilities
from semantic_features import DEFAULT_N_CLASSES, SparseFeature

logger = logging.getLogger(__name__)

CORE_RANGE = (0.5, 1.0)
PRIVATE_RANGE = (0.01, 0.2)
COMMON_LIFT = (1.05, 1.15)


def common_range(noise: float):
    """Base range of the common classes; their noisy values stay above every noisy core value"""
    floor = CORE_RANGE[1] * (1.0 + noise) / (1.0 - noise)
    return floor * COMMON_LIFT[0], floor * COMMON_LIFT[1]


@dataclass(frozen=True)
class SynthCorpus:
    features: List[SparseFeature]
    labels: List[LabelSet]
    cluster_of: dict


def generate_corpus(clusters: int = 10, per_cluster: int = 100, overlap: int = 40, k: int = 60,
                    n_classes: int = DEFAULT_N_CLASSES, seed: int = 0, noise: float = 0.1,
                    secondary_labels: int = 0, common: int = 0) -> SynthCorpus:
    """Deterministic corpus of clusters * per_cluster images with k positive classes each"""
    if clusters < 1 or per_cluster < 1 or k < 1:
        raise ValidationError("clusters, per_cluster and k must be positive")
    if common < 0 or not 0 <= overlap <= k - common:
        raise ValidationError(f"overlap and common must be non-negative with overlap + common <= {k}, "
                              f"got {overlap} and {common}")
    if common + clusters * overlap + (k - overlap - common) > n_classes:
        raise ValidationError(f"{common} common classes, {clusters} cores of {overlap} classes and "
                              f"{k - overlap - common} private classes do not fit in N={n_classes}")
    if not 0 <= noise < 0.6:
        raise ValidationError(f"noise must lie in [0, 0.6), got {noise}")

    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(n_classes) + 1
    common_ids = shuffled[:common]
    cores = shuffled[common:common + clusters * overlap].reshape(clusters, overlap)
    pool = shuffled[common + clusters * overlap:]
    n_private = k - overlap - common
    if common:
        common_base = rng.uniform(*common_range(noise), size=common)

    id_width = len(str(clusters * per_cluster - 1))
    cluster_width = len(str(clusters - 1))
    features, labels, cluster_of = [], [], {}
    for cluster in range(clusters):
        base = rng.uniform(*CORE_RANGE, size=overlap)
        cluster_label = f"cluster_{cluster:0{cluster_width}d}"
        for member in range(per_cluster):
            image_id = f"img_{cluster * per_cluster + member:0{id_width}d}"
            core_probs = base * (1.0 + noise * rng.uniform(-1.0, 1.0, size=overlap))
            private_ids = rng.choice(pool, size=n_private, replace=False)
            private_probs = rng.uniform(*PRIVATE_RANGE, size=n_private)

            class_ids = np.concatenate([cores[cluster], private_ids])
            probs = np.concatenate([core_probs, private_probs])
            if common:
                common_probs = common_base * (1.0 + noise * rng.uniform(-1.0, 1.0, size=common))
                class_ids = np.concatenate([common_ids, class_ids])
                probs = np.concatenate([common_probs, probs])
            probs = probs / probs.sum()
            order = np.argsort(class_ids)
            features.append(SparseFeature(image_id, class_ids[order], probs[order]))

            names = {cluster_label}
            if secondary_labels and rng.random() < 0.5:
                names.add(f"concept_{int(rng.integers(secondary_labels))}")
            labels.append(LabelSet(image_id, frozenset(names)))
            cluster_of[image_id] = cluster

    logger.info(f"Generated {len(features)} images in {clusters} clusters "
                f"(overlap {overlap}/{k}, common {common}, seed {seed})")
    return SynthCorpus(features, labels, cluster_of)


def write_corpus(corpus: SynthCorpus, probs_path, labels_path, n_classes: int = DEFAULT_N_CLASSES,
                 dense: bool = False) -> None:
    """Probability file plus label file"""
    write_probabilities(probs_path, corpus.features, n_classes, dense=dense)
    write_labels(labels_path, corpus.labels)
    logger.info(f"Wrote {len(corpus.features)} images to {probs_path} and {labels_path}")
