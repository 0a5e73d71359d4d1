"""
Retrieval Index
===============

Database of sparse semantic features answering ranked top-p queries.

A query is a full scan pruned by class posting lists:
1. Shared-class counts against every database image come from the postings
   of the query's classes, without touching the features themselves
2. Images below the coarse-filter threshold are rejected without fusion
3. Survivors are fused with the query and scored

Scored images come first (score desc, image id asc), then rejected images
(shared count desc, image id asc), so a list always has min(p, database size)
entries. The query's own image is left out.
"""

import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from errors import BadClassId, DuplicateImageId, ValidationError
from semantic_features import DEFAULT_N_CLASSES, SparseFeature
from similarity import DistanceParams, fuse, semantic_distance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankedItem:
    """One position of a ranked list; score is None for rejected images"""
    image_id: str
    score: Optional[float]
    shared: int

    @property
    def rejected(self) -> bool:
        return self.score is None


@dataclass(frozen=True)
class RankedList:
    query_id: str
    items: Tuple[RankedItem, ...]

    def __len__(self):
        return len(self.items)

    @property
    def image_ids(self) -> List[str]:
        return [item.image_id for item in self.items]

    @property
    def scored_count(self) -> int:
        return sum(1 for item in self.items if not item.rejected)


class FeatureIndex:
    """Immutable feature database with per-class posting lists

    Rows are ordered by ascending image id, so ascending row order is the
    tie-break order of ranked lists. Postings hold row numbers.
    """

    def __init__(self, features: List[SparseFeature], params: DistanceParams,
                 n_classes: int, postings: Dict[int, np.ndarray]):
        self.params = params
        self.n_classes = n_classes
        self._features = features
        self._image_ids = [f.image_id for f in features]
        self._rows = {image_id: row for row, image_id in enumerate(self._image_ids)}
        self._postings = postings

    def __len__(self):
        return len(self._features)

    def __contains__(self, image_id):
        return image_id in self._rows

    def __iter__(self):
        return iter(self._features)

    @property
    def image_ids(self) -> List[str]:
        return list(self._image_ids)

    @property
    def features(self):
        """Read-only mapping image_id -> SparseFeature"""
        return MappingProxyType(dict(zip(self._image_ids, self._features)))

    def get(self, image_id: str) -> Optional[SparseFeature]:
        row = self._rows.get(image_id)
        return None if row is None else self._features[row]

    def posting(self, class_id: int) -> List[str]:
        """Image ids holding class_id, ascending"""
        rows = self._postings.get(int(class_id))
        if rows is None:
            return []
        return [self._image_ids[row] for row in rows]

    @property
    def class_ids(self) -> List[int]:
        return sorted(self._postings)

    def with_params(self, params: DistanceParams) -> 'FeatureIndex':
        """Same features and postings scored under other weights or threshold"""
        return FeatureIndex(self._features, params, self.n_classes, self._postings)

    def shared_counts(self, q: SparseFeature) -> np.ndarray:
        """Shared-class count of q against every row, by posting-list counting"""
        hits = [self._postings[c] for c in q.class_ids.tolist() if c in self._postings]
        if not hits:
            return np.zeros(len(self), dtype=np.int64)
        return np.bincount(np.concatenate(hits), minlength=len(self))

    def query(self, q: SparseFeature, p: int) -> RankedList:
        """Top-p ranked list for q"""
        if p < 1:
            raise ValidationError(f"p must be positive, got {p}")
        if not len(self):
            return RankedList(q.image_id, ())

        shared = self.shared_counts(q)
        eligible = np.ones(len(self), dtype=bool)
        own = self._rows.get(q.image_id)
        if own is not None:
            eligible[own] = False

        # a pair with no shared class has a zero denominator and is never scored
        threshold = max(self.params.min_shared, 1)
        passing = eligible & (shared >= threshold)

        scored = []
        for row in np.flatnonzero(passing).tolist():
            feature = self._features[row]
            score = semantic_distance(fuse(q, feature), self.params)
            scored.append(RankedItem(feature.image_id, score, int(shared[row])))
        scored.sort(key=lambda item: (-item.score, item.image_id))
        items = scored[:p]

        remaining = p - len(items)
        if remaining > 0:
            rejected_rows = np.flatnonzero(eligible & ~passing)
            order = np.argsort(-shared[rejected_rows], kind='stable')[:remaining]
            items.extend(RankedItem(self._image_ids[row], None, int(shared[row]))
                         for row in rejected_rows[order].tolist())
        return RankedList(q.image_id, tuple(items))


def build_index(features: Iterable[SparseFeature], params: Optional[DistanceParams] = None,
                n_classes: int = DEFAULT_N_CLASSES) -> FeatureIndex:
    """Index a feature collection; image ids must be unique"""
    params = params or DistanceParams()
    seen = {}
    for feature in features:
        if feature.image_id in seen:
            raise DuplicateImageId(feature.image_id)
        if feature.k and feature.class_ids[-1] > n_classes:
            raise BadClassId(f"{feature.image_id}: class {feature.class_ids[-1]} exceeds N={n_classes}")
        seen[feature.image_id] = feature

    ordered = [seen[image_id] for image_id in sorted(seen)]
    postings = {}
    if ordered:
        all_classes = np.concatenate([f.class_ids for f in ordered])
        all_rows = np.repeat(np.arange(len(ordered)), [f.k for f in ordered])
        order = np.argsort(all_classes, kind='stable')
        all_classes, all_rows = all_classes[order], all_rows[order]
        classes, starts = np.unique(all_classes, return_index=True)
        for class_id, rows in zip(classes.tolist(), np.split(all_rows, starts[1:])):
            rows.flags.writeable = False
            postings[class_id] = rows

    logger.info(f"Built index with {len(ordered)} features over {len(postings)} classes")
    return FeatureIndex(ordered, params, n_classes, postings)


def query(index: FeatureIndex, q: SparseFeature, p: int) -> RankedList:
    """Top-p ranked list of q against the index"""
    return index.query(q, p)
