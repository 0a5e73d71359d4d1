"""
Semantic Features
=================

Classifier outputs as dense per-image probability vectors, and their compact
top-K form: (class id, probability) pairs sorted by ascending class id.

Class ids are 1-based serial numbers of classifier outputs (1..N).
"""

import math
import logging
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np

from errors import BadLength, OutOfRange, NotNormalized, InvalidFeature, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_N_CLASSES = 1000
NORMALIZATION_TOLERANCE = 1e-3


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class SemanticVector:
    """Dense class-probability vector of one image"""
    image_id: str
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'probs', _frozen(self.probs, np.float64))

    def __eq__(self, other):
        if not isinstance(other, SemanticVector):
            return NotImplemented
        return self.image_id == other.image_id and np.array_equal(self.probs, other.probs)

    def __len__(self):
        return len(self.probs)


@dataclass(frozen=True, eq=False)
class SparseFeature:
    """Top-K semantic feature: class ids strictly increasing, probabilities in (0, 1]"""
    image_id: str
    class_ids: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        class_ids = _frozen(self.class_ids, np.int64).reshape(-1)
        probs = _frozen(self.probs, np.float64).reshape(-1)
        if len(class_ids) != len(probs):
            raise InvalidFeature(f"{self.image_id}: {len(class_ids)} class ids but {len(probs)} probabilities")
        if len(class_ids) and class_ids[0] < 1:
            raise InvalidFeature(f"{self.image_id}: class ids start at 1")
        if np.any(np.diff(class_ids) <= 0):
            raise InvalidFeature(f"{self.image_id}: class ids must be strictly increasing")
        if np.any(~(probs > 0)) or np.any(probs > 1):
            raise InvalidFeature(f"{self.image_id}: probabilities must lie in (0, 1]")
        object.__setattr__(self, 'class_ids', class_ids)
        object.__setattr__(self, 'probs', probs)

    @classmethod
    def from_pairs(cls, image_id: str, pairs: Iterable[Tuple[int, float]]) -> 'SparseFeature':
        """Build from (class_id, prob) pairs in ascending class order"""
        pairs = list(pairs)
        return cls(image_id, [c for c, _ in pairs], [p for _, p in pairs])

    @property
    def k(self) -> int:
        return len(self.class_ids)

    @property
    def entries(self) -> List[Tuple[int, float]]:
        return [(int(c), float(p)) for c, p in zip(self.class_ids, self.probs)]

    def __eq__(self, other):
        if not isinstance(other, SparseFeature):
            return NotImplemented
        return (self.image_id == other.image_id
                and np.array_equal(self.class_ids, other.class_ids)
                and np.array_equal(self.probs, other.probs))

    def __repr__(self):
        return f"SparseFeature({self.image_id!r}, k={self.k})"

    def to_dense(self, n_classes: int = DEFAULT_N_CLASSES) -> SemanticVector:
        """Expand back to a dense vector, zeros outside the stored classes"""
        if self.k and self.class_ids[-1] > n_classes:
            raise BadLength(f"{self.image_id}: class {self.class_ids[-1]} exceeds N={n_classes}")
        probs = np.zeros(n_classes, dtype=np.float64)
        probs[self.class_ids - 1] = self.probs
        return SemanticVector(self.image_id, probs)

    def truncate(self, k: int) -> 'SparseFeature':
        """Keep the k most probable entries; same result as truncating the dense vector"""
        if k < 1:
            raise ValidationError(f"K must be positive, got {k}")
        if k >= self.k:
            return self
        order = np.lexsort((self.class_ids, -self.probs))
        keep = np.sort(order[:k])
        return SparseFeature(self.image_id, self.class_ids[keep], self.probs[keep])


def validate_vector(vector: SemanticVector, n_classes: int = DEFAULT_N_CLASSES, strict: bool = False) -> None:
    """Raise if the vector breaks a SemanticVector invariant"""
    probs = vector.probs
    if probs.ndim != 1 or len(probs) != n_classes:
        raise BadLength(f"{vector.image_id}: expected {n_classes} probabilities, got {probs.size}")
    if np.any(~((probs >= 0) & (probs <= 1))):
        bad = int(np.flatnonzero(~((probs >= 0) & (probs <= 1)))[0])
        raise OutOfRange(f"{vector.image_id}: class {bad + 1} has probability {probs[bad]}")
    if strict:
        total = math.fsum(probs)
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            raise NotNormalized(f"{vector.image_id}: probabilities sum to {total:.6f}")


def truncate_top_k(vector: SemanticVector, k: int) -> SparseFeature:
    """Compact top-K feature of a dense vector

    Zero entries are never kept. At the K boundary equal probabilities keep the
    lower class id. Retained probabilities are not renormalized.
    """
    if k < 1:
        raise ValidationError(f"K must be positive, got {k}")
    probs = vector.probs
    positive = np.flatnonzero(probs > 0)
    order = np.lexsort((positive, -probs[positive]))
    keep = np.sort(positive[order[:k]])
    return SparseFeature(vector.image_id, keep + 1, probs[keep])


def shared_class_count(a: SparseFeature, b: SparseFeature) -> int:
    """Number of class ids present in both features"""
    return int(np.intersect1d(a.class_ids, b.class_ids, assume_unique=True).size)
