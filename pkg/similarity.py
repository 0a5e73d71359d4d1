"""
Semantic similarity between two sparse features.

Two features are compared in three steps: a coarse filter on the number of
shared classes, a fusion of both features over the union of their class ids,
and the semantic distance over the fused pairs. Despite its name, a larger
distance means MORE similar images.
"""

import math
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from errors import EmptyUnion, NoSharedClasses, ValidationError
from semantic_features import SparseFeature, shared_class_count

logger = logging.getLogger(__name__)

DEFAULT_M_RATIO = 10000.0
DEFAULT_MIN_SHARED = 10
DEFAULT_K = 60


@dataclass(frozen=True)
class DistanceParams:
    """Weights of the distance formula plus the coarse-filter threshold"""
    m1: float = DEFAULT_M_RATIO
    m2: float = 1.0
    min_shared: int = DEFAULT_MIN_SHARED
    k: int = DEFAULT_K

    def __post_init__(self):
        if not all(math.isfinite(m) and m > 0 for m in (self.m1, self.m2)):
            raise ValidationError(f"M1 and M2 must be positive and finite, got {self.m1}, {self.m2}")
        if self.min_shared < 0:
            raise ValidationError(f"min_shared must be non-negative, got {self.min_shared}")
        if self.k < 1:
            raise ValidationError(f"K must be positive, got {self.k}")

    @classmethod
    def from_ratio(cls, ratio: float = DEFAULT_M_RATIO, min_shared: int = DEFAULT_MIN_SHARED,
                   k: int = DEFAULT_K) -> 'DistanceParams':
        """M2 fixed at 1, M1 = ratio"""
        return cls(m1=float(ratio), m2=1.0, min_shared=min_shared, k=k)

    @property
    def ratio(self) -> float:
        return self.m1 / self.m2


@dataclass(frozen=True, eq=False)
class FusedPairs:
    """Two features aligned over the union of their class ids, zero-filled"""
    class_ids: np.ndarray
    f1: np.ndarray
    f2: np.ndarray

    @property
    def n(self) -> int:
        return len(self.class_ids)

    @property
    def pairs(self) -> List[Tuple[int, float, float]]:
        return [(int(c), float(x), float(y)) for c, x, y in zip(self.class_ids, self.f1, self.f2)]


def coarse_filter(a: SparseFeature, b: SparseFeature, params: DistanceParams) -> bool:
    """True when the pair shares at least min_shared classes"""
    return shared_class_count(a, b) >= params.min_shared


def fuse(a: SparseFeature, b: SparseFeature) -> FusedPairs:
    """Sorted merge of two features over the union of their class ids"""
    if a.k == 0 and b.k == 0:
        raise EmptyUnion(f"Nothing to fuse: {a.image_id} and {b.image_id} are both empty")
    class_ids = np.union1d(a.class_ids, b.class_ids)
    f1 = np.zeros(len(class_ids), dtype=np.float64)
    f2 = np.zeros(len(class_ids), dtype=np.float64)
    f1[np.searchsorted(class_ids, a.class_ids)] = a.probs
    f2[np.searchsorted(class_ids, b.class_ids)] = b.probs
    return FusedPairs(class_ids, f1, f2)


def semantic_distance(fused: FusedPairs, params: DistanceParams) -> float:
    """(M1 * sum(f1*f2) - M2 * sum((f1-f2)^2)) / max(f1*f2)"""
    products = fused.f1 * fused.f2
    peak = float(products.max()) if fused.n else 0.0
    if not peak > 0:
        raise NoSharedClasses("No class carries probability in both features")
    dot = math.fsum(products)
    penalty = math.fsum((fused.f1 - fused.f2) ** 2)
    return (params.m1 * dot - params.m2 * penalty) / peak


def score_pair(a: SparseFeature, b: SparseFeature, params: DistanceParams) -> Optional[float]:
    """Similarity score of two features, or None when the coarse filter rejects the pair"""
    if not coarse_filter(a, b, params):
        return None
    return semantic_distance(fuse(a, b), params)
