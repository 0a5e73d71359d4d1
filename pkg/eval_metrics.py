"""
Ranking quality measures for retrieval runs.

Relevance of a database image to a query is graded by the number of ground
truth concept labels they share (or a binarized variant). Rankings are scored
with NDCG@p and ACG@p; the ideal DCG of a query is taken over every other
labelled image of the database.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from errors import MissingLabels, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_P = 100


@dataclass(frozen=True)
class LabelSet:
    image_id: str
    labels: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, 'labels', frozenset(self.labels))


def relevance_level(q: LabelSet, d: LabelSet) -> int:
    """Number of concept labels shared by query and database image"""
    return len(q.labels & d.labels)


def _shared_relevance(counts: np.ndarray) -> np.ndarray:
    return counts


def _binary_relevance(counts: np.ndarray) -> np.ndarray:
    return np.minimum(counts, 1)


RELEVANCE_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    'shared': _shared_relevance,
    'binary': _binary_relevance,
}

RelevanceFn = Union[str, Callable[[np.ndarray], np.ndarray]]


def resolve_relevance(relevance: RelevanceFn) -> Callable[[np.ndarray], np.ndarray]:
    """Map a relevance name to its function; callables pass through"""
    if callable(relevance):
        return relevance
    try:
        return RELEVANCE_FUNCTIONS[relevance]
    except KeyError:
        raise ValidationError(f"Unknown relevance definition: {relevance}") from None


def dcg_at_p(levels: Sequence[int], p: int) -> float:
    """Sum of (2^r - 1) / log2(1 + i) over the first p ranks (1-based i)"""
    if p < 1:
        raise ValidationError(f"p must be positive, got {p}")
    levels = np.asarray(levels, dtype=np.float64)[:p]
    if not len(levels):
        return 0.0
    gains = np.exp2(levels) - 1.0
    discounts = np.log2(np.arange(2, len(levels) + 2, dtype=np.float64))
    return math.fsum(gains / discounts)


def ndcg_at_p(levels: Sequence[int], ideal: Sequence[int], p: int) -> float:
    """DCG normalized by the ideal DCG; 0 when the ideal DCG is 0"""
    best = dcg_at_p(ideal, p)
    if best == 0:
        return 0.0
    return dcg_at_p(levels, p) / best


def acg_at_p(levels: Sequence[int], p: int) -> float:
    """Mean relevance over the top p ranks; missing ranks count as 0"""
    if p < 1:
        raise ValidationError(f"p must be positive, got {p}")
    return math.fsum(float(r) for r in list(levels)[:p]) / p


class LabelIndex:
    """Concept-label postings over a fixed image order"""

    def __init__(self, image_ids: Sequence[str], labels: Mapping[str, LabelSet]):
        self.image_ids = list(image_ids)
        self.labels = labels
        self._rows = {image_id: row for row, image_id in enumerate(self.image_ids)}
        postings: Dict[str, List[int]] = {}
        for row, image_id in enumerate(self.image_ids):
            label_set = labels.get(image_id)
            if label_set is None:
                continue
            for label in label_set.labels:
                postings.setdefault(label, []).append(row)
        self._postings = {label: np.array(rows, dtype=np.int64) for label, rows in postings.items()}

    def __len__(self):
        return len(self.image_ids)

    def labels_of(self, image_id: str) -> LabelSet:
        label_set = self.labels.get(image_id)
        if label_set is None:
            raise MissingLabels(image_id)
        return label_set

    def shared_label_counts(self, q: LabelSet) -> np.ndarray:
        """relevance_level(q, d) for every image d, 0 for unlabelled ones"""
        hits = [self._postings[label] for label in q.labels if label in self._postings]
        if not hits:
            return np.zeros(len(self), dtype=np.int64)
        return np.bincount(np.concatenate(hits), minlength=len(self))

    def row(self, image_id: str) -> Optional[int]:
        return self._rows.get(image_id)


@dataclass(frozen=True)
class QueryResult:
    query_id: str
    ndcg: float
    acg: float
    degenerate: bool


@dataclass(frozen=True)
class EvaluationReport:
    """Per-query scores in input order plus means over non-degenerate queries"""
    p: int
    results: tuple

    @property
    def scored(self) -> List[QueryResult]:
        return [r for r in self.results if not r.degenerate]

    @property
    def degenerate_count(self) -> int:
        return sum(1 for r in self.results if r.degenerate)

    @property
    def mean_ndcg(self) -> float:
        scored = self.scored
        return math.fsum(r.ndcg for r in scored) / len(scored) if scored else 0.0

    @property
    def mean_acg(self) -> float:
        scored = self.scored
        return math.fsum(r.acg for r in scored) / len(scored) if scored else 0.0

    def format(self) -> str:
        """Tab-separated report, one line per query and a MEAN footer"""
        lines = [f"{r.query_id}\t{r.ndcg:.6f}\t{r.acg:.6f}\t{int(r.degenerate)}" for r in self.results]
        lines.append(f"MEAN\t{self.mean_ndcg:.6f}\t{self.mean_acg:.6f}\t{self.degenerate_count}")
        return '\n'.join(lines) + '\n'


def _score_ranking(query_id: str, ranked_ids: Sequence[str], label_index: LabelIndex,
                   relevance: Callable[[np.ndarray], np.ndarray], p: int) -> QueryResult:
    counts = label_index.shared_label_counts(label_index.labels_of(query_id))
    all_levels = relevance(counts)

    levels = []
    for image_id in list(ranked_ids)[:p]:
        row = label_index.row(image_id)
        if row is None or image_id not in label_index.labels:
            raise MissingLabels(image_id)
        levels.append(int(all_levels[row]))

    own = label_index.row(query_id)
    if own is not None:
        all_levels = np.delete(all_levels, own)
    ideal = np.sort(all_levels)[::-1][:p]

    degenerate = dcg_at_p(ideal, p) == 0
    return QueryResult(query_id, ndcg_at_p(levels, ideal, p), acg_at_p(levels, p), degenerate)


def _run_pool(fn, items, workers: int) -> list:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def evaluate_run(index, queries: Iterable, labels: Mapping[str, LabelSet], p: int = DEFAULT_P,
                 workers: int = 1, relevance: RelevanceFn = 'shared') -> EvaluationReport:
    """Rank every query against the index and score the lists with NDCG@p and ACG@p

    queries are SparseFeatures (database members or external). Results keep
    the input query order whatever the worker count.
    """
    relevance_fn = resolve_relevance(relevance)
    label_index = LabelIndex(index.image_ids, labels)
    queries = list(queries)

    def evaluate_one(q):
        ranked = index.query(q, p)
        return _score_ranking(q.image_id, ranked.image_ids, label_index, relevance_fn, p)

    results = _run_pool(evaluate_one, queries, workers)
    report = EvaluationReport(p, tuple(results))
    if report.degenerate_count:
        logger.warning(f"{report.degenerate_count} of {len(results)} queries have no relevant image")
    logger.info(f"Evaluated {len(results)} queries: NDCG@{p}={report.mean_ndcg:.6f} ACG@{p}={report.mean_acg:.6f}")
    return report


def score_rankings(rankings: Mapping[str, Sequence[str]], labels: Mapping[str, LabelSet],
                   p: int = DEFAULT_P, workers: int = 1, relevance: RelevanceFn = 'shared') -> EvaluationReport:
    """Score rankings produced elsewhere; the database is every labelled image"""
    relevance_fn = resolve_relevance(relevance)
    label_index = LabelIndex(sorted(labels), labels)

    def evaluate_one(query_id):
        return _score_ranking(query_id, rankings[query_id], label_index, relevance_fn, p)

    results = _run_pool(evaluate_one, list(rankings), workers)
    return EvaluationReport(p, tuple(results))
