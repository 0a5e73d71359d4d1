"""
Parameter sweeps: effect of the truncation size K and of the weight ratio M1/M2.

Each sweep step is a full leave-one-out evaluation run over the database with
every other parameter fixed. Rows come back in the order the values were given.
"""

import csv
import logging
from dataclasses import dataclass
from typing import IO, List, Mapping, Sequence

from errors import ValidationError
from eval_metrics import LabelSet, evaluate_run
from retrieval_index import FeatureIndex, build_index
from semantic_features import SparseFeature
from settings_manager import RunConfig

logger = logging.getLogger(__name__)

DEFAULT_K_VALUES = (20, 30, 40, 50, 60)
DEFAULT_M_RATIOS = (2000.0, 5000.0, 10000.0, 50000.0)


@dataclass(frozen=True)
class SweepRow:
    value: float
    mean_ndcg: float
    mean_acg: float
    degenerate: int


def sweep_k(features: Sequence[SparseFeature], labels: Mapping[str, LabelSet], k_values: Sequence[int],
            config: RunConfig) -> List[SweepRow]:
    """One evaluation per K; features must have been truncated at max(k_values) or more"""
    if not k_values:
        raise ValidationError("No K values to sweep")
    rows = []
    for k in k_values:
        if k < 1:
            raise ValidationError(f"K must be positive, got {k}")
        index = build_index([f.truncate(k) for f in features], config.distance_params(k=k), config.n_classes)
        report = evaluate_run(index, list(index), labels, config.p, config.workers, config.relevance)
        rows.append(SweepRow(k, report.mean_ndcg, report.mean_acg, report.degenerate_count))
        logger.info(f"K={k}: NDCG@{config.p}={report.mean_ndcg:.6f} ACG@{config.p}={report.mean_acg:.6f}")
    return rows


def sweep_m(index: FeatureIndex, labels: Mapping[str, LabelSet], ratios: Sequence[float],
            config: RunConfig) -> List[SweepRow]:
    """One evaluation per M1/M2 ratio over the same index"""
    if not ratios:
        raise ValidationError("No M1/M2 ratios to sweep")
    rows = []
    for ratio in ratios:
        reweighted = index.with_params(config.distance_params(k=index.params.k, m_ratio=ratio))
        report = evaluate_run(reweighted, list(reweighted), labels, config.p, config.workers, config.relevance)
        rows.append(SweepRow(ratio, report.mean_ndcg, report.mean_acg, report.degenerate_count))
        logger.info(f"M1/M2={ratio:g}: NDCG@{config.p}={report.mean_ndcg:.6f} ACG@{config.p}={report.mean_acg:.6f}")
    return rows


def _format_value(value) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def write_sweep_csv(rows: Sequence[SweepRow], parameter: str, p: int, out: IO) -> None:
    """CSV with one row per sweep value; metrics printed with 6 decimals"""
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow([parameter, f'mean_ndcg@{p}', f'mean_acg@{p}', 'degenerate'])
    for row in rows:
        writer.writerow([_format_value(row.value), f"{row.mean_ndcg:.6f}", f"{row.mean_acg:.6f}", row.degenerate])
