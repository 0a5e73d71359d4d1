"""
Feature Store
=============

Flat text formats read and written by the pipeline:

- probability files, one image per line, in two flavors:
    dense   img_001,0.5,0.3,0.2
    sparse  img_002 7:0.8 12:0.2      (class ids 1-based, other classes 0)
- label files: image_id<TAB>label;label;...
- ranking files: query_id<TAB>image_id image_id ...
- index files: a header line "semdist-index v1 N=<classcount> K=<k>" followed by
  image_id<TAB>k<TAB>class:prob class:prob ... per feature

Every non-blank line is a record; there are no comment lines. Writers refuse
image ids that are empty or contain whitespace or a comma.

Probabilities are written as shortest round-trip decimals.
"""

import re
import math
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from errors import BadClassId, BadImageId, DuplicateImageId, ParseError
from eval_metrics import LabelSet
from retrieval_index import FeatureIndex, build_index
from semantic_features import (DEFAULT_N_CLASSES, NORMALIZATION_TOLERANCE, SemanticVector, SparseFeature,
                               truncate_top_k, validate_vector)
from similarity import DistanceParams

logger = logging.getLogger(__name__)

INDEX_HEADER = re.compile(r'^semdist-index v1 N=(\d+) K=(\d+)$')
UNWRITABLE_ID = re.compile(r'[\s,]')


def _data_lines(path) -> Iterator[Tuple[int, str]]:
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip('\r\n')
            if not line.strip():
                continue
            yield line_no, line


def _check_image_id(image_id: str) -> str:
    if not image_id or UNWRITABLE_ID.search(image_id):
        raise BadImageId(image_id)
    return image_id


def _format_prob(value) -> str:
    return repr(float(value))


def _parse_float(path, line_no, token) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(path, line_no, f"not a number: {token!r}") from None


def _parse_pairs(path, line_no, tokens) -> Tuple[List[int], List[float]]:
    class_ids, probs = [], []
    for token in tokens:
        class_part, sep, prob_part = token.partition(':')
        if not sep:
            raise ParseError(path, line_no, f"expected class:prob, got {token!r}")
        try:
            class_ids.append(int(class_part))
        except ValueError:
            raise ParseError(path, line_no, f"not a class id: {class_part!r}") from None
        probs.append(_parse_float(path, line_no, prob_part))
    return class_ids, probs


def parse_probability_line(path, line_no: int, line: str, n_classes: int) -> SemanticVector:
    """One line of a dense or sparse probability file"""
    if ',' in line:
        image_id, *tokens = [t.strip() for t in line.split(',')]
        if not image_id:
            raise ParseError(path, line_no, "missing image id")
        probs = [_parse_float(path, line_no, t) for t in tokens]
        return SemanticVector(image_id, probs)

    image_id, *tokens = line.split()
    class_ids, values = _parse_pairs(path, line_no, tokens)
    if len(set(class_ids)) != len(class_ids):
        raise ParseError(path, line_no, "repeated class id")
    probs = np.zeros(n_classes, dtype=np.float64)
    for class_id, value in zip(class_ids, values):
        if not 1 <= class_id <= n_classes:
            raise BadClassId(f"{path}:{line_no}: class {class_id} outside 1..{n_classes}")
        probs[class_id - 1] = value
    return SemanticVector(image_id, probs)


def iter_probabilities(path, n_classes: int = DEFAULT_N_CLASSES, strict: bool = False) -> Iterator[SemanticVector]:
    """Stream validated vectors from a probability file"""
    unnormalized = 0
    for line_no, line in _data_lines(path):
        vector = parse_probability_line(path, line_no, line, n_classes)
        validate_vector(vector, n_classes, strict)
        if not strict and abs(math.fsum(vector.probs) - 1.0) > NORMALIZATION_TOLERANCE:
            unnormalized += 1
        yield vector
    if unnormalized:
        logger.warning(f"{unnormalized} vectors in {path} do not sum to 1")


def ingest_probabilities(path, n_classes: int = DEFAULT_N_CLASSES, strict: bool = False) -> List[SemanticVector]:
    """All vectors of a probability file, validated"""
    vectors = list(iter_probabilities(path, n_classes, strict))
    logger.info(f"Loaded {len(vectors)} probability vectors from {path}")
    return vectors


def ingest_features(path, k: int, n_classes: int = DEFAULT_N_CLASSES, strict: bool = False) -> List[SparseFeature]:
    """Top-k features of a probability file, truncated while streaming"""
    features = [truncate_top_k(vector, k) for vector in iter_probabilities(path, n_classes, strict)]
    logger.info(f"Loaded {len(features)} features (K={k}) from {path}")
    return features


def write_probabilities(path, features: Iterable[SparseFeature], n_classes: int = DEFAULT_N_CLASSES,
                        dense: bool = False) -> int:
    """Write a probability file in sparse or dense flavor; returns the line count"""
    count = 0
    with open(path, 'w', encoding='utf-8') as f:
        for feature in features:
            _check_image_id(feature.image_id)
            if dense:
                values = feature.to_dense(n_classes).probs
                f.write(feature.image_id + ',' + ','.join(_format_prob(v) for v in values) + '\n')
            else:
                pairs = ' '.join(f"{c}:{_format_prob(p)}" for c, p in feature.entries)
                f.write(f"{feature.image_id} {pairs}".rstrip() + '\n')
            count += 1
    return count


def ingest_labels(path) -> Dict[str, LabelSet]:
    """Label file into image_id -> LabelSet; an empty label field is legal"""
    labels = {}
    for line_no, line in _data_lines(path):
        image_id, sep, field = line.partition('\t')
        image_id = image_id.strip()
        if not sep or not image_id:
            raise ParseError(path, line_no, "expected image_id<TAB>labels")
        if image_id in labels:
            raise DuplicateImageId(image_id)
        labels[image_id] = LabelSet(image_id, frozenset(l.strip() for l in field.split(';') if l.strip()))
    logger.info(f"Loaded labels for {len(labels)} images from {path}")
    return labels


def write_labels(path, label_sets: Iterable[LabelSet]) -> int:
    count = 0
    with open(path, 'w', encoding='utf-8') as f:
        for label_set in label_sets:
            _check_image_id(label_set.image_id)
            f.write(f"{label_set.image_id}\t{';'.join(sorted(label_set.labels))}\n")
            count += 1
    return count


def ingest_rankings(path) -> Dict[str, List[str]]:
    """Externally produced rankings: query_id -> ranked image ids"""
    rankings = {}
    for line_no, line in _data_lines(path):
        query_id, sep, field = line.partition('\t')
        query_id = query_id.strip()
        if not sep or not query_id:
            raise ParseError(path, line_no, "expected query_id<TAB>image ids")
        if query_id in rankings:
            raise DuplicateImageId(query_id)
        rankings[query_id] = field.split()
    return rankings


class IndexFile:
    """Feature index persisted as a flat text file"""

    def __init__(self, path):
        self.path = Path(path)

    def save(self, index: FeatureIndex) -> None:
        """Write header and one line per feature, ascending image id"""
        with open(self.path, 'w', encoding='utf-8') as f:
            f.write(f"semdist-index v1 N={index.n_classes} K={index.params.k}\n")
            for feature in index:
                _check_image_id(feature.image_id)
                pairs = ' '.join(f"{c}:{_format_prob(p)}" for c, p in feature.entries)
                f.write(f"{feature.image_id}\t{feature.k}\t{pairs}\n")
        logger.info(f"Saved index with {len(index)} features to {self.path}")

    def read_header(self) -> Tuple[int, int]:
        """(N, K) from the header line"""
        with open(self.path, 'r', encoding='utf-8') as f:
            header = f.readline().rstrip('\r\n')
        match = INDEX_HEADER.match(header)
        if not match:
            raise ParseError(self.path, 1, f"bad index header: {header!r}")
        return int(match.group(1)), int(match.group(2))

    def load_features(self) -> List[SparseFeature]:
        features = []
        for line_no, line in _data_lines(self.path):
            if line_no == 1:
                continue
            parts = line.split('\t')
            if len(parts) != 3:
                raise ParseError(self.path, line_no, "expected image_id<TAB>k<TAB>pairs")
            image_id, k_field, pair_field = parts
            try:
                k = int(k_field)
            except ValueError:
                raise ParseError(self.path, line_no, f"not a count: {k_field!r}") from None
            class_ids, probs = _parse_pairs(self.path, line_no, pair_field.split())
            if len(class_ids) != k:
                raise ParseError(self.path, line_no, f"declared {k} entries, found {len(class_ids)}")
            features.append(SparseFeature(image_id, class_ids, probs))
        return features

    def load(self, params: Optional[DistanceParams] = None) -> FeatureIndex:
        """Rebuild the index; K comes from the header, weights from params"""
        n_classes, k = self.read_header()
        params = replace(params or DistanceParams(), k=k)
        return build_index(self.load_features(), params, n_classes)
