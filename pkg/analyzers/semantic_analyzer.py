"""Originality and diversity of embedding sets.

Similarities are computed row by row with a fixed summation order, so a
row-parallel evaluation gives the same bits as a sequential one. Pairs that
involve a zero-norm row are NA (NaN inside the matrices) and are skipped by
every aggregation; their number is reported next to the score.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from core.errors import DimensionMismatch, EmptyGenerated, EmptyReference, TooFewSamples
from utils.embedder import Embedding, EmbeddingSet


class Aggregation(str, Enum):
    MIN = "min"
    MAX = "max"
    MEAN = "mean"


@dataclass(frozen=True)
class Score:
    """A metric value, None when not available, with the NA pair count."""
    value: Optional[float]
    na_pairs: int = 0

    @property
    def is_na(self) -> bool:
        return self.value is None


NA = Score(None)

Rows = Union[EmbeddingSet, np.ndarray]


def _as_matrix(rows: Rows) -> np.ndarray:
    if isinstance(rows, EmbeddingSet):
        return rows.matrix()
    matrix = np.asarray(rows, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    return np.ascontiguousarray(matrix)


def similarity_matrix(a: Rows, b: Rows) -> np.ndarray:
    """
    Pairwise cosine similarities, shape (len(a), len(b)).

    Entries involving a zero-norm row are NaN.
    """
    ma, mb = _as_matrix(a), _as_matrix(b)
    if ma.size and mb.size and ma.shape[1] != mb.shape[1]:
        raise DimensionMismatch(f"cannot compare dims {ma.shape[1]} and {mb.shape[1]}")
    squared_a = np.sum(ma * ma, axis=1)
    squared_b = np.sum(mb * mb, axis=1)
    out = np.empty((ma.shape[0], mb.shape[0]), dtype=np.float64)
    for i in range(ma.shape[0]):
        dots = np.sum(mb * ma[i], axis=1)
        denominator = squared_a[i] * squared_b
        with np.errstate(divide="ignore", invalid="ignore"):
            row = dots / np.sqrt(denominator)
        row[denominator == 0.0] = np.nan
        out[i] = row
    return out


def _aggregate(values: np.ndarray, mode: Aggregation) -> Optional[float]:
    valid = values[~np.isnan(values)]
    if valid.size == 0:
        return None
    if mode is Aggregation.MAX:
        return float(np.max(valid))
    if mode is Aggregation.MIN:
        return float(np.min(valid))
    return float(np.sum(valid) / valid.size)


def _mean_of(samples) -> Optional[float]:
    valid = [value for value in samples if value is not None]
    if not valid:
        return None
    return float(np.sum(np.asarray(valid, dtype=np.float64)) / len(valid))


# ================================
# ORIGINALITY
# ================================

def originality_from_matrix(similarities: np.ndarray, mode: Union[Aggregation, str]) -> Score:
    """Dataset originality from a (generated x reference) similarity matrix."""
    mode = Aggregation(mode)
    if similarities.shape[0] == 0:
        raise EmptyGenerated("no generated samples to score")
    if similarities.shape[1] == 0:
        raise EmptyReference("the reference set is empty")
    samples = [_aggregate(row, mode) for row in similarities]
    return Score(_mean_of(samples), int(np.isnan(similarities).sum()))


def sample_originality(e_gen: Union[Embedding, np.ndarray], refs: Rows,
                       mode: Union[Aggregation, str] = Aggregation.MAX) -> Optional[float]:
    """
    Extremal similarity of one generated sample to the reference set.

    mode=max is the closest reference; mode=min the least similar one, the
    out-of-distribution variant. Returns None when every pair is NA.
    """
    mode = Aggregation(mode)
    if mode is Aggregation.MEAN:
        raise ValueError("originality aggregates with min or max")
    matrix = _as_matrix(refs)
    if matrix.shape[0] == 0:
        raise EmptyReference("the reference set is empty")
    vector = e_gen.values if isinstance(e_gen, Embedding) else np.asarray(e_gen, dtype=np.float64)
    return _aggregate(similarity_matrix(vector, matrix)[0], mode)


def dataset_originality(gen: Rows, refs: Rows, mode: Union[Aggregation, str] = Aggregation.MAX) -> Score:
    """Mean of sample_originality over the generated rows."""
    mode = Aggregation(mode)
    if mode is Aggregation.MEAN:
        raise ValueError("originality aggregates with min or max")
    gen_matrix, ref_matrix = _as_matrix(gen), _as_matrix(refs)
    if gen_matrix.shape[0] == 0:
        raise EmptyGenerated("no generated samples to score")
    if ref_matrix.shape[0] == 0:
        raise EmptyReference("the reference set is empty")
    return originality_from_matrix(similarity_matrix(gen_matrix, ref_matrix), mode)


def nearest_reference(e_gen: Union[Embedding, np.ndarray], refs: Rows) -> Tuple[Optional[int], Optional[float]]:
    """Index and similarity of the closest reference row; ties go to the lowest index."""
    matrix = _as_matrix(refs)
    if matrix.shape[0] == 0:
        raise EmptyReference("the reference set is empty")
    vector = e_gen.values if isinstance(e_gen, Embedding) else np.asarray(e_gen, dtype=np.float64)
    row = similarity_matrix(vector, matrix)[0]
    if np.all(np.isnan(row)):
        return None, None
    index = int(np.nanargmax(row))
    return index, float(row[index])


# ================================
# DIVERSITY
# ================================

def _sample_diversity_from_matrix(similarities: np.ndarray, j: int, mode: Aggregation) -> Optional[float]:
    others = np.delete(similarities[j], j)
    return _aggregate(others, mode)


def diversity_from_matrix(similarities: np.ndarray, mode: Union[Aggregation, str]) -> Score:
    """Dataset diversity from a square self-similarity matrix; the diagonal is never used."""
    mode = Aggregation(mode)
    size = similarities.shape[0]
    if size < 2:
        raise TooFewSamples(f"diversity needs at least 2 samples, got {size}")
    samples = [_sample_diversity_from_matrix(similarities, j, mode) for j in range(size)]
    off_diagonal = np.isnan(similarities) & ~np.eye(size, dtype=bool)
    return Score(_mean_of(samples), int(off_diagonal.sum()) // 2)


def sample_diversity(j: int, rows: Rows, mode: Union[Aggregation, str] = Aggregation.MIN) -> Optional[float]:
    """
    Aggregated similarity of sample j to every other sample of the same set.

    Args:
        j: Row index, 0 <= j < M
        rows: The set, M >= 2
        mode: min, max, or mean (mean divides by the number of other samples)
    """
    mode = Aggregation(mode)
    matrix = _as_matrix(rows)
    size = matrix.shape[0]
    if size < 2:
        raise TooFewSamples(f"diversity needs at least 2 samples, got {size}")
    if not 0 <= j < size:
        raise IndexError(f"sample index {j} out of range for {size} samples")
    row = similarity_matrix(matrix[j], matrix)[0]
    return _aggregate(np.delete(row, j), mode)


def dataset_diversity(rows: Rows, mode: Union[Aggregation, str] = Aggregation.MIN) -> Score:
    """Mean of sample_diversity over all rows."""
    matrix = _as_matrix(rows)
    if matrix.shape[0] < 2:
        raise TooFewSamples(f"diversity needs at least 2 samples, got {matrix.shape[0]}")
    return diversity_from_matrix(similarity_matrix(matrix, matrix), mode)


def diversity_or_na(rows: Rows, mode: Union[Aggregation, str]) -> Score:
    """dataset_diversity, with too-small sets reported as NA."""
    try:
        return dataset_diversity(rows, mode)
    except TooFewSamples:
        return NA
