import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from analyzers.semantic_analyzer import (
    Aggregation, dataset_diversity, dataset_originality, diversity_or_na, nearest_reference,
    sample_diversity, sample_originality, similarity_matrix,
)
from core.errors import DimensionMismatch, EmptyGenerated, EmptyReference, TooFewSamples
from utils.embedder import EmbeddingSet
from tests.strategies import matrices, nonzero_rows

TOLERANCE = 1e-12


def brute_cosine(a, b):
    dot = sum(float(x) * float(y) for x, y in zip(a, b))
    return dot / (math.sqrt(sum(float(x) ** 2 for x in a)) * math.sqrt(sum(float(y) ** 2 for y in b)))


def brute_originality(gen, refs, pick):
    return sum(pick(brute_cosine(g, r) for r in refs) for g in gen) / len(gen)


def brute_diversity(rows, pick):
    values = []
    for j, row in enumerate(rows):
        others = [brute_cosine(row, other) for i, other in enumerate(rows) if i != j]
        values.append(pick(others))
    return sum(values) / len(values)


def mean(values):
    values = list(values)
    return sum(values) / len(values)


@st.composite
def paired(draw, min_gen=1, min_ref=1):
    dim = draw(st.integers(min_value=1, max_value=16))
    return draw(matrices(min_rows=min_gen, dim=dim)), draw(matrices(min_rows=min_ref, dim=dim))


@settings(max_examples=200)
@given(paired())
def test_originality_matches_brute_force(pair):
    gen, refs = pair
    for mode, pick in ((Aggregation.MAX, max), (Aggregation.MIN, min)):
        score = dataset_originality(gen, refs, mode)
        assert abs(score.value - brute_originality(gen, refs, pick)) <= TOLERANCE
        assert score.na_pairs == 0


@settings(max_examples=200)
@given(matrices(min_rows=2))
def test_diversity_matches_brute_force(rows):
    for mode, pick in ((Aggregation.MIN, min), (Aggregation.MAX, max), (Aggregation.MEAN, mean)):
        assert abs(dataset_diversity(rows, mode).value - brute_diversity(rows, pick)) <= TOLERANCE


@settings(max_examples=100)
@given(paired())
def test_max_originality_never_below_min(pair):
    gen, refs = pair
    assert dataset_originality(gen, refs, "max").value >= dataset_originality(gen, refs, "min").value


@settings(max_examples=100)
@given(matrices(min_rows=2))
def test_diversity_modes_are_ordered(rows):
    low = dataset_diversity(rows, "min").value
    middle = dataset_diversity(rows, "mean").value
    high = dataset_diversity(rows, "max").value
    assert low <= middle + TOLERANCE
    assert middle <= high + TOLERANCE


@settings(max_examples=50)
@given(matrices(min_rows=1))
def test_copies_of_references_have_originality_one(refs):
    assert dataset_originality(refs, refs, "max").value == pytest.approx(1.0, abs=TOLERANCE)
    for row in refs:
        assert sample_originality(row, refs, "max") == pytest.approx(1.0, abs=TOLERANCE)


@settings(max_examples=50)
@given(matrices(min_rows=2))
def test_similarity_matrix_is_symmetric(rows):
    matrix = similarity_matrix(rows, rows)
    assert np.array_equal(matrix, matrix.T)
    assert np.all(np.diag(matrix) == 1.0)


@settings(max_examples=50)
@given(matrices(min_rows=2), st.randoms())
def test_diversity_ignores_row_order(rows, rnd):
    order = list(range(len(rows)))
    rnd.shuffle(order)
    shuffled = rows[order]
    for mode in Aggregation:
        assert abs(dataset_diversity(rows, mode).value - dataset_diversity(shuffled, mode).value) <= TOLERANCE


def test_a_duplicate_row_forces_max_diversity_to_one():
    rows = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    assert sample_diversity(0, rows, "max") == 1.0
    assert sample_diversity(2, rows, "max") == 1.0


def test_two_identical_rows_have_min_diversity_one():
    rows = np.array([[0.3, 0.4], [0.3, 0.4]])
    assert dataset_diversity(rows, "min").value == 1.0


def test_orthogonal_rows_have_zero_diversity():
    assert dataset_diversity(np.eye(3), "max").value == 0.0


def test_sample_diversity_excludes_itself():
    rows = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert sample_diversity(0, rows, "max") == 0.0
    with pytest.raises(IndexError):
        sample_diversity(2, rows)


def test_zero_rows_are_not_available():
    gen = np.array([[0.0, 0.0], [1.0, 0.0]])
    refs = np.array([[1.0, 0.0], [0.0, 1.0]])
    score = dataset_originality(gen, refs, "max")
    assert score.value == 1.0
    assert score.na_pairs == 2


def test_all_pairs_unavailable_gives_na():
    score = dataset_originality(np.zeros((1, 2)), np.ones((2, 2)), "max")
    assert score.is_na


def test_degenerate_sets_raise():
    refs = np.ones((2, 3))
    with pytest.raises(EmptyGenerated):
        dataset_originality(np.zeros((0, 3)), refs)
    with pytest.raises(EmptyReference):
        dataset_originality(refs, np.zeros((0, 3)))
    with pytest.raises(TooFewSamples):
        dataset_diversity(np.ones((1, 3)))
    with pytest.raises(DimensionMismatch):
        dataset_originality(np.ones((1, 2)), np.ones((1, 3)))
    assert diversity_or_na(np.ones((1, 3)), "min").is_na


def test_originality_mean_mode_is_rejected():
    with pytest.raises(ValueError):
        dataset_originality(np.ones((1, 2)), np.ones((1, 2)), "mean")


def test_nearest_reference_prefers_lowest_index_on_ties():
    refs = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 0.0]])
    index, similarity = nearest_reference(np.array([3.0, 0.0]), refs)
    assert index == 1
    assert similarity == 1.0


def test_embedding_sets_are_accepted():
    rows = EmbeddingSet.from_vectors([[1.0, 0.0], [0.6, 0.8]])
    assert dataset_diversity(rows, "min").value == pytest.approx(0.6, abs=TOLERANCE)


@settings(max_examples=100)
@given(st.integers(min_value=1, max_value=16).flatmap(nonzero_rows), st.integers(min_value=2, max_value=8))
def test_copies_of_one_row_have_min_diversity_exactly_one(row, count):
    rows = np.stack([row] * count)
    assert dataset_diversity(rows, "min").value == 1.0
