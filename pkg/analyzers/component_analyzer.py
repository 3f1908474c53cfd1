"""Component-level metrics on category-count vectors of hard-mode layers."""
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from analyzers.semantic_analyzer import (
    NA, Aggregation, Score, diversity_from_matrix, originality_from_matrix, similarity_matrix,
)
from config import FREE_TEXT_LAYERS, LAYER_GROUPS
from core.errors import (
    DimensionMismatch, EmptySet, NotApplicable, NotHardMode, SchemaViolation, TooFewSamples,
)
from core.scenario import Scenario
from core.taxonomy import Taxonomy, normalize_category


@dataclass(frozen=True)
class ComponentVector:
    """Counts of components per taxonomy category; group None spans every group of the layer."""
    counts: Tuple[int, ...]
    layer: int
    group: Optional[str]

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def is_zero(self) -> bool:
        return not any(self.counts)


def _require_hard(s: Scenario, k: int) -> None:
    if not s.layer(k).is_structured:
        raise NotHardMode(f"scenario {s.id!r} is {s.mode.value}; component vectors need hard mode")


def _layer_groups(k: int, group: Optional[str], taxonomy: Taxonomy) -> Tuple[str, ...]:
    if k in FREE_TEXT_LAYERS:
        raise NotApplicable(f"L{k} categories are free text")
    if group is None:
        groups = taxonomy.groups(k)
        if not groups:
            raise NotApplicable(f"L{k} has no enumerated groups")
        return groups
    if group not in LAYER_GROUPS[k]:
        raise NotApplicable(f"L{k} has no group {group!r}")
    taxonomy.categories(k, group)
    return (group,)


def component_vector(s: Scenario, k: int, group: Optional[str], taxonomy: Taxonomy) -> ComponentVector:
    """
    Count the components of (layer k, group) per taxonomy category.

    With group None, the vectors of every enumerated group of layer k are
    concatenated in template order.
    """
    groups = _layer_groups(k, group, taxonomy)
    _require_hard(s, k)
    body = s.layer(k).body
    counts = []
    for name in groups:
        categories = [normalize_category(c) for c in taxonomy.categories(k, name)]
        group_counts = [0] * len(categories)
        for component in body.group(name):
            wanted = normalize_category(component.category)
            if wanted not in categories:
                raise SchemaViolation(
                    [(f"layers[{k}].{name}", f"category {component.category!r} is not in the taxonomy")],
                    source=s.id)
            group_counts[categories.index(wanted)] += 1
        counts.extend(group_counts)
    return ComponentVector(tuple(counts), k, group)


def component_similarity(u: ComponentVector, v: ComponentVector) -> float:
    """Cosine of the counts, extended with 1.0 for two empty layers and 0.0 for one."""
    if u.dim != v.dim:
        raise DimensionMismatch(f"cannot compare component vectors of dims {u.dim} and {v.dim}")
    if u.is_zero and v.is_zero:
        return 1.0
    if u.is_zero or v.is_zero:
        return 0.0
    return float(similarity_matrix(np.asarray(u.counts, dtype=np.float64),
                                   np.asarray(v.counts, dtype=np.float64))[0, 0])


def component_similarity_matrix(a: Sequence[ComponentVector], b: Sequence[ComponentVector]) -> np.ndarray:
    """Pairwise component_similarity, shape (len(a), len(b))."""
    ma = np.asarray([u.counts for u in a], dtype=np.float64)
    mb = np.asarray([v.counts for v in b], dtype=np.float64)
    if not len(a) or not len(b):
        return np.zeros((len(a), len(b)), dtype=np.float64)
    matrix = similarity_matrix(ma, mb)
    zero_a = ~ma.any(axis=1)
    zero_b = ~mb.any(axis=1)
    matrix[np.ix_(zero_a, ~zero_b)] = 0.0
    matrix[np.ix_(~zero_a, zero_b)] = 0.0
    matrix[np.ix_(zero_a, zero_b)] = 1.0
    return matrix


def component_metrics(gen: Sequence[Scenario], refs: Sequence[Scenario], k: int,
                      group: Optional[str], taxonomy: Taxonomy) -> Dict[str, Score]:
    """
    Component originality and diversity for one layer (or one group of it).

    Returns:
        {"CO": O(max) of gen against refs, "CD_gen": D(mean) of gen, "CD_ref": D(mean) of refs};
        every entry is NA for free-text layers, CO is NA when either set is empty
        and CD is NA for sets of fewer than two scenarios.
    """
    try:
        gen_vectors = [component_vector(s, k, group, taxonomy) for s in gen]
        ref_vectors = [component_vector(s, k, group, taxonomy) for s in refs]
    except NotApplicable:
        return {"CO": NA, "CD_gen": NA, "CD_ref": NA}

    if gen_vectors and ref_vectors:
        co = originality_from_matrix(component_similarity_matrix(gen_vectors, ref_vectors), Aggregation.MAX)
    else:
        co = NA
    return {
        "CO": co,
        "CD_gen": _component_diversity(gen_vectors),
        "CD_ref": _component_diversity(ref_vectors),
    }


def _component_diversity(vectors: Sequence[ComponentVector]) -> Score:
    try:
        return diversity_from_matrix(component_similarity_matrix(vectors, vectors), Aggregation.MEAN)
    except TooFewSamples:
        return NA


def mean_component_count(scenes: Sequence[Scenario], k: int, group: str) -> float:
    """Average number of components per scene in (layer k, group)."""
    if not scenes:
        raise EmptySet("mean component count of an empty set")
    if group not in LAYER_GROUPS[k]:
        raise NotApplicable(f"L{k} has no group {group!r}")
    total = 0
    for s in scenes:
        _require_hard(s, k)
        total += len(s.layer(k).body.group(group))
    return total / len(scenes)
