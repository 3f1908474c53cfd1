from typing import List, Optional, Sequence, Tuple

from analyzers.semantic_analyzer import NA, Aggregation, Score, dataset_diversity
from config import LAYER_GROUPS
from core.errors import NotApplicable, NotHardMode
from core.scenario import Scenario
from utils.embedder import EmbeddingCache, EmbeddingProvider, EmbeddingSet, SourceId, embed_texts

FIELDS = ("characteristics", "motion")


def collect_field_texts(scenes: Sequence[Scenario], k: int, group: str,
                        field: str = "characteristics") -> List[Tuple[SourceId, str]]:
    """Every non-empty characteristics (or motion) string of (layer k, group), scene by scene."""
    if field not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}")
    if group not in LAYER_GROUPS[k]:
        raise NotApplicable(f"L{k} has no group {group!r}")
    found = []
    for s in scenes:
        layer = s.layer(k)
        if not layer.is_structured:
            raise NotHardMode(f"scenario {s.id!r} is {s.mode.value}; characteristics need hard mode")
        for position, component in enumerate(layer.body.group(group)):
            text = getattr(component, field)
            if text and text.strip():
                found.append((SourceId(s.id, k, f"{field}({group},{position})"), text))
    return found


def characteristics_diversity(scenes: Sequence[Scenario], k: int, group: str,
                              provider: EmbeddingProvider,
                              cache: Optional[EmbeddingCache] = None,
                              field: str = "characteristics") -> Score:
    """
    Diversity (min) of the free-text field of every component of (layer k, group).

    All strings across all scenes form one set; fewer than two strings is NA.
    field="motion" scores the motion strings of layer-4 objects instead.
    """
    found = collect_field_texts(scenes, k, group, field)
    if len(found) < 2:
        return NA
    sources = [source for source, _ in found]
    vectors = embed_texts(provider, [text for _, text in found], cache)
    embeddings = EmbeddingSet.from_vectors(vectors, provider.id, sources)
    return dataset_diversity(embeddings, Aggregation.MIN)
