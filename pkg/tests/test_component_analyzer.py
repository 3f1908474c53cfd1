import pytest
from hypothesis import given, settings

from analyzers.component_analyzer import (
    ComponentVector, component_metrics, component_similarity, component_vector, mean_component_count,
)
from core.errors import DimensionMismatch, EmptySet, NotApplicable, NotHardMode, SchemaViolation
from core.parser import scenario_from_dict
from core.scenario import Component, Layer, StructuredBody
from tests.conftest import hard_document, text_scenario
from tests.strategies import hard_scenarios


def objects(*categories):
    return [{"type": c, "characteristics": f"some {c}"} for c in categories]


def scene(taxonomy, scenario_id, *categories):
    return scenario_from_dict(hard_document(scenario_id, objects(*categories)), taxonomy=taxonomy)


def test_counts_follow_taxonomy_order(taxonomy):
    s = scene(taxonomy, "s1", "vehicle", "inanimate object", "vehicle", "pedestrian")
    assert component_vector(s, 4, "objects", taxonomy).counts == (2, 0, 1, 0, 1, 0)


def test_layer_vector_concatenates_groups(taxonomy, hard_scenario):
    vector = component_vector(hard_scenario, 5, None, taxonomy)
    weather = len(taxonomy.categories(5, "weather"))
    illumination = len(taxonomy.categories(5, "illumination"))
    assert vector.dim == weather + illumination
    assert vector.counts[taxonomy.categories(5, "weather").index("clear")] == 1
    assert vector.counts[weather + taxonomy.categories(5, "illumination").index("daylight")] == 1


def test_layer_three_is_not_applicable(taxonomy, hard_scenario):
    with pytest.raises(NotApplicable):
        component_vector(hard_scenario, 3, "objects", taxonomy)
    with pytest.raises(NotApplicable):
        component_vector(hard_scenario, 4, "aircraft", taxonomy)


def test_text_scenarios_have_no_components(taxonomy):
    with pytest.raises(NotHardMode):
        component_vector(text_scenario(), 4, "objects", taxonomy)


def test_category_outside_taxonomy_is_a_violation(taxonomy, hard_scenario):
    odd = StructuredBody({"objects": (Component("hovercraft", "floating"),)})
    s = hard_scenario.with_layer(Layer(4, odd))
    with pytest.raises(SchemaViolation):
        component_vector(s, 4, "objects", taxonomy)


def test_similarity_of_empty_layers():
    zero = ComponentVector((0, 0, 0), 4, "objects")
    some = ComponentVector((1, 0, 2), 4, "objects")
    assert component_similarity(zero, zero) == 1.0
    assert component_similarity(zero, some) == 0.0
    assert component_similarity(some, some) == 1.0
    with pytest.raises(DimensionMismatch):
        component_similarity(some, ComponentVector((1, 0), 4, "objects"))


def test_component_metrics(taxonomy):
    refs = [scene(taxonomy, "r1", "vehicle", "pedestrian"), scene(taxonomy, "r2", "vehicle")]
    gen = [scene(taxonomy, "g1", "vehicle", "pedestrian"), scene(taxonomy, "g2", "animal")]
    scores = component_metrics(gen, refs, 4, "objects", taxonomy)
    # g1 copies r1 (1.0); g2 shares no category with any reference (0.0)
    assert scores["CO"].value == pytest.approx(0.5)
    assert scores["CD_gen"].value == pytest.approx(0.0)
    assert scores["CD_ref"].value == pytest.approx(2 ** -0.5)


def test_component_metrics_on_layer_three_are_na(taxonomy, hard_scenario):
    scores = component_metrics([hard_scenario], [hard_scenario], 3, None, taxonomy)
    assert all(score.is_na for score in scores.values())


def test_single_generated_scene_has_no_component_diversity(taxonomy, hard_scenario):
    scores = component_metrics([hard_scenario], [hard_scenario], 4, "objects", taxonomy)
    assert scores["CO"].value == 1.0
    assert scores["CD_gen"].is_na


def test_mean_component_count(taxonomy):
    scenes = [scene(taxonomy, "a", "vehicle", "vehicle", "animal"), scene(taxonomy, "b", "cyclist")]
    assert mean_component_count(scenes, 4, "objects") == 2.0
    assert mean_component_count(scenes, 3, "objects") == 0.0
    with pytest.raises(EmptySet):
        mean_component_count([], 4, "objects")


@settings(max_examples=100)
@given(hard_scenarios())
def test_vector_entries_sum_to_the_component_count(taxonomy, s):
    for k in (1, 2, 4, 5):
        groups = taxonomy.groups(k)
        whole = component_vector(s, k, None, taxonomy)
        assert sum(whole.counts) == sum(len(s.layer(k).body.group(group)) for group in groups)
        for group in groups:
            assert sum(component_vector(s, k, group, taxonomy).counts) == len(s.layer(k).body.group(group))
