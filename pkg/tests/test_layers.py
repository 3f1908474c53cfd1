import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from config import LAYER_GROUPS, LAYER_INDICES, LAYER_SEPARATOR
from core.errors import ModeMismatch
from core.layers import component_line, concat_layers, convert_mode, diff_layers, layer_text
from core.parser import scenario_from_dict
from core.scenario import Component, Layer, StructuredBody, StructureMode
from tests.conftest import hard_document, text_scenario
from tests.strategies import components, hard_scenarios, sentences, text_scenarios

BASE_SCENE = scenario_from_dict(hard_document())


def test_component_line_joins_present_fields():
    full = Component("vehicle", "white van", position="right", motion="stationary")
    bare = Component("vehicle", "white van")
    assert component_line("objects", full) == "objects: vehicle — white van (right; stationary)"
    assert component_line("objects", bare) == "objects: vehicle — white van"


def test_layer_text_of_structured_layer_follows_template_order(hard_scenario):
    lines = layer_text(hard_scenario, 1).split("\n")
    assert lines[0].startswith("roads: urban road")
    assert lines[1].startswith("guidance: lane marking")
    assert layer_text(hard_scenario, 3) == ""


def test_concat_layers_separates_layers_with_blank_lines():
    s = text_scenario(L1="a", L2="b", L3="c", L4="d", L5="e")
    assert concat_layers(s) == "a\n\nb\n\nc\n\nd\n\ne"


def test_diff_ignores_whitespace_changes():
    original = text_scenario()
    spaced = original.with_layer(Layer(2, "  Brick   buildings line both sides\nof the street. "))
    assert diff_layers(original, spaced) == set()


def test_diff_reports_changed_layers():
    original = text_scenario()
    edited = original.with_layer(Layer(4, "A horse crosses the road."))
    assert diff_layers(original, edited) == {4}
    assert diff_layers(edited, original) == {4}


def test_diff_refuses_mixed_modes(hard_scenario):
    with pytest.raises(ModeMismatch):
        diff_layers(text_scenario(), hard_scenario)


def test_convert_hard_to_text_keeps_layer_texts(hard_scenario):
    soft = convert_mode(hard_scenario, StructureMode.SOFT)
    assert soft.mode is StructureMode.SOFT
    assert soft.id == hard_scenario.id
    assert [layer_text(soft, k) for k in range(1, 6)] == [layer_text(hard_scenario, k) for k in range(1, 6)]


def test_text_cannot_become_hard():
    with pytest.raises(ModeMismatch):
        convert_mode(text_scenario(), "hard")


@settings(max_examples=30)
@given(hard_scenarios())
def test_a_scenario_never_differs_from_itself(s):
    assert diff_layers(s, s) == set()


@settings(max_examples=50)
@given(st.one_of(hard_scenarios(), text_scenarios()))
def test_concat_layers_holds_every_layer_in_order(s):
    texts = [layer_text(s, k) for k in LAYER_INDICES]
    joined = concat_layers(s)
    assert len(joined) == sum(len(text) for text in texts) + (len(texts) - 1) * len(LAYER_SEPARATOR)
    position = 0
    for text in texts:
        found = joined.find(text, position)
        assert found == position
        position = found + len(text) + len(LAYER_SEPARATOR)


@settings(max_examples=100)
@given(text_scenarios(), st.sampled_from(LAYER_INDICES), sentences)
def test_diff_finds_exactly_the_rewritten_text_layer(s, k, replacement):
    mutated = s.with_layer(Layer(k, replacement))
    changed = " ".join(replacement.split()) != " ".join(layer_text(s, k).split())
    assert diff_layers(s, mutated) == ({k} if changed else set())


@settings(max_examples=100)
@given(hard_scenarios(), st.data())
def test_diff_finds_exactly_the_extended_hard_layer(s, data):
    k = data.draw(st.sampled_from(LAYER_INDICES))
    group = data.draw(st.sampled_from(LAYER_GROUPS[k]))
    extra = data.draw(components(k, group))
    body = s.layer(k).body
    groups = {name: body.group(name) for name in LAYER_GROUPS[k]}
    groups[group] = groups[group] + (extra,)
    mutated = s.with_layer(Layer(k, StructuredBody(groups)))
    assert diff_layers(s, mutated) == {k}
    assert diff_layers(mutated, s) == {k}


@settings(max_examples=50)
@given(
    st.lists(components(4, "objects"), min_size=2, max_size=4, unique_by=lambda c: component_line("objects", c)),
    st.data(),
)
def test_swapping_components_changes_layer_text(items, data):
    i, j = data.draw(st.lists(st.integers(0, len(items) - 1), min_size=2, max_size=2, unique=True))
    swapped = list(items)
    swapped[i], swapped[j] = swapped[j], swapped[i]
    base = BASE_SCENE.with_layer(Layer(4, StructuredBody({"objects": tuple(items)})))
    other = BASE_SCENE.with_layer(Layer(4, StructuredBody({"objects": tuple(swapped)})))
    assert layer_text(base, 4) != layer_text(other, 4)
    assert diff_layers(base, other) == {4}
