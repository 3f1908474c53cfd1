import json

import pytest
from hypothesis import given, settings

from core.errors import MalformedDocument, SchemaViolation
from core.parser import (
    derive_scenario_id, format_path, parse_scenario, scenario_from_dict, serialize_scenario, template_schema,
)
from core.scenario import StructureMode
from core.taxonomy import DEFAULT_L4_OBJECTS, Taxonomy
from tests.conftest import hard_document
from tests.strategies import hard_scenarios, text_scenarios


def test_parse_hard_document(taxonomy):
    s = parse_scenario(json.dumps(hard_document()), taxonomy=taxonomy)
    assert s.mode is StructureMode.HARD
    assert s.id == "hard-001"
    objects = s.layer(4).body.group("objects")
    assert [c.category for c in objects] == ["vehicle", "pedestrian"]
    assert objects[0].motion == "stationary"
    assert objects[1].position is None
    assert s.layer(3).body.is_empty


def test_text_mode_is_inferred_from_strings():
    doc = {f"L{k}": f"layer {k}" for k in range(1, 6)}
    s = parse_scenario(json.dumps(doc))
    assert s.mode is StructureMode.UNSTRUCTURED
    assert s.layer(2).body == "layer 2"


def test_invalid_json_is_malformed():
    with pytest.raises(MalformedDocument):
        parse_scenario('{"L1": "cut')


def test_non_object_is_malformed():
    with pytest.raises(MalformedDocument):
        parse_scenario("[1, 2, 3]")


def test_missing_layer_is_a_violation():
    doc = {f"L{k}": "text" for k in (1, 2, 3, 5)}
    with pytest.raises(SchemaViolation) as info:
        parse_scenario(json.dumps(doc), mode="unstructured")
    assert info.value.path == "layers[4]"


def test_sixth_layer_is_rejected():
    doc = {f"L{k}": "text" for k in range(1, 7)}
    with pytest.raises(SchemaViolation) as info:
        parse_scenario(json.dumps(doc))
    assert "layers[6]" in [path for path, _ in info.value.violations]


def test_unknown_category_reports_its_path(taxonomy):
    doc = hard_document(objects=[
        {"type": "vehicle", "characteristics": "van"},
        {"type": "spaceship", "characteristics": "silver saucer"},
    ])
    with pytest.raises(SchemaViolation) as info:
        scenario_from_dict(doc, taxonomy=taxonomy)
    assert info.value.path == "layers[4].objects[1].category"


def test_category_matching_is_case_and_space_insensitive(taxonomy):
    doc = hard_document(objects=[{"type": "  Inanimate   OBJECT ", "characteristics": "cone"}])
    s = scenario_from_dict(doc, taxonomy=taxonomy)
    assert s.layer(4).body.group("objects")[0].category == "inanimate object"


def test_motion_outside_layer_four_is_rejected(taxonomy):
    doc = hard_document()
    doc["L5"]["weather"][0]["motion"] = "drifting"
    with pytest.raises(SchemaViolation) as info:
        scenario_from_dict(doc, taxonomy=taxonomy)
    assert info.value.path == "layers[5].weather[0].motion"


def test_empty_characteristics_are_rejected(taxonomy):
    doc = hard_document(objects=[{"type": "vehicle", "characteristics": "   "}])
    with pytest.raises(SchemaViolation) as info:
        scenario_from_dict(doc, taxonomy=taxonomy)
    assert info.value.path == "layers[4].objects[0].characteristics"


def test_undeclared_group_is_rejected(taxonomy):
    doc = hard_document()
    doc["L4"]["aircraft"] = []
    with pytest.raises(SchemaViolation) as info:
        scenario_from_dict(doc, taxonomy=taxonomy)
    assert info.value.path == "layers[4].aircraft"


def test_layer_three_categories_are_free_text(taxonomy):
    doc = hard_document()
    doc["L3"] = {"objects": [{"type": "fallen tree", "characteristics": "blocks the right lane"}]}
    s = scenario_from_dict(doc, taxonomy=taxonomy)
    assert s.layer(3).body.group("objects")[0].category == "fallen tree"


def test_declared_mode_must_match_requested_mode(taxonomy):
    with pytest.raises(SchemaViolation) as info:
        scenario_from_dict(hard_document(), mode="soft", taxonomy=taxonomy)
    assert info.value.path == "mode"


def test_missing_id_is_derived_from_content(taxonomy):
    doc = hard_document()
    del doc["id"]
    first = scenario_from_dict(doc, taxonomy=taxonomy)
    second = scenario_from_dict(dict(doc), taxonomy=taxonomy)
    assert first.id == second.id == derive_scenario_id(doc)
    assert first.id.startswith("scn-")


def test_unknown_top_level_keys_survive_a_round_trip(taxonomy):
    doc = hard_document()
    doc["source_frame"] = {"dataset": "city-drive", "frame": 17}
    s = scenario_from_dict(doc, taxonomy=taxonomy)
    again = parse_scenario(serialize_scenario(s), taxonomy=taxonomy)
    assert again.extras == {"source_frame": {"dataset": "city-drive", "frame": 17}}


def test_serialization_is_canonical(taxonomy):
    s = scenario_from_dict(hard_document(), taxonomy=taxonomy)
    text = serialize_scenario(s)
    assert text.endswith("\n")
    assert list(json.loads(text)) == ["id", "mode", "L1", "L2", "L3", "L4", "L5"]
    assert json.loads(text)["L3"] == []
    assert serialize_scenario(parse_scenario(text, taxonomy=taxonomy)) == text


@settings(max_examples=50)
@given(hard_scenarios())
def test_hard_serialization_is_a_fixed_point(s):
    text = serialize_scenario(s)
    assert parse_scenario(text) == s


@settings(max_examples=50)
@given(text_scenarios())
def test_text_serialization_is_a_fixed_point(s):
    assert parse_scenario(serialize_scenario(s)) == s


def test_template_schema_inlines_taxonomy(taxonomy):
    schema = template_schema(taxonomy)
    objects = schema["properties"]["L4"]["properties"]["objects"]["items"]
    assert objects["properties"]["type"]["enum"] == list(taxonomy.categories(4, "objects"))
    assert "motion" in objects["properties"]
    weather = schema["properties"]["L5"]["properties"]["weather"]["items"]
    assert "motion" not in weather["properties"]


def test_format_path_renames_type_to_category():
    assert format_path(["L4", "objects", 0, "type"]) == "layers[4].objects[0].category"
    assert format_path([]) == "document"


def test_groups_missing_from_a_partial_taxonomy_are_unconstrained():
    partial = Taxonomy.from_mapping({"L4": {"objects": list(DEFAULT_L4_OBJECTS)}})
    s = parse_scenario(json.dumps(hard_document()), taxonomy=partial)
    assert s.layer(1).body.group("roads")[0].category == "urban road"
    assert s.layer(5).body.group("weather")[0].category == "clear"
    doc = hard_document(objects=[{"type": "spaceship", "characteristics": "silver saucer"}])
    with pytest.raises(SchemaViolation) as info:
        scenario_from_dict(doc, taxonomy=partial)
    assert info.value.path == "layers[4].objects[0].category"


def _set(layer, group, field, value, index=0):
    def mutate(doc):
        doc[layer][group][index][field] = value
    return mutate


def _drop(layer, group, field):
    def mutate(doc):
        del doc[layer][group][0][field]
    return mutate


def _replace(key, value):
    def mutate(doc):
        doc[key] = value
    return mutate


def _replace_group(layer, group, value):
    def mutate(doc):
        doc[layer][group] = value
    return mutate


INVALID_HARD_DOCUMENTS = [
    (_set("L4", "objects", "type", "spaceship"), "layers[4].objects[0].category"),
    (_set("L1", "roads", "type", "canal"), "layers[1].roads[0].category"),
    (_set("L2", "environment", "type", "moon base"), "layers[2].environment[0].category"),
    (_set("L5", "weather", "type", "meteor shower"), "layers[5].weather[0].category"),
    (_set("L5", "illumination", "type", "strobe"), "layers[5].illumination[0].category"),
    (_drop("L4", "objects", "characteristics"), "layers[4].objects[0].characteristics"),
    (_drop("L1", "roads", "characteristics"), "layers[1].roads[0].characteristics"),
    (_set("L2", "structures", "characteristics", "  "), "layers[2].structures[0].characteristics"),
    (_set("L4", "objects", "characteristics", 42), "layers[4].objects[0].characteristics"),
    (_drop("L5", "weather", "type"), "layers[5].weather[0].category"),
    (_set("L4", "objects", "position", 3), "layers[4].objects[0].position"),
    (_set("L5", "weather", "motion", "drifting"), "layers[5].weather[0].motion"),
    (_set("L1", "roads", "motion", "flowing"), "layers[1].roads[0].motion"),
    (_set("L2", "structures", "motion", "swaying"), "layers[2].structures[0].motion"),
    (_replace("L3", {"objects": [{"type": "debris", "characteristics": "tire", "motion": "rolling"}]}),
     "layers[3].objects[0].motion"),
    (_replace("L6", {"objects": []}), "layers[6]"),
    (_replace("L0", "pre-layer"), "layers[0]"),
    (_replace("L1", "a two-lane road"), "layers[1]"),
    (_replace("L1", [{"type": "highway", "characteristics": "three lanes"}]), "layers[1]"),
    (_replace_group("L5", "weather", "sunny"), "layers[5].weather"),
    (_replace_group("L4", "aircraft", []), "layers[4].aircraft"),
    (_replace_group("L4", "objects", ["vehicle"]), "layers[4].objects[0]"),
]


@pytest.mark.parametrize("mutate, path", INVALID_HARD_DOCUMENTS)
def test_invalid_hard_documents_report_qualified_paths(taxonomy, mutate, path):
    doc = hard_document()
    mutate(doc)
    with pytest.raises(SchemaViolation) as info:
        scenario_from_dict(doc, taxonomy=taxonomy)
    assert path in [p for p, _ in info.value.violations]


def test_missing_layer_in_hard_mode(taxonomy):
    doc = hard_document()
    del doc["L2"]
    with pytest.raises(SchemaViolation) as info:
        scenario_from_dict(doc, taxonomy=taxonomy)
    assert info.value.path == "layers[2]"
