"""Parse, validate and serialize scenario documents.

A scenario document is one JSON object with the layer keys "L1".."L5" plus
optional "id", "mode" and "provenance". Text modes hold a string per layer;
hard mode holds an object of group name -> array of components, each
component written as {"type", "characteristics", "position"?, "motion"?, ...}.
"""
import hashlib
import json
import re
from datetime import datetime
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple, Union

from jsonschema import Draft202012Validator

from config import COMPONENT_KEYS, FREE_TEXT_LAYERS, LAYER_GROUPS, LAYER_INDICES, MOTION_LAYERS
from core.errors import MalformedDocument, SchemaViolation
from core.scenario import (
    Component, ContextMode, Layer, Provenance, Scenario, StructuredBody, StructureMode,
)
from core.taxonomy import Taxonomy, load_taxonomy

_LAYER_KEY = re.compile(r"^L(\d+)$")
_RESERVED_KEYS = ("id", "mode", "provenance") + tuple(f"L{k}" for k in LAYER_INDICES)

Violation = Tuple[str, str]


# ================================
# TEMPLATE SCHEMA
# ================================

def _component_schema(k: int, group: str, taxonomy: Optional[Taxonomy], with_enums: bool) -> Dict[str, Any]:
    category: Dict[str, Any] = {"type": "string", "minLength": 1}
    if with_enums and taxonomy is not None and taxonomy.lookup(k, group) is not None:
        category["enum"] = list(taxonomy.lookup(k, group))
    properties: Dict[str, Any] = {
        "type": category,
        "characteristics": {"type": "string"},
        "position": {"type": "string"},
    }
    schema: Dict[str, Any] = {"type": "object", "required": ["type", "characteristics"]}
    if k in MOTION_LAYERS:
        properties["motion"] = {"type": "string"}
    elif not with_enums:
        properties["motion"] = False
    if with_enums:
        schema["additionalProperties"] = False
    schema["properties"] = properties
    return schema


def _layer_schema(k: int, taxonomy: Optional[Taxonomy], with_enums: bool) -> Dict[str, Any]:
    groups = LAYER_GROUPS[k]
    schema: Dict[str, Any] = {
        "type": "object",
        "properties": {
            group: {"type": "array", "items": _component_schema(k, group, taxonomy, with_enums)}
            for group in groups
        },
        "additionalProperties": False,
    }
    if with_enums:
        schema["required"] = list(groups)
    return schema


def template_schema(taxonomy: Optional[Taxonomy] = None, k: Optional[int] = None,
                    with_enums: bool = True) -> Dict[str, Any]:
    """JSON Schema of the hard template, for one layer or the whole scenario.

    With `with_enums` the category lists of the taxonomy are inlined, which is
    the form handed to schema-enforcing chat clients.
    """
    if k is not None:
        return _layer_schema(k, taxonomy, with_enums)
    return {
        "type": "object",
        "required": [f"L{i}" for i in LAYER_INDICES],
        "properties": {f"L{i}": _layer_schema(i, taxonomy, with_enums) for i in LAYER_INDICES},
    }


@lru_cache(maxsize=1)
def _structure_validator() -> Draft202012Validator:
    return Draft202012Validator(template_schema(None, with_enums=False))


# ================================
# PATHS
# ================================

def format_path(parts) -> str:
    """Render a JSON path as layers[4].objects[0].category."""
    parts = list(parts)
    if not parts:
        return "document"
    head = parts[0]
    match = _LAYER_KEY.match(head) if isinstance(head, str) else None
    out = f"layers[{match.group(1)}]" if match else str(head)
    for depth, part in enumerate(parts[1:], start=1):
        if isinstance(part, int):
            out += f"[{part}]"
        elif depth == 3 and part == "type":
            out += ".category"
        else:
            out += f".{part}"
    return out


def _schema_violations(document: Dict[str, Any]) -> List[Violation]:
    violations = []
    errors = sorted(_structure_validator().iter_errors(document),
                    key=lambda e: [str(p) for p in e.absolute_path])
    for error in errors:
        path = list(error.absolute_path)
        if error.validator == "required":
            missing = [name for name in error.validator_value if name not in error.instance]
            for name in missing:
                violations.append((format_path(path + [name]), "is required"))
        elif error.validator == "additionalProperties":
            declared = error.schema.get("properties", {})
            for name in error.instance:
                if name not in declared:
                    violations.append((format_path(path + [name]), "is not a group declared for this layer"))
        elif path and path[-1] == "motion":
            violations.append((format_path(path), "motion is only allowed in layer L4"))
        else:
            violations.append((format_path(path), error.message))
    return violations


# ================================
# PARSING
# ================================

def _resolve_mode(data: Dict[str, Any], mode: Optional[Union[StructureMode, str]],
                  violations: List[Violation]) -> StructureMode:
    declared = data.get("mode")
    if declared is not None:
        try:
            declared = StructureMode(declared)
        except ValueError:
            violations.append(("mode", f"unknown structure mode {declared!r}"))
            declared = None
    if mode is not None:
        mode = StructureMode(mode)
        if declared is not None and declared is not mode:
            violations.append(("mode", f"document is {declared.value}, expected {mode.value}"))
        return mode
    if declared is not None:
        return declared
    layers = [data.get(f"L{k}") for k in LAYER_INDICES]
    if all(isinstance(value, str) for value in layers if value is not None):
        return StructureMode.UNSTRUCTURED
    return StructureMode.HARD


def _parse_text_layers(data: Dict[str, Any], violations: List[Violation]) -> List[Layer]:
    layers = []
    for k in LAYER_INDICES:
        value = data.get(f"L{k}")
        if value is None:
            violations.append((f"layers[{k}]", "is required"))
        elif not isinstance(value, str):
            violations.append((f"layers[{k}]", "expected layer text"))
        else:
            layers.append(Layer(k, value))
    return layers


def _normalize_hard_layers(data: Dict[str, Any], violations: List[Violation]) -> Dict[str, Any]:
    normalized: Dict[str, Any] = {}
    for k in LAYER_INDICES:
        key = f"L{k}"
        if key not in data:
            continue
        value = data[key]
        if isinstance(value, list):
            groups = LAYER_GROUPS[k]
            if not value:
                value = {}
            elif len(groups) == 1:
                value = {groups[0]: value}
            else:
                violations.append((f"layers[{k}]", f"a non-empty layer must name its groups {list(groups)}"))
                value = {}
        if isinstance(value, dict):
            value = {
                group: [_drop_null_fields(item) for item in items] if isinstance(items, list) else items
                for group, items in value.items()
            }
        normalized[key] = value
    return normalized


def _drop_null_fields(item: Any) -> Any:
    if not isinstance(item, dict):
        return item
    return {key: value for key, value in item.items()
            if not (key in ("position", "motion") and value is None)}


def _build_component(k: int, group: str, index: int, raw: Dict[str, Any],
                     taxonomy: Taxonomy, violations: List[Violation]) -> Optional[Component]:
    path = f"layers[{k}].{group}[{index}]"
    category = raw["type"]
    if k not in FREE_TEXT_LAYERS and taxonomy.lookup(k, group) is not None:
        canonical = taxonomy.match(k, group, category)
        if canonical is None:
            expected = ", ".join(taxonomy.categories(k, group))
            violations.append((f"{path}.category", f"unknown category {category!r}; expected one of: {expected}"))
            return None
        category = canonical
    if not raw["characteristics"].strip():
        violations.append((f"{path}.characteristics", "must be non-empty"))
        return None
    extras = {key: value for key, value in raw.items() if key not in COMPONENT_KEYS}
    return Component(
        category=category,
        characteristics=raw["characteristics"],
        position=raw.get("position"),
        motion=raw.get("motion"),
        extras=extras,
    )


def _parse_hard_layers(data: Dict[str, Any], taxonomy: Taxonomy, violations: List[Violation]) -> List[Layer]:
    normalized = _normalize_hard_layers(data, violations)
    structural = _schema_violations(normalized)
    if structural or violations:
        violations.extend(structural)
        return []
    layers = []
    for k in LAYER_INDICES:
        groups: Dict[str, Tuple[Component, ...]] = {}
        raw_groups = normalized[f"L{k}"]
        for group in LAYER_GROUPS[k]:
            built = []
            for index, raw in enumerate(raw_groups.get(group, [])):
                component = _build_component(k, group, index, raw, taxonomy, violations)
                if component is not None:
                    built.append(component)
            groups[group] = tuple(built)
        layers.append(Layer(k, StructuredBody(groups)))
    return layers


def _parse_provenance(raw: Any, violations: List[Violation]) -> Optional[Provenance]:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        violations.append(("provenance", "expected an object"))
        return None
    try:
        return Provenance(
            source_id=str(raw["source_id"]),
            edited_layer=int(raw["edited_layer"]),
            strategy=StructureMode(raw["strategy"]),
            context_mode=ContextMode(raw["context_mode"]),
            model_id=str(raw["model_id"]),
            temperature=float(raw["temperature"]),
            created_at=datetime.fromisoformat(raw["created_at"]),
        )
    except KeyError as e:
        violations.append((f"provenance.{e.args[0]}", "is required"))
    except (TypeError, ValueError) as e:
        violations.append(("provenance", str(e)))
    return None


def derive_scenario_id(data: Dict[str, Any]) -> str:
    """Content-hash id for documents that do not carry one."""
    layers = {f"L{k}": data.get(f"L{k}") for k in LAYER_INDICES}
    digest = hashlib.sha256(json.dumps(layers, sort_keys=True, ensure_ascii=False).encode("utf-8"))
    return f"scn-{digest.hexdigest()[:12]}"


def scenario_from_dict(data: Any, mode: Optional[Union[StructureMode, str]] = None,
                       taxonomy: Optional[Taxonomy] = None, source: Optional[str] = None) -> Scenario:
    """Validate an already-decoded document and build the Scenario."""
    if not isinstance(data, dict):
        raise MalformedDocument(f"{source + ': ' if source else ''}a scenario document must be a JSON object")
    taxonomy = taxonomy or load_taxonomy()
    violations: List[Violation] = []

    for key in data:
        match = _LAYER_KEY.match(key)
        if match and int(match.group(1)) not in LAYER_INDICES:
            violations.append((f"layers[{match.group(1)}]", "a scenario has exactly five layers L1..L5"))

    resolved = _resolve_mode(data, mode, violations)
    if resolved.is_text:
        layers = _parse_text_layers(data, violations)
    else:
        layers = _parse_hard_layers(data, taxonomy, violations)

    scenario_id = data.get("id")
    if scenario_id is not None and (not isinstance(scenario_id, str) or not scenario_id.strip()):
        violations.append(("id", "expected a non-empty string"))
    provenance = _parse_provenance(data.get("provenance"), violations)

    if violations:
        raise SchemaViolation(violations, source=source)

    extras = {key: value for key, value in data.items() if key not in _RESERVED_KEYS}
    return Scenario(
        id=scenario_id or derive_scenario_id(data),
        mode=resolved,
        layers=tuple(layers),
        provenance=provenance,
        extras=extras,
    )


def parse_scenario(document: str, mode: Optional[Union[StructureMode, str]] = None,
                   taxonomy: Optional[Taxonomy] = None, source: Optional[str] = None) -> Scenario:
    """
    Parse one scenario document.

    Args:
        document: JSON text of the scenario
        mode: Expected structure mode; inferred from the document when None
        taxonomy: Category lists for hard mode (default taxonomy when None)
        source: Optional file name used in error messages

    Returns:
        A validated Scenario

    Raises:
        MalformedDocument: the text is not a JSON object
        SchemaViolation: the document breaks the template or taxonomy
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        prefix = f"{source}: " if source else ""
        raise MalformedDocument(f"{prefix}invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    return scenario_from_dict(data, mode, taxonomy, source)


# ================================
# SERIALIZATION
# ================================

def component_to_dict(component: Component) -> Dict[str, Any]:
    out: Dict[str, Any] = {"type": component.category, "characteristics": component.characteristics}
    if component.position is not None:
        out["position"] = component.position
    if component.motion is not None:
        out["motion"] = component.motion
    out.update(component.extras)
    return out


def layer_to_document(layer: Layer) -> Any:
    if not layer.is_structured:
        return layer.body
    if layer.body.is_empty:
        return []
    return {
        group: [component_to_dict(c) for c in layer.body.group(group)]
        for group in LAYER_GROUPS[layer.index]
    }


def provenance_to_dict(provenance: Provenance) -> Dict[str, Any]:
    return {
        "source_id": provenance.source_id,
        "edited_layer": provenance.edited_layer,
        "strategy": provenance.strategy.value,
        "context_mode": provenance.context_mode.value,
        "model_id": provenance.model_id,
        "temperature": provenance.temperature,
        "created_at": provenance.created_at.isoformat(),
    }


def scenario_to_dict(s: Scenario) -> Dict[str, Any]:
    document: Dict[str, Any] = {"id": s.id, "mode": s.mode.value}
    for layer in s.layers:
        document[f"L{layer.index}"] = layer_to_document(layer)
    if s.provenance is not None:
        document["provenance"] = provenance_to_dict(s.provenance)
    document.update(s.extras)
    return document


def serialize_scenario(s: Scenario) -> str:
    """Stable JSON text: id, mode, L1..L5, groups in template order, provenance, extras."""
    return json.dumps(scenario_to_dict(s), indent=2, ensure_ascii=False) + "\n"
