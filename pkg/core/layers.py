from dataclasses import replace
from typing import Set, Union

from config import LAYER_GROUPS, LAYER_INDICES, LAYER_SEPARATOR
from core.errors import ModeMismatch
from core.scenario import Component, Layer, Scenario, StructureMode


def component_line(group: str, component: Component) -> str:
    """Flatten one component: "group: category — characteristics (position; motion)"."""
    line = f"{group}: {component.category} — {component.characteristics}"
    details = [value for value in (component.position, component.motion) if value]
    if details:
        line += f" ({'; '.join(details)})"
    return line


def layer_text(s: Scenario, k: int) -> str:
    """
    Text of layer k as used for embeddings and diffs.

    Text layers are returned verbatim. Structured layers give one line per
    component, groups in template order and components in stored order.
    """
    layer = s.layer(k)
    if not layer.is_structured:
        return layer.body
    lines = [
        component_line(group, component)
        for group in LAYER_GROUPS[k]
        for component in layer.body.group(group)
    ]
    return "\n".join(lines)


def concat_layers(s: Scenario) -> str:
    return LAYER_SEPARATOR.join(layer_text(s, k) for k in LAYER_INDICES)


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def diff_layers(original: Scenario, candidate: Scenario) -> Set[int]:
    """Indices of layers whose text differs once whitespace is normalized."""
    if original.mode is not candidate.mode:
        raise ModeMismatch(
            f"cannot diff {original.mode.value} scenario {original.id!r} "
            f"against {candidate.mode.value} scenario {candidate.id!r}"
        )
    return {
        k for k in LAYER_INDICES
        if normalize_whitespace(layer_text(original, k)) != normalize_whitespace(layer_text(candidate, k))
    }


def convert_mode(s: Scenario, mode: Union[StructureMode, str]) -> Scenario:
    """Re-express a scenario in another structure mode.

    Hard scenarios flatten to text through layer_text; text scenarios move
    freely between unstructured and soft. Text cannot be promoted to hard.
    """
    mode = StructureMode(mode)
    if s.mode is mode:
        return s
    if not mode.is_text:
        raise ModeMismatch(f"scenario {s.id!r} is {s.mode.value} text and cannot be converted to hard")
    layers = tuple(Layer(k, layer_text(s, k)) for k in LAYER_INDICES)
    return replace(s, mode=mode, layers=layers)
